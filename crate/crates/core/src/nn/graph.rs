use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::layers::{self, BnCache, LayerKind, LayerSpec, Mode};
use super::{Scalar, Tensor, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::optics::derive_seed;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    ConvWeight,
    ConvBias,
    BnScale,
    BnShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

impl ParamInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NodeOp {
    Input,
    Layer(LayerSpec),
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    name: String,
    op: NodeOp,
    inputs: Vec<NodeId>,
    channels: usize,
    /// Indices into the parameter list: conv `[weight, bias]`, BN `[scale, shift]`.
    params: Vec<usize>,
    /// Index into the running-statistics list (batch norm only).
    stats: Option<usize>,
}

/// Static layer graph. Nodes are stored in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
    params: Vec<ParamInfo>,
    stats: Vec<(String, usize)>,
}

impl Graph {
    pub fn params(&self) -> &[ParamInfo] {
        &self.params
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(ParamInfo::len).sum()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_channels(&self, i: usize) -> usize {
        self.nodes[self.inputs[i]].channels
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node_channels(&self, id: NodeId) -> usize {
        self.nodes[id].channels
    }

    /// Shape of every node for the given input shapes, without running
    /// any arithmetic.
    pub fn infer_shapes(&self, input_shapes: &[[usize; 4]]) -> Result<Vec<[usize; 4]>> {
        if input_shapes.len() != self.inputs.len() {
            return Err(Error::contract("input", "wrong number of input shapes"));
        }
        let mut shapes: Vec<[usize; 4]> = Vec::with_capacity(self.nodes.len());
        let mut next_input = 0;
        for node in &self.nodes {
            let spec = match node.op {
                NodeOp::Input => {
                    let s = input_shapes[next_input];
                    next_input += 1;
                    if s[3] != node.channels {
                        return Err(Error::contract(&node.name, format!("expected {} channels, got {s:?}", node.channels)));
                    }
                    shapes.push(s);
                    continue;
                }
                NodeOp::Layer(spec) => spec,
            };
            let [n, h, w, c] = shapes[node.inputs[0]];
            let even = |name: &str| {
                if h % 2 != 0 || w % 2 != 0 {
                    Err(Error::contract(name, format!("odd spatial size {h}x{w}")))
                } else {
                    Ok(())
                }
            };
            if spec.kind != LayerKind::ConcatChannels && c != spec.in_channels {
                return Err(Error::contract(&node.name, format!("expected {} channels, got {c}", spec.in_channels)));
            }
            let out = match spec.kind {
                LayerKind::Conv3x3S1 => [n, h, w, spec.out_channels],
                LayerKind::Conv3x3S2 => {
                    even(&node.name)?;
                    [n, h / 2, w / 2, spec.out_channels]
                }
                LayerKind::MaxPool2x => {
                    even(&node.name)?;
                    [n, h / 2, w / 2, c]
                }
                LayerKind::Upsample2xNearest => [n, 2 * h, 2 * w, c],
                LayerKind::ConcatChannels => {
                    let other = shapes[node.inputs[1]];
                    if other[..3] != [n, h, w] {
                        return Err(Error::contract(&node.name, format!("spatial mismatch {:?} vs {other:?}", [n, h, w, c])));
                    }
                    [n, h, w, c + other[3]]
                }
                _ => [n, h, w, c],
            };
            shapes.push(out);
        }
        Ok(shapes)
    }

    pub fn output_shapes(&self, input_shapes: &[[usize; 4]]) -> Result<Vec<[usize; 4]>> {
        let shapes = self.infer_shapes(input_shapes)?;
        Ok(self.outputs.iter().map(|&o| shapes[o]).collect())
    }

    /// Layer kinds present in the graph, in node order.
    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                NodeOp::Layer(s) => Some(s.kind),
                NodeOp::Input => None,
            })
            .collect()
    }
}

/// Incremental builder; every method returns the id of the new node.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
    params: Vec<ParamInfo>,
    stats: Vec<(String, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: String, op: NodeOp, inputs: Vec<NodeId>, channels: usize) -> NodeId {
        self.nodes.push(Node {
            name,
            op,
            inputs,
            channels,
            params: Vec::new(),
            stats: None,
        });
        self.nodes.len() - 1
    }

    fn add_param(&mut self, name: String, shape: Vec<usize>, kind: ParamKind) -> usize {
        self.params.push(ParamInfo { name, shape, kind });
        self.params.len() - 1
    }

    pub fn channels(&self, id: NodeId) -> usize {
        self.nodes[id].channels
    }

    pub fn input(&mut self, name: &str, channels: usize) -> NodeId {
        let id = self.push(name.to_string(), NodeOp::Input, Vec::new(), channels);
        self.inputs.push(id);
        id
    }

    pub fn conv(&mut self, name: &str, x: NodeId, out_channels: usize, stride: usize) -> NodeId {
        let cin = self.channels(x);
        let spec = LayerSpec::conv(stride, cin, out_channels);
        let id = self.push(name.to_string(), NodeOp::Layer(spec), vec![x], out_channels);
        let w = self.add_param(format!("{name}.weight"), vec![3, 3, cin, out_channels], ParamKind::ConvWeight);
        let b = self.add_param(format!("{name}.bias"), vec![out_channels], ParamKind::ConvBias);
        self.nodes[id].params = vec![w, b];
        id
    }

    pub fn batch_norm(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.channels(x);
        let spec = LayerSpec::pointwise(LayerKind::BatchNorm, c);
        let id = self.push(name.to_string(), NodeOp::Layer(spec), vec![x], c);
        let g = self.add_param(format!("{name}.scale"), vec![c], ParamKind::BnScale);
        let b = self.add_param(format!("{name}.shift"), vec![c], ParamKind::BnShift);
        self.stats.push((name.to_string(), c));
        self.nodes[id].params = vec![g, b];
        self.nodes[id].stats = Some(self.stats.len() - 1);
        id
    }

    fn pointwise(&mut self, name: &str, x: NodeId, kind: LayerKind) -> NodeId {
        let c = self.channels(x);
        self.push(name.to_string(), NodeOp::Layer(LayerSpec::pointwise(kind, c)), vec![x], c)
    }

    pub fn leaky_relu(&mut self, name: &str, x: NodeId) -> NodeId {
        self.pointwise(name, x, LayerKind::LeakyRelu { alpha: LEAKY_SLOPE })
    }

    pub fn sigmoid(&mut self, name: &str, x: NodeId) -> NodeId {
        self.pointwise(name, x, LayerKind::Sigmoid)
    }

    pub fn upsample(&mut self, name: &str, x: NodeId) -> NodeId {
        self.pointwise(name, x, LayerKind::Upsample2xNearest)
    }

    pub fn max_pool(&mut self, name: &str, x: NodeId) -> NodeId {
        self.pointwise(name, x, LayerKind::MaxPool2x)
    }

    pub fn concat(&mut self, name: &str, a: NodeId, b: NodeId) -> NodeId {
        let (ca, cb) = (self.channels(a), self.channels(b));
        let spec = LayerSpec {
            kind: LayerKind::ConcatChannels,
            in_channels: ca + cb,
            out_channels: ca + cb,
        };
        self.push(name.to_string(), NodeOp::Layer(spec), vec![a, b], ca + cb)
    }

    pub fn output(&mut self, x: NodeId) {
        self.outputs.push(x);
    }

    pub fn build(self) -> Graph {
        Graph {
            nodes: self.nodes,
            inputs: self.inputs,
            outputs: self.outputs,
            params: self.params,
            stats: self.stats,
        }
    }
}

#[derive(Debug, Clone)]
enum Aux<T> {
    None,
    Bn(BnCache<T>),
    Pool(Vec<u32>),
}

#[derive(Debug, Clone)]
struct Tape<T> {
    mode: Mode,
    acts: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
}

/// Gradients of a scalar objective.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    /// One buffer per graph parameter, in graph order.
    pub params: Vec<Vec<T>>,
    /// One tensor per graph input.
    pub inputs: Vec<Tensor<T>>,
}

/// A graph together with its parameters, batch-norm buffers and the tape
/// of the most recent recorded forward pass.
#[derive(Debug, Clone)]
pub struct Network<T> {
    graph: Graph,
    params: Vec<Vec<T>>,
    running_mean: Vec<Vec<T>>,
    running_var: Vec<Vec<T>>,
    tape: Option<Tape<T>>,
}

impl<T: Scalar> Network<T> {
    /// Creates a network with He-uniform conv kernels (bound
    /// `sqrt(6 / fan_in)`), zero biases, unit BN scale and zero BN shift.
    pub fn new(graph: Graph, seed: u64) -> Self {
        let params = graph
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| match p.kind {
                ParamKind::ConvWeight => {
                    let fan_in = (p.shape[0] * p.shape[1] * p.shape[2]) as f64;
                    let bound = (6.0 / fan_in).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                    (0..p.len()).map(|_| T::of(dist.sample(&mut rng))).collect()
                }
                ParamKind::ConvBias | ParamKind::BnShift => vec![T::zero(); p.len()],
                ParamKind::BnScale => vec![T::one(); p.len()],
            })
            .collect();
        let running_mean = graph.stats.iter().map(|(_, c)| vec![T::zero(); *c]).collect();
        let running_var = graph.stats.iter().map(|(_, c)| vec![T::one(); *c]).collect();
        Self {
            graph,
            params,
            running_mean,
            running_var,
            tape: None,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &[Vec<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&[T]> {
        self.graph.param_index(name).map(|i| self.params[i].as_slice())
    }

    /// Batch-norm buffers as `(name, running_mean, running_var)`.
    pub fn running_stats(&self) -> impl Iterator<Item = (&str, &[T], &[T])> {
        self.graph
            .stats
            .iter()
            .zip(self.running_mean.iter().zip(&self.running_var))
            .map(|((n, _), (m, v))| (n.as_str(), m.as_slice(), v.as_slice()))
    }

    pub fn set_running_stats(&mut self, name: &str, mean: Vec<T>, var: Vec<T>) -> Result<()> {
        let i = self
            .graph
            .stats
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::invalid(format!("no batch norm named {name}")))?;
        if mean.len() != self.running_mean[i].len() || var.len() != self.running_var[i].len() {
            return Err(Error::invalid(format!("running stats for {name} have the wrong length")));
        }
        self.running_mean[i] = mean;
        self.running_var[i] = var;
        Ok(())
    }

    /// Activation of node `name` from the last recorded forward pass.
    pub fn activation(&self, name: &str) -> Option<&Tensor<T>> {
        let id = self.graph.node_id(name)?;
        self.tape.as_ref().map(|t| &t.acts[id])
    }

    pub fn has_tape(&self) -> bool {
        self.tape.is_some()
    }

    pub fn clear_tape(&mut self) {
        self.tape = None;
    }

    /// Forward pass that records a tape for [`Network::backward`]. Train mode
    /// also advances the batch-norm running statistics.
    pub fn forward(&mut self, inputs: &[&Tensor<T>], mode: Mode) -> Result<Vec<Tensor<T>>> {
        self.forward_with(inputs, mode, mode == Mode::Train)
    }

    /// Like [`Network::forward`]; with `update_stats == false` a train-mode
    /// pass still normalizes by batch statistics but leaves the running
    /// buffers untouched (used when the network is frozen).
    pub fn forward_with(&mut self, inputs: &[&Tensor<T>], mode: Mode, update_stats: bool) -> Result<Vec<Tensor<T>>> {
        let stats = match (mode, update_stats) {
            (Mode::Train, true) => Stats::Update(&mut self.running_mean, &mut self.running_var),
            (Mode::Train, false) => Stats::Batch,
            (Mode::Eval, _) => Stats::Read(&self.running_mean, &self.running_var),
        };
        let (acts, aux) = execute(&self.graph, &self.params, stats, inputs, true)?;
        let outs = self.graph.outputs.iter().map(|&o| acts[o].clone().expect("kept")).collect();
        let acts = acts.into_iter().map(|a| a.expect("kept")).collect();
        self.tape = Some(Tape { mode, acts, aux });
        Ok(outs)
    }

    /// Eval-mode forward pass without side effects; intermediate activations
    /// are dropped as soon as their last consumer has run.
    pub fn infer(&self, inputs: &[&Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let stats = Stats::Read(&self.running_mean, &self.running_var);
        let (mut acts, _) = execute(&self.graph, &self.params, stats, inputs, false)?;
        Ok(self.graph.outputs.iter().map(|&o| acts[o].take().expect("outputs kept")).collect())
    }

    /// Back-propagates `output_grads` (one per graph output; `None` means
    /// zero) through the recorded tape.
    pub fn backward(&self, output_grads: &[Option<&Tensor<T>>]) -> Result<Gradients<T>> {
        let tape = self
            .tape
            .as_ref()
            .ok_or_else(|| Error::State("backward called before a recorded forward pass".into()))?;
        if output_grads.len() != self.graph.outputs.len() {
            return Err(Error::invalid(format!(
                "expected {} output gradients, got {}",
                self.graph.outputs.len(),
                output_grads.len()
            )));
        }
        let nodes = &self.graph.nodes;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        for (&o, g) in self.graph.outputs.iter().zip(output_grads) {
            if let Some(g) = g {
                if g.shape() != tape.acts[o].shape() {
                    return Err(Error::contract(
                        &nodes[o].name,
                        format!("gradient shape {:?} vs output {:?}", g.shape(), tape.acts[o].shape()),
                    ));
                }
                accumulate(&mut grads[o], (*g).clone());
            }
        }
        let mut pgrads: Vec<Vec<T>> = self.graph.params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        let train = tape.mode == Mode::Train;
        for id in (0..nodes.len()).rev() {
            let node = &nodes[id];
            let spec = match node.op {
                NodeOp::Input => continue,
                NodeOp::Layer(spec) => spec,
            };
            let dy = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let x = &tape.acts[node.inputs[0]];
            match spec.kind {
                LayerKind::Conv3x3S1 | LayerKind::Conv3x3S2 => {
                    let w = &self.params[node.params[0]];
                    let (dx, dw, db) = layers::conv3x3_backward(x, w, &dy, layers::stride_of(spec.kind));
                    add_into(&mut pgrads[node.params[0]], &dw);
                    add_into(&mut pgrads[node.params[1]], &db);
                    accumulate(&mut grads[node.inputs[0]], dx);
                }
                LayerKind::Upsample2xNearest => accumulate(&mut grads[node.inputs[0]], layers::upsample_backward(&dy)),
                LayerKind::LeakyRelu { alpha } => {
                    accumulate(&mut grads[node.inputs[0]], layers::leaky_relu_backward(x, &dy, T::of(alpha)))
                }
                LayerKind::Sigmoid => accumulate(&mut grads[node.inputs[0]], layers::sigmoid_backward(&tape.acts[id], &dy)),
                LayerKind::MaxPool2x => {
                    let Aux::Pool(arg) = &tape.aux[id] else {
                        return Err(Error::State(format!("{}: missing pooling indices", node.name)));
                    };
                    accumulate(&mut grads[node.inputs[0]], layers::maxpool_backward(x.shape(), arg, &dy));
                }
                LayerKind::ConcatChannels => {
                    let (da, db) = dy.split_channels(x.channels());
                    accumulate(&mut grads[node.inputs[0]], da);
                    accumulate(&mut grads[node.inputs[1]], db);
                }
                LayerKind::BatchNorm => {
                    let Aux::Bn(cache) = &tape.aux[id] else {
                        return Err(Error::State(format!("{}: missing batch-norm cache", node.name)));
                    };
                    let gamma = &self.params[node.params[0]];
                    let (dx, dg, db) = layers::batchnorm_backward(cache, gamma, &dy, train);
                    add_into(&mut pgrads[node.params[0]], &dg);
                    add_into(&mut pgrads[node.params[1]], &db);
                    accumulate(&mut grads[node.inputs[0]], dx);
                }
            }
        }
        let inputs = self
            .graph
            .inputs
            .iter()
            .map(|&i| grads[i].take().unwrap_or_else(|| Tensor::zeros(tape.acts[i].shape())))
            .collect();
        Ok(Gradients { params: pgrads, inputs })
    }
}

enum Stats<'a, T> {
    Update(&'a mut [Vec<T>], &'a mut [Vec<T>]),
    Read(&'a [Vec<T>], &'a [Vec<T>]),
    Batch,
}

fn check_inputs<T: Scalar>(graph: &Graph, inputs: &[&Tensor<T>]) -> Result<()> {
    if inputs.len() != graph.inputs.len() {
        return Err(Error::contract(
            "input",
            format!("expected {} inputs, got {}", graph.inputs.len(), inputs.len()),
        ));
    }
    for (&id, x) in graph.inputs.iter().zip(inputs) {
        let node = &graph.nodes[id];
        if x.channels() != node.channels {
            return Err(Error::contract(
                &node.name,
                format!("expected {} channels, got shape {:?}", node.channels, x.shape()),
            ));
        }
    }
    Ok(())
}

/// Runs every node in order. With `record` all activations and backward
/// caches are kept; otherwise only the graph outputs survive.
fn execute<T: Scalar>(
    graph: &Graph,
    params: &[Vec<T>],
    mut stats: Stats<'_, T>,
    inputs: &[&Tensor<T>],
    record: bool,
) -> Result<(Vec<Option<Tensor<T>>>, Vec<Aux<T>>)> {
    check_inputs(graph, inputs)?;
    let mut last_use = vec![0usize; graph.nodes.len()];
    for (id, node) in graph.nodes.iter().enumerate() {
        for &i in &node.inputs {
            last_use[i] = id;
        }
    }
    for &o in &graph.outputs {
        last_use[o] = usize::MAX;
    }
    let mut acts: Vec<Option<Tensor<T>>> = vec![None; graph.nodes.len()];
    let mut aux = Vec::with_capacity(if record { graph.nodes.len() } else { 0 });
    let mut next_input = 0;
    for (id, node) in graph.nodes.iter().enumerate() {
        let spec = match node.op {
            NodeOp::Input => {
                acts[id] = Some(inputs[next_input].clone());
                next_input += 1;
                if record {
                    aux.push(Aux::None);
                }
                continue;
            }
            NodeOp::Layer(spec) => spec,
        };
        let x = acts[node.inputs[0]].as_ref().expect("topological order");
        if spec.kind != LayerKind::ConcatChannels {
            layers::check_channels(&node.name, &spec, x)?;
        }
        let (y, a) = match spec.kind {
            LayerKind::Conv3x3S1 | LayerKind::Conv3x3S2 => {
                let stride = layers::stride_of(spec.kind);
                if stride == 2 {
                    layers::check_even(&node.name, x)?;
                }
                let (w, b) = (&params[node.params[0]], &params[node.params[1]]);
                (layers::conv3x3_forward(x, w, b, spec.out_channels, stride), Aux::None)
            }
            LayerKind::Upsample2xNearest => (layers::upsample_forward(x), Aux::None),
            LayerKind::LeakyRelu { alpha } => (layers::leaky_relu_forward(x, T::of(alpha)), Aux::None),
            LayerKind::Sigmoid => (layers::sigmoid_forward(x), Aux::None),
            LayerKind::MaxPool2x => {
                layers::check_even(&node.name, x)?;
                let (y, arg) = layers::maxpool_forward(x);
                (y, Aux::Pool(arg))
            }
            LayerKind::ConcatChannels => {
                let b = acts[node.inputs[1]].as_ref().expect("topological order");
                let y = Tensor::concat_channels(x, b).map_err(|e| Error::contract(&node.name, e.to_string()))?;
                (y, Aux::None)
            }
            LayerKind::BatchNorm => {
                let s = node.stats.expect("batch norm has stats");
                let (g, b) = (&params[node.params[0]], &params[node.params[1]]);
                let (y, cache) = match &mut stats {
                    Stats::Update(rm, rv) => layers::batchnorm_train(x, g, b, &mut rm[s], &mut rv[s]),
                    Stats::Read(rm, rv) => layers::batchnorm_eval(x, g, b, &rm[s], &rv[s]),
                    Stats::Batch => {
                        let c = x.channels();
                        layers::batchnorm_train(x, g, b, &mut vec![T::zero(); c], &mut vec![T::one(); c])
                    }
                };
                (y, Aux::Bn(cache))
            }
        };
        if record {
            aux.push(a);
        } else {
            for &i in &node.inputs {
                if last_use[i] == id {
                    acts[i] = None;
                }
            }
        }
        acts[id] = Some(y);
    }
    Ok((acts, aux))
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn add_into<T: Scalar>(acc: &mut [T], g: &[T]) {
    for (a, &v) in acc.iter_mut().zip(g) {
        *a = *a + v;
    }
}
