mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use ygan::cli::{decode_pgm, encode_pgm};
use ygan::dataset::{encode_idx_images, parse_idx_images, DatasetManifest, Group, Split};
use ygan::metrics::{pixel_accuracy, ssim, SsimParams};
use ygan::nn::{Network, Tensor};
use ygan::optics::{make_phase_screen, propagate_asm, ComplexField};
use ygan::ygan::{build_generator, GeneratorConfig};

const PITCH: f64 = 8e-6;
const LAMBDA: f64 = 532.8e-9;

fn image(n: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(0.0f32..=1.0, n)
}

fn field(side: usize) -> impl Strategy<Value = ComplexField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), side * side).prop_map(move |v| {
        let grid = v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        ComplexField::new(side, PITCH, LAMBDA, grid).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ssim_symmetric_and_bounded(a in image(64), b in image(64)) {
        let p = SsimParams::default();
        let ab = ssim(&a, &b, &p).unwrap();
        let ba = ssim(&b, &a, &p).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_falls_along_a_noise_ladder(a in image(256), raw in prop::collection::vec(-1.0f64..1.0, 256)) {
        // Noise with zero mean and zero covariance with the image, so only
        // the variance term moves as the amplitude grows.
        let n = a.len() as f64;
        let am: f64 = a.iter().map(|&v| v as f64).sum::<f64>() / n;
        let da: Vec<f64> = a.iter().map(|&v| v as f64 - am).collect();
        let rm = raw.iter().sum::<f64>() / n;
        let mut noise: Vec<f64> = raw.iter().map(|v| v - rm).collect();
        let va: f64 = da.iter().map(|d| d * d).sum();
        prop_assume!(va > 1e-3);
        let proj = noise.iter().zip(&da).map(|(x, y)| x * y).sum::<f64>() / va;
        for (x, d) in noise.iter_mut().zip(&da) {
            *x -= proj * d;
        }
        let p = SsimParams::default();
        let mut last = f64::INFINITY;
        for k in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let b: Vec<f32> = a.iter().zip(&noise).map(|(&v, &e)| (v as f64 + k * e) as f32).collect();
            let s = ssim(&a, &b, &p).unwrap();
            prop_assert!(s <= last + 1e-6, "k={k}: {s} > {last}");
            last = s;
        }
    }

    #[test]
    fn accuracy_complements(p in image(64), bits in prop::collection::vec(any::<bool>(), 64)) {
        let t: Vec<f32> = bits.iter().map(|&b| b as u8 as f32).collect();
        let inv: Vec<f32> = t.iter().map(|v| 1.0 - v).collect();
        let s = pixel_accuracy(&p, &t, 0.5).unwrap() + pixel_accuracy(&p, &inv, 0.5).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_indices(n in 2usize..400, seed in any::<u64>()) {
        let n_train = n * 9 / 10;
        let s = Split::shuffled(n, n_train, seed);
        prop_assert_eq!(s.train.len(), n_train);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(Split::shuffled(n, n_train, seed), s);
    }

    #[test]
    fn propagation_conserves_power_and_composes(f in field(16), d1 in 0.0f64..0.3, d2 in 0.0f64..0.3) {
        // At this pitch every spatial frequency propagates, so the transfer
        // function is unitary.
        let a = propagate_asm(&f, d1).unwrap();
        prop_assert!((a.power() - f.power()).abs() <= 1e-9 * f.power());
        let ab = propagate_asm(&a, d2).unwrap();
        let direct = propagate_asm(&f, d1 + d2).unwrap();
        let err = ab.grid().iter().zip(direct.grid()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        // The kernel phase reaches ~1e7 rad, so rounding alone is ~1e-9.
        prop_assert!(err < 1e-7, "composition error {err}");
    }

    #[test]
    fn phase_screen_is_linear_in_strength(seed in any::<u64>(), corr in 1usize..5, s in 0.1f64..7.0) {
        let a = make_phase_screen(16, corr, s, seed).unwrap();
        let b = make_phase_screen(16, corr, 2.0 * s, seed).unwrap();
        for (x, y) in a.phase().iter().zip(b.phase()) {
            prop_assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn pgm_roundtrip_within_half_step(pixels in image(12)) {
        let (w, h, back) = decode_pgm(&encode_pgm(4, 3, &pixels)).unwrap();
        prop_assert_eq!((w, h), (4, 3));
        for (a, b) in pixels.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn idx_roundtrip(images in prop::collection::vec(prop::collection::vec(any::<u8>(), 16), 1..6)) {
        let parsed = parse_idx_images(&encode_idx_images(4, &images)).unwrap();
        prop_assert_eq!((parsed.rows, parsed.cols), (4, 4));
        prop_assert_eq!(parsed.pixels.len(), images.len());
        for (img, px) in images.iter().zip(&parsed.pixels) {
            for (&b, &p) in img.iter().zip(px) {
                prop_assert!((b as f32 / 255.0 - p).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn manifest_json_roundtrip(seed in any::<u64>(), n in 20usize..5000, g in 0usize..4) {
        let group = [Group::A, Group::B1, Group::B2, Group::C][g];
        let m = DatasetManifest::desk(group, n, seed);
        let back: DatasetManifest = ygan::json::parse_json(&m.to_json()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.hash(), m.hash());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The two heads are structurally identical, so exchanging their
    /// parameters exchanges the outputs.
    #[test]
    fn head_swap_swaps_outputs(seed in any::<u64>(), xseed in any::<u64>()) {
        let mut cfg = GeneratorConfig::new(16);
        cfg.base_channels = 2;
        cfg.max_channels = 4;
        let net: Network<f64> = Network::new(build_generator(&cfg).unwrap(), seed);
        let mut swapped = net.clone();
        let infos = net.graph().params().to_vec();
        for (i, info) in infos.iter().enumerate() {
            if let Some(rest) = info.name.strip_prefix("head1.") {
                let j = net.graph().param_index(&format!("head2.{rest}")).unwrap();
                swapped.params_mut()[i] = net.params()[j].clone();
                swapped.params_mut()[j] = net.params()[i].clone();
            }
        }
        let x: Tensor<f64> = common::random_tensor([2, 16, 16, 1], xseed, 0.0, 1.0);
        let a = net.infer(&[&x]).unwrap();
        let b = swapped.infer(&[&x]).unwrap();
        prop_assert_eq!(a[0].data(), b[1].data());
        prop_assert_eq!(a[1].data(), b[0].data());
    }
}
