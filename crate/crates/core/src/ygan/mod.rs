//! Y-shaped generator, patch discriminator, their objectives, and the
//! alternating training loop.

pub mod arch;
pub mod loss;
mod model;
pub mod objective;
mod train;

pub use arch::{build_discriminator, build_generator, build_ynet1, DiscriminatorConfig, GeneratorConfig};
pub use loss::{loss_bce, loss_l1, loss_mse, recon_loss, LossWeights, ReconKind};
pub use model::{Model, ModelConfig, ModelKind};
pub use objective::{discriminator_objective, generator_grads, generator_objective, hybrid_objective, HybridParts};
pub use train::{
    history_csv, train, HistoryRow, Observer, TrainConfig, TrainOutcome, BEST_DIR, FINAL_DIR, HISTORY_FILE,
    HISTORY_HEADER, LAST_GOOD_DIR,
};
