//! Training, evaluation and isomorphism-test drivers.

pub mod isotest;
pub mod metrics;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use isotest::{parse_checkers, run_isotest, Checker, IsoReport};
pub use metrics::{average_precision, roc_auc, IsoConfusion, Rate};
pub use train::{evaluate, periodic_table_oracle, prepare, train, ApAuc, DataSource, EvalReport, MetricsReport, OptimConfig, RunConfig, SplitConfig};

/// The crate's single RNG constructor; every random choice flows from a seed through here.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
