//! Desk-scale harness: synthetic data, a small residual network, the
//! training loop, evaluation sweeps and seed sweeps.

pub mod dataset;
pub mod desk;
pub mod inspect;
pub mod model;
pub mod probe;
pub mod sweep;
pub mod train;

pub use dataset::{split_path, Dataset, Split, SplitKind, SyntheticDatasetSpec};
pub use desk::{desk_dataset_spec, desk_recipe, resolve_recipe, DESK_NAMES};
pub use inspect::{augment_stats, stats_tsv, StageStats};
pub use model::{decode_weights, encode_weights, ToyNet, ToyNetConfig, TrainNoise};
pub use probe::{linear_probe, ProbeConfig, ProbeResult};
pub use sweep::{seed_sweep, Aggregate, SeedRun, SeedSweepReport};
pub use train::{
    eval_sweep, eval_sweep_tsv, evaluate, predict, top1, train, EpochRecord, EvalPoint, TrainOptions, TrainOutcome, TrainReport,
};
