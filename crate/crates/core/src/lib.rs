//! Merge-saving prediction for batched video transcoding tasks.
//!
//! Similar tasks on the same video segment can run as one merged task and
//! share fetch, decode and function-load work. This crate groups tasks by
//! similarity ([`workload`]), synthesizes execution times ([`oracle`]),
//! encodes groups as features ([`features`]), learns the saving with
//! gradient-boosted trees ([`gbdt`]) or a lookup baseline ([`baseline`]),
//! scores predictions ([`eval`]) and simulates merge-aware queues ([`sim`]).

pub mod baseline;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod model_io;
pub mod oracle;
pub mod sim;
pub mod workload;

pub use baseline::{fit_naive, NaiveModel};
pub use error::{Error, Result};
pub use eval::{accuracy, rmse, sweep, Axis, EvalReport, SweepRow, SweepSpec};
pub use features::{encode, split, CompositionKey, Dataset, FeatureVector, Sample};
pub use gbdt::{train, Hyperparams, SavingModel};
pub use model_io::AnyModel;
pub use oracle::{generate_dataset, OracleConfig};
pub use sim::{makespan_table, run_sim, MergePolicy, SimReport};
pub use workload::{
    count_merge_cases, Codec, OpKind, Operation, SignatureTables, SimilarityLevel, TranscodeTask,
    VideoMeta,
};

/// Anything that maps a group's features to a predicted saving fraction.
pub trait Predictor {
    fn predict(&self, x: &FeatureVector) -> f64;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: &FeatureVector) -> f64 {
        (**self).predict(x)
    }
}
