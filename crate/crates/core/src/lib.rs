//! Cost-aware semi-supervised gradient boosted trees.
//!
//! The crate trains binary classifiers as additive ensembles of regression
//! trees under two orthogonal constraints:
//!
//! * **Feature extraction budgets** — every feature has an acquisition cost
//!   and split search is penalized for touching features that have not been
//!   paid for yet, so cheap ensembles can be traded off against accurate ones.
//! * **Unlabeled data** — a k-nearest-neighbor graph over all inputs couples
//!   predictions through a Laplacian penalty, and the labeled-loss gradient is
//!   propagated to unlabeled inputs through the graph instead of fitting each
//!   tree on labeled rows alone.
//!
//! On top of the trainers the crate ships a Fisher-information lower bound on
//! prediction variance (for studying how unlabeled data tightens estimates),
//! evaluation with test-time cost accounting and early exit, synthetic
//! manifold generators, and a model file format with exact round-tripping.

pub mod boosting;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod synth;
pub mod trees;
pub mod variance;

pub use boosting::{train, Ensemble, TrainConfig, TrainOutcome, TrainerKind};
pub use dataset::{load_dataset, Dataset, DatasetSplit};
pub use error::{Error, Result};
pub use eval::{evaluate, EarlyExit, Evaluation, MetricSpec};
pub use graph::{Kernel, LaplacianSystem, PropagationOperator};
pub use trees::{ChargingMode, RegressionTree};
pub use variance::{variance_lower_bound, HessianMode, VarianceReport};
