//! Gradient boosted training with logistic loss, graph smoothing, and
//! feature budgets.
//!
//! All three trainers share one loop: maintain raw scores `H` over every row
//! (labeled first, then unlabeled), fit a cost-penalized regression tree to a
//! negative gradient each iteration, and add it with a constant learning
//! rate. They differ only in which gradient the tree chases:
//!
//! * [`TrainerKind::Gbrt`] — plain boosting; trees fit `y − σ(H)` on labeled
//!   rows only and unlabeled rows are ignored.
//! * [`TrainerKind::LapGbrt`] — trees fit the negative gradient of the full
//!   objective `Σ ℓ(H_i) + (w/2)·HᵀLH` over all rows, so unlabeled rows get
//!   the pure smoothness gradient.
//! * [`TrainerKind::Grbb`] — trees fit the labeled-loss gradient plus its
//!   graph propagation: the labeled block's gradient is pushed through the
//!   cached [`PropagationOperator`] so unlabeled rows receive targets that
//!   are consistent with the smoothness objective, without waiting for the
//!   smoothness gradient to trickle across iterations.
//!
//! Scores start at zero; the ensemble's bias term exists for future use and
//! models trained here always carry bias 0.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Kernel, LaplacianSystem, Metric, PropagationOperator, DEFAULT_RIDGE};
use crate::trees::{fit_tree, ChargingMode, RegressionTree};

/// Which gradient the trees chase; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    Gbrt,
    LapGbrt,
    Grbb,
}

impl TrainerKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrainerKind::Gbrt => "gbrt",
            TrainerKind::LapGbrt => "lapgbrt",
            TrainerKind::Grbb => "grbb",
        }
    }
}

impl std::str::FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbrt" => Ok(TrainerKind::Gbrt),
            "lapgbrt" => Ok(TrainerKind::LapGbrt),
            "grbb" => Ok(TrainerKind::Grbb),
            other => Err(Error::Invalid(format!(
                "unknown trainer '{}' (expected gbrt, lapgbrt, or grbb)",
                other
            ))),
        }
    }
}

/// Everything a training run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Shrinkage applied to every tree.
    pub learning_rate: f64,
    /// Number of boosting iterations.
    pub num_trees: usize,
    /// Maximum tree depth (root at depth 0).
    pub max_depth: usize,
    /// Weight on feature-extraction costs during split search (0 = free).
    pub cost_weight: f64,
    /// Weight on the graph smoothness penalty (0 = ignore the graph).
    pub laplacian_weight: f64,
    /// k for the k-NN graph.
    pub neighbor_count: usize,
    /// Edge weight function for the graph.
    pub kernel: Kernel,
    /// Diagonal ridge for the propagation solve.
    pub ridge: f64,
    /// Whether features purchased by one tree stay free for later trees.
    pub charging: ChargingMode,
    /// Seed recorded with the run. Tree fitting itself is deterministic; the
    /// seed drives data subsampling and synthetic generation upstream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            num_trees: 200,
            max_depth: 4,
            cost_weight: 0.0,
            laplacian_weight: 0.01,
            neighbor_count: 9,
            kernel: Kernel::Binary,
            ridge: DEFAULT_RIDGE,
            charging: ChargingMode::PerEnsemble,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks ranges; every trainer calls this before touching data.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.cost_weight.is_finite() && self.cost_weight >= 0.0) {
            return Err(Error::Invalid(format!(
                "cost weight must be finite and non-negative, got {}",
                self.cost_weight
            )));
        }
        if !(self.laplacian_weight.is_finite() && self.laplacian_weight >= 0.0) {
            return Err(Error::Invalid(format!(
                "laplacian weight must be finite and non-negative, got {}",
                self.laplacian_weight
            )));
        }
        if self.neighbor_count == 0 {
            return Err(Error::Invalid("neighbor count must be at least 1".into()));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::Invalid(format!(
                "ridge must be finite and non-negative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// The numerically stable `log(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic link `σ(z)`.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Sum of per-row logistic losses `log(1 + e^H) − y·H` for labels in {0, 1}.
/// `scores` and `labels` must have equal length.
pub fn logistic_loss(scores: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(
        scores.len(),
        labels.len(),
        "scores and labels must align"
    );
    scores
        .iter()
        .zip(labels)
        .map(|(&h, &y)| softplus(h) - f64::from(y) * h)
        .sum()
}

/// Gradient of `Σ_labeled ℓ(H_i) + (w/2)·HᵀLH` restricted to the labeled
/// block: `(σ(H_i) − y_i) + w·(LH)_i`. `scores` covers all graph rows;
/// `labels` covers the labeled block. Pass `sys = None` (with `w = 0`)
/// when there is no graph.
pub fn labeled_gradient(
    scores: &[f64],
    labels: &[u8],
    sys: Option<&LaplacianSystem>,
    laplacian_weight: f64,
) -> Result<Vec<f64>> {
    if labels.len() > scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let smooth = match sys {
        Some(sys) => {
            if sys.rows() != scores.len() {
                return Err(Error::Dimension(format!(
                    "graph has {} nodes, scores have {}",
                    sys.rows(),
                    scores.len()
                )));
            }
            if sys.labeled_count() != labels.len() {
                return Err(Error::Dimension(format!(
                    "graph has {} labeled nodes, got {} labels",
                    sys.labeled_count(),
                    labels.len()
                )));
            }
            Some(sys.apply(scores)?)
        }
        None => None,
    };
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut g = sigmoid(scores[i]) - f64::from(y);
            if let Some(lh) = &smooth {
                g += laplacian_weight * lh[i];
            }
            g
        })
        .collect())
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number (= trees in the ensemble so far).
    pub iteration: usize,
    /// Sum of logistic losses over labeled rows at this point.
    pub train_loss: f64,
    /// Current smoothness penalty `(w/2)·HᵀLH`; 0 when no graph is in play.
    pub smoothness_penalty: f64,
    /// Distinct features purchased by the ensemble so far.
    pub features_purchased: usize,
    /// Seconds since training started.
    pub wall_secs: f64,
}

/// A trained additive model: `score(x) = bias + lr · Σ_t tree_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    bias: f64,
    trainer: TrainerKind,
    num_features: usize,
    feature_costs: Vec<f64>,
}

impl Ensemble {
    /// Reassembles an ensemble from parts (model deserialization).
    pub fn from_parts(
        trees: Vec<RegressionTree>,
        learning_rate: f64,
        bias: f64,
        trainer: TrainerKind,
        num_features: usize,
        feature_costs: Vec<f64>,
    ) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Invalid(format!(
                "learning rate must be positive, got {}",
                learning_rate
            )));
        }
        if !bias.is_finite() {
            return Err(Error::Invalid("bias must be finite".into()));
        }
        if feature_costs.len() != num_features {
            return Err(Error::Dimension(format!(
                "{} feature costs for {} features",
                feature_costs.len(),
                num_features
            )));
        }
        for tree in &trees {
            if let Some(&f) = tree.used_features().iter().next_back() {
                if f >= num_features {
                    return Err(Error::Invalid(format!(
                        "tree splits on feature {} but the model has {}",
                        f, num_features
                    )));
                }
            }
        }
        Ok(Ensemble {
            trees,
            learning_rate,
            bias,
            trainer,
            num_features,
            feature_costs,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn trainer(&self) -> TrainerKind {
        self.trainer
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Extraction costs remembered from the training data, aligned with
    /// feature indices.
    pub fn feature_costs(&self) -> &[f64] {
        &self.feature_costs
    }

    /// Raw additive score, optionally truncated to the first `tree_limit`
    /// trees. Classify with [`Ensemble::decision`] or apply [`sigmoid`] for a
    /// probability.
    pub fn score(&self, x: &[f64], tree_limit: Option<usize>) -> Result<f64> {
        if x.len() != self.num_features {
            return Err(Error::Dimension(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.num_features
            )));
        }
        let limit = self.resolve_limit(tree_limit)?;
        let sum: f64 = self.trees[..limit].iter().map(|t| t.response(x)).sum();
        Ok(self.bias + self.learning_rate * sum)
    }

    /// Label implied by a raw score: 1 iff `σ(score) ≥ 0.5`, i.e. score ≥ 0.
    pub fn decision(score: f64) -> u8 {
        u8::from(score >= 0.0)
    }

    /// Validates and defaults a tree-count cap.
    pub fn resolve_limit(&self, tree_limit: Option<usize>) -> Result<usize> {
        match tree_limit {
            None => Ok(self.trees.len()),
            Some(t) if t <= self.trees.len() => Ok(t),
            Some(t) => Err(Error::Invalid(format!(
                "tree limit {} exceeds ensemble size {}",
                t,
                self.trees.len()
            ))),
        }
    }
}

/// What a training run hands back: the model, the per-iteration log, and any
/// non-fatal warnings (for example a smoothness weight that had to be
/// ignored because no unlabeled rows exist).
#[derive(Debug)]
pub struct TrainOutcome {
    pub ensemble: Ensemble,
    pub log: Vec<IterationRecord>,
    pub warnings: Vec<String>,
}

/// Trains `kind` on `ds` under `cfg`. See the module docs for what each
/// trainer fits. Fails fast on invalid configs, graphs that cannot be built,
/// or non-finite gradients mid-run (reported with the iteration index).
pub fn train(ds: &Dataset, cfg: &TrainConfig, kind: TrainerKind) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = ds.labeled_count();
    let m = ds.unlabeled_count();
    if n == 0 {
        return Err(Error::Invalid("training requires at least one labeled row".into()));
    }

    let mut warnings = Vec::new();
    // With nothing to smooth over, the graph trainers collapse to plain
    // boosting. Record it instead of silently building a pointless graph.
    let effective = if kind != TrainerKind::Gbrt && m == 0 {
        if cfg.laplacian_weight > 0.0 {
            warnings.push(format!(
                "laplacian weight {} has no effect: dataset has no unlabeled rows; \
                 training proceeds as plain gbrt",
                cfg.laplacian_weight
            ));
        }
        TrainerKind::Gbrt
    } else if kind == TrainerKind::LapGbrt && cfg.laplacian_weight == 0.0 {
        // The smoothness gradient vanishes identically.
        TrainerKind::Gbrt
    } else {
        kind
    };

    let sys = match effective {
        TrainerKind::Gbrt => None,
        TrainerKind::LapGbrt | TrainerKind::Grbb => Some(LaplacianSystem::build(
            ds,
            cfg.neighbor_count,
            cfg.kernel,
            Metric::Euclidean,
        )?),
    };
    let operator = match (effective, &sys) {
        (TrainerKind::Grbb, Some(sys)) => Some(sys.propagation_operator(cfg.ridge)?),
        _ => None,
    };

    let started = Instant::now();
    let rows = ds.rows();
    let d = ds.num_features();
    let labels = ds.labels();
    let costs = ds.feature_costs();
    let mut scores = vec![0.0; rows];
    let mut purchased: BTreeSet<usize> = BTreeSet::new();
    let mut trees = Vec::with_capacity(cfg.num_trees);
    let mut log = Vec::with_capacity(cfg.num_trees);
    let empty = BTreeSet::new();

    for iteration in 0..cfg.num_trees {
        let targets = gradient_targets(effective, &scores, labels, sys.as_ref(), operator.as_ref(), cfg)?;
        if let Some(bad) = targets.iter().find(|t| !t.is_finite()) {
            return Err(Error::Training {
                iteration,
                message: format!("non-finite tree target {}", bad),
            });
        }

        let charged = match cfg.charging {
            ChargingMode::PerEnsemble => &purchased,
            ChargingMode::PerTree => &empty,
        };
        // Plain boosting only ever sees the labeled block, which is the
        // contiguous prefix of the row-major feature matrix.
        let fit_features = match effective {
            TrainerKind::Gbrt => &ds.features()[..n * d],
            _ => ds.features(),
        };
        let tree = fit_tree(
            fit_features,
            d,
            &targets,
            costs,
            cfg.cost_weight,
            cfg.max_depth,
            charged,
        )?;

        for (i, score) in scores.iter_mut().enumerate() {
            *score += cfg.learning_rate * tree.response(ds.row(i));
        }
        purchased.extend(tree.used_features().iter().copied());

        let train_loss = logistic_loss(&scores[..n], labels);
        let smoothness_penalty = match &sys {
            Some(sys) if cfg.laplacian_weight > 0.0 => {
                0.5 * cfg.laplacian_weight * sys.quadratic_form(&scores)?
            }
            _ => 0.0,
        };
        log.push(IterationRecord {
            iteration: iteration + 1,
            train_loss,
            smoothness_penalty,
            features_purchased: purchased.len(),
            wall_secs: started.elapsed().as_secs_f64(),
        });
        trees.push(tree);
    }

    Ok(TrainOutcome {
        ensemble: Ensemble {
            trees,
            learning_rate: cfg.learning_rate,
            bias: 0.0,
            trainer: kind,
            num_features: d,
            feature_costs: costs.to_vec(),
        },
        log,
        warnings,
    })
}

/// Builds the per-row regression targets (negative gradients) for one
/// iteration of `kind`.
fn gradient_targets(
    kind: TrainerKind,
    scores: &[f64],
    labels: &[u8],
    sys: Option<&LaplacianSystem>,
    operator: Option<&PropagationOperator>,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let n = labels.len();
    match kind {
        TrainerKind::Gbrt => Ok(labels
            .iter()
            .enumerate()
            .map(|(i, &y)| f64::from(y) - sigmoid(scores[i]))
            .collect()),
        TrainerKind::LapGbrt => {
            let sys = sys.expect("lapgbrt always builds a graph");
            let smooth = sys.apply(scores)?;
            Ok((0..scores.len())
                .map(|i| {
                    let mut g = cfg.laplacian_weight * smooth[i];
                    if i < n {
                        g += sigmoid(scores[i]) - f64::from(labels[i]);
                    }
                    -g
                })
                .collect())
        }
        TrainerKind::Grbb => {
            let sys = sys.expect("grbb always builds a graph");
            let operator = operator.expect("grbb always builds the propagation operator");
            let grad_l = labeled_gradient(scores, labels, Some(sys), cfg.laplacian_weight)?;
            let grad_u = operator.propagate(&grad_l)?;
            let mut targets = Vec::with_capacity(scores.len());
            targets.extend(grad_l.iter().map(|g| -g));
            targets.extend(grad_u.iter().map(|g| -g));
            Ok(targets)
        }
    }
}
