//! Fisher-information lower bound on prediction variance.
//!
//! For a fitted score vector `Ĥ` over all rows (labeled first), the Fisher
//! information of the penalized logistic objective is `I = Δ + w·L`, where
//! `L` is the graph Laplacian, `w` the smoothness weight, and `Δ` a diagonal
//! curvature matrix that is nonzero **only on labeled rows** — unlabeled rows
//! carry no label information of their own and are pinned down purely through
//! the graph. The Cramér–Rao-style bound on the variance of each score is the
//! corresponding diagonal entry of `I⁻¹`, and the headline number aggregates
//! those through the logistic link:
//!
//! `avg_link_variance = mean_i (σ'(Ĥ_i))² · (I⁻¹)_ii`
//!
//! with the true logistic derivative `σ' = σ(1−σ)` regardless of which
//! curvature variant built `Δ`. More labels add diagonal mass, a stronger
//! graph adds coupling; both shrink the bound.

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::boosting::{sigmoid, train, TrainConfig, TrainerKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{LaplacianSystem, Metric};

/// Eigenvalues below this are treated as numerically singular.
const SINGULAR_EIGENVALUE: f64 = 1e-12;
/// Diagonal ridge added when the Fisher matrix is numerically singular.
const FISHER_RIDGE: f64 = 1e-10;

/// Which curvature formula fills the labeled diagonal of the Fisher matrix.
/// Both appear in published treatments of this bound; they agree at `Ĥ = 0`
/// up to a factor of `σ(0) = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// `Δ_jj = σ(Ĥ_j)² · (1 − σ(Ĥ_j))` — the form the bound was originally
    /// stated with.
    Paper,
    /// `Δ_jj = σ(Ĥ_j) · (1 − σ(Ĥ_j))` — the textbook logistic-loss curvature.
    Logistic,
}

impl HessianMode {
    fn curvature(self, score: f64) -> f64 {
        let s = sigmoid(score);
        match self {
            HessianMode::Paper => s * s * (1.0 - s),
            HessianMode::Logistic => s * (1.0 - s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HessianMode::Paper => "paper",
            HessianMode::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for HessianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(HessianMode::Paper),
            "logistic" => Ok(HessianMode::Logistic),
            other => Err(Error::Invalid(format!(
                "unknown hessian mode '{}' (expected paper or logistic)",
                other
            ))),
        }
    }
}

/// Output of [`variance_lower_bound`].
#[derive(Debug, Clone)]
pub struct VarianceReport {
    /// `(I⁻¹)_ii` per row, labeled rows first.
    pub per_input_variance: Vec<f64>,
    /// Mean of `(σ'(Ĥ_i))² · (I⁻¹)_ii` over all rows.
    pub avg_link_variance: f64,
    /// Smoothness weight the bound was computed under.
    pub laplacian_weight: f64,
    pub labeled_count: usize,
    pub unlabeled_count: usize,
    pub hessian_mode: HessianMode,
    /// Ridge that had to be added to make the Fisher matrix invertible;
    /// 0 when it was already positive definite.
    pub applied_ridge: f64,
    /// The Fisher matrix `Δ + w·L` itself (without the applied ridge).
    pub fisher: na::DMatrix<f64>,
}

/// Assembles the Fisher information matrix `Δ + w·L` for scores `Ĥ` on the
/// graph `sys`. `scores` must cover every graph row; the curvature diagonal
/// is filled only for the labeled block.
pub fn fisher_information(
    scores: &[f64],
    sys: &LaplacianSystem,
    laplacian_weight: f64,
    mode: HessianMode,
) -> Result<na::DMatrix<f64>> {
    if scores.len() != sys.rows() {
        return Err(Error::Dimension(format!(
            "{} scores for a graph with {} nodes",
            scores.len(),
            sys.rows()
        )));
    }
    if !(laplacian_weight.is_finite() && laplacian_weight >= 0.0) {
        return Err(Error::Invalid(format!(
            "laplacian weight must be finite and non-negative, got {}",
            laplacian_weight
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("non-finite score {}", bad)));
    }
    let mut fisher = sys.dense_laplacian() * laplacian_weight;
    for i in 0..sys.labeled_count() {
        fisher[(i, i)] += mode.curvature(scores[i]);
    }
    Ok(fisher)
}

/// Computes the per-row variance lower bound `diag(I⁻¹)` and its
/// link-transformed average. When `I` is numerically singular (for example
/// `w = 0` with unlabeled rows present) a ridge of 1e-10 is added first;
/// rows pinned down by nothing then show variances near `1/ridge`, which is
/// the honest answer — no information bounds them.
pub fn variance_lower_bound(
    scores: &[f64],
    sys: &LaplacianSystem,
    laplacian_weight: f64,
    mode: HessianMode,
) -> Result<VarianceReport> {
    let fisher = fisher_information(scores, sys, laplacian_weight, mode)?;
    let rows = sys.rows();

    let eigen = na::SymmetricEigen::new(fisher.clone());
    let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let applied_ridge = if min_eig < SINGULAR_EIGENVALUE {
        FISHER_RIDGE
    } else {
        0.0
    };
    if min_eig + applied_ridge <= 0.0 {
        return Err(Error::Singular(format!(
            "Fisher matrix has eigenvalue {} and stays indefinite even with a {} ridge",
            min_eig, FISHER_RIDGE
        )));
    }

    // diag(I⁻¹)_i = Σ_k Q_ik² / λ_k, with the ridge shifting every
    // eigenvalue in place (Q is unchanged by adding a multiple of identity).
    let q = &eigen.eigenvectors;
    let per_input_variance: Vec<f64> = (0..rows)
        .map(|i| {
            (0..rows)
                .map(|k| {
                    let qik = q[(i, k)];
                    qik * qik / (eigen.eigenvalues[k] + applied_ridge)
                })
                .sum()
        })
        .collect();

    let avg_link_variance = per_input_variance
        .iter()
        .zip(scores)
        .map(|(&v, &h)| {
            let slope = sigmoid(h) * (1.0 - sigmoid(h));
            slope * slope * v
        })
        .sum::<f64>()
        / rows as f64;

    Ok(VarianceReport {
        per_input_variance,
        avg_link_variance,
        laplacian_weight,
        labeled_count: sys.labeled_count(),
        unlabeled_count: sys.unlabeled_count(),
        hessian_mode: mode,
        applied_ridge,
        fisher,
    })
}

/// One cell of a variance sweep: the bound averaged over seeds at a given
/// labeled-row budget and feature-cost weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCell {
    pub labeled_count: usize,
    pub cost_weight: f64,
    pub avg_link_variance: f64,
    pub seeds: usize,
}

/// For every `(labeled_count, cost_weight)` cell: repeatedly subsample the
/// labeled rows of `ds` down to the budget, train `kind`, rebuild the graph
/// the trainer saw, and average [`variance_lower_bound`] over the seeds.
/// This is the experiment showing how labels and graph structure shrink the
/// bound.
pub fn sweep_average_bound(
    ds: &Dataset,
    labeled_counts: &[usize],
    cost_weights: &[f64],
    seeds: &[u64],
    base: &TrainConfig,
    kind: TrainerKind,
    mode: HessianMode,
) -> Result<Vec<VarianceCell>> {
    if seeds.is_empty() {
        return Err(Error::Invalid("variance sweep needs at least one seed".into()));
    }
    let mut cells = Vec::new();
    for &count in labeled_counts {
        for &cost_weight in cost_weights {
            let mut total = 0.0;
            for &seed in seeds {
                let sub = ds.subsample_labeled(count, seed, false)?;
                let cfg = TrainConfig {
                    cost_weight,
                    seed,
                    ..base.clone()
                };
                let outcome = train(&sub, &cfg, kind)?;
                let scores: Vec<f64> = (0..sub.rows())
                    .map(|i| outcome.ensemble.score(sub.row(i), None))
                    .collect::<Result<_>>()?;
                let sys = LaplacianSystem::build(
                    &sub,
                    cfg.neighbor_count,
                    cfg.kernel,
                    Metric::Euclidean,
                )?;
                let report =
                    variance_lower_bound(&scores, &sys, cfg.laplacian_weight, mode)?;
                total += report.avg_link_variance;
            }
            cells.push(VarianceCell {
                labeled_count: count,
                cost_weight,
                avg_link_variance: total / seeds.len() as f64,
                seeds: seeds.len(),
            });
        }
    }
    Ok(cells)
}
