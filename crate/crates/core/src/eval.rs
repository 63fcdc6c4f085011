//! Test-time evaluation: metrics, budget accounting, early exit, sweeps.
//!
//! Evaluation walks the ensemble tree by tree over every test input,
//! tracking which features each input has extracted so far. Costs are
//! charged on first touch per input; an optional per-tree unit cost folds
//! evaluation effort into the same budget. Early-exit policies stop work on
//! inputs whose fate is already decided, checked at fixed tree intervals:
//! either inputs that are already confidently positive, or (for ranking)
//! documents that have fallen out of the top of their query.

use std::collections::HashSet;

use crate::boosting::{sigmoid, train, Ensemble, TrainConfig, TrainerKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::trees::{evaluate_tree, CostMeter};

/// What to score predictions with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSpec {
    /// Fraction of test rows whose thresholded score matches the label.
    Accuracy,
    /// Mean over queries of the number of relevant documents in the top k
    /// by score (so the range is `[0, k]`, not `[0, 1]`).
    PrecisionAtK(usize),
}

impl MetricSpec {
    pub fn name(&self) -> String {
        match self {
            MetricSpec::Accuracy => "accuracy".into(),
            MetricSpec::PrecisionAtK(k) => format!("prec@{}", k),
        }
    }
}

impl std::str::FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "accuracy" {
            return Ok(MetricSpec::Accuracy);
        }
        if let Some(k) = s.strip_prefix("prec@") {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Invalid(format!("bad precision cutoff in '{}'", s)))?;
            if k == 0 {
                return Err(Error::Invalid("precision cutoff must be at least 1".into()));
            }
            return Ok(MetricSpec::PrecisionAtK(k));
        }
        Err(Error::Invalid(format!(
            "unknown metric '{}' (expected accuracy or prec@K)",
            s
        )))
    }
}

/// Which inputs an early-exit checkpoint retires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitRule {
    /// Inputs whose current `σ(score)` exceeds the threshold stop evaluating
    /// (they are confidently positive already).
    ConfidentPositive,
    /// Within each query, documents outside the current top `keep_per_query`
    /// by score stop evaluating (they will not make the final top ranks).
    DropLowRanked,
}

/// Early-exit policy: every `interval` trees, apply `rule`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyExit {
    pub interval: usize,
    /// Probability threshold for [`ExitRule::ConfidentPositive`].
    pub threshold: f64,
    pub rule: ExitRule,
    /// Rank cutoff for [`ExitRule::DropLowRanked`].
    pub keep_per_query: usize,
}

impl EarlyExit {
    /// Confident-positive exits above `threshold`, checked every `interval`
    /// trees.
    pub fn confident_positive(interval: usize, threshold: f64) -> Self {
        EarlyExit {
            interval,
            threshold,
            rule: ExitRule::ConfidentPositive,
            keep_per_query: usize::MAX,
        }
    }

    /// Rank-based exits keeping `keep_per_query` documents per query alive,
    /// checked every `interval` trees.
    pub fn drop_low_ranked(interval: usize, keep_per_query: usize) -> Self {
        EarlyExit {
            interval,
            threshold: f64::INFINITY,
            rule: ExitRule::DropLowRanked,
            keep_per_query,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::Invalid("early-exit interval must be at least 1".into()));
        }
        if self.rule == ExitRule::ConfidentPositive && !self.threshold.is_finite() {
            return Err(Error::Invalid(format!(
                "early-exit threshold must be finite, got {}",
                self.threshold
            )));
        }
        if self.rule == ExitRule::DropLowRanked && self.keep_per_query == 0 {
            return Err(Error::Invalid("early exit must keep at least one document".into()));
        }
        Ok(())
    }
}

/// Test-time budget accounting over one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// First-touch feature cost per input.
    pub per_input_feature_cost: Vec<f64>,
    /// Trees actually walked per input (early exit lowers this).
    pub per_input_trees: Vec<usize>,
    /// Cost charged per tree walked (0 disables evaluation-effort costing).
    pub tree_eval_unit_cost: f64,
    /// Mean over inputs of `feature_cost + unit_cost · trees`.
    pub mean_total_cost: f64,
}

impl CostReport {
    pub fn mean_feature_cost(&self) -> f64 {
        mean(&self.per_input_feature_cost)
    }

    pub fn mean_trees(&self) -> f64 {
        let counts: Vec<f64> = self.per_input_trees.iter().map(|&t| t as f64).collect();
        mean(&counts)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Metric value plus the budget it took to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metric: String,
    pub metric_value: f64,
    pub cost: CostReport,
    /// Raw final scores per test row (after any early exit), for callers
    /// that want to re-rank or inspect.
    pub scores: Vec<f64>,
}

/// Evaluates `model` on a fully labeled `test` set.
///
/// Feature costs come from the model (they were captured at training time and
/// describe the extraction pipeline, not any particular CSV). `tree_limit`
/// truncates the ensemble; `early_exit` retires inputs at checkpoints. The
/// cost report always reflects the work actually done.
pub fn evaluate(
    model: &Ensemble,
    test: &Dataset,
    metric: MetricSpec,
    tree_limit: Option<usize>,
    early_exit: Option<EarlyExit>,
    tree_eval_unit_cost: f64,
) -> Result<Evaluation> {
    if test.labeled_count() != test.rows() {
        return Err(Error::Invalid(format!(
            "test set has {} unlabeled rows; evaluation needs labels everywhere",
            test.unlabeled_count()
        )));
    }
    if test.num_features() != model.num_features() {
        return Err(Error::Dimension(format!(
            "test set has {} features, model expects {}",
            test.num_features(),
            model.num_features()
        )));
    }
    if !(tree_eval_unit_cost.is_finite() && tree_eval_unit_cost >= 0.0) {
        return Err(Error::Invalid(format!(
            "per-tree unit cost must be finite and non-negative, got {}",
            tree_eval_unit_cost
        )));
    }
    if let Some(policy) = &early_exit {
        policy.validate()?;
    }
    let limit = model.resolve_limit(tree_limit)?;
    let rows = test.rows();
    let costs = model.feature_costs();

    let mut scores = vec![model.bias(); rows];
    let mut extracted: Vec<HashSet<usize>> = vec![HashSet::new(); rows];
    let mut meters: Vec<CostMeter> = vec![CostMeter::new(); rows];
    let mut active = vec![true; rows];

    for (t, tree) in model.trees()[..limit].iter().enumerate() {
        for i in 0..rows {
            if !active[i] {
                continue;
            }
            let value = evaluate_tree(
                tree,
                test.row(i),
                costs,
                &mut extracted[i],
                Some(&mut meters[i]),
            )?;
            scores[i] += model.learning_rate() * value;
        }
        if let Some(policy) = &early_exit {
            if (t + 1) % policy.interval == 0 && t + 1 < limit {
                apply_exit_rule(policy, &scores, test.query_ids(), &mut active);
            }
        }
    }

    let metric_value = match metric {
        MetricSpec::Accuracy => {
            let correct = (0..rows)
                .filter(|&i| Ensemble::decision(scores[i]) == test.label(i).expect("checked"))
                .count();
            correct as f64 / rows as f64
        }
        MetricSpec::PrecisionAtK(k) => {
            precision_at_k(&scores, test.labels(), test.query_ids(), k)?
        }
    };

    let per_input_feature_cost: Vec<f64> = meters.iter().map(|m| m.feature_cost).collect();
    let per_input_trees: Vec<usize> = meters.iter().map(|m| m.trees_evaluated).collect();
    let mean_total_cost = mean(
        &per_input_feature_cost
            .iter()
            .zip(&per_input_trees)
            .map(|(&fc, &t)| fc + tree_eval_unit_cost * t as f64)
            .collect::<Vec<f64>>(),
    );

    Ok(Evaluation {
        metric: metric.name(),
        metric_value,
        cost: CostReport {
            per_input_feature_cost,
            per_input_trees,
            tree_eval_unit_cost,
            mean_total_cost,
        },
        scores,
    })
}

fn apply_exit_rule(
    policy: &EarlyExit,
    scores: &[f64],
    query_ids: Option<&[u64]>,
    active: &mut [bool],
) {
    match policy.rule {
        ExitRule::ConfidentPositive => {
            for (i, score) in scores.iter().enumerate() {
                if active[i] && sigmoid(*score) > policy.threshold {
                    active[i] = false;
                }
            }
        }
        ExitRule::DropLowRanked => {
            for group in query_groups(scores.len(), query_ids) {
                // Rank *all* documents of the query by current score (ties
                // keep document order); those outside the cutoff exit.
                let mut ranked: Vec<usize> = group.clone();
                ranked.sort_by(|&a, &b| {
                    scores[b].partial_cmp(&scores[a]).expect("finite scores")
                });
                for &doc in ranked.iter().skip(policy.keep_per_query) {
                    active[doc] = false;
                }
            }
        }
    }
}

/// Row indices grouped by query id (all rows form one group without ids).
/// Groups preserve row order, and rows with the same id belong to the same
/// group even if they are not adjacent.
fn query_groups(rows: usize, query_ids: Option<&[u64]>) -> Vec<Vec<usize>> {
    match query_ids {
        None => vec![(0..rows).collect()],
        Some(ids) => {
            let mut order: Vec<u64> = Vec::new();
            let mut groups: std::collections::HashMap<u64, Vec<usize>> =
                std::collections::HashMap::new();
            for (i, &id) in ids.iter().enumerate() {
                let entry = groups.entry(id).or_default();
                if entry.is_empty() {
                    order.push(id);
                }
                entry.push(i);
            }
            order
                .into_iter()
                .map(|id| groups.remove(&id).expect("id registered above"))
                .collect()
        }
    }
}

/// Mean over queries of the count of relevant (label 1) documents among the
/// top `k` by score. Ties rank earlier documents first; queries with fewer
/// than `k` documents are truncated, so the value lies in `[0, k]`.
pub fn precision_at_k(
    scores: &[f64],
    labels: &[u8],
    query_ids: Option<&[u64]>,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::Invalid("precision cutoff must be at least 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::Invalid("precision@k of an empty ranking".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(ids) = query_ids {
        if ids.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} query ids for {} scores",
                ids.len(),
                scores.len()
            )));
        }
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("non-finite score {}", bad)));
    }

    let groups = query_groups(scores.len(), query_ids);
    let mut total = 0.0;
    let queries = groups.len();
    for group in groups {
        let mut ranked = group;
        ranked.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
        total += ranked
            .iter()
            .take(k)
            .filter(|&&doc| labels[doc] == 1)
            .count() as f64;
    }
    Ok(total / queries as f64)
}

/// Metric value after each ensemble prefix `1..=num_trees` — the data behind
/// accuracy-versus-trees curves.
pub fn metric_per_tree(model: &Ensemble, test: &Dataset, metric: MetricSpec) -> Result<Vec<f64>> {
    if test.labeled_count() != test.rows() {
        return Err(Error::Invalid(format!(
            "test set has {} unlabeled rows; evaluation needs labels everywhere",
            test.unlabeled_count()
        )));
    }
    if test.num_features() != model.num_features() {
        return Err(Error::Dimension(format!(
            "test set has {} features, model expects {}",
            test.num_features(),
            model.num_features()
        )));
    }
    let rows = test.rows();
    let mut scores = vec![model.bias(); rows];
    let mut out = Vec::with_capacity(model.num_trees());
    for tree in model.trees() {
        for (i, score) in scores.iter_mut().enumerate() {
            *score += model.learning_rate() * tree.response(test.row(i));
        }
        let value = match metric {
            MetricSpec::Accuracy => {
                let correct = (0..rows)
                    .filter(|&i| Ensemble::decision(scores[i]) == test.label(i).expect("checked"))
                    .count();
                correct as f64 / rows as f64
            }
            MetricSpec::PrecisionAtK(k) => {
                precision_at_k(&scores, test.labels(), test.query_ids(), k)?
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// The canonical 11-point feature-cost-weight grid used by budget sweeps:
/// zero plus the powers `4^-5 .. 4^4`, ascending.
pub fn default_cost_weight_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((-5..=4).map(|e| 4.0_f64.powi(e)));
    grid
}

/// Everything a sweep cell needs besides the trainer config.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Subsample the training labels down to this count per cell (seeded by
    /// the cell's seed); `None` keeps all labels.
    pub labeled_count: Option<usize>,
    /// Subsample whole queries instead of rows.
    pub by_query: bool,
    pub metric: MetricSpec,
    pub tree_limit: Option<usize>,
    pub tree_eval_unit_cost: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            labeled_count: None,
            by_query: false,
            metric: MetricSpec::Accuracy,
            tree_limit: None,
            tree_eval_unit_cost: 0.0,
        }
    }
}

/// Successful measurement of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMeasurement {
    pub mean_cost: f64,
    pub metric_value: f64,
    pub trees: usize,
}

/// One `(trainer, cost weight, seed)` cell of a sweep; failed cells carry
/// the error message instead of silently vanishing.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub trainer: TrainerKind,
    pub cost_weight: f64,
    pub seed: u64,
    pub labeled_count: usize,
    pub outcome: std::result::Result<SweepMeasurement, String>,
}

/// A full accuracy/cost sweep, ready to serialize.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub metric: MetricSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// CSV with header `trainer,mu,seed,labeled_count,mean_cost,metric,trees`
    /// (the cost-weight column keeps its conventional short name). Failed
    /// cells are skipped here; read them from [`SweepResult::cells`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trainer,mu,seed,labeled_count,mean_cost,metric,trees\n");
        for cell in &self.cells {
            if let Ok(m) = &cell.outcome {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    cell.trainer.name(),
                    cell.cost_weight,
                    cell.seed,
                    cell.labeled_count,
                    m.mean_cost,
                    m.metric_value,
                    m.trees
                ));
            }
        }
        out
    }

    /// Cells that failed, as `(trainer, cost_weight, seed, message)`.
    pub fn failures(&self) -> Vec<(TrainerKind, f64, u64, &str)> {
        self.cells
            .iter()
            .filter_map(|c| {
                c.outcome
                    .as_ref()
                    .err()
                    .map(|e| (c.trainer, c.cost_weight, c.seed, e.as_str()))
            })
            .collect()
    }
}

/// Trains and evaluates every `(trainer, cost weight, seed)` combination.
/// Cell failures are recorded, not fatal — one singular graph should not
/// torch an overnight sweep.
pub fn sweep_cost_weight(
    train_ds: &Dataset,
    test_ds: &Dataset,
    base: &TrainConfig,
    trainers: &[TrainerKind],
    grid: &[f64],
    seeds: &[u64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if trainers.is_empty() || grid.is_empty() || seeds.is_empty() {
        return Err(Error::Invalid(
            "sweep needs at least one trainer, one grid value, and one seed".into(),
        ));
    }
    let mut cells = Vec::new();
    for &trainer in trainers {
        for &cost_weight in grid {
            for &seed in seeds {
                let cell = run_cell(
                    train_ds, test_ds, base, trainer, cost_weight, seed, opts,
                );
                cells.push(cell);
            }
        }
    }
    Ok(SweepResult {
        metric: opts.metric,
        cells,
    })
}

fn run_cell(
    train_ds: &Dataset,
    test_ds: &Dataset,
    base: &TrainConfig,
    trainer: TrainerKind,
    cost_weight: f64,
    seed: u64,
    opts: &SweepOptions,
) -> SweepCell {
    let attempt = || -> Result<(usize, SweepMeasurement)> {
        let ds = match opts.labeled_count {
            Some(count) => train_ds.subsample_labeled(count, seed, opts.by_query)?,
            None => train_ds.clone(),
        };
        let cfg = TrainConfig {
            cost_weight,
            seed,
            ..base.clone()
        };
        let outcome = train(&ds, &cfg, trainer)?;
        let eval = evaluate(
            &outcome.ensemble,
            test_ds,
            opts.metric,
            opts.tree_limit,
            None,
            opts.tree_eval_unit_cost,
        )?;
        Ok((
            ds.labeled_count(),
            SweepMeasurement {
                mean_cost: eval.cost.mean_total_cost,
                metric_value: eval.metric_value,
                trees: outcome.ensemble.num_trees(),
            },
        ))
    };
    match attempt() {
        Ok((labeled_count, m)) => SweepCell {
            trainer,
            cost_weight,
            seed,
            labeled_count,
            outcome: Ok(m),
        },
        Err(e) => SweepCell {
            trainer,
            cost_weight,
            seed,
            labeled_count: opts.labeled_count.unwrap_or(train_ds.labeled_count()),
            outcome: Err(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{Node, RegressionTree};

    /// Hand-built ensemble: tree A splits on f0 at 0, tree B on f1 at 0,
    /// each returning ±1. Learning rate 1, bias 0.
    fn two_tree_model(costs: Vec<f64>) -> Ensemble {
        let tree_a = RegressionTree::from_nodes(vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: -1.0 },
            Node::Leaf { value: 1.0 },
        ])
        .unwrap();
        let tree_b = RegressionTree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: -1.0 },
            Node::Leaf { value: 1.0 },
        ])
        .unwrap();
        Ensemble::from_parts(
            vec![tree_a, tree_b],
            1.0,
            0.0,
            TrainerKind::Gbrt,
            2,
            costs,
        )
        .unwrap()
    }

    fn labeled_dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        let labels = labels.into_iter().map(Some).collect();
        Dataset::new(rows, labels, None, None, None).unwrap()
    }

    #[test]
    fn accuracy_counts_threshold_decisions() {
        let model = two_tree_model(vec![1.0, 1.0]);
        // Scores: (+1+1)=2 → 1, (−1−1)=−2 → 0, (+1−1)=0 → 1 (ties positive).
        let test = labeled_dataset(
            vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0]],
            vec![1, 0, 0],
        );
        let eval = evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.0).unwrap();
        assert!((eval.metric_value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(eval.scores, vec![2.0, -2.0, 0.0]);
    }

    #[test]
    fn cost_report_charges_first_touch_and_unit_cost() {
        let model = two_tree_model(vec![2.0, 1.0]);
        let test = labeled_dataset(vec![vec![1.0, 1.0], vec![-1.0, 1.0]], vec![1, 0]);
        let eval = evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.5).unwrap();
        // Each input touches f0 and f1 exactly once: 3.0 in features,
        // plus 2 trees × 0.5 in evaluation effort.
        assert_eq!(eval.cost.per_input_feature_cost, vec![3.0, 3.0]);
        assert_eq!(eval.cost.per_input_trees, vec![2, 2]);
        assert!((eval.cost.mean_total_cost - 4.0).abs() < 1e-12);
        assert!((eval.cost.mean_feature_cost() - 3.0).abs() < 1e-12);
        assert!((eval.cost.mean_trees() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tree_limit_truncates_the_ensemble() {
        let model = two_tree_model(vec![1.0, 1.0]);
        let test = labeled_dataset(vec![vec![1.0, -1.0]], vec![1]);
        let eval = evaluate(&model, &test, MetricSpec::Accuracy, Some(1), None, 0.0).unwrap();
        // Only tree A ran: score +1, and f1 was never extracted.
        assert_eq!(eval.scores, vec![1.0]);
        assert_eq!(eval.cost.per_input_feature_cost, vec![1.0]);
        assert_eq!(eval.cost.per_input_trees, vec![1]);
        assert!(evaluate(&model, &test, MetricSpec::Accuracy, Some(3), None, 0.0).is_err());
    }

    #[test]
    fn confident_positive_exit_stops_work() {
        let model = two_tree_model(vec![1.0, 1.0]);
        // Row 0 is strongly positive after tree A (σ(1) ≈ 0.73 > 0.7): it
        // exits at the checkpoint and never touches f1. Row 1 stays active.
        let test = labeled_dataset(vec![vec![1.0, 1.0], vec![-1.0, 1.0]], vec![1, 0]);
        let policy = EarlyExit::confident_positive(1, 0.7);
        let eval = evaluate(&model, &test, MetricSpec::Accuracy, None, Some(policy), 0.0).unwrap();
        assert_eq!(eval.cost.per_input_trees, vec![1, 2]);
        assert_eq!(eval.cost.per_input_feature_cost, vec![1.0, 2.0]);
        assert_eq!(eval.scores[0], 1.0); // frozen at exit time

        // An unreachable threshold (σ never exceeds 1) changes nothing.
        let noop = EarlyExit::confident_positive(1, 1.0);
        let full = evaluate(&model, &test, MetricSpec::Accuracy, None, Some(noop), 0.0).unwrap();
        let plain = evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.0).unwrap();
        assert_eq!(full.scores, plain.scores);
        assert_eq!(full.cost.per_input_trees, plain.cost.per_input_trees);
    }

    #[test]
    fn exit_can_only_lower_costs() {
        let model = two_tree_model(vec![1.0, 1.0]);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, 0.5])
            .collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let test = labeled_dataset(rows, labels);
        let plain = evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.1).unwrap();
        let policy = EarlyExit::confident_positive(1, 0.6);
        let exited =
            evaluate(&model, &test, MetricSpec::Accuracy, None, Some(policy), 0.1).unwrap();
        assert!(exited.cost.mean_total_cost <= plain.cost.mean_total_cost);
    }

    #[test]
    fn drop_low_ranked_keeps_top_documents_alive() {
        let model = two_tree_model(vec![1.0, 1.0]);
        // One query, 4 docs. After tree A scores are [1, 1, -1, -1]; the
        // rank-2 cutoff retires the two negative docs before tree B runs.
        let rows = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let labels = vec![Some(1), Some(1), Some(0), Some(0)];
        let qids = vec![5, 5, 5, 5];
        let test = Dataset::new(rows, labels, None, None, Some(qids)).unwrap();
        let policy = EarlyExit::drop_low_ranked(1, 2);
        let eval =
            evaluate(&model, &test, MetricSpec::PrecisionAtK(2), None, Some(policy), 0.0).unwrap();
        assert_eq!(eval.cost.per_input_trees, vec![2, 2, 1, 1]);
        assert_eq!(eval.scores, vec![2.0, 0.0, -1.0, -1.0]);
        // Both relevant docs still occupy the top 2.
        assert!((eval.metric_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn precision_at_k_hand_case() {
        let scores = [3.0, 2.0, 1.0, 0.5, 0.4, 0.3];
        let labels = [1, 0, 1, 0, 0, 1];
        let p = precision_at_k(&scores, &labels, None, 5).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
    }

    #[test]
    fn precision_at_k_breaks_ties_by_document_order() {
        let scores = [0.0, 0.0, 0.0];
        let labels = [1, 0, 1];
        // Top 2 under tie-breaking are docs 0 and 1 → one relevant.
        let p = precision_at_k(&scores, &labels, None, 2).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn precision_at_k_averages_over_queries() {
        let scores = [1.0, 0.5, 0.2, 2.0, 1.5];
        let labels = [1, 1, 0, 0, 1];
        let qids = [1, 1, 1, 2, 2];
        // Query 1 top-2: docs 0,1 → 2 relevant. Query 2 top-2: docs 3,4 → 1.
        let p = precision_at_k(&scores, &labels, Some(&qids), 2).unwrap();
        assert!((p - 1.5).abs() < 1e-12);
        // Queries shorter than k are truncated, not padded: query 1
        // contributes its 2 relevant docs, query 2 contributes 1.
        let p5 = precision_at_k(&scores, &labels, Some(&qids), 5).unwrap();
        assert!((p5 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn precision_at_k_rejects_malformed_input() {
        assert!(precision_at_k(&[], &[], None, 5).is_err());
        assert!(precision_at_k(&[1.0], &[1, 0], None, 5).is_err());
        assert!(precision_at_k(&[1.0], &[1], Some(&[1, 2]), 5).is_err());
        assert!(precision_at_k(&[1.0], &[1], None, 0).is_err());
        assert!(precision_at_k(&[f64::NAN], &[1], None, 1).is_err());
    }

    #[test]
    fn evaluate_rejects_unlabeled_test_rows() {
        let model = two_tree_model(vec![1.0, 1.0]);
        let test = Dataset::new(
            vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            vec![Some(1), None],
            None,
            None,
            None,
        )
        .unwrap();
        assert!(evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.0).is_err());
    }

    #[test]
    fn evaluate_rejects_feature_count_mismatch() {
        let model = two_tree_model(vec![1.0, 1.0]);
        let test = labeled_dataset(vec![vec![1.0]], vec![1]);
        assert!(evaluate(&model, &test, MetricSpec::Accuracy, None, None, 0.0).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("accuracy".parse::<MetricSpec>().unwrap(), MetricSpec::Accuracy);
        assert_eq!(
            "prec@5".parse::<MetricSpec>().unwrap(),
            MetricSpec::PrecisionAtK(5)
        );
        assert!("prec@0".parse::<MetricSpec>().is_err());
        assert!("auc".parse::<MetricSpec>().is_err());
    }

    #[test]
    fn metric_per_tree_tracks_prefixes() {
        let model = two_tree_model(vec![1.0, 1.0]);
        let test = labeled_dataset(vec![vec![1.0, -1.0], vec![-1.0, -1.0]], vec![1, 0]);
        let trace = metric_per_tree(&model, &test, MetricSpec::Accuracy).unwrap();
        assert_eq!(trace.len(), 2);
        // After tree A: scores [1, −1] → both right. After tree B: [0, −2] →
        // row 0 still classifies positive on the tie.
        assert_eq!(trace, vec![1.0, 1.0]);
        // Against the one-shot evaluator at each prefix.
        for (t, &v) in trace.iter().enumerate() {
            let eval =
                evaluate(&model, &test, MetricSpec::Accuracy, Some(t + 1), None, 0.0).unwrap();
            assert_eq!(eval.metric_value, v);
        }
    }

    #[test]
    fn default_grid_has_eleven_ascending_values() {
        let grid = default_cost_weight_grid();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0], 0.0);
        assert!((grid[1] - 4.0_f64.powi(-5)).abs() < 1e-18);
        assert_eq!(*grid.last().unwrap(), 256.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_records_cells_and_survives_failures() {
        let train_rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![if i % 2 == 0 { -2.0 } else { 2.0 } + 0.01 * i as f64])
            .collect();
        let train_labels: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 1)).collect();
        let train = labeled_dataset(train_rows.clone(), train_labels.clone());
        let test = labeled_dataset(train_rows, train_labels);
        let base = TrainConfig {
            num_trees: 3,
            neighbor_count: 2,
            ..TrainConfig::default()
        };
        let result = sweep_cost_weight(
            &train,
            &test,
            &base,
            &[TrainerKind::Gbrt],
            &[0.0, 1.0],
            &[0, 1],
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(result.cells.len(), 4);
        assert!(result.failures().is_empty());
        let csv = result.to_csv();
        assert!(csv.starts_with("trainer,mu,seed,labeled_count,mean_cost,metric,trees\n"));
        assert_eq!(csv.lines().count(), 5);

        // A labeled budget larger than the dataset fails the cell, not the
        // sweep.
        let opts = SweepOptions {
            labeled_count: Some(1000),
            ..SweepOptions::default()
        };
        let result = sweep_cost_weight(
            &train,
            &test,
            &base,
            &[TrainerKind::Gbrt],
            &[0.0],
            &[0],
            &opts,
        )
        .unwrap();
        assert_eq!(result.failures().len(), 1);
        assert_eq!(result.to_csv().lines().count(), 1);
    }
}
