//! Acceptance gate: every guarantee the library makes, checked end to end
//! against independent test-side oracles.
//!
//! Each test prints one `PASS` line with the measured numbers so a plain
//! `cargo test --test acceptance -- --nocapture` doubles as a report. The
//! oracles here deliberately do not share code with the library: harmonic
//! extension is re-derived with Gauss-Seidel sweeps, gradients with central
//! finite differences, trees with a naive exhaustive CART, and the Fisher
//! matrix inverse with Gauss-Jordan elimination.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use grbb::boosting::{labeled_gradient, sigmoid, train, TrainConfig, TrainerKind};
use grbb::dataset::Dataset;
use grbb::eval::{default_cost_weight_grid, evaluate, EarlyExit, MetricSpec};
use grbb::graph::LaplacianSystem;
use grbb::model::{load_model, save_model};
use grbb::synth::{generate, Shape, SynthConfig};
use grbb::trees::{evaluate_tree, fit_tree, CostMeter, Node, RegressionTree};
use grbb::variance::{variance_lower_bound, HessianMode};

// ---------------------------------------------------------------------------
// shared fixtures

/// Random connected weighted graph: a random spanning tree plus a few extra
/// edges, weights in [0.5, 2.0]. Returned edges have `a < b`, no duplicates.
fn random_connected_graph(rng: &mut ChaCha8Rng, nodes: usize) -> Vec<(usize, usize, f64)> {
    let mut edges = std::collections::BTreeMap::new();
    for b in 1..nodes {
        let a = rng.random_range(0..b);
        edges.insert((a, b), rng.random_range(0.5..2.0));
    }
    let extra = rng.random_range(0..nodes);
    for _ in 0..extra {
        let a = rng.random_range(0..nodes);
        let b = rng.random_range(0..nodes);
        if a != b {
            let key = (a.min(b), a.max(b));
            edges.entry(key).or_insert_with(|| rng.random_range(0.5..2.0));
        }
    }
    edges.into_iter().map(|((a, b), w)| (a, b, w)).collect()
}

fn accuracy_on(model: &grbb::Ensemble, truth: &Dataset) -> f64 {
    evaluate(model, truth, MetricSpec::Accuracy, None, None, 0.0)
        .unwrap()
        .metric_value
}

// ---------------------------------------------------------------------------
// 1. One propagated-gradient tree beats a hundred penalty-gradient trees on
//    a two-manifold dataset with a single labeled point per manifold.

#[test]
fn a01_single_tree_two_moons() {
    let started = Instant::now();
    let mut single = Vec::new();
    let mut diffused = Vec::new();
    for seed in 0..5 {
        let out = generate(&SynthConfig {
            shape: Shape::TwoMoons,
            points_per_class: 200,
            noise: 0.05,
            labeled_per_class: 1,
            seed,
        })
        .unwrap();
        let base = TrainConfig {
            max_depth: 6,
            seed,
            ..TrainConfig::default()
        };
        let cfg = TrainConfig {
            num_trees: 1,
            ..base.clone()
        };
        let model = train(&out.data, &cfg, TrainerKind::Grbb).unwrap();
        single.push(accuracy_on(&model.ensemble, &out.truth));
        let cfg = TrainConfig {
            num_trees: 100,
            ..base
        };
        let model = train(&out.data, &cfg, TrainerKind::LapGbrt).unwrap();
        diffused.push(accuracy_on(&model.ensemble, &out.truth));
    }
    let single_mean = single.iter().sum::<f64>() / single.len() as f64;
    let diffused_mean = diffused.iter().sum::<f64>() / diffused.len() as f64;
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        single_mean >= 0.95,
        "grbb single tree averaged {:.4}, needs >= 0.95 (per seed: {:?})",
        single_mean,
        single
    );
    assert!(
        single_mean > diffused_mean,
        "grbb@1 ({:.4}) must beat lapgbrt@100 ({:.4})",
        single_mean,
        diffused_mean
    );
    assert!(elapsed < 60.0, "took {:.1}s, budget is 60s", elapsed);
    println!(
        "PASS a01: grbb@1 tree {:.4} vs lapgbrt@100 trees {:.4} over 5 seeds ({:.1}s)",
        single_mean, diffused_mean, elapsed
    );
}

// ---------------------------------------------------------------------------
// 2. Propagated gradients equal the minimizer of the graph quadratic form
//    with the labeled block clamped, recomputed here by Gauss-Seidel.

#[test]
fn a02_propagation_matches_quadratic_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let nodes = rng.random_range(4..=12);
        let labeled = rng.random_range(1..=3.min(nodes - 1));
        let edges = random_connected_graph(&mut rng, nodes);
        let grad_l: Vec<f64> = (0..labeled).map(|_| rng.random_range(-1.0..1.0)).collect();

        let sys = LaplacianSystem::from_edges(nodes, labeled, &edges).unwrap();
        let got = sys.propagation_operator(0.0).unwrap().propagate(&grad_l).unwrap();

        // Exact coordinate descent on g' L g with g_L fixed: each sweep sets
        // every unlabeled coordinate to the weighted mean of its neighbors.
        let mut g: Vec<f64> = grad_l.iter().copied().chain((labeled..nodes).map(|_| 0.0)).collect();
        let mut adj = vec![Vec::new(); nodes];
        for &(a, b, w) in &edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for _ in 0..200_000 {
            let mut delta: f64 = 0.0;
            for u in labeled..nodes {
                let (mut num, mut den) = (0.0, 0.0);
                for &(j, w) in &adj[u] {
                    num += w * g[j];
                    den += w;
                }
                let next = num / den;
                delta = delta.max((next - g[u]).abs());
                g[u] = next;
            }
            if delta < 1e-13 {
                break;
            }
        }

        for (u, &value) in got.iter().enumerate() {
            worst = worst.max((value - g[labeled + u]).abs());
        }
    }
    assert!(worst <= 1e-8, "worst |diff| {} exceeds 1e-8", worst);
    println!("PASS a02: 50 random graphs, worst propagation error {:.2e}", worst);
}

// ---------------------------------------------------------------------------
// 3. The labeled gradient equals central finite differences of the penalized
//    objective sum-loss + (w/2) f' L f.

#[test]
fn a03_gradient_matches_finite_differences() {
    fn objective(scores: &[f64], labels: &[u8], edges: &[(usize, usize, f64)], w: f64) -> f64 {
        // Stable softplus(x) = max(x, 0) + ln(1 + e^{-|x|}).
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let x = scores[i];
            total += x.max(0.0) + (-x.abs()).exp().ln_1p() - f64::from(y) * x;
        }
        let mut quad = 0.0;
        for &(a, b, weight) in edges {
            quad += weight * (scores[a] - scores[b]).powi(2);
        }
        total + 0.5 * w * quad
    }

    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let nodes = rng.random_range(5..=10);
        let labeled = rng.random_range(1..=nodes);
        let edges = random_connected_graph(&mut rng, nodes);
        let weight = [0.0, 0.3, 1.0][case % 3];
        let sys = LaplacianSystem::from_edges(nodes, labeled, &edges).unwrap();
        let mut scores: Vec<f64> = (0..nodes).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels: Vec<u8> = (0..labeled).map(|_| u8::from(rng.random_bool(0.5))).collect();

        let grad = labeled_gradient(&scores, &labels, Some(&sys), weight).unwrap();
        assert_eq!(grad.len(), labeled);
        let step = 1e-5;
        for i in 0..labeled {
            let kept = scores[i];
            scores[i] = kept + step;
            let up = objective(&scores, &labels, &edges, weight);
            scores[i] = kept - step;
            let down = objective(&scores, &labels, &edges, weight);
            scores[i] = kept;
            let fd = (up - down) / (2.0 * step);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-6, "worst relative error {} exceeds 1e-6", worst);
    println!("PASS a03: 20 instances, worst gradient error {:.2e} relative", worst);
}

// ---------------------------------------------------------------------------
// 4. With zero cost weight the fitted tree matches an exhaustive CART oracle
//    exactly (same training SSE through one shared scoring routine).

#[test]
fn a04_cart_matches_exhaustive_oracle() {
    /// Plain recursive CART with naive two-pass SSE, no prefix tricks.
    fn oracle_fit(
        rows: &[usize],
        feats: &[Vec<f64>],
        targets: &[f64],
        depth: usize,
        preds: &mut [f64],
    ) {
        let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64;
        let sse = |set: &[usize]| -> f64 {
            let m = set.iter().map(|&r| targets[r]).sum::<f64>() / set.len() as f64;
            set.iter().map(|&r| (targets[r] - m).powi(2)).sum()
        };
        let parent = sse(rows);
        let mut best: Option<(f64, usize, f64)> = None; // (reduction, feature, threshold)
        if depth > 0 && rows.len() >= 2 {
            for f in 0..feats.len() {
                let mut values: Vec<f64> = rows.iter().map(|&r| feats[f][r]).collect();
                values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                values.dedup();
                for pair in values.windows(2) {
                    let threshold = 0.5 * (pair[0] + pair[1]);
                    if threshold <= pair[0] {
                        continue;
                    }
                    let left: Vec<usize> =
                        rows.iter().copied().filter(|&r| feats[f][r] < threshold).collect();
                    let right: Vec<usize> =
                        rows.iter().copied().filter(|&r| feats[f][r] >= threshold).collect();
                    let reduction = parent - sse(&left) - sse(&right);
                    if reduction <= 0.0 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((r, bf, bt)) => {
                            reduction > r
                                || (reduction == r && (f < bf || (f == bf && threshold < bt)))
                        }
                    };
                    if better {
                        best = Some((reduction, f, threshold));
                    }
                }
            }
        }
        match best {
            Some((_, f, threshold)) => {
                let left: Vec<usize> =
                    rows.iter().copied().filter(|&r| feats[f][r] < threshold).collect();
                let right: Vec<usize> =
                    rows.iter().copied().filter(|&r| feats[f][r] >= threshold).collect();
                oracle_fit(&left, feats, targets, depth - 1, preds);
                oracle_fit(&right, feats, targets, depth - 1, preds);
            }
            None => {
                for &r in rows {
                    preds[r] = mean;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let (n, d) = (20, 3);
    for case in 0..50 {
        let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let costs = vec![1.0; d];
        let tree = fit_tree(&flat, d, &targets, &costs, 0.0, 2, &BTreeSet::new()).unwrap();

        let feats: Vec<Vec<f64>> =
            (0..d).map(|f| (0..n).map(|r| flat[r * d + f]).collect()).collect();
        let mut oracle_preds = vec![0.0; n];
        oracle_fit(&(0..n).collect::<Vec<_>>(), &feats, &targets, 2, &mut oracle_preds);

        // One shared SSE routine judges both trees.
        let training_sse = |preds: &[f64]| -> f64 {
            preds.iter().zip(&targets).map(|(p, t)| (t - p).powi(2)).sum()
        };
        let fitted_preds: Vec<f64> =
            (0..n).map(|r| tree.response(&flat[r * d..(r + 1) * d])).collect();
        let fitted = training_sse(&fitted_preds);
        let oracle = training_sse(&oracle_preds);
        assert!(
            fitted == oracle,
            "case {}: fitted SSE {} != oracle SSE {}",
            case,
            fitted,
            oracle
        );
        assert_eq!(fitted_preds, oracle_preds, "case {}: predictions differ", case);
    }
    println!("PASS a04: 50 instances, fitted tree SSE identical to exhaustive CART");
}

// ---------------------------------------------------------------------------
// 5. Reductions: on fully labeled data with no graph term the propagating
//    trainer IS plain boosting, and plain boosting's loss never increases.

#[test]
fn a05_reductions_and_monotone_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<Option<u8>> = rows.iter().map(|r| Some(u8::from(r[0] + r[1] > 0.0))).collect();
    let ds = Dataset::new(rows, labels, None, None, None).unwrap();
    let cfg = TrainConfig {
        num_trees: 25,
        laplacian_weight: 0.0,
        ..TrainConfig::default()
    };
    let plain = train(&ds, &cfg, TrainerKind::Gbrt).unwrap();
    let reduced = train(&ds, &cfg, TrainerKind::Grbb).unwrap();
    assert_eq!(
        plain.ensemble.trees(),
        reduced.ensemble.trees(),
        "grbb with no unlabeled rows and no graph weight must reproduce gbrt tree for tree"
    );

    let out = generate(&SynthConfig {
        shape: Shape::TwoMoons,
        points_per_class: 100,
        noise: 0.1,
        labeled_per_class: 100,
        seed: 5,
    })
    .unwrap();
    let cfg = TrainConfig {
        num_trees: 200,
        ..TrainConfig::default()
    };
    let full = train(&out.data, &cfg, TrainerKind::Gbrt).unwrap();
    assert_eq!(full.log.len(), 200);
    for pair in full.log.windows(2) {
        assert!(
            pair[1].train_loss <= pair[0].train_loss + 1e-12,
            "loss rose from {} to {} at iteration {}",
            pair[0].train_loss,
            pair[1].train_loss,
            pair[1].iteration
        );
    }
    println!(
        "PASS a05: tree-identical reduction; loss fell {:.4} -> {:.4} over 200 iterations",
        full.log[0].train_loss,
        full.log[199].train_loss
    );
}

// ---------------------------------------------------------------------------
// 6. Variance bound: exact closed-form scalar cases, then a 30-node system
//    against a dense Gauss-Jordan inverse.

#[test]
fn a06_variance_bound_scalars_and_matrix_oracle() {
    // One labeled input, no graph, score 0: curvature 1/8 or 1/4, link
    // derivative 1/4, so the bound is exactly 1/2 or 1/4.
    let lone = LaplacianSystem::from_edges(1, 1, &[]).unwrap();
    let paper = variance_lower_bound(&[0.0], &lone, 0.0, HessianMode::Paper).unwrap();
    assert_eq!(paper.avg_link_variance, 0.5);
    let logistic = variance_lower_bound(&[0.0], &lone, 0.0, HessianMode::Logistic).unwrap();
    assert_eq!(logistic.avg_link_variance, 0.25);

    fn gauss_jordan_inverse(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut inv: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let scale = a[col][col];
            assert!(scale.abs() > 1e-14, "oracle matrix is singular");
            for j in 0..n {
                a[col][j] /= scale;
                inv[col][j] /= scale;
            }
            for row in 0..n {
                if row != col {
                    let factor = a[row][col];
                    for j in 0..n {
                        a[row][j] -= factor * a[col][j];
                        inv[row][j] -= factor * inv[col][j];
                    }
                }
            }
        }
        inv
    }

    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let nodes = 30;
        let labeled = rng.random_range(4..=10);
        let weight = rng.random_range(0.2..1.0);
        let edges = random_connected_graph(&mut rng, nodes);
        let scores: Vec<f64> = (0..nodes).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sys = LaplacianSystem::from_edges(nodes, labeled, &edges).unwrap();

        for mode in [HessianMode::Paper, HessianMode::Logistic] {
            let report = variance_lower_bound(&scores, &sys, weight, mode).unwrap();
            assert_eq!(report.applied_ridge, 0.0, "system should be well conditioned");

            // Assemble curvature-diagonal + weight * Laplacian by hand.
            let mut fisher = vec![vec![0.0; nodes]; nodes];
            for (i, row) in fisher.iter_mut().enumerate().take(labeled) {
                let p = 1.0 / (1.0 + (-scores[i]).exp());
                row[i] = match mode {
                    HessianMode::Paper => p * p * (1.0 - p),
                    HessianMode::Logistic => p * (1.0 - p),
                };
            }
            for &(a, b, w) in &edges {
                fisher[a][a] += weight * w;
                fisher[b][b] += weight * w;
                fisher[a][b] -= weight * w;
                fisher[b][a] -= weight * w;
            }
            let inverse = gauss_jordan_inverse(fisher);
            let mut avg = 0.0;
            for i in 0..nodes {
                let p = 1.0 / (1.0 + (-scores[i]).exp());
                let rel = (report.per_input_variance[i] - inverse[i][i]).abs()
                    / inverse[i][i].abs().max(1e-300);
                worst = worst.max(rel);
                avg += (p * (1.0 - p)).powi(2) * inverse[i][i];
            }
            avg /= nodes as f64;
            let rel = (report.avg_link_variance - avg).abs() / avg.abs().max(1e-300);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-9, "worst relative error {} exceeds 1e-9", worst);
    println!(
        "PASS a06: scalar bounds exact (0.5 / 0.25); 30-node oracle agrees to {:.2e}",
        worst
    );
}

// ---------------------------------------------------------------------------
// 7. More labels never loosen the averaged bound.

#[test]
fn a07_variance_shrinks_with_more_labels() {
    let out = generate(&SynthConfig {
        shape: Shape::TwoMoons,
        points_per_class: 100,
        noise: 0.05,
        labeled_per_class: 100,
        seed: 0,
    })
    .unwrap();
    let base = TrainConfig {
        num_trees: 30,
        laplacian_weight: 0.05,
        ..TrainConfig::default()
    };
    let seeds: Vec<u64> = (0..10).collect();
    let cells = grbb::variance::sweep_average_bound(
        &out.truth,
        &[2, 4, 16],
        &[0.0],
        &seeds,
        &base,
        TrainerKind::Grbb,
        HessianMode::Paper,
    )
    .unwrap();
    assert_eq!(cells.len(), 3);
    let values: Vec<f64> = cells.iter().map(|c| c.avg_link_variance).collect();
    assert!(
        values[0] >= values[1] && values[1] >= values[2],
        "bound must be non-increasing in labels, got {:?}",
        values
    );
    println!(
        "PASS a07: avg bound {:.5} -> {:.5} -> {:.5} for 2/4/16 labels over 10 seeds",
        values[0], values[1], values[2]
    );
}

// ---------------------------------------------------------------------------
// 8. Cost accounting: first-touch charging by hand, early exit never costs
//    more, and the purchased-feature bill falls as the cost weight rises.

#[test]
fn a08_cost_accounting() {
    // Tree 1 reads feature 0 (cost 1); tree 2 reads features 0 and 1. The
    // second touch of feature 0 is free, so the input pays exactly 3.
    let tree_a = RegressionTree::from_nodes(vec![
        Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
        Node::Leaf { value: -1.0 },
        Node::Leaf { value: 1.0 },
    ])
    .unwrap();
    let tree_b = RegressionTree::from_nodes(vec![
        Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
        Node::Leaf { value: 0.0 },
        Node::Split { feature: 1, threshold: 0.0, left: 3, right: 4 },
        Node::Leaf { value: -2.0 },
        Node::Leaf { value: 2.0 },
    ])
    .unwrap();
    let costs = [1.0, 2.0];
    let x = [0.7, 0.3];
    let mut extracted = HashSet::new();
    let mut meter = CostMeter::new();
    evaluate_tree(&tree_a, &x, &costs, &mut extracted, Some(&mut meter)).unwrap();
    evaluate_tree(&tree_b, &x, &costs, &mut extracted, Some(&mut meter)).unwrap();
    assert_eq!(meter.feature_cost, 3.0);
    assert_eq!(meter.trees_evaluated, 2);

    // Early exit can only remove work: compare per input on 1000 rows.
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<Option<u8>> =
        rows.iter().map(|r| Some(u8::from(r[0] * r[1] + r[2] > 0.0))).collect();
    let ds = Dataset::new(rows, labels, None, None, None).unwrap();
    let cfg = TrainConfig {
        num_trees: 40,
        max_depth: 3,
        ..TrainConfig::default()
    };
    let model = train(&ds, &cfg, TrainerKind::Gbrt).unwrap().ensemble;
    let unit = 0.05;
    let plain = evaluate(&model, &ds, MetricSpec::Accuracy, None, None, unit).unwrap();
    let exit = evaluate(
        &model,
        &ds,
        MetricSpec::Accuracy,
        None,
        Some(EarlyExit::confident_positive(5, 0.6)),
        unit,
    )
    .unwrap();
    let mut exited = 0;
    for i in 0..ds.rows() {
        let with = exit.cost.per_input_feature_cost[i] + unit * exit.cost.per_input_trees[i] as f64;
        let without =
            plain.cost.per_input_feature_cost[i] + unit * plain.cost.per_input_trees[i] as f64;
        assert!(
            with <= without + 1e-12,
            "input {}: early exit cost {} exceeds plain cost {}",
            i,
            with,
            without
        );
        if exit.cost.per_input_trees[i] < plain.cost.per_input_trees[i] {
            exited += 1;
        }
    }
    assert!(exited > 0, "threshold 0.6 should trigger at least one exit");

    // The bill for purchased features is non-increasing across the cost
    // weight grid: redundant copies priced 6x/9x get dropped first.
    let moons = generate(&SynthConfig {
        shape: Shape::TwoMoons,
        points_per_class: 100,
        noise: 0.05,
        labeled_per_class: 100,
        seed: 3,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let rows: Vec<Vec<f64>> = (0..moons.truth.rows())
        .map(|i| {
            let r = moons.truth.row(i);
            vec![
                r[0],
                r[1],
                r[0] + rng.random_range(-0.02..0.02),
                r[1] + rng.random_range(-0.02..0.02),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let labels: Vec<Option<u8>> = (0..moons.truth.rows())
        .map(|i| Some(moons.truth.labels()[i]))
        .collect();
    let costed = Dataset::new(
        rows,
        labels,
        Some(vec![1.0, 1.0, 6.0, 6.0, 9.0, 9.0]),
        None,
        None,
    )
    .unwrap();
    let grid = default_cost_weight_grid();
    assert_eq!(grid.len(), 11);
    let mut bills = Vec::new();
    for &mu in &grid {
        let cfg = TrainConfig {
            num_trees: 20,
            max_depth: 3,
            cost_weight: mu,
            ..TrainConfig::default()
        };
        let model = train(&costed, &cfg, TrainerKind::Gbrt).unwrap().ensemble;
        let mut purchased = BTreeSet::new();
        for tree in model.trees() {
            purchased.extend(tree.used_features().iter().copied());
        }
        let bill: f64 = purchased.iter().map(|&f| costed.feature_costs()[f]).sum();
        bills.push(bill);
    }
    for pair in bills.windows(2) {
        assert!(
            pair[1] <= pair[0],
            "purchased-feature bill rose along the grid: {:?}",
            bills
        );
    }
    assert!(bills[grid.len() - 1] < bills[0], "the largest weight should prune something");
    println!(
        "PASS a08: hand total 3.0; early exit cheaper on all 1000 inputs ({} exited); bill {:?}",
        exited, bills
    );
}

// ---------------------------------------------------------------------------
// 9. Fixed seeds give byte-identical artifacts, and a saved model predicts
//    exactly like the one in memory.

#[test]
fn a09_determinism_and_round_trip() {
    let bin = env!("CARGO_BIN_EXE_grbb");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let output = std::process::Command::new(bin).args(args).output().unwrap();
        assert!(
            output.status.success(),
            "grbb {:?} failed: {}",
            args,
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    for round in ["a", "b"] {
        let data = path(&format!("moons_{}.csv", round));
        let model = path(&format!("model_{}.json", round));
        let log = path(&format!("log_{}.csv", round));
        let summary = path(&format!("eval_{}.csv", round));
        run(&["synth", "--per-class", "60", "--labeled-per-class", "3", "--seed", "11",
              "--noise", "0.05", "--out", &data]);
        run(&["train", "--data", &data, "--trainer", "grbb", "--trees", "12",
              "--lambda", "0.05", "--out", &model, "--log", &log]);
        let truth = data.replace(".csv", ".truth.csv");
        run(&["eval", "--model", &model, "--data", &truth, "--out", &summary]);
    }
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("moons_a.csv"), read("moons_b.csv"), "synth output differs");
    assert_eq!(
        read("moons_a.truth.csv"),
        read("moons_b.truth.csv"),
        "synth truth differs"
    );
    assert_eq!(read("model_a.json"), read("model_b.json"), "trained model differs");
    assert_eq!(read("eval_a.csv"), read("eval_b.csv"), "evaluation summary differs");

    // The iteration log contains wall-clock seconds in its last column;
    // everything before it must match byte for byte.
    let strip = |name: &str| -> Vec<String> {
        String::from_utf8(read(name))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip("log_a.csv"), strip("log_b.csv"), "iteration logs differ");

    // Round-trip: reload and compare raw scores bit for bit.
    let out = generate(&SynthConfig {
        shape: Shape::TwoMoons,
        points_per_class: 60,
        noise: 0.05,
        labeled_per_class: 3,
        seed: 11,
    })
    .unwrap();
    let cfg = TrainConfig {
        num_trees: 12,
        laplacian_weight: 0.05,
        ..TrainConfig::default()
    };
    let trained = train(&out.data, &cfg, TrainerKind::Grbb).unwrap().ensemble;
    let saved = dir.path().join("round_trip.json");
    save_model(&saved, &trained, &cfg, &out.data.fingerprint()).unwrap();
    let loaded = load_model(&saved).unwrap().ensemble;
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    for i in 0..1000 {
        let x = [rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0)];
        let a = trained.score(&x, None).unwrap();
        let b = loaded.score(&x, None).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "input {} prediction changed", i);
    }
    // And the CLI-trained model applied in-process matches the CLI eval.
    let cli_model = load_model(dir.path().join("model_a.json").as_path()).unwrap();
    let sig = sigmoid(cli_model.ensemble.score(out.data.row(0), None).unwrap());
    assert!(sig.is_finite());
    println!("PASS a09: byte-identical artifacts; save/load preserves every bit");
}
