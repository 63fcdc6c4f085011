//! Command-line front end: train models, generate synthetic manifolds,
//! evaluate under budgets, sweep cost weights, and compute variance bounds.
//!
//! Exit codes: 0 on success, 1 on any runtime failure (bad data, singular
//! graphs, I/O), 2 on command-line usage errors (clap's default).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use grbb::boosting::{train, TrainConfig, TrainerKind};
use grbb::dataset::{load_dataset, load_split, save_dataset, Dataset};
use grbb::error::{Error, Result};
use grbb::eval::{
    default_cost_weight_grid, evaluate, metric_per_tree, sweep_cost_weight, EarlyExit,
    MetricSpec, SweepOptions,
};
use grbb::graph::{Kernel, LaplacianSystem, Metric, DEFAULT_RIDGE};
use grbb::model::{load_model, save_model};
use grbb::synth::{generate, Shape, SynthConfig};
use grbb::trees::ChargingMode;
use grbb::variance::{sweep_average_bound, HessianMode};

#[derive(Parser)]
#[command(
    name = "grbb",
    version,
    about = "Cost-aware semi-supervised gradient boosted trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to disk.
    Train(TrainCmd),
    /// Generate a synthetic two-class manifold dataset.
    Synth(SynthCmd),
    /// Evaluate a saved model on labeled data.
    Eval(EvalCmd),
    /// Sweep trainers across feature-cost weights and seeds.
    Sweep(SweepCmd),
    /// Compute variance lower bounds across labeled-row budgets.
    Variance(VarianceCmd),
    /// Export the k-NN graph's weight and Laplacian matrices as text.
    Graph(GraphCmd),
}

/// Flags shared by every command that trains models.
#[derive(Args)]
struct TrainFlags {
    /// Number of boosting iterations.
    #[arg(long, default_value_t = 200)]
    trees: usize,
    /// Learning rate (shrinkage per tree).
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Weight on feature-extraction costs during split search.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Weight on the graph smoothness penalty.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Neighbors per node in the k-NN graph.
    #[arg(long, default_value_t = 9)]
    k: usize,
    /// Edge weighting: binary or heat.
    #[arg(long, default_value = "binary")]
    kernel: String,
    /// Heat-kernel bandwidth (default: median k-NN distance).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Ridge added to the unlabeled block before factorization.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    /// Feature charging across trees: ensemble or tree.
    #[arg(long, default_value = "ensemble")]
    charging: String,
    /// Seed for subsampling and synthetic data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn to_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            learning_rate: self.lr,
            num_trees: self.trees,
            max_depth: self.depth,
            cost_weight: self.mu,
            laplacian_weight: self.lambda,
            neighbor_count: self.k,
            kernel: parse_kernel(&self.kernel, self.bandwidth)?,
            ridge: self.ridge,
            charging: parse_charging(&self.charging)?,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct TrainCmd {
    /// Training feature CSV (header: label[,qid],f1,...).
    #[arg(long)]
    data: PathBuf,
    /// Feature cost file (one row of costs, or name,cost lines).
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Hold out the rows listed in this split file before training.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Trainer: gbrt, lapgbrt, or grbb.
    #[arg(long, default_value = "grbb", value_parser = parse_trainer)]
    trainer: TrainerKind,
    /// Keep only this many labeled rows (seeded subsample).
    #[arg(long)]
    labeled: Option<usize>,
    /// Subsample whole queries instead of rows.
    #[arg(long)]
    by_query: bool,
    #[command(flatten)]
    flags: TrainFlags,
    /// Where to write the model file.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-iteration log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    /// Manifold shape: two-moons or rings.
    #[arg(long, default_value = "two-moons", value_parser = parse_shape)]
    shape: Shape,
    /// Points per class.
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Labeled rows per class.
    #[arg(long, default_value_t = 1)]
    labeled_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the fully labeled twin goes to `<stem>.truth.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCmd {
    /// Model file written by `grbb train`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled evaluation CSV.
    #[arg(long)]
    data: PathBuf,
    /// Evaluate only the rows listed in this split file.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Metric: accuracy or prec@K.
    #[arg(long, default_value = "accuracy", value_parser = parse_metric)]
    metric: MetricSpec,
    /// Use only the first N trees.
    #[arg(long)]
    tree_limit: Option<usize>,
    /// Check early-exit rules every N trees (enables early exit).
    #[arg(long)]
    early_exit_interval: Option<usize>,
    /// Probability above which confident-positive inputs exit.
    #[arg(long, default_value_t = 0.95)]
    early_exit_threshold: f64,
    /// Exit documents outside the per-query top ranks instead.
    #[arg(long)]
    exit_drop_low_ranked: bool,
    /// Documents kept alive per query by the rank rule.
    #[arg(long, default_value_t = 10)]
    exit_keep: usize,
    /// Cost charged per tree evaluated.
    #[arg(long, default_value_t = 0.0)]
    unit_cost: f64,
    /// Write a one-row summary CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-tree metric trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    /// Training feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Labeled test CSV (or use --split against --data).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Split file carving a test set out of --data.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Trainer to sweep; repeat the flag to compare several.
    #[arg(long = "trainer", value_parser = parse_trainer)]
    trainers: Vec<TrainerKind>,
    /// Comma-separated cost weights, or "default" for the 11-point grid.
    #[arg(long, default_value = "default")]
    mu_grid: String,
    /// Number of seeds (seed-base, seed-base+1, ...).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Keep only this many labeled training rows per cell.
    #[arg(long)]
    labeled: Option<usize>,
    #[arg(long)]
    by_query: bool,
    #[arg(long, default_value = "accuracy", value_parser = parse_metric)]
    metric: MetricSpec,
    #[arg(long)]
    tree_limit: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    unit_cost: f64,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output curve CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VarianceCmd {
    /// Fully or partially labeled feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Comma-separated labeled-row budgets.
    #[arg(long, default_value = "2,4,16")]
    labeled_counts: String,
    /// Comma-separated cost weights, or "default" for the 11-point grid.
    #[arg(long, default_value = "0")]
    mu_grid: String,
    /// Number of seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value = "grbb", value_parser = parse_trainer)]
    trainer: TrainerKind,
    /// Curvature variant for the Fisher diagonal: paper or logistic.
    #[arg(long, default_value = "paper", value_parser = parse_hessian)]
    hessian: HessianMode,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphCmd {
    /// Feature CSV to build the graph over.
    #[arg(long)]
    data: PathBuf,
    /// Neighbors per node.
    #[arg(long, default_value_t = 9)]
    k: usize,
    /// Edge kernel: binary or heat.
    #[arg(long, default_value = "binary")]
    kernel: String,
    /// Heat-kernel bandwidth (median directed k-NN distance when omitted).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Write W as `row col value` lines here.
    #[arg(long)]
    weights_out: Option<PathBuf>,
    /// Write L = D - W as `row col value` lines here.
    #[arg(long)]
    laplacian_out: Option<PathBuf>,
}

fn parse_trainer(s: &str) -> std::result::Result<TrainerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<MetricSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hessian(s: &str) -> std::result::Result<HessianMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kernel(name: &str, bandwidth: Option<f64>) -> Result<Kernel> {
    match name {
        "binary" => {
            if bandwidth.is_some() {
                return Err(Error::Invalid(
                    "--bandwidth only applies to the heat kernel".into(),
                ));
            }
            Ok(Kernel::Binary)
        }
        "heat" => Ok(Kernel::Heat { bandwidth }),
        other => Err(Error::Invalid(format!(
            "unknown kernel '{}' (expected binary or heat)",
            other
        ))),
    }
}

fn parse_charging(name: &str) -> Result<ChargingMode> {
    match name {
        "ensemble" => Ok(ChargingMode::PerEnsemble),
        "tree" => Ok(ChargingMode::PerTree),
        other => Err(Error::Invalid(format!(
            "unknown charging mode '{}' (expected ensemble or tree)",
            other
        ))),
    }
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad {} value '{}'", what, cell)))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("bad {} value '{}'", what, cell)))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if s == "default" {
        Ok(default_cost_weight_grid())
    } else {
        parse_f64_list(s, "cost weight")
    }
}

fn seed_range(base: u64, count: u64) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(Error::Invalid("need at least one seed".into()));
    }
    Ok((base..base + count).collect())
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn load_training_data(
    data: &Path,
    costs: Option<&Path>,
    split: Option<&Path>,
    labeled: Option<usize>,
    by_query: bool,
    seed: u64,
) -> Result<Dataset> {
    let mut ds = load_dataset(data, costs)?;
    if let Some(split_path) = split {
        ds = load_split(&ds, split_path)?.train;
    }
    if let Some(count) = labeled {
        ds = ds.subsample_labeled(count, seed, by_query)?;
    }
    Ok(ds)
}

fn cmd_train(cmd: TrainCmd) -> Result<()> {
    let cfg = cmd.flags.to_config()?;
    let ds = load_training_data(
        &cmd.data,
        cmd.costs.as_deref(),
        cmd.split.as_deref(),
        cmd.labeled,
        cmd.by_query,
        cfg.seed,
    )?;
    let outcome = train(&ds, &cfg, cmd.trainer)?;
    for warning in &outcome.warnings {
        eprintln!("warning: {}", warning);
    }
    save_model(&cmd.out, &outcome.ensemble, &cfg, &ds.fingerprint())?;

    if let Some(log_path) = &cmd.log {
        let mut csv =
            String::from("iteration,train_loss,smoothness_penalty,features_purchased,wall_secs\n");
        for rec in &outcome.log {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                rec.iteration,
                rec.train_loss,
                rec.smoothness_penalty,
                rec.features_purchased,
                rec.wall_secs
            ));
        }
        write_text(log_path, &csv)?;
    }

    let last = outcome.log.last();
    println!(
        "trained {} with {} trees on {} labeled / {} unlabeled rows (loss {}, {} features purchased) -> {}",
        cmd.trainer.name(),
        outcome.ensemble.num_trees(),
        ds.labeled_count(),
        ds.unlabeled_count(),
        last.map(|r| format!("{:.6}", r.train_loss)).unwrap_or_else(|| "n/a".into()),
        last.map(|r| r.features_purchased).unwrap_or(0),
        cmd.out.display()
    );
    Ok(())
}

fn truth_path(out: &Path) -> PathBuf {
    match out.file_stem() {
        Some(stem) => {
            let mut name = stem.to_os_string();
            name.push(".truth.csv");
            out.with_file_name(name)
        }
        None => out.with_extension("truth.csv"),
    }
}

fn cmd_synth(cmd: SynthCmd) -> Result<()> {
    let cfg = SynthConfig {
        shape: cmd.shape,
        points_per_class: cmd.per_class,
        noise: cmd.noise,
        labeled_per_class: cmd.labeled_per_class,
        seed: cmd.seed,
    };
    let out = generate(&cfg)?;
    save_dataset(&out.data, &cmd.out)?;
    let truth = truth_path(&cmd.out);
    save_dataset(&out.truth, &truth)?;
    println!(
        "wrote {} rows ({} labeled) to {} and ground truth to {}",
        out.data.rows(),
        out.data.labeled_count(),
        cmd.out.display(),
        truth.display()
    );
    Ok(())
}

fn cmd_eval(cmd: EvalCmd) -> Result<()> {
    let loaded = load_model(&cmd.model)?;
    let mut ds = load_dataset(&cmd.data, None)?;
    if let Some(split_path) = &cmd.split {
        ds = load_split(&ds, split_path)?.test;
    }
    if ds.fingerprint() != loaded.data_fingerprint {
        eprintln!(
            "note: evaluation data differs from the data this model was trained on \
             (fingerprint mismatch)"
        );
    }
    let early_exit = cmd.early_exit_interval.map(|interval| {
        if cmd.exit_drop_low_ranked {
            EarlyExit::drop_low_ranked(interval, cmd.exit_keep)
        } else {
            EarlyExit::confident_positive(interval, cmd.early_exit_threshold)
        }
    });
    let result = evaluate(
        &loaded.ensemble,
        &ds,
        cmd.metric,
        cmd.tree_limit,
        early_exit,
        cmd.unit_cost,
    )?;
    println!(
        "{} = {:.6} (mean feature cost {:.4}, mean trees {:.2}, mean total cost {:.4}, {} inputs)",
        result.metric,
        result.metric_value,
        result.cost.mean_feature_cost(),
        result.cost.mean_trees(),
        result.cost.mean_total_cost,
        ds.rows()
    );
    if let Some(out) = &cmd.out {
        let csv = format!(
            "metric,value,mean_feature_cost,mean_trees,mean_total_cost,inputs\n{},{},{},{},{},{}\n",
            result.metric,
            result.metric_value,
            result.cost.mean_feature_cost(),
            result.cost.mean_trees(),
            result.cost.mean_total_cost,
            ds.rows()
        );
        write_text(out, &csv)?;
    }
    if let Some(trace_path) = &cmd.trace {
        let trace = metric_per_tree(&loaded.ensemble, &ds, cmd.metric)?;
        let mut csv = String::from("trainer,tree_index,metric\n");
        for (i, v) in trace.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{}\n",
                loaded.ensemble.trainer().name(),
                i + 1,
                v
            ));
        }
        write_text(trace_path, &csv)?;
    }
    Ok(())
}

fn cmd_sweep(cmd: SweepCmd) -> Result<()> {
    let base = cmd.flags.to_config()?;
    let (train_ds, test_ds) = match (&cmd.test, &cmd.split) {
        (Some(test), None) => {
            let train_ds = load_dataset(&cmd.data, cmd.costs.as_deref())?;
            let test_ds = load_dataset(test, None)?;
            (train_ds, test_ds)
        }
        (None, Some(split_path)) => {
            let ds = load_dataset(&cmd.data, cmd.costs.as_deref())?;
            let split = load_split(&ds, split_path)?;
            (split.train, split.test)
        }
        (Some(_), Some(_)) => {
            return Err(Error::Invalid("--test and --split are mutually exclusive".into()))
        }
        (None, None) => {
            return Err(Error::Invalid("sweep needs --test or --split".into()))
        }
    };
    let trainers = if cmd.trainers.is_empty() {
        vec![TrainerKind::Grbb]
    } else {
        cmd.trainers.clone()
    };
    let grid = parse_grid(&cmd.mu_grid)?;
    let seeds = seed_range(cmd.seed_base, cmd.seeds)?;
    let opts = SweepOptions {
        labeled_count: cmd.labeled,
        by_query: cmd.by_query,
        metric: cmd.metric,
        tree_limit: cmd.tree_limit,
        tree_eval_unit_cost: cmd.unit_cost,
    };
    let result = sweep_cost_weight(&train_ds, &test_ds, &base, &trainers, &grid, &seeds, &opts)?;
    for (trainer, weight, seed, message) in result.failures() {
        eprintln!(
            "warning: cell (trainer={}, mu={}, seed={}) failed: {}",
            trainer.name(),
            weight,
            seed,
            message
        );
    }
    let ok = result.cells.iter().filter(|c| c.outcome.is_ok()).count();
    if ok == 0 {
        return Err(Error::Invalid("every sweep cell failed".into()));
    }
    write_text(&cmd.out, &result.to_csv())?;
    println!(
        "swept {} cells ({} ok, {} failed) -> {}",
        result.cells.len(),
        ok,
        result.cells.len() - ok,
        cmd.out.display()
    );
    Ok(())
}

fn cmd_variance(cmd: VarianceCmd) -> Result<()> {
    let base = cmd.flags.to_config()?;
    let ds = load_dataset(&cmd.data, cmd.costs.as_deref())?;
    let counts = parse_usize_list(&cmd.labeled_counts, "labeled count")?;
    let grid = parse_grid(&cmd.mu_grid)?;
    let seeds = seed_range(cmd.seed_base, cmd.seeds)?;
    let cells = sweep_average_bound(&ds, &counts, &grid, &seeds, &base, cmd.trainer, cmd.hessian)?;
    let mut csv = String::from("labeled_count,mu,avg_link_variance,seeds\n");
    for cell in &cells {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            cell.labeled_count, cell.cost_weight, cell.avg_link_variance, cell.seeds
        ));
    }
    write_text(&cmd.out, &csv)?;
    println!(
        "computed {} variance cells ({} hessian) -> {}",
        cells.len(),
        cmd.hessian.name(),
        cmd.out.display()
    );
    Ok(())
}

fn cmd_graph(cmd: GraphCmd) -> Result<()> {
    if cmd.weights_out.is_none() && cmd.laplacian_out.is_none() {
        return Err(Error::Invalid(
            "nothing to export: pass --weights-out and/or --laplacian-out".into(),
        ));
    }
    let ds = load_dataset(&cmd.data, None)?;
    let sys = LaplacianSystem::build(
        &ds,
        cmd.k,
        parse_kernel(&cmd.kernel, cmd.bandwidth)?,
        Metric::Euclidean,
    )?;
    let edges: usize = (0..sys.rows()).map(|i| sys.neighbors(i).len()).sum::<usize>() / 2;
    if let Some(path) = &cmd.weights_out {
        let mut buf = Vec::new();
        sys.write_weights_coo(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &cmd.laplacian_out {
        let mut buf = Vec::new();
        sys.write_laplacian_coo(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    }
    match sys.bandwidth() {
        Some(bw) => println!(
            "graph over {} rows: {} edges, heat bandwidth {:.6}",
            sys.rows(),
            edges,
            bw
        ),
        None => println!("graph over {} rows: {} edges", sys.rows(), edges),
    }
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(cmd) => cmd_train(cmd),
        Command::Synth(cmd) => cmd_synth(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Sweep(cmd) => cmd_sweep(cmd),
        Command::Variance(cmd) => cmd_variance(cmd),
        Command::Graph(cmd) => cmd_graph(cmd),
    }
}

fn main() -> std::process::ExitCode {
    match run() {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {}", s);
                source = s.source();
            }
            std::process::ExitCode::from(1)
        }
    }
}
