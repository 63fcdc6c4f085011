//! Synthetic two-class manifolds for semi-supervised experiments.
//!
//! Both generators produce two interleaved 2-D structures where cluster
//! membership is obvious from geometry but nearly invisible from a couple of
//! labels: exactly `labeled_per_class` rows per class keep their labels and
//! everything else is unlabeled. That is the regime where propagating
//! gradients through the neighbor graph shines and plain boosting has nothing
//! to work with.
//!
//! Rows are generated labeled-first so the partially labeled dataset and the
//! fully labeled ground-truth dataset line up row for row (and line for line
//! once written to disk).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Which 2-D manifold to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Two interleaved half-circles.
    TwoMoons,
    /// Two concentric circles (radii 1 and 2).
    ConcentricRings,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::TwoMoons => "two-moons",
            Shape::ConcentricRings => "rings",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-moons" | "moons" => Ok(Shape::TwoMoons),
            "rings" | "concentric-rings" => Ok(Shape::ConcentricRings),
            other => Err(Error::Invalid(format!(
                "unknown shape '{}' (expected two-moons or rings)",
                other
            ))),
        }
    }
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub shape: Shape,
    pub points_per_class: usize,
    /// Standard deviation of isotropic Gaussian noise added to every point.
    pub noise: f64,
    /// Rows per class that keep their label.
    pub labeled_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            shape: Shape::TwoMoons,
            points_per_class: 200,
            noise: 0.1,
            labeled_per_class: 1,
            seed: 0,
        }
    }
}

/// A generated dataset plus its fully labeled twin for evaluation.
///
/// `data` hides all but `labeled_per_class` labels per class; `truth` has
/// identical rows (same order, same values) with every label present.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub data: Dataset,
    pub truth: Dataset,
}

/// Samples the manifold. Deterministic in `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    if cfg.points_per_class == 0 {
        return Err(Error::Invalid("points_per_class must be at least 1".into()));
    }
    if cfg.labeled_per_class > cfg.points_per_class {
        return Err(Error::Invalid(format!(
            "labeled_per_class {} exceeds points_per_class {}",
            cfg.labeled_per_class, cfg.points_per_class
        )));
    }
    if !(cfg.noise.is_finite() && cfg.noise >= 0.0) {
        return Err(Error::Invalid(format!(
            "noise must be finite and non-negative, got {}",
            cfg.noise
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE))
        .expect("std validated above");

    // Per class: clean manifold points, then noise.
    let mut class_points: Vec<Vec<[f64; 2]>> = Vec::with_capacity(2);
    for class in 0..2usize {
        let mut points = Vec::with_capacity(cfg.points_per_class);
        for _ in 0..cfg.points_per_class {
            let base = match cfg.shape {
                Shape::TwoMoons => {
                    let t = rng.random_range(0.0..std::f64::consts::PI);
                    if class == 0 {
                        [t.cos(), t.sin()]
                    } else {
                        [1.0 - t.cos(), 0.5 - t.sin()]
                    }
                }
                Shape::ConcentricRings => {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    let radius = if class == 0 { 1.0 } else { 2.0 };
                    [radius * theta.cos(), radius * theta.sin()]
                }
            };
            let jitter = if cfg.noise > 0.0 {
                [noise.sample(&mut rng), noise.sample(&mut rng)]
            } else {
                [0.0, 0.0]
            };
            points.push([base[0] + jitter[0], base[1] + jitter[1]]);
        }
        class_points.push(points);
    }

    // Which indices within each class stay labeled.
    let mut labeled_idx: Vec<Vec<bool>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut order: Vec<usize> = (0..cfg.points_per_class).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut flags = vec![false; cfg.points_per_class];
        for &i in order.iter().take(cfg.labeled_per_class) {
            flags[i] = true;
        }
        labeled_idx.push(flags);
    }

    // Assemble labeled rows first (class 0 then 1), then unlabeled rows, so
    // the dataset's labeled-first invariant holds without reordering and the
    // truth twin aligns row by row.
    let mut rows = Vec::with_capacity(2 * cfg.points_per_class);
    let mut labels = Vec::with_capacity(2 * cfg.points_per_class);
    let mut truth_labels = Vec::with_capacity(2 * cfg.points_per_class);
    for pass in 0..2 {
        let labeled_pass = pass == 0;
        for class in 0..2usize {
            for (i, point) in class_points[class].iter().enumerate() {
                if labeled_idx[class][i] == labeled_pass {
                    rows.push(point.to_vec());
                    labels.push(labeled_pass.then_some(class as u8));
                    truth_labels.push(Some(class as u8));
                }
            }
        }
    }

    let data = Dataset::new(rows.clone(), labels, None, None, None)?;
    let truth = Dataset::new(rows, truth_labels, None, None, None)?;
    debug_assert_eq!(data.features(), truth.features());
    Ok(SynthOutput { data, truth })
}
