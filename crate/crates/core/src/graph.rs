//! k-nearest-neighbor similarity graphs and their unnormalized Laplacians.
//!
//! The graph couples labeled and unlabeled inputs: a directed k-NN graph is
//! built under the Euclidean metric and symmetrized as `W = max(A, Aᵀ)`, so an
//! edge exists when either endpoint selects the other. The Laplacian is the
//! unnormalized `L = D - W`. Rows follow the dataset's internal order, so the
//! first `labeled_count` indices form the labeled block and the trailing
//! indices the unlabeled block — the block structure every solver here relies
//! on.
//!
//! [`PropagationOperator`] owns a factorization of the unlabeled-by-unlabeled
//! block and pushes labeled-loss gradients onto unlabeled inputs by solving
//! `(L_UU + ridge·I) g_U = W_UL g_L`, the stationarity condition for the
//! graph-smoothness objective when only labeled gradients are pinned. The
//! factorization is built once and reused across boosting iterations.

use std::io;

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Ridge added to the unlabeled Laplacian block before factorization unless
/// the caller overrides it. Keeps barely-connected graphs solvable without
/// visibly perturbing well-posed systems.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Unlabeled-block size above which the propagation operator switches from a
/// dense Cholesky factorization to preconditioned conjugate gradients on the
/// sparse block.
const DENSE_SOLVER_LIMIT: usize = 2000;

/// Edge weight function applied to k-NN neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Every selected edge has weight 1.
    Binary,
    /// `exp(-dist² / (2·bandwidth²))`; `None` resolves the bandwidth to the
    /// median over all directed k-NN distances at build time.
    Heat { bandwidth: Option<f64> },
}

/// Distance used for neighbor selection. Only the Euclidean metric is
/// implemented; the enum keeps call sites explicit about that choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
}

/// Symmetric weighted graph over all dataset rows plus its Laplacian,
/// stored as adjacency lists (the Laplacian is never materialized densely
/// except on demand for the variance module).
#[derive(Debug, Clone)]
pub struct LaplacianSystem {
    labeled: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    degrees: Vec<f64>,
    /// Heat-kernel bandwidth actually used, if that kernel was selected.
    bandwidth: Option<f64>,
}

impl LaplacianSystem {
    /// Builds the k-NN graph over every row of `ds` (labeled and unlabeled).
    ///
    /// `neighbor_count` must be at least 1 and strictly less than the number
    /// of rows. Errors when all rows are identical (no geometry to build a
    /// graph from) or when the heat kernel resolves to a zero bandwidth.
    pub fn build(
        ds: &Dataset,
        neighbor_count: usize,
        kernel: Kernel,
        _metric: Metric,
    ) -> Result<Self> {
        let rows = ds.rows();
        if neighbor_count == 0 {
            return Err(Error::Invalid("neighbor count must be at least 1".into()));
        }
        if neighbor_count >= rows {
            return Err(Error::Invalid(format!(
                "neighbor count {} must be smaller than the number of rows {}",
                neighbor_count, rows
            )));
        }
        let first = ds.row(0);
        if (1..rows).all(|i| ds.row(i) == first) {
            return Err(Error::Invalid(
                "all rows are identical; k-NN graph construction needs distinct points".into(),
            ));
        }

        // Directed k-NN under squared Euclidean distance, ties broken by the
        // lower row index so the graph is a pure function of the data.
        let mut directed: Vec<Vec<(usize, f64)>> = Vec::with_capacity(rows);
        for i in 0..rows {
            let xi = ds.row(i);
            let mut dist: Vec<(f64, usize)> = (0..rows)
                .filter(|&j| j != i)
                .map(|j| {
                    let xj = ds.row(j);
                    let d2: f64 = xi
                        .iter()
                        .zip(xj)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, j)
                })
                .collect();
            dist.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            directed.push(
                dist[..neighbor_count]
                    .iter()
                    .map(|&(d2, j)| (j, d2))
                    .collect(),
            );
        }

        let bandwidth = match kernel {
            Kernel::Binary => None,
            Kernel::Heat { bandwidth } => {
                let bw = match bandwidth {
                    Some(b) => b,
                    None => {
                        let mut dists: Vec<f64> = directed
                            .iter()
                            .flatten()
                            .map(|&(_, d2)| d2.sqrt())
                            .collect();
                        dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                        let mid = dists.len() / 2;
                        if dists.len().is_multiple_of(2) {
                            0.5 * (dists[mid - 1] + dists[mid])
                        } else {
                            dists[mid]
                        }
                    }
                };
                if !(bw.is_finite() && bw > 0.0) {
                    return Err(Error::Invalid(format!(
                        "heat kernel bandwidth must be positive, got {} \
                         (duplicate-heavy data can drive the median distance to zero; \
                         set an explicit bandwidth or use the binary kernel)",
                        bw
                    )));
                }
                Some(bw)
            }
        };

        // Symmetrize: an undirected edge exists when either direction was
        // selected; the weight depends only on the (symmetric) distance, so
        // max(A, Aᵀ) is just the union of the directed edge sets.
        let mut edges: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        for (i, neigh) in directed.iter().enumerate() {
            for &(j, d2) in neigh {
                let key = (i.min(j), i.max(j));
                let w = match kernel {
                    Kernel::Binary => 1.0,
                    Kernel::Heat { .. } => {
                        let bw = bandwidth.expect("resolved above");
                        (-d2 / (2.0 * bw * bw)).exp()
                    }
                };
                edges.insert(key, w);
            }
        }

        let mut sys = Self::from_edge_map(rows, ds.labeled_count(), edges)?;
        sys.bandwidth = bandwidth;
        Ok(sys)
    }

    /// Builds a system directly from undirected weighted edges — the
    /// constructor used by tests and by callers with a precomputed graph.
    /// Each `(i, j, w)` must have `i != j`, in-range indices, and `w > 0`;
    /// duplicate pairs are rejected.
    pub fn from_edges(rows: usize, labeled: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if labeled > rows {
            return Err(Error::Dimension(format!(
                "labeled count {} exceeds row count {}",
                labeled, rows
            )));
        }
        let mut map = std::collections::BTreeMap::new();
        for &(i, j, w) in edges {
            if i == j {
                return Err(Error::Invalid(format!("self edge on node {}", i)));
            }
            if i >= rows || j >= rows {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) out of range for {} rows",
                    i, j, rows
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) weight {} must be finite and positive",
                    i, j, w
                )));
            }
            if map.insert((i.min(j), i.max(j)), w).is_some() {
                return Err(Error::Invalid(format!("duplicate edge ({}, {})", i, j)));
            }
        }
        Self::from_edge_map(rows, labeled, map)
    }

    fn from_edge_map(
        rows: usize,
        labeled: usize,
        edges: std::collections::BTreeMap<(usize, usize), f64>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); rows];
        let mut degrees = vec![0.0; rows];
        for (&(i, j), &w) in &edges {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
            degrees[i] += w;
            degrees[j] += w;
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(LaplacianSystem {
            labeled,
            adjacency,
            degrees,
            bandwidth: None,
        })
    }

    /// Number of graph nodes (= dataset rows).
    pub fn rows(&self) -> usize {
        self.adjacency.len()
    }

    /// Size of the labeled block (indices `0..labeled_count()`).
    pub fn labeled_count(&self) -> usize {
        self.labeled
    }

    /// Size of the unlabeled block.
    pub fn unlabeled_count(&self) -> usize {
        self.rows() - self.labeled
    }

    /// Neighbors of node `i` with edge weights, ascending by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Weighted degree of node `i`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    /// Weight of edge `(i, j)`; 0 when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .map(|pos| self.adjacency[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Heat-kernel bandwidth in effect, if that kernel built this graph.
    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    /// Applies the Laplacian: `(L f)_i = deg_i · f_i − Σ_j w_ij f_j`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "vector has {} entries, graph has {} nodes",
                f.len(),
                self.rows()
            )));
        }
        let mut out = Vec::with_capacity(self.rows());
        for i in 0..self.rows() {
            let mut v = self.degrees[i] * f[i];
            for &(j, w) in &self.adjacency[i] {
                v -= w * f[j];
            }
            out.push(v);
        }
        Ok(out)
    }

    /// The smoothness penalty `fᵀ L f`, computed through [`Self::apply`].
    /// Equals `Σ_{i<j} w_ij (f_i − f_j)²`, which is the identity the unit
    /// tests check against.
    pub fn quadratic_form(&self, f: &[f64]) -> Result<f64> {
        let lf = self.apply(f)?;
        Ok(f.iter().zip(&lf).map(|(a, b)| a * b).sum())
    }

    /// Materializes `L` densely (used by the variance module, whose Fisher
    /// matrix is dense anyway).
    pub fn dense_laplacian(&self) -> na::DMatrix<f64> {
        let n = self.rows();
        let mut m = na::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.degrees[i];
            for &(j, w) in &self.adjacency[i] {
                m[(i, j)] = -w;
            }
        }
        m
    }

    /// Writes the nonzero entries of `W` as `row col value` lines, row-major
    /// with ascending columns — plain coordinate format for eyeballing the
    /// graph or feeding external tooling.
    pub fn write_weights_coo(&self, out: &mut dyn io::Write) -> io::Result<()> {
        for i in 0..self.rows() {
            for &(j, w) in &self.adjacency[i] {
                writeln!(out, "{} {} {}", i, j, w)?;
            }
        }
        Ok(())
    }

    /// Writes `L = D − W` in the same coordinate format, diagonal included,
    /// so every row appears even for isolated nodes.
    pub fn write_laplacian_coo(&self, out: &mut dyn io::Write) -> io::Result<()> {
        for i in 0..self.rows() {
            let mut wrote_diagonal = false;
            for &(j, w) in &self.adjacency[i] {
                if j > i && !wrote_diagonal {
                    writeln!(out, "{} {} {}", i, i, self.degrees[i])?;
                    wrote_diagonal = true;
                }
                writeln!(out, "{} {} {}", i, j, -w)?;
            }
            if !wrote_diagonal {
                writeln!(out, "{} {} {}", i, i, self.degrees[i])?;
            }
        }
        Ok(())
    }

    /// Builds the cached solver that pushes labeled gradients onto unlabeled
    /// nodes. `ridge` is added to the diagonal of the unlabeled block; pass
    /// [`DEFAULT_RIDGE`] unless you have a reason not to.
    pub fn propagation_operator(&self, ridge: f64) -> Result<PropagationOperator> {
        PropagationOperator::build(self, ridge)
    }
}

enum Solver {
    Dense(na::Cholesky<f64, na::Dyn>),
    /// Jacobi-preconditioned conjugate gradients over the sparse block,
    /// for unlabeled blocks too large to factor densely.
    Iterative {
        rows: Vec<Vec<(usize, f64)>>,
        inv_diag: Vec<f64>,
    },
}

/// Pushes labeled-loss gradients onto unlabeled inputs by solving the
/// unlabeled block of the graph-smoothness stationarity condition. Built once
/// per training run; the factorization is reused every iteration.
pub struct PropagationOperator {
    labeled: usize,
    unlabeled: usize,
    ridge: f64,
    /// Per unlabeled node (local index): labeled neighbors with weights,
    /// i.e. the rows of `W_UL`.
    cross: Vec<Vec<(usize, f64)>>,
    solver: Solver,
}

impl PropagationOperator {
    fn build(sys: &LaplacianSystem, ridge: f64) -> Result<Self> {
        if !(ridge.is_finite() && ridge >= 0.0) {
            return Err(Error::Invalid(format!(
                "ridge must be finite and non-negative, got {}",
                ridge
            )));
        }
        let n = sys.labeled_count();
        let m = sys.unlabeled_count();

        let mut cross = Vec::with_capacity(m);
        let mut block_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for u in 0..m {
            let node = n + u;
            let mut labeled_neigh = Vec::new();
            let mut row = vec![(u, sys.degree(node) + ridge)];
            for &(j, w) in sys.neighbors(node) {
                if j < n {
                    labeled_neigh.push((j, w));
                } else {
                    row.push((j - n, -w));
                }
            }
            row.sort_unstable_by_key(|&(c, _)| c);
            cross.push(labeled_neigh);
            block_rows.push(row);
        }

        let solver = if m <= DENSE_SOLVER_LIMIT {
            let mut block = na::DMatrix::zeros(m, m);
            for (u, row) in block_rows.iter().enumerate() {
                for &(c, v) in row {
                    block[(u, c)] = v;
                }
            }
            let chol = if m == 0 {
                na::Cholesky::new(block).expect("empty matrix is trivially definite")
            } else {
                na::Cholesky::new(block).ok_or_else(|| singular_block_error(ridge))?
            };
            Solver::Dense(chol)
        } else {
            let inv_diag: Vec<f64> = block_rows
                .iter()
                .enumerate()
                .map(|(u, row)| {
                    let d = row
                        .iter()
                        .find(|&&(c, _)| c == u)
                        .map(|&(_, v)| v)
                        .unwrap_or(0.0);
                    if d <= 0.0 {
                        return Err(singular_block_error(ridge));
                    }
                    Ok(1.0 / d)
                })
                .collect::<Result<_>>()?;
            let solver = Solver::Iterative {
                rows: block_rows,
                inv_diag,
            };
            // Probe once at build time so disconnected graphs fail here, not
            // mid-training.
            solve_cg(&solver, &vec![1.0; m]).map_err(|_| singular_block_error(ridge))?;
            solver
        };

        Ok(PropagationOperator {
            labeled: n,
            unlabeled: m,
            ridge,
            cross,
            solver,
        })
    }

    /// Number of labeled inputs the operator expects gradients for.
    pub fn labeled_count(&self) -> usize {
        self.labeled
    }

    /// Number of unlabeled inputs it produces gradients for.
    pub fn unlabeled_count(&self) -> usize {
        self.unlabeled
    }

    /// Ridge the factorization was built with.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Maps a labeled-block gradient to the induced unlabeled-block gradient
    /// by solving `(L_UU + ridge·I) g_U = W_UL g_L`.
    pub fn propagate(&self, labeled_grad: &[f64]) -> Result<Vec<f64>> {
        if labeled_grad.len() != self.labeled {
            return Err(Error::Dimension(format!(
                "gradient has {} entries, labeled block has {}",
                labeled_grad.len(),
                self.labeled
            )));
        }
        if self.unlabeled == 0 {
            return Ok(Vec::new());
        }
        let mut rhs = vec![0.0; self.unlabeled];
        for (u, neigh) in self.cross.iter().enumerate() {
            for &(l, w) in neigh {
                rhs[u] += w * labeled_grad[l];
            }
        }
        match &self.solver {
            Solver::Dense(chol) => {
                let x = chol.solve(&na::DVector::from_column_slice(&rhs));
                Ok(x.as_slice().to_vec())
            }
            solver @ Solver::Iterative { .. } => solve_cg(solver, &rhs),
        }
    }
}

fn singular_block_error(ridge: f64) -> Error {
    Error::Singular(format!(
        "the unlabeled Laplacian block is not positive definite (ridge = {}); \
         this happens when a connected component contains no labeled input — \
         add labels there, raise k, or use a positive ridge",
        ridge
    ))
}

/// Jacobi-preconditioned CG on the sparse unlabeled block.
fn solve_cg(solver: &Solver, rhs: &[f64]) -> Result<Vec<f64>> {
    let (rows, inv_diag) = match solver {
        Solver::Iterative { rows, inv_diag } => (rows, inv_diag),
        Solver::Dense(_) => unreachable!("solve_cg is only called on the iterative solver"),
    };
    let m = rhs.len();
    let matvec = |x: &[f64], out: &mut [f64]| {
        for (u, row) in rows.iter().enumerate() {
            out[u] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    };

    let mut x = vec![0.0; m];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-12 * rhs_norm.max(1.0);
    let mut ap = vec![0.0; m];

    for _ in 0..20 * m.max(1) {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol {
            return Ok(x);
        }
        matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::Singular(
                "conjugate gradient broke down on the unlabeled block".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..m {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rnorm <= tol {
        Ok(x)
    } else {
        Err(Error::Singular(
            "conjugate gradient did not converge on the unlabeled block".into(),
        ))
    }
}
