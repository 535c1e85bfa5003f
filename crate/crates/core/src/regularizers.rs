//! Structured regularizers as (simple ψ, splitting matrix B) pairs.
//!
//! A composite penalty ψ̃(w) = ψ(Bᵀw) whose direct proximal operator is hard
//! becomes tractable once B absorbs the structure: the remaining ψ is a
//! separable elastic net over coordinates or disjoint groups, with an
//! analytic prox (elastic-net scaled soft thresholding), an analytic
//! conjugate, and the Moreau decomposition
//!
//! ```text
//! prox(q | sψ) + prox(q | (sψ)*) = q
//! ```
//!
//! Two constructions are provided: row/column groups of a reshaped grid
//! duplicated through Bᵀ = [I; I] (overlapped group penalty), and an
//! edge-incidence stack Bᵀ = [I; F] for graph-guided fusion.

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SparseColumnMatrix};

/// One group of coordinates with its weight.
#[derive(Clone, Debug)]
pub struct Group {
    pub indices: Vec<usize>,
    pub weight: f64,
}

/// Separable penalty with an analytic prox. Per coordinate (or group g with
/// the Euclidean norm) the term is c·(‖u‖ + (ε/2)‖u‖²); ε = 0 recovers the
/// plain ℓ₁ / group-lasso penalty.
#[derive(Clone, Debug)]
pub enum SimpleRegularizer {
    SeparableElasticNetL1 {
        weights: Vec<f64>,
        eps: f64,
    },
    GroupElasticNetL2 {
        dim: usize,
        groups: Vec<Group>,
        eps: f64,
    },
}

/// Slack band so the indicator-type conjugate (ε = 0) tolerates roundoff on
/// the dual-ball boundary.
const DUAL_BALL_TOL: f64 = 1e-9;

impl SimpleRegularizer {
    pub fn dim(&self) -> usize {
        match self {
            SimpleRegularizer::SeparableElasticNetL1 { weights, .. } => weights.len(),
            SimpleRegularizer::GroupElasticNetL2 { dim, .. } => *dim,
        }
    }

    /// Panics if weights are negative, ε < 0, or the groups fail to
    /// partition the coordinate range.
    pub fn assert_valid(&self) {
        match self {
            SimpleRegularizer::SeparableElasticNetL1 { weights, eps } => {
                assert!(*eps >= 0.0);
                assert!(weights.iter().all(|&c| c >= 0.0 && c.is_finite()));
            }
            SimpleRegularizer::GroupElasticNetL2 { dim, groups, eps } => {
                assert!(*eps >= 0.0);
                let mut seen = vec![false; *dim];
                for g in groups {
                    assert!(g.weight >= 0.0 && g.weight.is_finite());
                    for &i in &g.indices {
                        assert!(i < *dim, "group index {} out of range", i);
                        assert!(!seen[i], "groups must not overlap (index {})", i);
                        seen[i] = true;
                    }
                }
                assert!(
                    seen.iter().all(|&s| s),
                    "groups must cover the coordinate range"
                );
            }
        }
    }

    /// ψ(u).
    pub fn eval(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.dim(), "eval: dimension mismatch");
        match self {
            SimpleRegularizer::SeparableElasticNetL1 { weights, eps } => u
                .iter()
                .zip(weights)
                .map(|(&x, &c)| c * (x.abs() + 0.5 * eps * x * x))
                .sum(),
            SimpleRegularizer::GroupElasticNetL2 { groups, eps, .. } => groups
                .iter()
                .map(|g| {
                    let n = group_norm(u, &g.indices);
                    g.weight * (n + 0.5 * eps * n * n)
                })
                .sum(),
        }
    }

    /// prox(q | scale·ψ): per group, shrink by 1/(1 + ε·c·scale) and
    /// soft-threshold at c·scale/(1 + ε·c·scale).
    pub fn prox(&self, q: &[f64], scale: f64) -> DenseVector {
        assert_eq!(q.len(), self.dim(), "prox: dimension mismatch");
        assert!(scale > 0.0, "prox: scale must be positive");
        match self {
            SimpleRegularizer::SeparableElasticNetL1 { weights, eps } => q
                .iter()
                .zip(weights)
                .map(|(&x, &c)| {
                    let denom = 1.0 + eps * c * scale;
                    soft_threshold(x / denom, c * scale / denom)
                })
                .collect(),
            SimpleRegularizer::GroupElasticNetL2 { dim, groups, eps } => {
                let mut out = vec![0.0; *dim];
                for g in groups {
                    let denom = 1.0 + eps * g.weight * scale;
                    let thr = g.weight * scale / denom;
                    let n = group_norm(q, &g.indices) / denom;
                    let factor = if n > 0.0 {
                        (1.0 - thr / n).max(0.0) / denom
                    } else {
                        0.0
                    };
                    for &i in &g.indices {
                        out[i] = factor * q[i];
                    }
                }
                out
            }
        }
    }

    /// prox(q | (scale·ψ)*) via the Moreau decomposition: q − prox(q | scale·ψ).
    pub fn prox_conjugate(&self, q: &[f64], scale: f64) -> DenseVector {
        self.prox(q, scale)
            .iter()
            .zip(q)
            .map(|(p, x)| x - p)
            .collect()
    }

    /// ψ*(v). Per group: (max(‖v‖ − c, 0))²/(2εc) for ε > 0; for ε = 0 the
    /// indicator of the dual ball ‖v‖ ≤ c, inflated by a small tolerance so
    /// dual-objective monitoring is robust to roundoff.
    pub fn eval_conjugate(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim(), "eval_conjugate: dimension mismatch");
        match self {
            SimpleRegularizer::SeparableElasticNetL1 { weights, eps } => v
                .iter()
                .zip(weights)
                .map(|(&x, &c)| scalar_conjugate(x.abs(), c, *eps))
                .sum(),
            SimpleRegularizer::GroupElasticNetL2 { groups, eps, .. } => groups
                .iter()
                .map(|g| scalar_conjugate(group_norm(v, &g.indices), g.weight, *eps))
                .sum(),
        }
    }
}

fn scalar_conjugate(norm: f64, c: f64, eps: f64) -> f64 {
    if c == 0.0 {
        // conjugate of the zero function: indicator of {0}
        if norm <= DUAL_BALL_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    } else if eps == 0.0 {
        if norm <= c + DUAL_BALL_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        let t = (norm - c).max(0.0);
        t * t / (2.0 * eps * c)
    }
}

fn soft_threshold(x: f64, thr: f64) -> f64 {
    x.signum() * (x.abs() - thr).max(0.0)
}

fn group_norm(u: &[f64], indices: &[usize]) -> f64 {
    indices.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt()
}

/// A simple regularizer together with the splitting matrix B (p×d) and a
/// cached η_B > σ_max(BᵀB) for the linearized y-subproblem.
#[derive(Clone, Debug)]
pub struct StructuredRegularizer {
    pub simple: SimpleRegularizer,
    pub b: SparseColumnMatrix,
    pub eta_b: f64,
}

impl StructuredRegularizer {
    /// Pairs ψ with B and caches η_B = σ_max(BBᵀ) + 1.
    pub fn new(simple: SimpleRegularizer, b: SparseColumnMatrix) -> Self {
        simple.assert_valid();
        assert_eq!(
            simple.dim(),
            b.cols(),
            "splitting matrix must have ψ's dimension many columns"
        );
        let est = b.spectral_norm_gram(1e-10, 20_000);
        if !est.converged {
            eprintln!(
                "warning: power iteration for eta_B did not converge (estimate {:.6e})",
                est.value
            );
        }
        StructuredRegularizer {
            simple,
            b,
            eta_b: est.value + 1.0,
        }
    }

    /// Primal dimension p (rows of B).
    pub fn primal_dim(&self) -> usize {
        self.b.rows()
    }

    /// Split dimension d (columns of B).
    pub fn split_dim(&self) -> usize {
        self.b.cols()
    }

    /// The composite penalty ψ(Bᵀw).
    pub fn eval_composite(&self, w: &[f64]) -> f64 {
        self.simple.eval(&self.b.matvec_transpose(w))
    }
}

/// Overlapped row/column group penalty on a `rows × cols` grid, split by
/// duplicating the variable: Bᵀx = [x; x], with column groups over the first
/// copy and row groups over the second. The grid is stored column-major, so
/// x[r + i·rows] is entry (r, i). Every group carries weight `c` and the
/// elastic-net factor `eps`.
pub fn build_overlapped_group(rows: usize, cols: usize, c: f64, eps: f64) -> StructuredRegularizer {
    assert!(rows > 0 && cols > 0);
    let p = rows * cols;
    let b = SparseColumnMatrix::from_columns(p, (0..2 * p).map(|j| vec![(j % p, 1.0)]).collect());
    let mut groups = Vec::with_capacity(rows + cols);
    for i in 0..cols {
        groups.push(Group {
            indices: (i * rows..(i + 1) * rows).collect(),
            weight: c,
        });
    }
    for r in 0..rows {
        groups.push(Group {
            indices: (0..cols).map(|i| p + r + i * rows).collect(),
            weight: c,
        });
    }
    StructuredRegularizer::new(
        SimpleRegularizer::GroupElasticNetL2 {
            dim: 2 * p,
            groups,
            eps,
        },
        b,
    )
}

/// Graph-guided fusion penalty: Bᵀ = [I; F] with F the signed edge-incidence
/// matrix (F_{e,i} = 1, F_{e,j} = -1 for e = (i, j)), and a coordinatewise
/// elastic net weighted `c1` on the first p coordinates and `c2` on the |E|
/// difference coordinates.
pub fn build_graph_guided(
    p: usize,
    edges: &[(usize, usize)],
    c1: f64,
    c2: f64,
    eps: f64,
) -> Result<StructuredRegularizer> {
    let mut seen = std::collections::HashSet::new();
    for &(i, j) in edges {
        if i >= p || j >= p {
            return Err(Error::InvalidConfig(format!(
                "edge ({}, {}) references a feature >= {}",
                i, j, p
            )));
        }
        if i == j {
            return Err(Error::InvalidConfig(format!(
                "self-loop edge ({}, {})",
                i, j
            )));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::InvalidConfig(format!(
                "duplicate edge ({}, {})",
                i, j
            )));
        }
    }
    let mut columns: Vec<Vec<(usize, f64)>> = (0..p).map(|j| vec![(j, 1.0)]).collect();
    for &(i, j) in edges {
        let col = if i < j {
            vec![(i, 1.0), (j, -1.0)]
        } else {
            vec![(j, -1.0), (i, 1.0)]
        };
        columns.push(col);
    }
    let b = SparseColumnMatrix::from_columns(p, columns);
    let mut weights = vec![c1; p];
    weights.extend(std::iter::repeat_n(c2, edges.len()));
    Ok(StructuredRegularizer::new(
        SimpleRegularizer::SeparableElasticNetL1 { weights, eps },
        b,
    ))
}
