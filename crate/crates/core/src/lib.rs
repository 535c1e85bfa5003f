//! Stochastic dual coordinate ascent with linearized ADMM for regularized
//! empirical risk minimization with structured penalties ψ(Bᵀw).
//!
//! The crate provides the solver loop itself ([`solver`]), the loss families
//! with analytic conjugate proxes ([`losses`]), elastic-net simple
//! regularizers paired with splitting matrices ([`regularizers`]), problem
//! construction and file formats ([`data`]), and the few sparse kernels
//! everything is built on ([`linalg`]).

pub mod data;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod regularizers;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{DenseVector, SparseColumnMatrix};
pub use losses::LossFamily;
pub use regularizers::{SimpleRegularizer, StructuredRegularizer};
pub use solver::{ProblemInstance, SolverConfig, TraceRecord};
