//! The stochastic dual coordinate ascent ADMM loop.
//!
//! The dual of the regularized risk minimization problem
//!
//! ```text
//! min_w (1/n) Σ f_i(z_iᵀw) + ψ(Bᵀw)
//! ```
//!
//! is a linearly constrained composite problem over (x, y):
//!
//! ```text
//! min (1/n) Σ f_i*(x_i) + ψ*(y/n)   s.t.  Zx + By = 0,
//! ```
//!
//! and the primal minimum equals minus the dual minimum. Each iteration
//! picks one block I of a fixed sample partition uniformly at random and
//! performs three linearized updates with multiplier w:
//!
//! ```text
//! q = y + Bᵀ{w - ρ(Zx + By)} / (ρη_B)
//! y ← q - prox(q | nψ(ρη_B ·)/(ρη_B))
//! x_I ← prox(x_I + Z_Iᵀ{w - ρ(Zx + By)} / (ρη_Z,I) | Σ_{i∈I} f_i*/(ρη_Z,I))
//! w ← w - γρ{n(Zx + By) - (n - n/K)(Zx + By)_old}
//! ```
//!
//! The linearization matrices Q = ρ(η_B I - BᵀB) and G_II = ρ(η_Z,I I -
//! Z_IᵀZ_I) cancel the quadratic cross terms, so the y-step reduces to one
//! prox of ψ and the x-step splits into scalar proxes of the conjugate
//! losses. K = 1 recovers linearized batch ADMM.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseVector};
use crate::losses::LossFamily;
use crate::regularizers::StructuredRegularizer;

/// A regularized classification problem: design matrix plus labels, a loss
/// family, and a structured regularizer.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub data: Dataset,
    pub loss: LossFamily,
    pub reg: StructuredRegularizer,
}

impl ProblemInstance {
    pub fn new(data: Dataset, loss: LossFamily, reg: StructuredRegularizer) -> Self {
        assert_eq!(
            data.feature_dim(),
            reg.primal_dim(),
            "regularizer and data disagree on the feature dimension"
        );
        ProblemInstance { data, loss, reg }
    }

    pub fn num_samples(&self) -> usize {
        self.data.num_samples()
    }

    pub fn feature_dim(&self) -> usize {
        self.data.feature_dim()
    }

    pub fn split_dim(&self) -> usize {
        self.reg.split_dim()
    }
}

/// Policy for the y-linearization constant η_B.
#[derive(Clone, Debug)]
pub enum EtaBPolicy {
    /// σ_max(BBᵀ) + 1, cached on the regularizer at build time.
    Standard,
    Explicit(f64),
}

/// Policy for the per-block x-linearization constants η_Z,I.
#[derive(Clone, Debug)]
pub enum EtaZPolicy {
    /// 1.1 σ_max(Z_IᵀZ_I).
    Standard,
    /// (1 + 2γn(1 - 1/K)) σ_max(Z_IᵀZ_I), inflated by 1%; the setting under
    /// which geometric convergence is guaranteed.
    TheoremSafe,
    /// One explicit value per block.
    Explicit(Vec<f64>),
}

/// Optional early stop: both thresholds must hold at a checkpoint.
#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    pub feasibility_tol: f64,
    pub objective_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            feasibility_tol: 1e-8,
            objective_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rho: f64,
    pub gamma: f64,
    /// Partition count K; each iteration updates one of the K blocks.
    pub num_blocks: usize,
    /// One epoch is K iterations (one expected pass over the data).
    pub max_epochs: usize,
    pub eta_b: EtaBPolicy,
    pub eta_z: EtaZPolicy,
    pub seed: u64,
    /// Epochs between trace records.
    pub checkpoint_every: usize,
    pub early_stop: Option<StopRule>,
}

impl SolverConfig {
    /// Experimental defaults: ρ = 0.1, γ = 1/n, sub-batches of ~50 samples.
    pub fn experiment_defaults(n: usize) -> Self {
        assert!(n > 0);
        SolverConfig {
            rho: 0.1,
            gamma: 1.0 / n as f64,
            num_blocks: n.div_ceil(50).clamp(1, n),
            max_epochs: 50,
            eta_b: EtaBPolicy::Standard,
            eta_z: EtaZPolicy::Standard,
            seed: 0,
            checkpoint_every: 1,
            early_stop: None,
        }
    }

    /// Theory-faithful mode: γ = 1/(4n) and the block constants chosen
    /// above the geometric-convergence bound.
    pub fn theorem_safe(n: usize) -> Self {
        SolverConfig {
            gamma: 0.25 / n as f64,
            eta_z: EtaZPolicy::TheoremSafe,
            ..Self::experiment_defaults(n)
        }
    }
}

/// Disjoint index blocks covering 0..n. Blocks may have unequal sizes; the
/// runner selects a block uniformly, so P(i ∈ selected) = 1/K for every i.
#[derive(Clone, Debug)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

/// Random permutation of 0..n chopped into K contiguous chunks of size
/// ⌊n/K⌋ or ⌈n/K⌉. Deterministic given the generator state.
pub fn make_partition<R: Rng>(n: usize, num_blocks: usize, rng: &mut R) -> Partition {
    assert!(
        num_blocks >= 1 && num_blocks <= n,
        "partition count must satisfy 1 <= K <= n"
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let base = n / num_blocks;
    let extra = n % num_blocks;
    let mut blocks = Vec::with_capacity(num_blocks);
    let mut start = 0;
    for k in 0..num_blocks {
        let len = base + usize::from(k < extra);
        blocks.push(order[start..start + len].to_vec());
        start += len;
    }
    Partition { blocks }
}

/// Solver state: dual vectors x (n) and y (d), multiplier w (p), the
/// incrementally maintained product cache Zx, and the resolved
/// linearization constants.
#[derive(Clone, Debug)]
pub struct DualState {
    pub x: DenseVector,
    pub y: DenseVector,
    pub w: DenseVector,
    pub zx_cache: DenseVector,
    pub eta_z: Vec<f64>,
    pub eta_b: f64,
}

impl DualState {
    /// All-zero start state.
    pub fn zeros(problem: &ProblemInstance, eta_z: Vec<f64>, eta_b: f64) -> Self {
        DualState {
            x: vec![0.0; problem.num_samples()],
            y: vec![0.0; problem.split_dim()],
            w: vec![0.0; problem.feature_dim()],
            zx_cache: vec![0.0; problem.feature_dim()],
            eta_z,
            eta_b,
        }
    }

    /// State with given vectors; the product cache is computed fresh.
    pub fn new(
        problem: &ProblemInstance,
        x: DenseVector,
        y: DenseVector,
        w: DenseVector,
        eta_z: Vec<f64>,
        eta_b: f64,
    ) -> Self {
        assert_eq!(x.len(), problem.num_samples());
        assert_eq!(y.len(), problem.split_dim());
        assert_eq!(w.len(), problem.feature_dim());
        let zx_cache = problem.data.design().matvec(&x);
        DualState {
            x,
            y,
            w,
            zx_cache,
            eta_z,
            eta_b,
        }
    }
}

/// One checkpoint of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub epoch: f64,
    /// Cumulative seconds spent inside solver iterations (checkpoint
    /// bookkeeping excluded).
    pub wall_seconds: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// ‖Zx + By‖, recomputed from scratch.
    pub constraint_residual: f64,
    pub test_loss: Option<f64>,
    pub test_error: Option<f64>,
}

/// The y-update: forms q = y + Bᵀ{w - ρ(Zx + By)}/(ρη_B) and returns
/// q - prox(q | nψ(ρη_B ·)/(ρη_B)), evaluated through the Moreau
/// decomposition of the rescaled penalty.
pub fn step_y(problem: &ProblemInstance, state: &DualState, rho: f64) -> DenseVector {
    let reg = &problem.reg;
    let n = problem.num_samples() as f64;
    let c = rho * state.eta_b;
    let by = reg.b.matvec(&state.y);
    let s: Vec<f64> = state
        .w
        .iter()
        .zip(&state.zx_cache)
        .zip(&by)
        .map(|((w, zx), b)| w - rho * (zx + b))
        .collect();
    let bt_s = reg.b.matvec_transpose(&s);
    let q: Vec<f64> = state.y.iter().zip(&bt_s).map(|(y, t)| y + t / c).collect();
    // prox(q | nψ(c·)/c) = prox(cq | cnψ)/c, so by Moreau
    // y = (cq - prox(cq | cnψ))/c = prox(cq | (cnψ)*)/c.
    let cq: Vec<f64> = q.iter().map(|v| c * v).collect();
    let conj = reg.simple.prox_conjugate(&cq, c * n);
    conj.into_iter().map(|v| v / c).collect()
}

/// The block x-update: for each i in the block,
/// x_i ← prox(x_i + z_iᵀ{w - ρ(Zx + By_new)}/(ρη_Z,I) | f_i*/(ρη_Z,I)).
/// Returns the new block values in block order; other coordinates are
/// untouched by contract.
pub fn step_x(
    problem: &ProblemInstance,
    state: &DualState,
    block: &[usize],
    block_index: usize,
    y_new: &[f64],
    rho: f64,
) -> Result<DenseVector> {
    let c = rho * state.eta_z[block_index];
    let by = problem.reg.b.matvec(y_new);
    let s: Vec<f64> = state
        .w
        .iter()
        .zip(&state.zx_cache)
        .zip(&by)
        .map(|((w, zx), b)| w - rho * (zx + b))
        .collect();
    let z = problem.data.design();
    block
        .iter()
        .map(|&i| {
            let zi_s: f64 = z.column(i).iter().map(|&(r, v)| v * s[r]).sum();
            let p_i = state.x[i] + zi_s / c;
            problem.loss.prox_dual(p_i, problem.data.labels()[i], c)
        })
        .collect()
}

/// The multiplier update
/// w ← w - γρ{n(Zx + By)_new - (n - n/K)(Zx + By)_old}.
#[allow(clippy::too_many_arguments)]
pub fn step_w(
    w: &[f64],
    zx_new: &[f64],
    by_new: &[f64],
    zx_old: &[f64],
    by_old: &[f64],
    gamma: f64,
    rho: f64,
    n: usize,
    num_blocks: usize,
) -> DenseVector {
    let nf = n as f64;
    let coef_new = gamma * rho * nf;
    let coef_old = gamma * rho * (nf - nf / num_blocks as f64);
    (0..w.len())
        .map(|i| w[i] - coef_new * (zx_new[i] + by_new[i]) + coef_old * (zx_old[i] + by_old[i]))
        .collect()
}

/// F_P(w) = (1/n) Σ f_i(z_iᵀw) + ψ(Bᵀw).
pub fn primal_objective(problem: &ProblemInstance, w: &[f64]) -> f64 {
    let margins = problem.data.design().matvec_transpose(w);
    let n = problem.num_samples() as f64;
    let risk: f64 = margins
        .iter()
        .zip(problem.data.labels())
        .map(|(&m, &y)| problem.loss.value(m, y))
        .sum();
    risk / n + problem.reg.eval_composite(w)
}

/// (1/n) Σ f_i*(x_i) + ψ*(y/n); +∞ when a coordinate leaves the conjugate
/// domain. At the constrained dual optimum this equals -F_P(w*).
pub fn dual_objective(problem: &ProblemInstance, x: &[f64], y: &[f64]) -> f64 {
    let n = problem.num_samples() as f64;
    let loss_part: f64 = x
        .iter()
        .zip(problem.data.labels())
        .map(|(&xi, &yi)| problem.loss.conjugate(xi, yi))
        .sum();
    let y_over_n: Vec<f64> = y.iter().map(|v| v / n).collect();
    loss_part / n + problem.reg.simple.eval_conjugate(&y_over_n)
}

/// Optimality-condition residuals: the constraint norm ‖Zx + By‖ and the
/// largest distance of z_iᵀw from the subdifferential ∂f_i*(x_i).
pub fn kkt_residuals(problem: &ProblemInstance, state: &DualState) -> (f64, f64) {
    let z = problem.data.design();
    let zx = z.matvec(&state.x);
    let by = problem.reg.b.matvec(&state.y);
    let feasibility = norm2(&zx.iter().zip(&by).map(|(a, b)| a + b).collect::<Vec<f64>>());
    let margins = z.matvec_transpose(&state.w);
    let mut stationarity: f64 = 0.0;
    for (i, &g) in margins.iter().enumerate() {
        let xi = state.x[i];
        let yi = problem.data.labels()[i];
        stationarity = stationarity.max(conjugate_subdiff_distance(problem.loss, xi, yi, g));
    }
    (feasibility, stationarity)
}

/// Distance from g to ∂f*(x) for label y. The smoothed-hinge conjugate has
/// gradient y + x on the interior of its domain y·x ∈ [-1, 0] and half-line
/// subdifferentials at the endpoints.
fn conjugate_subdiff_distance(loss: LossFamily, x: f64, y: f64, g: f64) -> f64 {
    const BOUNDARY: f64 = 1e-12;
    let m = x * y;
    if !(-1.0 - BOUNDARY..=BOUNDARY).contains(&m) {
        return f64::INFINITY;
    }
    match loss {
        LossFamily::SmoothedHinge => {
            if m.abs() <= BOUNDARY {
                // at x = 0 the subdifferential is {s : s·y >= 1}
                (1.0 - g * y).max(0.0)
            } else if (m + 1.0).abs() <= BOUNDARY {
                // at x = -y it is {s : s·y <= 0}
                (g * y).max(0.0)
            } else {
                (g - (y + x)).abs()
            }
        }
        LossFamily::Logistic => {
            let s = -m;
            if s <= 0.0 || s >= 1.0 {
                f64::INFINITY
            } else {
                (g - y * ((1.0 - s) / s).ln()).abs()
            }
        }
    }
}

fn resolve_eta_b(problem: &ProblemInstance, config: &SolverConfig) -> f64 {
    match config.eta_b {
        EtaBPolicy::Standard => problem.reg.eta_b,
        EtaBPolicy::Explicit(v) => v,
    }
}

fn resolve_eta_z(
    problem: &ProblemInstance,
    config: &SolverConfig,
    partition: &Partition,
) -> Result<Vec<f64>> {
    let k = partition.blocks.len();
    if let EtaZPolicy::Explicit(values) = &config.eta_z {
        if values.len() != k {
            return Err(Error::InvalidConfig(format!(
                "eta_z: expected {} block values, got {}",
                k,
                values.len()
            )));
        }
        if values.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidConfig("eta_z values must be positive".into()));
        }
        return Ok(values.clone());
    }
    let n = problem.num_samples() as f64;
    let factor = match config.eta_z {
        EtaZPolicy::Standard => 1.1,
        EtaZPolicy::TheoremSafe => (1.0 + 2.0 * config.gamma * n * (1.0 - 1.0 / k as f64)) * 1.01,
        EtaZPolicy::Explicit(_) => unreachable!(),
    };
    let z = problem.data.design();
    Ok(partition
        .blocks
        .iter()
        .map(|block| {
            let sub = z.select_columns(block);
            let est = sub.spectral_norm_gram(1e-10, 20_000);
            if !est.converged {
                eprintln!(
                    "warning: power iteration for a block eta_Z did not converge (estimate {:.6e})",
                    est.value
                );
            }
            (factor * est.value).max(1e-12)
        })
        .collect())
}

fn validate_config(problem: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    let n = problem.num_samples();
    if !config.rho.is_finite() || config.rho <= 0.0 {
        return Err(Error::InvalidConfig("rho must be positive".into()));
    }
    if !config.gamma.is_finite() || config.gamma <= 0.0 {
        return Err(Error::InvalidConfig("gamma must be positive".into()));
    }
    if config.num_blocks == 0 || config.num_blocks > n {
        return Err(Error::InvalidConfig(format!(
            "partition count must satisfy 1 <= K <= n = {}, got {}",
            n, config.num_blocks
        )));
    }
    if config.checkpoint_every == 0 {
        return Err(Error::InvalidConfig("checkpoint_every must be >= 1".into()));
    }
    Ok(())
}

fn checkpoint(
    problem: &ProblemInstance,
    state: &DualState,
    test_set: Option<&Dataset>,
    epoch: f64,
    wall_seconds: f64,
) -> TraceRecord {
    let zx = problem.data.design().matvec(&state.x);
    let by = problem.reg.b.matvec(&state.y);
    let residual: Vec<f64> = zx.iter().zip(&by).map(|(a, b)| a + b).collect();
    let (test_loss, test_error) = match test_set {
        Some(t) => {
            let (l, e) = test_metrics(problem.loss, &state.w, t);
            (Some(l), Some(e))
        }
        None => (None, None),
    };
    TraceRecord {
        epoch,
        wall_seconds,
        primal_objective: primal_objective(problem, &state.w),
        dual_objective: dual_objective(problem, &state.x, &state.y),
        constraint_residual: norm2(&residual),
        test_loss,
        test_error,
    }
}

fn test_metrics(loss: LossFamily, w: &[f64], test: &Dataset) -> (f64, f64) {
    let margins = test.design().matvec_transpose(w);
    let n = test.num_samples() as f64;
    let mut loss_sum = 0.0;
    let mut errors = 0usize;
    for (&m, &y) in margins.iter().zip(test.labels()) {
        loss_sum += loss.value(m, y);
        if y * m <= 0.0 {
            errors += 1;
        }
    }
    (loss_sum / n, errors as f64 / n)
}

fn check_finite(state: &DualState, record: &TraceRecord, iteration: u64) -> Result<()> {
    let finite = state.w.iter().all(|v| v.is_finite())
        && state.x.iter().all(|v| v.is_finite())
        && state.y.iter().all(|v| v.is_finite())
        && record.primal_objective.is_finite();
    if finite {
        Ok(())
    } else {
        Err(Error::Diverged {
            iteration,
            detail: "non-finite primal objective or state vector".into(),
        })
    }
}

/// Runs the solver from the all-zero start state for `max_epochs` epochs
/// (= max_epochs·K iterations), recording a trace at epoch 0 and every
/// `checkpoint_every` epochs. Deterministic given the seed; aborts with a
/// diagnostic if the state stops being finite.
pub fn run_sdca_admm(
    problem: &ProblemInstance,
    config: &SolverConfig,
    test_set: Option<&Dataset>,
    mut on_checkpoint: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<(DualState, Vec<TraceRecord>)> {
    validate_config(problem, config)?;
    let n = problem.num_samples();
    let k = config.num_blocks;
    let rho = config.rho;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let partition = make_partition(n, k, &mut rng);
    let eta_b = resolve_eta_b(problem, config);
    let eta_z = resolve_eta_z(problem, config, &partition)?;
    let mut state = DualState::zeros(problem, eta_z, eta_b);

    let mut traces = Vec::new();
    let mut emit = |record: TraceRecord, traces: &mut Vec<TraceRecord>| {
        if let Some(cb) = on_checkpoint.as_deref_mut() {
            cb(&record);
        }
        traces.push(record);
    };
    emit(checkpoint(problem, &state, test_set, 0.0, 0.0), &mut traces);

    let total_iters = (config.max_epochs as u64) * (k as u64);
    let cadence = (config.checkpoint_every as u64) * (k as u64);
    let mut wall = 0.0f64;
    let mut by: DenseVector = vec![0.0; problem.feature_dim()];
    let mut last_primal = traces[0].primal_objective;

    for t in 1..=total_iters {
        let tic = Instant::now();
        let block_index = rng.random_range(0..k);
        let block = &partition.blocks[block_index];

        let zx_old = state.zx_cache.clone();
        let y_new = step_y(problem, &state, rho);
        let by_new = problem.reg.b.matvec(&y_new);
        let x_block = step_x(problem, &state, block, block_index, &y_new, rho)?;

        // block indices are disjoint, so the incremental cache update
        // touches each design column at most once
        let z = problem.data.design();
        for (pos, &i) in block.iter().enumerate() {
            let dx = x_block[pos] - state.x[i];
            if dx != 0.0 {
                for &(r, v) in z.column(i) {
                    state.zx_cache[r] += v * dx;
                }
                state.x[i] = x_block[pos];
            }
        }
        if t.is_multiple_of(n as u64) {
            // periodic full recompute bounds floating-point drift
            state.zx_cache = z.matvec(&state.x);
        }

        state.w = step_w(
            &state.w,
            &state.zx_cache,
            &by_new,
            &zx_old,
            &by,
            config.gamma,
            rho,
            n,
            k,
        );
        state.y = y_new;
        by = by_new;
        wall += tic.elapsed().as_secs_f64();

        if t.is_multiple_of(cadence) || t == total_iters {
            let record = checkpoint(problem, &state, test_set, t as f64 / k as f64, wall);
            check_finite(&state, &record, t)?;
            let primal = record.primal_objective;
            let residual = record.constraint_residual;
            emit(record, &mut traces);
            if let Some(rule) = config.early_stop {
                if residual <= rule.feasibility_tol
                    && (primal - last_primal).abs() <= rule.objective_tol
                {
                    break;
                }
            }
            last_primal = primal;
        }
    }
    Ok((state, traces))
}

/// Linearized batch ADMM: the K = 1 special case of the stochastic loop
/// (the linearization terms Q and G are kept, which makes the subproblems
/// prox-friendly in the batch setting too).
pub fn run_batch_admm(
    problem: &ProblemInstance,
    config: &SolverConfig,
    test_set: Option<&Dataset>,
    on_checkpoint: Option<&mut dyn FnMut(&TraceRecord)>,
) -> Result<(DualState, Vec<TraceRecord>)> {
    let batch = SolverConfig {
        num_blocks: 1,
        ..config.clone()
    };
    run_sdca_admm(problem, &batch, test_set, on_checkpoint)
}

/// Budget multiplier of the long reference run used to anchor excess-risk
/// traces.
pub const REFERENCE_BUDGET_MULTIPLIER: usize = 50;

/// Reference optimum F_P(w*) for excess-risk traces: the best primal value
/// seen along a theorem-safe run with 50x the configured epoch budget.
pub fn reference_optimum(problem: &ProblemInstance, config: &SolverConfig) -> Result<f64> {
    let n = problem.num_samples();
    let max_epochs = config
        .max_epochs
        .saturating_mul(REFERENCE_BUDGET_MULTIPLIER);
    let reference = SolverConfig {
        gamma: 0.25 / n as f64,
        eta_z: EtaZPolicy::TheoremSafe,
        max_epochs,
        checkpoint_every: (max_epochs / 200).max(1),
        early_stop: Some(StopRule {
            feasibility_tol: 1e-12,
            objective_tol: 1e-15,
        }),
        ..config.clone()
    };
    let (_, trace) = run_sdca_admm(problem, &reference, None, None)?;
    Ok(trace
        .iter()
        .map(|r| r.primal_objective)
        .fold(f64::INFINITY, f64::min))
}
