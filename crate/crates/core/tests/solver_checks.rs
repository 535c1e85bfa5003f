//! Run-level checks of the solver: the step outputs minimize their
//! subproblem objectives (verified against an independent dense evaluation),
//! long runs close the duality gap and the optimality residuals, and the
//! extreme partition choices agree on the optimum.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use sdca_admm::data::{gen_synthetic_grid, Dataset};
use sdca_admm::linalg::SparseColumnMatrix;
use sdca_admm::losses::LossFamily;
use sdca_admm::regularizers::build_graph_guided;
use sdca_admm::solver::{
    dual_objective, kkt_residuals, primal_objective, run_sdca_admm, step_x, step_y, DualState,
    ProblemInstance, SolverConfig, StopRule,
};

fn densify(m: &SparseColumnMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; m.cols()]; m.rows()];
    for j in 0..m.cols() {
        for &(r, v) in m.column(j) {
            d[r][j] = v;
        }
    }
    d
}

fn dense_mv(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn frobenius_sq(m: &SparseColumnMatrix) -> f64 {
    (0..m.cols())
        .map(|j| m.column(j).iter().map(|&(_, v)| v * v).sum::<f64>())
        .sum()
}

/// Elastic-net conjugate, written out again so the check does not share
/// code with the implementation.
fn psi_star(weights: &[f64], eps: f64, v: &[f64]) -> f64 {
    let mut total = 0.0;
    for (x, &c) in v.iter().zip(weights) {
        if c == 0.0 {
            if x.abs() > 1e-12 {
                return f64::INFINITY;
            }
        } else if eps == 0.0 {
            if x.abs() > c {
                return f64::INFINITY;
            }
        } else {
            let t = (x.abs() - c).max(0.0);
            total += t * t / (2.0 * eps * c);
        }
    }
    total
}

/// Smoothed-hinge conjugate, re-derived for the check.
fn f_star(a: f64, y: f64) -> f64 {
    let m = a * y;
    if (-1.0..=0.0).contains(&m) {
        y * a + 0.5 * a * a
    } else {
        f64::INFINITY
    }
}

struct TinyInstance {
    problem: ProblemInstance,
    weights: Vec<f64>,
    eps: f64,
}

fn random_graph_instance(seed: u64) -> TinyInstance {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let p = rng.random_range(3..=6);
    let n = rng.random_range(3..=8);
    let (data, _) = gen_synthetic_grid(p, 1, n, 0.2, &mut rng);
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if edges.len() + p < 10 && rng.random_range(0.0..1.0) < 0.4 {
                edges.push((i, j));
            }
        }
    }
    let c1 = 0.2 + rng.random_range(0.0..0.3);
    let c2 = 0.1 + rng.random_range(0.0..0.3);
    let eps = if rng.random_range(0.0..1.0) < 0.3 {
        0.0
    } else {
        0.05
    };
    let reg = build_graph_guided(p, &edges, c1, c2, eps).unwrap();
    let mut weights = vec![c1; p];
    weights.extend(std::iter::repeat_n(c2, edges.len()));
    TinyInstance {
        problem: ProblemInstance::new(data, LossFamily::SmoothedHinge, reg),
        weights,
        eps,
    }
}

fn random_state(problem: &ProblemInstance, rng: &mut Xoshiro256PlusPlus) -> DualState {
    let n = problem.num_samples();
    let x: Vec<f64> = (0..n)
        .map(|i| -problem.data.labels()[i] * rng.random_range(0.0..1.0))
        .collect();
    let y: Vec<f64> = (0..problem.split_dim())
        .map(|_| rng.random_range(-0.4..0.4))
        .collect();
    let w: Vec<f64> = (0..problem.feature_dim())
        .map(|_| rng.random_range(-0.8..0.8))
        .collect();
    let eta_b = frobenius_sq(&problem.reg.b) + 0.5;
    DualState::new(problem, x, y, w, vec![0.0; 0], eta_b)
}

#[test]
fn step_y_minimizes_its_subproblem_objective() {
    for seed in 0..12 {
        let inst = random_graph_instance(100 + seed);
        let problem = &inst.problem;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(900 + seed);
        let state = random_state(problem, &mut rng);
        let rho = 0.05 + rng.random_range(0.0..0.4);
        let n = problem.num_samples() as f64;
        let d = problem.split_dim();

        let y_new = step_y(problem, &state, rho);

        // independent dense evaluation of the y-subproblem objective:
        // nψ*(y/n) - <w, Zx + By> + (ρ/2)||Zx + By||² + ½||y - y0||²_Q
        let bd = densify(&problem.reg.b);
        let zx = &state.zx_cache;
        let objective = |y: &[f64]| -> f64 {
            let by = dense_mv(&bd, y);
            let res: Vec<f64> = zx.iter().zip(&by).map(|(a, b)| a + b).collect();
            let inner: f64 = state.w.iter().zip(&res).map(|(a, b)| a * b).sum();
            let quad: f64 = res.iter().map(|v| v * v).sum();
            let yn: Vec<f64> = y.iter().map(|v| v / n).collect();
            // ½||y-y0||²_Q with Q = ρ(η_B I - BᵀB)
            let dy: Vec<f64> = y.iter().zip(&state.y).map(|(a, b)| a - b).collect();
            let bdy = dense_mv(&bd, &dy);
            let q_term = 0.5
                * rho
                * (state.eta_b * dy.iter().map(|v| v * v).sum::<f64>()
                    - bdy.iter().map(|v| v * v).sum::<f64>());
            n * psi_star(&inst.weights, inst.eps, &yn) - inner + 0.5 * rho * quad + q_term
        };

        let at_step = objective(&y_new);
        assert!(at_step.is_finite(), "seed {}: step output infeasible", seed);
        for trial in 0..200 {
            let scale = 10f64.powi(-(trial % 5) - 1);
            let perturbed: Vec<f64> = y_new
                .iter()
                .map(|v| v + scale * rng.random_range(-1.0..1.0))
                .collect();
            assert!(
                at_step <= objective(&perturbed) + 1e-12,
                "seed {}: perturbation at scale {} improved the y objective",
                seed,
                scale
            );
        }
        let _ = d;
    }
}

#[test]
fn step_x_minimizes_its_subproblem_objective() {
    for seed in 0..12 {
        let inst = random_graph_instance(200 + seed);
        let problem = &inst.problem;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(700 + seed);
        let mut state = random_state(problem, &mut rng);
        let rho = 0.05 + rng.random_range(0.0..0.4);
        let n = problem.num_samples();

        // random block of distinct indices
        let block_len = rng.random_range(1..=n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let block: Vec<usize> = perm[..block_len].to_vec();
        let zi = problem.data.design().select_columns(&block);
        let eta = frobenius_sq(&zi) + 0.3;
        state.eta_z = vec![eta];

        let y_ref: Vec<f64> = (0..problem.split_dim())
            .map(|_| rng.random_range(-0.3..0.3))
            .collect();
        let x_new = step_x(problem, &state, &block, 0, &y_ref, rho).unwrap();

        // independent dense evaluation of the block objective:
        // Σ f*(x_i) - <w, Zx + By> + (ρ/2)||Zx + By||² + ½||x_I - x_I0||²_G
        let zd = densify(problem.data.design());
        let bd = densify(&problem.reg.b);
        let by = dense_mv(&bd, &y_ref);
        let labels = problem.data.labels();
        let objective = |xb: &[f64]| -> f64 {
            let mut x_full = state.x.clone();
            for (pos, &i) in block.iter().enumerate() {
                x_full[i] = xb[pos];
            }
            let zx = dense_mv(&zd, &x_full);
            let res: Vec<f64> = zx.iter().zip(&by).map(|(a, b)| a + b).collect();
            let conj: f64 = block.iter().map(|&i| f_star(x_full[i], labels[i])).sum();
            let inner: f64 = state.w.iter().zip(&res).map(|(a, b)| a * b).sum();
            let quad: f64 = res.iter().map(|v| v * v).sum();
            let dx: Vec<f64> = block
                .iter()
                .zip(xb)
                .map(|(&i, &v)| v - state.x[i])
                .collect();
            let zid = densify(&zi);
            let zdx = dense_mv(&zid, &dx);
            let g_term = 0.5
                * rho
                * (eta * dx.iter().map(|v| v * v).sum::<f64>()
                    - zdx.iter().map(|v| v * v).sum::<f64>());
            conj - inner + 0.5 * rho * quad + g_term
        };

        let at_step = objective(&x_new);
        assert!(at_step.is_finite(), "seed {}: step output infeasible", seed);
        for trial in 0..200 {
            let scale = 10f64.powi(-(trial % 5) - 1);
            let perturbed: Vec<f64> = x_new
                .iter()
                .map(|v| v + scale * rng.random_range(-1.0..1.0))
                .collect();
            assert!(
                at_step <= objective(&perturbed) + 1e-12,
                "seed {}: perturbation at scale {} improved the x objective",
                seed,
                scale
            );
        }
    }
}

fn converged_instance() -> (ProblemInstance, Dataset) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5150);
    let (data, _) = gen_synthetic_grid(8, 1, 30, 0.1, &mut rng);
    let (test, _) = gen_synthetic_grid(8, 1, 30, 0.1, &mut rng);
    let edges = [(0, 1), (2, 3), (4, 5), (1, 6)];
    let c1 = 0.01 / 30f64.sqrt();
    let c2 = c1 * edges.len() as f64 / 8.0;
    let reg = build_graph_guided(8, &edges, c1, c2, 0.01).unwrap();
    (
        ProblemInstance::new(data, LossFamily::SmoothedHinge, reg),
        test,
    )
}

#[test]
fn long_run_closes_gap_and_stationarity() {
    let (problem, _) = converged_instance();
    let cfg = SolverConfig {
        num_blocks: 2,
        max_epochs: 20_000,
        checkpoint_every: 200,
        early_stop: Some(StopRule {
            feasibility_tol: 1e-9,
            objective_tol: 1e-13,
        }),
        ..SolverConfig::experiment_defaults(30)
    };
    let (state, trace) = run_sdca_admm(&problem, &cfg, None, None).unwrap();
    let (feas, stat) = kkt_residuals(&problem, &state);
    assert!(feas <= 1e-5, "feasibility residual {}", feas);
    assert!(stat <= 1e-5, "stationarity residual {}", stat);

    let primal = primal_objective(&problem, &state.w);
    let dual = dual_objective(&problem, &state.x, &state.y);
    assert!(
        (primal + dual).abs() <= 1e-4 * (1.0 + primal.abs()),
        "gap: primal {} dual {}",
        primal,
        dual
    );
    // the trace agrees with a fresh evaluation at the final state
    let last = trace.last().unwrap();
    assert!((last.primal_objective - primal).abs() <= 1e-12 * (1.0 + primal.abs()));
}

#[test]
fn extreme_partitions_agree_on_the_optimum() {
    let (problem, _) = converged_instance();
    let run = |k: usize| {
        let cfg = SolverConfig {
            num_blocks: k,
            max_epochs: 12_000,
            checkpoint_every: 200,
            early_stop: Some(StopRule {
                feasibility_tol: 1e-10,
                objective_tol: 1e-14,
            }),
            ..SolverConfig::experiment_defaults(30)
        };
        let (state, _) = run_sdca_admm(&problem, &cfg, None, None).unwrap();
        primal_objective(&problem, &state.w)
    };
    let batch = run(1);
    let one_sample = run(30);
    assert!(
        (batch - one_sample).abs() <= 1e-4 * (1.0 + batch.abs()),
        "K=1 gives {}, K=n gives {}",
        batch,
        one_sample
    );
}

#[test]
fn cache_stays_consistent_mid_run() {
    let (problem, _) = converged_instance();
    let cfg = SolverConfig {
        num_blocks: 4,
        max_epochs: 700, // 2800 iterations, not a multiple of the refresh period
        checkpoint_every: 700,
        ..SolverConfig::experiment_defaults(30)
    };
    let (state, _) = run_sdca_admm(&problem, &cfg, None, None).unwrap();
    let fresh = problem.data.design().matvec(&state.x);
    let diff: f64 = state
        .zx_cache
        .iter()
        .zip(&fresh)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = 1.0 + fresh.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(diff <= 1e-8 * scale, "cache drift {}", diff);
}

#[test]
fn trace_records_test_metrics_when_given_a_test_set() {
    let (problem, test) = converged_instance();
    let cfg = SolverConfig {
        max_epochs: 5,
        ..SolverConfig::experiment_defaults(30)
    };
    let (_, trace) = run_sdca_admm(&problem, &cfg, Some(&test), None).unwrap();
    assert!(trace
        .iter()
        .all(|r| r.test_loss.is_some() && r.test_error.is_some()));
    // w = 0 scores margin 0 on every sample; the tie rule counts those as errors
    assert_eq!(trace[0].test_error, Some(1.0));
    let (_, no_test) = run_sdca_admm(&problem, &cfg, None, None).unwrap();
    assert!(no_test.iter().all(|r| r.test_loss.is_none()));
}
