//! Experiment orchestration: build the configured problem, run the solver
//! for each repeat with a derived seed, anchor excess risk against a cached
//! long-run reference optimum, and write per-repeat plus aggregate CSV
//! traces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use sdca_admm::data::{
    build_edges_by_correlation, gen_labeled_samples, gen_synthetic_grid, read_edge_list,
    read_libsvm, Dataset,
};
use sdca_admm::error::{Error, Result};
use sdca_admm::linalg::SparseColumnMatrix;
use sdca_admm::losses::LossFamily;
use sdca_admm::regularizers::{build_graph_guided, build_overlapped_group};
use sdca_admm::solver::{
    reference_optimum, run_sdca_admm, EtaBPolicy, EtaZPolicy, ProblemInstance, SolverConfig,
    TraceRecord,
};

/// Which problem family to benchmark.
#[derive(Clone, Debug)]
pub enum ProblemSpec {
    /// Overlapped row/column group penalty on a synthetic grid problem; a
    /// fresh train/test pair is drawn per repeat.
    SyntheticGrid {
        rows: usize,
        cols: usize,
        n: usize,
        noise_sd: f64,
    },
    /// Graph-guided fusion penalty on LIBSVM files.
    GraphGuided {
        train_path: PathBuf,
        test_path: Option<PathBuf>,
        edges: EdgeSource,
    },
}

#[derive(Clone, Debug)]
pub enum EdgeSource {
    /// Edge-list file, one zero-based "i j" pair per line.
    File(PathBuf),
    /// Thresholded feature correlations computed from the training set.
    Correlation { threshold: f64, max_edges: usize },
}

/// Regularization constants; `None` means the sample-size policy
/// (C1 = 0.1/√n for the synthetic family, C1 = 0.01/√n and C2 = C1·|E|/p
/// for the graph family).
#[derive(Clone, Copy, Debug)]
pub struct RegConstants {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub eps: f64,
}

impl Default for RegConstants {
    fn default() -> Self {
        RegConstants {
            c1: None,
            c2: None,
            eps: 0.01,
        }
    }
}

/// Solver knobs as exposed on the command line; values that depend on the
/// sample count stay unresolved until the data is loaded.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub rho: f64,
    /// None: 1/n, or 1/(4n) when `theorem_safe` is set.
    pub gamma: Option<f64>,
    /// None: one block per ~50 samples.
    pub num_blocks: Option<usize>,
    pub max_epochs: usize,
    pub theorem_safe: bool,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rho: 0.1,
            gamma: None,
            num_blocks: None,
            max_epochs: 50,
            theorem_safe: false,
            seed: 1001,
            checkpoint_every: 1,
        }
    }
}

impl SolverSettings {
    pub fn resolve(&self, n: usize) -> SolverConfig {
        let gamma = self.gamma.unwrap_or(if self.theorem_safe {
            0.25 / n as f64
        } else {
            1.0 / n as f64
        });
        SolverConfig {
            rho: self.rho,
            gamma,
            num_blocks: self.num_blocks.unwrap_or(n.div_ceil(50)).clamp(1, n),
            max_epochs: self.max_epochs,
            eta_b: EtaBPolicy::Standard,
            eta_z: if self.theorem_safe {
                EtaZPolicy::TheoremSafe
            } else {
                EtaZPolicy::Standard
            },
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
            early_stop: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSettings,
    pub reg: RegConstants,
    pub loss: LossFamily,
    pub repeats: usize,
    pub output_path: PathBuf,
    /// Report wall_seconds as 0 so repeated invocations produce
    /// byte-identical CSVs.
    pub no_timing: bool,
}

/// One CSV row: a trace record of one repeat plus its excess risk.
#[derive(Clone, Debug)]
pub struct TraceRow {
    pub repeat: usize,
    pub record: TraceRecord,
    pub excess_risk: f64,
}

pub struct ExperimentOutput {
    pub trace_path: PathBuf,
    pub aggregate_path: PathBuf,
    pub rows: Vec<TraceRow>,
}

/// Runs all repeats of the configured experiment (repeat r uses seed
/// base + r) and writes the per-repeat trace CSV plus an aggregate CSV with
/// per-checkpoint means and standard deviations.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }

    // file-backed problems are fixed across repeats; load them once
    let fixed = match &config.problem {
        ProblemSpec::GraphGuided {
            train_path,
            test_path,
            edges,
        } => Some(build_graph_problem(
            train_path,
            test_path.as_deref(),
            edges,
            &config.reg,
            config.loss,
        )?),
        ProblemSpec::SyntheticGrid { .. } => None,
    };

    let cache_dir = config
        .output_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("refcache");

    let mut rows: Vec<TraceRow> = Vec::new();
    for repeat in 0..config.repeats {
        let seed = config.solver.seed.wrapping_add(repeat as u64);
        let (problem, test_set) = match (&config.problem, &fixed) {
            (_, Some((p, t))) => (p.clone(), t.clone()),
            (
                ProblemSpec::SyntheticGrid {
                    rows: gr,
                    cols: gc,
                    n,
                    noise_sd,
                },
                None,
            ) => build_synthetic_problem(*gr, *gc, *n, *noise_sd, &config.reg, config.loss, seed),
            _ => unreachable!(),
        };

        let mut solver_cfg = config.solver.resolve(problem.num_samples());
        solver_cfg.seed = seed;
        if repeat == 0 {
            eprintln!(
                "resolved: n={} p={} d={} K={} rho={} gamma={} epochs={} theorem_safe={}",
                problem.num_samples(),
                problem.feature_dim(),
                problem.split_dim(),
                solver_cfg.num_blocks,
                solver_cfg.rho,
                solver_cfg.gamma,
                solver_cfg.max_epochs,
                config.solver.theorem_safe,
            );
        }

        let reference = cached_reference(&cache_dir, &problem, &solver_cfg)?;
        let (_, trace) = run_sdca_admm(&problem, &solver_cfg, test_set.as_ref(), None)?;
        for mut record in trace {
            if config.no_timing {
                record.wall_seconds = 0.0;
            }
            rows.push(TraceRow {
                repeat,
                excess_risk: record.primal_objective - reference,
                record,
            });
        }
    }

    let trace_path = config.output_path.clone();
    let aggregate_path = aggregate_path_for(&trace_path);
    write_trace_csv(&trace_path, &rows)?;
    write_aggregate_csv(&aggregate_path, &rows, config.repeats)?;
    Ok(ExperimentOutput {
        trace_path,
        aggregate_path,
        rows,
    })
}

fn build_synthetic_problem(
    rows: usize,
    cols: usize,
    n: usize,
    noise_sd: f64,
    reg: &RegConstants,
    loss: LossFamily,
    seed: u64,
) -> (ProblemInstance, Option<Dataset>) {
    // keep the data stream distinct from the solver stream on the same seed
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (train, w0) = gen_synthetic_grid(rows, cols, n, noise_sd, &mut rng);
    // the test set shares the generating weights, not just the distribution
    let test = gen_labeled_samples(&w0, n, noise_sd, &mut rng);
    let c1 = reg.c1.unwrap_or(0.1 / (n as f64).sqrt());
    let structured = build_overlapped_group(rows, cols, c1, reg.eps);
    (ProblemInstance::new(train, loss, structured), Some(test))
}

fn build_graph_problem(
    train_path: &Path,
    test_path: Option<&Path>,
    edges: &EdgeSource,
    reg: &RegConstants,
    loss: LossFamily,
) -> Result<(ProblemInstance, Option<Dataset>)> {
    let train = read_libsvm(train_path)?;
    let test = test_path.map(read_libsvm).transpose()?;
    // train and test may disagree on the largest feature index seen
    let p = test.as_ref().map_or(train.feature_dim(), |t| {
        t.feature_dim().max(train.feature_dim())
    });
    let train = pad_features(&train, p);
    let test = test.map(|t| pad_features(&t, p));

    let edge_list = match edges {
        EdgeSource::File(path) => read_edge_list(path)?,
        EdgeSource::Correlation {
            threshold,
            max_edges,
        } => build_edges_by_correlation(&train, *threshold, *max_edges),
    };
    let n = train.num_samples();
    let c1 = reg.c1.unwrap_or(0.01 / (n as f64).sqrt());
    let c2 = reg.c2.unwrap_or(c1 * edge_list.len() as f64 / p as f64);
    eprintln!(
        "graph problem: |E|={} C1={} C2={} eps={}",
        edge_list.len(),
        c1,
        c2,
        reg.eps
    );
    let structured = build_graph_guided(p, &edge_list, c1, c2, reg.eps)?;
    Ok((ProblemInstance::new(train, loss, structured), test))
}

fn pad_features(ds: &Dataset, p: usize) -> Dataset {
    if ds.feature_dim() == p {
        return ds.clone();
    }
    let columns = (0..ds.num_samples())
        .map(|i| ds.design().column(i).to_vec())
        .collect();
    Dataset::new(
        SparseColumnMatrix::from_columns(p, columns),
        ds.labels().to_vec(),
    )
}

/// Reference optimum for excess-risk traces, cached on disk keyed by the
/// instance and the reference-run configuration. The cache stores the exact
/// f64 bits, so re-reading reproduces the computed value bit for bit.
fn cached_reference(
    cache_dir: &Path,
    problem: &ProblemInstance,
    config: &SolverConfig,
) -> Result<f64> {
    let key = instance_key(problem, config);
    let path = cache_dir.join(format!("{:016x}.ref", key));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Some(bits) = text
            .lines()
            .next()
            .and_then(|l| u64::from_str_radix(l.trim(), 16).ok())
        {
            return Ok(f64::from_bits(bits));
        }
    }
    let value = reference_optimum(problem, config)?;
    fs::create_dir_all(cache_dir).map_err(|source| Error::Io {
        path: cache_dir.to_path_buf(),
        source,
    })?;
    fs::write(&path, format!("{:016x}\n# {}\n", value.to_bits(), value)).map_err(|source| {
        Error::Io {
            path: path.clone(),
            source,
        }
    })?;
    Ok(value)
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
}

fn instance_key(problem: &ProblemInstance, config: &SolverConfig) -> u64 {
    let mut h = Fnv64::new();
    h.u64(problem.num_samples() as u64);
    h.u64(problem.feature_dim() as u64);
    h.u64(problem.split_dim() as u64);
    h.u64(match problem.loss {
        LossFamily::SmoothedHinge => 1,
        LossFamily::Logistic => 2,
    });
    let z = problem.data.design();
    for j in 0..z.cols() {
        for &(r, v) in z.column(j) {
            h.u64(r as u64);
            h.f64(v);
        }
        h.u64(u64::MAX); // column separator
    }
    for &y in problem.data.labels() {
        h.f64(y);
    }
    let b = &problem.reg.b;
    for j in 0..b.cols() {
        for &(r, v) in b.column(j) {
            h.u64(r as u64);
            h.f64(v);
        }
        h.u64(u64::MAX);
    }
    match &problem.reg.simple {
        sdca_admm::SimpleRegularizer::SeparableElasticNetL1 { weights, eps } => {
            h.u64(1);
            h.f64(*eps);
            for &w in weights {
                h.f64(w);
            }
        }
        sdca_admm::SimpleRegularizer::GroupElasticNetL2 { dim, groups, eps } => {
            h.u64(2);
            h.u64(*dim as u64);
            h.f64(*eps);
            for g in groups {
                h.f64(g.weight);
                for &i in &g.indices {
                    h.u64(i as u64);
                }
                h.u64(u64::MAX);
            }
        }
    }
    // reference-run knobs: a deeper or shallower reference must not collide
    h.u64(config.max_epochs as u64);
    h.u64(config.num_blocks as u64);
    h.f64(config.rho);
    h.u64(config.seed);
    h.0
}

fn aggregate_path_for(trace_path: &Path) -> PathBuf {
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let ext = trace_path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    trace_path.with_file_name(format!("{}_agg.{}", stem, ext))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{:e}", x)).unwrap_or_default()
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut f = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(content.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub const TRACE_HEADER: &str = "repeat,epoch,wall_seconds,primal_objective,excess_risk,\
dual_objective,feasibility,test_loss,test_error";

fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.record;
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{},{}\n",
            row.repeat,
            r.epoch,
            r.wall_seconds,
            r.primal_objective,
            row.excess_risk,
            r.dual_objective,
            r.constraint_residual,
            fmt_opt(r.test_loss),
            fmt_opt(r.test_error),
        ));
    }
    write_file(path, &out)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, var.sqrt())
}

fn write_aggregate_csv(path: &Path, rows: &[TraceRow], repeats: usize) -> Result<()> {
    // group rows by checkpoint index within each repeat
    let mut per_repeat: Vec<Vec<&TraceRow>> = vec![Vec::new(); repeats];
    for row in rows {
        per_repeat[row.repeat].push(row);
    }
    let checkpoints = per_repeat.iter().map(|t| t.len()).max().unwrap_or(0);

    let mut out = String::from(
        "epoch,n_repeats,wall_seconds_mean,wall_seconds_sd,primal_objective_mean,\
primal_objective_sd,excess_risk_mean,excess_risk_sd,dual_objective_mean,dual_objective_sd,\
feasibility_mean,feasibility_sd,test_loss_mean,test_loss_sd,test_error_mean,test_error_sd\n",
    );
    for c in 0..checkpoints {
        let group: Vec<&TraceRow> = per_repeat
            .iter()
            .filter_map(|t| t.get(c).copied())
            .collect();
        let epoch = group[0].record.epoch;
        debug_assert!(group.iter().all(|r| r.record.epoch == epoch));
        let collect = |f: &dyn Fn(&TraceRow) -> f64| -> (f64, f64) {
            mean_sd(&group.iter().map(|r| f(r)).collect::<Vec<f64>>())
        };
        let (wm, ws) = collect(&|r| r.record.wall_seconds);
        let (pm, ps) = collect(&|r| r.record.primal_objective);
        let (em, es) = collect(&|r| r.excess_risk);
        let (dm, dsd) = collect(&|r| r.record.dual_objective);
        let (fm, fsd) = collect(&|r| r.record.constraint_residual);
        let opt: Vec<f64> = group.iter().filter_map(|r| r.record.test_loss).collect();
        let (tl, tls) = if opt.is_empty() {
            (String::new(), String::new())
        } else {
            let (m, s) = mean_sd(&opt);
            (format!("{:e}", m), format!("{:e}", s))
        };
        let opt: Vec<f64> = group.iter().filter_map(|r| r.record.test_error).collect();
        let (te, tes) = if opt.is_empty() {
            (String::new(), String::new())
        } else {
            let (m, s) = mean_sd(&opt);
            (format!("{:e}", m), format!("{:e}", s))
        };
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{}\n",
            epoch,
            group.len(),
            wm,
            ws,
            pm,
            ps,
            em,
            es,
            dm,
            dsd,
            fm,
            fsd,
            tl,
            tls,
            te,
            tes,
        ));
    }
    write_file(path, &out)
}
