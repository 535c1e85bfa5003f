//! Command-line benchmark runner: configures one of the two experiment
//! families, runs the solver for the requested repeats, and writes
//! convergence-trace CSVs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdca_admm::losses::LossFamily;
use sdca_admm_bench::{
    run_experiment, EdgeSource, ExperimentConfig, ProblemSpec, RegConstants, SolverSettings,
};

#[derive(Parser, Debug)]
#[command(
    name = "sdca-admm-bench",
    about = "Benchmark the stochastic dual coordinate ascent ADMM solver and write CSV convergence traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic grid classification with an overlapped row/column group penalty
    Synth(SynthArgs),
    /// Graph-guided fused regularization on LIBSVM-format data
    Graph(GraphArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Partition count K (default: one block per ~50 samples)
    #[arg(long = "K")]
    k: Option<usize>,
    /// Penalty parameter of the augmented term
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Multiplier step factor (default: 1/n, or 1/(4n) with --theorem-safe)
    #[arg(long)]
    gamma: Option<f64>,
    /// Epoch budget; one epoch is K iterations
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Independent repeats; repeat r runs with seed + r
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 1001)]
    seed: u64,
    /// Output CSV path; the aggregate lands next to it as <stem>_agg.<ext>
    #[arg(long)]
    out: PathBuf,
    /// Use gamma = 1/(4n) and block constants above the geometric-convergence bound
    #[arg(long)]
    theorem_safe: bool,
    /// Epochs between trace checkpoints
    #[arg(long, default_value_t = 1)]
    checkpoint_every: usize,
    /// Report wall_seconds as 0 so identical invocations produce byte-identical CSVs
    #[arg(long)]
    no_timing: bool,
    /// First regularization constant (default: 0.1/sqrt(n) for synth, 0.01/sqrt(n) for graph)
    #[arg(long)]
    c1: Option<f64>,
    /// Elastic-net quadratic factor
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = LossArg::SmoothedHinge)]
    loss: LossArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    SmoothedHinge,
    Logistic,
}

impl From<LossArg> for LossFamily {
    fn from(v: LossArg) -> Self {
        match v {
            LossArg::SmoothedHinge => LossFamily::SmoothedHinge,
            LossArg::Logistic => LossFamily::Logistic,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid rows (feature dimension is rows*cols)
    #[arg(long, default_value_t = 32)]
    rows: usize,
    /// Grid columns
    #[arg(long, default_value_t = 32)]
    cols: usize,
    /// Training samples per repeat (the test set has the same size)
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Label noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Training set in LIBSVM format
    #[arg(long)]
    train: PathBuf,
    /// Optional test set in LIBSVM format
    #[arg(long)]
    test: Option<PathBuf>,
    /// Edge source: a path to an "i j" edge-list file, or corr:<threshold>
    #[arg(long)]
    edges: String,
    /// Second regularization constant (default: C1*|E|/p)
    #[arg(long)]
    c2: Option<f64>,
    /// Cap on the number of correlation edges
    #[arg(long, default_value_t = 10000)]
    max_edges: usize,
}

fn parse_edge_source(spec: &str, max_edges: usize) -> Result<EdgeSource, String> {
    if let Some(rest) = spec.strip_prefix("corr:") {
        let threshold: f64 = rest
            .parse()
            .map_err(|_| format!("bad correlation threshold '{}'", rest))?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(format!(
                "correlation threshold must lie in (0, 1), got {}",
                threshold
            ));
        }
        Ok(EdgeSource::Correlation {
            threshold,
            max_edges,
        })
    } else {
        Ok(EdgeSource::File(PathBuf::from(spec)))
    }
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, String> {
    let (common, problem, c2) = match cli.command {
        Command::Synth(args) => {
            let problem = ProblemSpec::SyntheticGrid {
                rows: args.rows,
                cols: args.cols,
                n: args.n,
                noise_sd: args.noise_sd,
            };
            (args.common, problem, None)
        }
        Command::Graph(args) => {
            let edges = parse_edge_source(&args.edges, args.max_edges)?;
            let problem = ProblemSpec::GraphGuided {
                train_path: args.train,
                test_path: args.test,
                edges,
            };
            (args.common, problem, args.c2)
        }
    };
    Ok(ExperimentConfig {
        problem,
        solver: SolverSettings {
            rho: common.rho,
            gamma: common.gamma,
            num_blocks: common.k,
            max_epochs: common.epochs,
            theorem_safe: common.theorem_safe,
            seed: common.seed,
            checkpoint_every: common.checkpoint_every,
        },
        reg: RegConstants {
            c1: common.c1,
            c2,
            eps: common.eps,
        },
        loss: common.loss.into(),
        repeats: common.repeats,
        output_path: common.out,
        no_timing: common.no_timing,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {}", msg);
            return ExitCode::FAILURE;
        }
    };
    eprintln!("config: {:?}", config);
    match run_experiment(&config) {
        Ok(out) => {
            eprintln!("wrote {}", out.trace_path.display());
            eprintln!("wrote {}", out.aggregate_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::FAILURE
        }
    }
}
