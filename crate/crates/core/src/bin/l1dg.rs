use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l1dg::assembly::PenaltyScaling;
use l1dg::experiment::{self, ExperimentSpec, QStrategy};
use l1dg::multiscale::{self, MultiscaleSpec};
use l1dg::problems::{Problem, ProblemKind};

#[derive(Parser)]
#[command(name = "l1dg", version, about = "L1-stabilized mixed DG experiments")]
struct Cli {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study on a sequence of doubling meshes.
    Converge(ConvergeArgs),
    /// Multiscale truncation study for the kink problem.
    Multiscale(MultiscaleArgs),
    /// Write mesh and system matrices for one mesh size.
    Dump(DumpArgs),
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// Comma-separated cells per side, each double the previous.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    tau: Option<f64>,
    /// Fixed step balance; overrides the mesh-scaled default.
    #[arg(long)]
    alpha: Option<f64>,
    /// Coefficient c of the default alpha = c N^2.
    #[arg(long)]
    alpha_scale: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_q_strategy)]
    q_strategy: Option<QStrategy>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Use h^-1 on both jump blocks instead of h^-1 / h^-2.
    #[arg(long)]
    equal_jumps: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-level iteration logs (CSV) into this directory.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct MultiscaleArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    kink_n: Option<f64>,
    #[arg(long)]
    level: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long)]
    equal_jumps: bool,
    #[arg(long, default_value = "dump")]
    out: PathBuf,
}

fn parse_q_strategy(s: &str) -> Result<QStrategy, String> {
    match s {
        "row-sum" => Ok(QStrategy::RowSum),
        "unit" => Ok(QStrategy::Unit),
        _ => Err(format!("unknown q strategy {s:?} (expected row-sum or unit)")),
    }
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>, key: &str) -> l1dg::Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get(key) {
        Some(v) => Ok(serde_json::from_value(v.clone())?),
        None => Ok(T::default()),
    }
}

fn converge(cli_config: &Option<PathBuf>, a: ConvergeArgs) -> l1dg::Result<bool> {
    let mut spec: ExperimentSpec = read_config(cli_config, "converge")?;
    if let Some(p) = a.problem {
        spec.problem = p;
    }
    if let Some(n) = a.n {
        spec.ns = n;
    }
    if let Some(t) = a.tau {
        spec.tau = t;
    }
    if a.alpha.is_some() {
        spec.solver.alpha = a.alpha;
    }
    if a.alpha_scale.is_some() {
        spec.solver.alpha_scale = a.alpha_scale;
    }
    if a.lambda.is_some() {
        spec.solver.lambda = a.lambda;
    }
    if let Some(q) = a.q_strategy {
        spec.solver.q_strategy = q;
    }
    if let Some(t) = a.tol {
        spec.solver.tolerance = t;
    }
    if let Some(k) = a.max_iter {
        spec.solver.max_iterations = k;
    }
    if a.equal_jumps {
        spec.scaling = PenaltyScaling::EQUAL_JUMPS;
    }
    if a.log.is_some() {
        spec.log_dir = a.log;
    }
    let run = experiment::run_convergence_with(&spec, |l| {
        eprintln!(
            "N = {:>3}: {} unknowns, {} iterations{}, {:.1} s",
            l.n,
            l.unknowns,
            l.iterations,
            if l.converged { "" } else { " (not converged)" },
            l.seconds
        );
    })?;
    print!("{}", run.report.to_table());
    if let Some(dir) = a.out {
        run.write(&dir)?;
    }
    Ok(run.all_converged())
}

fn run_multiscale(cli_config: &Option<PathBuf>, a: MultiscaleArgs) -> l1dg::Result<bool> {
    let mut spec: MultiscaleSpec = read_config(cli_config, "multiscale")?;
    if let Some(t) = a.t {
        spec.t = t;
    }
    if let Some(n) = a.kink_n {
        spec.n = n;
    }
    if let Some(j) = a.level {
        spec.level = j;
    }
    if let Some(th) = a.thresholds {
        spec.thresholds = th;
    }
    if let Some(t) = a.tau {
        spec.tau = t;
    }
    if let Some(t) = a.tol {
        spec.solver.tolerance = t;
    }
    if let Some(k) = a.max_iter {
        spec.solver.max_iterations = k;
    }
    let run = multiscale::run_multiscale(&spec)?;
    print!("{}", run.to_table());
    if let Some(dir) = a.out {
        run.write(&dir)?;
    }
    Ok(run.converged)
}

fn dump(a: DumpArgs) -> l1dg::Result<bool> {
    let scaling = if a.equal_jumps { PenaltyScaling::EQUAL_JUMPS } else { PenaltyScaling::default() };
    let sys = experiment::dump_problem(&Problem::new(a.problem), a.n, a.tau, scaling, &a.out)?;
    println!("wrote {} unknowns, {} penalty rows to {}", sys.n(), sys.m(), a.out.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge(a) => converge(&cli.config, a),
        Command::Multiscale(a) => run_multiscale(&cli.config, a),
        Command::Dump(a) => dump(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: at least one solve did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
