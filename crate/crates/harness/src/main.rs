use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ngn_core::optimizers::{OptimizerKind, OptimizerSpec};
use ngn_core::problems::ProblemKind;
use ngn_core::run::{run_from, RunBudget};
use ngn_core::theory::{ngn_m_bound, ngn_m_bound_decaying, ngn_m_params, TheoryInputs};
use ngn_harness::output::{emit_trajectory, fmt_f64, write_audits, write_summary, SummaryRow};
use ngn_harness::sweep::parse_schedule;
use ngn_harness::{parse_config, run_sweep, suite, write_sweep_outputs, HarnessError, ProblemConfig, Result};

#[derive(Parser)]
#[command(name = "ngn", version, about = "NGN optimizer experiments and audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one optimizer configuration and print its summary row.
    Run(RunArgs),
    /// Run every cell of a TOML sweep config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Run cells one after another instead of on the thread pool.
        #[arg(long)]
        serial: bool,
    },
    /// Run the audit suite; exits 1 if any audit fails.
    Verify {
        /// Also write the audit rows to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the NGN-M convergence bound.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WdMode {
    Decoupled,
    Coupled,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    problem: ProblemKind,
    #[arg(long)]
    optimizer: OptimizerKind,
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    wd: f64,
    /// Selects the weight-decay variant of ngn-md-v1.
    #[arg(long, value_enum)]
    wd_mode: Option<WdMode>,
    #[arg(long, default_value = "constant")]
    schedule: String,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Full batch when omitted.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dampening: Option<f64>,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    success_loss: Option<f64>,
    #[arg(long)]
    diverge_loss: Option<f64>,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long)]
    c: f64,
    #[arg(long = "L")]
    l: f64,
    #[arg(long = "K")]
    k: u64,
    /// Distance ‖x⁰ − x*‖.
    #[arg(long)]
    dist0: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_int: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_pos: f64,
    /// Use the c₀/√(k+1) schedule bound; `c` is then c₀.
    #[arg(long)]
    decaying: bool,
}

fn optimizer_kind(args: &RunArgs) -> Result<OptimizerKind> {
    use OptimizerKind::*;
    match (args.optimizer, args.wd_mode) {
        (k, None) => Ok(k),
        (NgnMdV1 | DecNgnMdV1, Some(WdMode::Decoupled)) => Ok(DecNgnMdV1),
        (NgnMdV1 | NgnMdV1W, Some(WdMode::Coupled)) => Ok(NgnMdV1W),
        (k, Some(_)) => Err(HarnessError::Config(format!("--wd-mode does not apply to {k}"))),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let kind = optimizer_kind(&args)?;
    let mut spec = OptimizerSpec::new(kind, args.c)
        .with_beta(args.beta)
        .with_beta2(args.beta2)
        .with_eps(args.eps)
        .with_weight_decay(args.wd)
        .with_schedule(parse_schedule(&args.schedule, args.steps)?);
    if let Some(d) = args.dampening {
        spec = spec.with_dampening(d);
    }
    let mut budget = RunBudget::new(args.steps);
    budget.batch_size = args.batch_size;
    if let Some(s) = args.success_loss {
        budget = budget.with_success(s);
    }
    if let Some(d) = args.diverge_loss {
        budget = budget.with_divergence(d);
    }

    let mut pc = ProblemConfig::new(args.problem);
    pc.dim = args.dim;
    pc.n_samples = args.n_samples;
    pc.r = args.r;
    pc.data = args.data;
    pc.x0 = args.x0;
    let problem = pc.build(args.seed)?;
    let rec = run_from(&problem, &spec, &budget, args.seed, problem.initial_point().to_vec())?;
    if let Some(path) = &args.out {
        emit_trajectory(&rec, path)?;
    }
    let row = SummaryRow {
        optimizer: kind.name().to_string(),
        c: spec.c,
        beta: spec.beta1,
        seed: args.seed,
        status: rec.status.label().to_string(),
        final_loss: rec.final_loss,
        best_loss: rec.best_loss(),
        steps_to_success: rec.status.steps_to_success(),
        schedule: spec.schedule.to_string(),
        x0: rec.x0.clone(),
        final_x: rec.final_x.clone(),
    };
    write_summary(io::stdout().lock(), &[row]).map_err(|e| HarnessError::csv("<stdout>", e))
}

fn cmd_sweep(config: PathBuf, serial: bool) -> Result<()> {
    let sweep = parse_config(&config)?;
    let result = run_sweep(&sweep, !serial)?;
    let path = write_sweep_outputs(&sweep, &result)?;
    let failed = result.cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells ({failed} failed) -> {}", result.cells.len(), path.display());
    Ok(())
}

fn cmd_verify(out: Option<PathBuf>) -> Result<bool> {
    let reports = suite::standard_suite()?;
    write_audits(io::stdout().lock(), &reports).map_err(|e| HarnessError::csv("<stdout>", e))?;
    if let Some(path) = out {
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        write_audits(io::BufWriter::new(file), &reports).map_err(|e| HarnessError::csv(&path, e))?;
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} audits failed", reports.len());
    }
    Ok(failed == 0)
}

fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    let d2 = a.dist0 * a.dist0;
    let (si, sp) = (a.sigma_int * a.sigma_int, a.sigma_pos * a.sigma_pos);
    let bound = if a.decaying {
        ngn_m_bound_decaying(a.c, a.l, a.k, d2, si, sp)?
    } else {
        ngn_m_bound(&TheoryInputs::new(a.c, a.l, a.k, d2).with_sigmas(si, sp))?
    };
    let p = ngn_m_params(a.c, a.l)?;
    let mut out = io::stdout().lock();
    let lines = [
        format!("bound={bound}"),
        format!("rho={}", fmt_f64(p.rho)),
        format!("lambda_max={}", fmt_f64(p.lambda_max)),
        format!("beta_max={}", fmt_f64(p.beta_max)),
    ];
    for l in lines {
        writeln!(out, "{l}").map_err(|e| HarnessError::io("<stdout>", e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Sweep { config, serial } => cmd_sweep(config, serial).map(|_| true),
        Command::Verify { out } => cmd_verify(out),
        Command::Bounds(args) => cmd_bounds(args).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
