use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use holevo_core::channel::KrausChannel;
use holevo_core::cli::experiments::{self, GradCheckReport};
use holevo_core::cli::io::{self, ChannelJson, EnsembleJson};
use holevo_core::cli::streams::trial_instance;
use holevo_core::cli::{ExperimentSpec, Scenario};
use holevo_core::optimizer::{self, OptimConfig, OptimTrace, ProjectionMode};
use holevo_core::states::{Ensemble, PureEnsemble};
use holevo_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(
    name = "holevo",
    version,
    about = "Holevo bound evaluation and Kraus-channel optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Holevo bound of one channel and ensemble.
    Eval(Common),
    /// Gradient ascent over the Kraus operators.
    OptimizeChannel(Common),
    /// Gradient ascent over the input ensemble with the channel fixed.
    OptimizeInput(Common),
    /// Per-iteration traces for several step sizes.
    Convergence(Common),
    /// Scheme comparison over N = M.
    DimSweep(Common),
    /// Scheme comparison over the Kraus rank.
    KrausSweep(Common),
    /// Analytic against finite-difference gradients.
    GradCheck(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Projection {
    PerSweep,
    PerK,
}

#[derive(Args)]
struct Common {
    /// Input dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Output dimension.
    #[arg(long)]
    m: Option<usize>,
    /// Number of Kraus operators.
    #[arg(long)]
    k: Option<usize>,
    /// Number of input states (default: N).
    #[arg(long)]
    p: Option<usize>,
    /// Step size.
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Step sizes for `convergence`.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Values of N = M for `dim-sweep`.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Kraus ranks for `kraus-sweep`.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Schemes for the sweeps.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Stop once the per-iteration change falls below this (bits).
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of trials (random starting points).
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Projection::PerSweep)]
    projection: Projection,
    #[arg(long, default_value_t = 1e-12)]
    eig_floor: f64,
    /// Finite-difference step for `grad-check`.
    #[arg(long, default_value_t = holevo_core::cli::DEFAULT_FD_STEP)]
    fd_step: f64,
    /// Channel JSON to use instead of a random one.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Ensemble JSON (state vectors) to use instead of a random one.
    #[arg(long)]
    ensemble: Option<PathBuf>,
}

impl Common {
    fn spec(&self, scenario: Scenario) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(scenario);
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(k) = self.k {
            spec.k = k;
        }
        spec.p = self.p;
        spec.seed = self.seed;
        spec.trials = self.trials.unwrap_or(match scenario {
            Scenario::SingleEval => 1,
            _ => spec.trials,
        });
        spec.fd_step = self.fd_step;
        spec.optim = OptimConfig {
            step_size: self.alpha,
            max_iters: self.iters,
            improvement_threshold: self.threshold,
            eig_floor: self.eig_floor,
            record_trace: true,
            projection: match self.projection {
                Projection::PerSweep => ProjectionMode::PerSweep,
                Projection::PerK => ProjectionMode::PerOperator,
            },
        };
        if let Some(a) = &self.alphas {
            spec.alphas = a.clone();
        }
        if let Some(d) = &self.dims {
            spec.dims = d.clone();
        }
        if let Some(k) = &self.ks {
            spec.kraus_ranks = k.clone();
        }
        if let Some(s) = &self.schemes {
            spec.schemes = s.iter().map(|x| x.parse()).collect::<Result<_>>()?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Loaded fixtures where given, otherwise the random instance of trial 0.
    /// A random ensemble takes its dimension from a loaded channel.
    fn instance(&self, spec: &ExperimentSpec) -> Result<(KrausChannel, PureEnsemble)> {
        let loaded = match &self.channel {
            Some(path) => Some(io::read_json::<ChannelJson>(path)?.to_channel()?),
            None => None,
        };
        let ensemble = match &self.ensemble {
            Some(path) => io::read_json::<EnsembleJson>(path)?.to_pure_ensemble()?,
            None => {
                let n = loaded.as_ref().map_or(spec.n, KrausChannel::input_dim);
                trial_instance(spec.seed, 0, n, spec.m, spec.k, spec.states_for(n))?.0
            }
        };
        let channel = match loaded {
            Some(ch) => ch,
            None => {
                let n = ensemble.dim();
                trial_instance(spec.seed, 0, n, spec.m, spec.k, spec.states_for(n))?.1
            }
        };
        Ok((channel, ensemble))
    }

    /// Like [`Common::instance`], but the ensemble file may hold density
    /// matrices.
    fn mixed_instance(&self, spec: &ExperimentSpec) -> Result<(KrausChannel, Ensemble)> {
        match &self.ensemble {
            Some(path) => {
                let e = io::read_json::<EnsembleJson>(path)?.to_ensemble()?;
                let ch = match &self.channel {
                    Some(path) => io::read_json::<ChannelJson>(path)?.to_channel()?,
                    None => {
                        let n = e.dim();
                        trial_instance(spec.seed, 0, n, spec.m, spec.k, spec.states_for(n))?.1
                    }
                };
                Ok((ch, e))
            }
            None => {
                let (ch, e) = self.instance(spec)?;
                Ok((ch, e.to_ensemble()))
            }
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => io::write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(serde::Serialize)]
struct RunSummary<'a, T> {
    initial_bits: f64,
    best_bits: f64,
    best_iteration: usize,
    iterations: usize,
    status: String,
    result: &'a T,
}

fn run_summary<'a, T>(trace: &OptimTrace, result: &'a T) -> RunSummary<'a, T> {
    RunSummary {
        initial_bits: trace.initial_bits,
        best_bits: trace.best_bits,
        best_iteration: trace.best_iteration,
        iterations: trace.iterations,
        status: trace.status.to_string(),
        result,
    }
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn grad_check_output(args: &Common, report: &GradCheckReport) -> Result<()> {
    match args.format {
        Format::Csv => args.emit(&report.to_csv())?,
        Format::Json => args.emit(&io::to_json_string(report))?,
    }
    experiments::require_pass(report)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Eval(args) => {
            let spec = args.spec(Scenario::SingleEval)?;
            let (ch, e) = args.mixed_instance(&spec)?;
            let report = experiments::evaluate(&ch, &e)?;
            match args.format {
                Format::Json => args.emit(&io::to_json_string(&report)),
                Format::Csv => args.emit(&format!(
                    "holevo_bits,average_output_entropy_bits,completeness_residual\n{},{},{}\n",
                    io::fmt_float(report.holevo_bits),
                    io::fmt_float(report.average_output_entropy_bits),
                    io::fmt_float(report.completeness_residual)
                )),
            }
        }
        Command::OptimizeChannel(args) => {
            let spec = args.spec(Scenario::SingleEval)?;
            let (ch, e) = args.instance(&spec)?;
            let (best, trace) = optimizer::optimize_channel(&ch, &e.to_ensemble(), &spec.optim)?;
            log::info!(
                "{}: {} -> {} bits",
                trace.status,
                trace.initial_bits,
                trace.best_bits
            );
            match args.format {
                Format::Csv => args.emit(&experiments::trace_csv(&trace.records)),
                Format::Json => args.emit(&io::to_json_string(&run_summary(
                    &trace,
                    &ChannelJson::from(&best),
                ))),
            }
        }
        Command::OptimizeInput(args) => {
            let spec = args.spec(Scenario::SingleEval)?;
            let (ch, e) = args.instance(&spec)?;
            let (best, trace) = optimizer::optimize_input(&ch, &e, &spec.optim)?;
            log::info!(
                "{}: {} -> {} bits",
                trace.status,
                trace.initial_bits,
                trace.best_bits
            );
            match args.format {
                Format::Csv => args.emit(&experiments::trace_csv(&trace.records)),
                Format::Json => args.emit(&io::to_json_string(&run_summary(
                    &trace,
                    &EnsembleJson::from(&best),
                ))),
            }
        }
        Command::Convergence(args) => {
            let spec = args.spec(Scenario::Convergence)?;
            let out = experiments::run_convergence(&spec)?;
            let summary = io::to_json_string(&out.summary);
            match (args.format, &args.out) {
                (Format::Json, _) => args.emit(&summary),
                (Format::Csv, Some(path)) => {
                    io::write_file(path, &out.to_csv())?;
                    io::write_file(&summary_path(path), &summary)
                }
                (Format::Csv, None) => args.emit(&out.to_csv()),
            }
        }
        Command::DimSweep(args) => sweep(&args, Scenario::DimSweep),
        Command::KrausSweep(args) => sweep(&args, Scenario::KrausSweep),
        Command::GradCheck(args) => {
            let spec = args.spec(Scenario::GradCheck)?;
            let report = if args.channel.is_some() || args.ensemble.is_some() {
                let (ch, e) = args.mixed_instance(&spec)?;
                experiments::grad_check_at(&ch, &e, spec.fd_step, spec.optim.eig_floor)?
            } else {
                experiments::run_grad_check(&spec)?
            };
            grad_check_output(&args, &report)
        }
    }
}

fn sweep(args: &Common, scenario: Scenario) -> Result<()> {
    let spec = args.spec(scenario)?;
    let out = match scenario {
        Scenario::DimSweep => experiments::run_dim_sweep(&spec)?,
        _ => experiments::run_kraus_sweep(&spec)?,
    };
    match args.format {
        Format::Csv => args.emit(&out.to_csv()),
        Format::Json => args.emit(&io::to_json_string(&out.rows())),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
