use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use epf_pipeline::bundle::read_bundle;
use epf_pipeline::config::{Mode, PipelineConfig};
use epf_pipeline::fixture::{generate, FixtureKind};
use epf_pipeline::run::{run, RunError, Until};

/// Day-ahead electricity price forecasting: load pre-processing, load
/// scenarios, stochastic dispatch and statistical post-processing.
#[derive(Parser)]
#[command(name = "epf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV bundle and print its coverage.
    IngestCheck {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Run the load pre-processing stage.
    Preprocess(RunArgs),
    /// Run through the load scenario stage.
    Density(RunArgs),
    /// Run through the dispatch stage.
    Dispatch(RunArgs),
    /// Run through the price post-processing stage.
    Postprocess(RunArgs),
    /// Run everything and write the evaluation.
    Evaluate(RunArgs),
    /// Run every stage over the evaluation range.
    Run(RunArgs),
    /// Write a synthetic bundle and config.
    SimulateFixture {
        #[arg(long, value_enum, default_value = "toy")]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Toy,
    Acceptance,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    DispatchOnly,
}

/// Flags override the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    focal_zone: Option<String>,
    #[arg(long)]
    eval_start: Option<NaiveDate>,
    #[arg(long)]
    eval_end: Option<NaiveDate>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    load_days: Option<usize>,
    #[arg(long)]
    qra_days: Option<usize>,
    /// Three comma-separated probabilities: low, expected, high.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    scenario_weights: Option<Vec<f64>>,
    #[arg(long)]
    voll: Option<f64>,
    #[arg(long)]
    curtc: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig, RunError> {
        let mut c = PipelineConfig::load(&self.config)?;
        if let Some(v) = &self.bundle {
            c.bundle = v.clone();
        }
        if let Some(v) = &self.run_dir {
            c.run_dir = v.clone();
        }
        if let Some(v) = &self.focal_zone {
            c.focal_zone = v.clone();
        }
        if let Some(v) = self.eval_start {
            c.eval_start = v;
        }
        if let Some(v) = self.eval_end {
            c.eval_end = v;
        }
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeArg::Full => Mode::Full,
                ModeArg::DispatchOnly => Mode::DispatchOnly,
            };
        }
        if let Some(v) = self.load_days {
            c.windows.load_days = v;
        }
        if let Some(v) = self.qra_days {
            c.windows.qra_days = v;
        }
        if let Some(w) = &self.scenario_weights {
            c.scenario_weights = [w[0], w[1], w[2]];
        }
        if let Some(v) = self.voll {
            c.voll = v;
        }
        if let Some(v) = self.curtc {
            c.curtc = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        Ok(c)
    }
}

fn execute(args: &RunArgs, until: Until) -> Result<i32, RunError> {
    let cfg = args.config()?;
    let out = run(&cfg, until)?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    for (stage, days) in &out.computed {
        println!("{}: computed {} days", stage.dir(), days.len());
    }
    println!(
        "{} of {} requested days ok; run directory {}",
        out.requested_days - out.failed_days,
        out.requested_days,
        cfg.run_dir.display()
    );
    if let Some(s) = &out.summary {
        println!(
            "RMSE dispatch {:.3} forecast {:.3} ({:+.1} %), MAE dispatch {:.3} forecast {:.3}",
            s.rmse_dispatch,
            s.rmse_forecast,
            -100.0 * s.rmse_improvement,
            s.mae_dispatch,
            s.mae_forecast
        );
        if let (Some(chi), Some(p)) = (s.coverage_chi_square, s.coverage_p_value) {
            println!("coverage chi-square {chi:.2}, p = {p:.4}");
        }
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let until = |c: &Command| match c {
        Command::Preprocess(_) => Until::Preprocess,
        Command::Density(_) => Until::Density,
        Command::Dispatch(_) => Until::Dispatch,
        Command::Postprocess(_) => Until::Postprocess,
        _ => Until::Evaluate,
    };
    let result: anyhow::Result<i32> = match &cli.command {
        Command::IngestCheck { bundle } => match read_bundle(bundle) {
            Ok(ing) => {
                for w in &ing.warnings {
                    log::warn!("{w}");
                }
                let ds = &ing.dataset;
                println!("zones: {}", ds.zones.join(", "));
                println!("clusters: {}", ds.clusters.len());
                if let Some((a, b)) = ds.load_range() {
                    println!("load data: {} ..= {}", ds.date(a), ds.date(b));
                }
                Ok(0)
            }
            Err(e) => {
                eprintln!("{e}");
                Ok(3)
            }
        },
        Command::SimulateFixture { kind, out, seed } => {
            let kind = match kind {
                Kind::Toy => FixtureKind::Toy,
                Kind::Acceptance => FixtureKind::Acceptance,
            };
            generate(kind, out, *seed)
                .with_context(|| format!("writing fixture to {}", out.display()))
                .map(|cfg| {
                    println!("wrote {}", out.join("config.toml").display());
                    println!("evaluation range {} ..= {}", cfg.eval_start, cfg.eval_end);
                    0
                })
        }
        Command::Preprocess(a)
        | Command::Density(a)
        | Command::Dispatch(a)
        | Command::Postprocess(a)
        | Command::Evaluate(a)
        | Command::Run(a) => match execute(a, until(&cli.command)) {
            Ok(code) => Ok(code),
            Err(e) => {
                eprintln!("error: {e}");
                Ok(e.exit_code())
            }
        },
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
