use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use guided_crn::experiment::config::{ExperimentConfig, GuideKind};
use guided_crn::experiment::{export, presets, run};
use guided_crn::Error;

/// Guided simulation of chemical reaction networks conditioned on
/// observations at discrete times.
#[derive(Parser)]
#[command(name = "guided-crn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the unconditioned process up to the last observation time.
    Forward(Common),
    /// Simulate guided paths through the observations and weight them.
    Guided(Common),
    /// Estimate the pmf of one component at the observation time.
    Pmf(Common),
    /// Evaluate the a-tuning criterion over multiples of the guide's `a`.
    TuneA {
        #[command(flatten)]
        common: Common,
        /// Comma-separated multipliers of `a`.
        #[arg(long, value_delimiter = ',')]
        multipliers: Vec<f64>,
    },
    /// List reachable states from which no reaction approaches the target.
    CheckGreedy(Common),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (see `presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the guiding term: epsilon, zero_c, euler_cle, lna_restart, poisson_hybrid.
    #[arg(long)]
    guide: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn configs(&self) -> Result<Vec<ExperimentConfig>, Error> {
        let mut cfgs = match (&self.config, &self.preset) {
            (Some(path), _) => vec![ExperimentConfig::load(path)?],
            (None, Some(name)) => presets::preset(name)?,
            (None, None) => return Err(Error::Config("one of --config and --preset is required".into())),
        };
        for cfg in &mut cfgs {
            if let Some(seed) = self.seed {
                cfg.seed = seed;
            }
            if let Some(n) = self.replicates {
                cfg.replicates = n;
            }
            if let Some(t) = self.threads {
                cfg.threads = Some(t);
            }
            if let Some(g) = &self.guide {
                cfg.guide.kind = g.parse::<GuideKind>()?;
            }
            cfg.validate()?;
        }
        Ok(cfgs)
    }

    /// Output directory for one of `n` configurations.
    fn dir(&self, cfg: &ExperimentConfig, n: usize) -> PathBuf {
        if n > 1 && !cfg.name.is_empty() {
            self.out.join(&cfg.name)
        } else {
            self.out.clone()
        }
    }
}

fn label(cfg: &ExperimentConfig) -> &str {
    if cfg.name.is_empty() {
        "experiment"
    } else {
        &cfg.name
    }
}

fn fmt_estimate(s: &run::RunSummary) -> String {
    match &s.estimate {
        Some(e) => format!(" estimate={:.6e} se={:.3e}", e.mean, e.std_error),
        None => String::new(),
    }
}

fn execute(command: &Command) -> Result<(), Error> {
    let each = |common: &Common, f: &dyn Fn(&ExperimentConfig, &Path) -> Result<(), Error>| -> Result<(), Error> {
        let cfgs = common.configs()?;
        for cfg in &cfgs {
            let start = Instant::now();
            f(cfg, &common.dir(cfg, cfgs.len()))?;
            eprintln!("{}: {:.2} s", label(cfg), start.elapsed().as_secs_f64());
        }
        Ok(())
    };
    match command {
        Command::Forward(common) => each(common, &|cfg, dir| {
            let r = run::run_forward(cfg)?;
            run::save_forward(dir, cfg, &r)?;
            println!("{} forward: hit fractions {:?}", label(cfg), r.summary.hit_fractions);
            Ok(())
        }),
        Command::Guided(common) => each(common, &|cfg, dir| {
            let r = run::run_guided(cfg)?;
            run::save_guided(dir, cfg, &r)?;
            println!("{} guided[{}]: all-hit fraction {}{}", label(cfg), cfg.guide.kind.as_str(), r.summary.all_hit_fraction, fmt_estimate(&r.summary));
            Ok(())
        }),
        Command::Pmf(common) => each(common, &|cfg, dir| {
            let s = run::run_pmf(cfg)?;
            run::save_pmf(dir, &s)?;
            let sse = s.sse.map_or(String::new(), |e| format!(" sse={e:.3e}"));
            println!("{} pmf[{}]: mean hit fraction {:.4}{sse}", label(cfg), cfg.guide.kind.as_str(), s.all_hit_fraction);
            Ok(())
        }),
        Command::TuneA { common, multipliers } => each(common, &|cfg, dir| {
            let grid = if !multipliers.is_empty() {
                multipliers.clone()
            } else if let Some(t) = &cfg.tune {
                t.multipliers.clone()
            } else {
                vec![0.25, 0.5, 1.0, 2.0, 4.0]
            };
            let rows = run::run_tune(cfg, &grid)?;
            export::write_tune(export::create(dir, "tune.csv")?, &rows)?;
            for r in &rows {
                println!("{} multiplier={} criterion={:.4} hit_fraction={:.3}", label(cfg), r.multiplier, r.criterion, r.hit_fraction);
            }
            Ok(())
        }),
        Command::CheckGreedy(common) => each(common, &|cfg, dir| {
            let r = run::run_greedy(cfg)?;
            export::write_greedy(export::create(dir, "greedy.csv")?, &cfg.network()?, &r.violations)?;
            let note = if r.truncated { " (state budget reached)" } else { "" };
            println!("{}: {} states checked{note}, {} violations", label(cfg), r.states, r.violations.len());
            Ok(())
        }),
        Command::Presets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => 1,
                e if e.is_numerical() => 3,
                _ => 2,
            })
        }
    }
}
