use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splitlab::attacks::AttackKind;
use splitlab::experiment::{
    cmd_infer_k, cmd_report, cmd_sweep, cmd_train, DatasetSpec, DefenseSection, ExperimentConfig, SweepAxis,
    DEFAULT_OUT_DIR, OUT_DIR_ENV, REPORT_FILE,
};
use splitlab::secdt::NormStandard;
use splitlab::{Error, Result};

/// Split-learning label leakage experiments.
#[derive(Debug, Parser)]
#[command(name = "splitlab", version)]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train once, attack the tap, write a run record.
    Train(Overrides),
    /// One run per value of a defense parameter.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values, e.g. 2,4,8 or 0,0.2,0.5.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Repeatedly train a defended model and guess its label dimension.
    InferK {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        /// Largest dimension tried; defaults to twice the true one.
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Aggregate the run records in a directory into report.csv.
    Report {
        #[arg(env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Dimension,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DefenseMode {
    Off,
    Secdt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Standard {
    Min,
    Mean,
    Max,
    Off,
}

/// Command-line overrides; each one replaces the matching config field.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML experiment config; defaults apply to anything it leaves out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config, then $SPLITLAB_OUT, then runs].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Synthetic dataset size.
    #[arg(long)]
    samples: Option<usize>,
    /// Synthetic class separation.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, value_enum)]
    defense: Option<DefenseMode>,
    /// Expanded label dimension; implies --defense secdt.
    #[arg(long)]
    dimension: Option<usize>,
    /// Expanded dimension as a multiple of the class count; implies --defense secdt.
    #[arg(long)]
    ratio: Option<usize>,
    /// Label noise level in [0, 1); implies --defense secdt.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, value_enum)]
    norm_standard: Option<Standard>,
    /// Comma-separated attack list (norm, direction, spectral, model_completion).
    #[arg(long, value_delimiter = ',')]
    attacks: Option<Vec<AttackKind>>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = Some(v.clone());
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if self.samples.is_some() || self.separation.is_some() {
            let DatasetSpec::Synthetic(spec) = &mut cfg.dataset else {
                return Err(Error::Config("--samples and --separation need a synthetic dataset".into()));
            };
            if let Some(v) = self.samples {
                spec.n = v;
            }
            if let Some(v) = self.separation {
                spec.separation = v;
            }
        }
        let touches_defense =
            self.dimension.is_some() || self.ratio.is_some() || self.noise.is_some() || self.norm_standard.is_some();
        match self.defense {
            Some(DefenseMode::Off) if touches_defense => {
                return Err(Error::Config("--defense off conflicts with defense parameters".into()))
            }
            Some(DefenseMode::Off) => cfg.defense = None,
            Some(DefenseMode::Secdt) => {
                cfg.defense.get_or_insert_with(DefenseSection::default);
            }
            None => {}
        }
        if touches_defense {
            let d = cfg.defense.get_or_insert_with(DefenseSection::default);
            if self.dimension.is_some() || self.ratio.is_some() {
                d.dimension = self.dimension;
                d.ratio = self.ratio;
            }
            if let Some(v) = self.noise {
                d.noise_level = v;
            }
            if let Some(s) = self.norm_standard {
                d.norm_standard = match s {
                    Standard::Min => NormStandard::Min,
                    Standard::Mean => NormStandard::Mean,
                    Standard::Max => NormStandard::Max,
                    Standard::Off => NormStandard::Off,
                };
            }
        }
        if let Some(v) = &self.attacks {
            cfg.attacks.run = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_metric(m: Option<f64>) -> String {
    m.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(o) => {
            let cfg = o.resolve()?;
            let (rec, path) = cmd_train(&cfg)?;
            println!("run {} -> {}", rec.run_id, path.display());
            println!("test utility {:.4}", rec.utility.headline());
            for a in &rec.attacks {
                match &a.skipped {
                    Some(why) => println!("  {:<17} skipped: {why}", a.attack.to_string()),
                    None => println!("  {:<17} {}", a.attack.to_string(), fmt_metric(a.metric())),
                }
            }
        }
        Command::Sweep {
            overrides,
            axis,
            values,
            workers,
        } => {
            let cfg = overrides.resolve()?;
            let axis = match axis {
                Axis::Dimension => SweepAxis::Dimension,
                Axis::Noise => SweepAxis::Noise,
            };
            let (records, summary) = cmd_sweep(&cfg, axis, &values, workers)?;
            for (v, rec) in values.iter().zip(&records) {
                let leaks: Vec<String> = rec
                    .attacks
                    .iter()
                    .map(|a| format!("{}={}", a.attack, fmt_metric(a.metric())))
                    .collect();
                println!("{axis}={v} utility={:.4} {}", rec.utility.headline(), leaks.join(" "));
            }
            println!("summary -> {}", summary.display());
        }
        Command::InferK {
            overrides,
            trials,
            k_max,
            workers,
        } => {
            let cfg = overrides.resolve()?;
            let (summary, path) = cmd_infer_k(&cfg, trials, k_max, workers)?;
            println!("true dimension {}", summary.dimension);
            for (g, n) in summary.histogram() {
                println!("  guess {g:>4}: {n}");
            }
            println!("correct {:.2}; histogram -> {}", summary.correct_fraction(), path.display());
        }
        Command::Report { dir } => {
            let rows = cmd_report(&dir)?;
            for r in &rows {
                println!(
                    "{} {:<5} K={:<4} mu={:<5} utility={:.4} {:<17} {}",
                    r.run_id,
                    r.defense,
                    r.dimension.map_or("-".into(), |d| d.to_string()),
                    r.noise_level.map_or("-".into(), |m| m.to_string()),
                    r.test_utility,
                    r.attack.to_string(),
                    fmt_metric(r.leak_metric)
                );
            }
            println!("{} rows -> {}", rows.len(), dir.join(REPORT_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
