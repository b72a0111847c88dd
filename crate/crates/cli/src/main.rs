mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{FileConfig, InstanceConfig, Knobs, Precision, RunConfig};
use output::Artifacts;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qpseries", version, about = "Perturbation series experiments for quasiperiodic operators")]
struct Cli {
    /// TOML file with `[instance]` and `[run]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = "QPSERIES_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "double")]
    precision: Precision,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    phase: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    omega: Option<Vec<f64>>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    s_used: Option<usize>,
    #[arg(long)]
    radius: Option<i32>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c_safe: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    phases: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue coefficients by the projection recursion.
    Series(Overrides),
    /// Path sums against the recursion, order by order.
    Paths(Overrides),
    /// Class inventory and grouped sums; a single path's class; the repeated-return family.
    Classes {
        #[command(flatten)]
        o: Overrides,
        /// Show the marking, translation and class of one path.
        #[arg(long)]
        path: Option<String>,
        /// Manual levels as `site:level,...`, coordinates separated by `;`.
        #[arg(long)]
        levels: Option<String>,
        /// Manual safe distances per level, `0,11`.
        #[arg(long)]
        safedist: Option<String>,
        /// Check the repeated-return family up to this many returns.
        #[arg(long)]
        family: Option<usize>,
    },
    /// Band levels and the consistency check.
    Denominators(Overrides),
    /// Series against dense diagonalization: eigenvalue, localization, completeness, monotonicity, IDS.
    Spectrum(Overrides),
    /// Flat-segment conjugation diagnostics.
    Flatseg(Overrides),
    /// Stack-bound property with a calibrated constant.
    Report(Overrides),
}

impl Overrides {
    fn as_file(&self) -> FileConfig {
        FileConfig {
            instance: InstanceConfig {
                potential: None,
                omega: self.omega.clone(),
                phase: self.phase,
                epsilon: self.epsilon,
            },
            run: Knobs {
                order: self.order,
                s_used: self.s_used,
                radius: self.radius,
                epsilons: self.epsilons.clone(),
                beta: self.beta,
                c_safe: self.c_safe,
                grid: self.grid,
                seed: self.seed,
                samples: self.samples,
                phases: self.phases.clone(),
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, o) = match &cli.command {
        Command::Series(o) => ("series", o),
        Command::Paths(o) => ("paths", o),
        Command::Classes { o, .. } => ("classes", o),
        Command::Denominators(o) => ("denominators", o),
        Command::Spectrum(o) => ("spectrum", o),
        Command::Flatseg(o) => ("flatseg", o),
        Command::Report(o) => ("report", o),
    };
    let mut options = BTreeMap::new();
    if let Command::Classes {
        path,
        levels,
        safedist,
        family,
        ..
    } = &cli.command
    {
        let named = [
            ("path", path.clone()),
            ("levels", levels.clone()),
            ("safedist", safedist.clone()),
            ("family", family.map(|k| k.to_string())),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                options.insert(k.to_string(), v);
            }
        }
    }
    let cfg = match config::load(cli.config.as_deref())
        .and_then(|file| RunConfig::resolve(name, cli.precision, &file, &o.as_file(), options))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    }
    let run = || -> anyhow::Result<commands::Outcome> {
        let out = Artifacts::new(&cli.out, &cfg)?;
        let _ = writeln!(
            std::io::stdout(),
            "qpseries {name}  config {}  precision {:?}",
            &out.hash()[..16],
            cfg.precision
        );
        match &cli.command {
            Command::Series(_) => commands::series(&cfg, &out),
            Command::Paths(_) => commands::paths(&cfg, &out),
            Command::Classes {
                path,
                levels,
                safedist,
                family,
                ..
            } => {
                let args = commands::ClassArgs {
                    path: path.clone(),
                    levels: levels.clone(),
                    safedist: safedist.clone(),
                    family: *family,
                };
                commands::classes(&cfg, &args, &out)
            }
            Command::Denominators(_) => commands::denominators(&cfg, &out),
            Command::Spectrum(_) => commands::spectrum(&cfg, &out),
            Command::Flatseg(_) => commands::flatseg(&cfg, &out),
            Command::Report(_) => commands::report(&cfg, &out),
        }
    };
    match run() {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            for l in &outcome.lines {
                // A closed pipe is not an error.
                if writeln!(stdout, "  {l}").is_err() {
                    break;
                }
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("{name}: {e:#}");
            ExitCode::from(1)
        }
    }
}
