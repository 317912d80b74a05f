//! `nlsync`: equilibria, trajectories, Lyapunov exponents and controlled
//! master–slave synchronization for the Newton–Leipnik reaction–diffusion
//! system.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::StateBound;
use crate::config::{preset_text, RawConfig, ScenarioConfig};
use crate::error::CliError;
use crate::output::fmt_num;

#[derive(Parser, Debug)]
#[command(
    name = "nlsync",
    version,
    about = "Newton–Leipnik synchronization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Locate the equilibria and classify them by their Jacobian spectrum.
    Equilibria {
        #[command(flatten)]
        common: Common,
        /// Also write equilibria.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the reaction ODE with RK4 and write states.csv.
    Ode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Lyapunov spectrum of the reaction ODE.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the master–slave reaction–diffusion pair.
    Sync {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Number of field snapshots to write (0 disables them).
        #[arg(long)]
        snapshots: Option<usize>,
        #[arg(long, value_enum)]
        controls: Option<Switch>,
    },
    /// Check the gain condition and per-mode stability certificates.
    StabilityCheck {
        #[command(flatten)]
        common: Common,
        /// Bound on |u3| over the master trajectory.
        #[arg(long, conflicts_with = "from_manifest")]
        u3_sup: Option<f64>,
        /// Take the state bounds from a `sync` run's manifest.json.
        #[arg(long)]
        from_manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Built-in parameter set (paper-ode or paper-sync).
    #[arg(long)]
    preset: Option<String>,
    /// `key = value` config file, applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Control gain.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    d1: Option<f64>,
    #[arg(long)]
    d2: Option<f64>,
    #[arg(long)]
    d3: Option<f64>,
    /// Domain length.
    #[arg(long)]
    length: Option<f64>,
    /// Number of grid nodes including both ends.
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// crank-nicolson-diffusion or backward-euler-diffusion.
    #[arg(long)]
    scheme: Option<String>,
}

impl Common {
    fn resolve(&self, extra: &[(&str, String)]) -> Result<ScenarioConfig, CliError> {
        let mut raw = RawConfig::default();
        if let Some(name) = &self.preset {
            raw.merge_text(preset_text(name)?, name)?;
        }
        if let Some(path) = &self.config {
            raw.merge_file(path)?;
        }
        let numbers = [
            ("a", self.a),
            ("alpha", self.alpha),
            ("k", self.k),
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("length", self.length),
            ("dt", self.dt),
            ("t_end", self.t_end),
        ];
        for (key, v) in numbers {
            if let Some(v) = v {
                raw.set(key, &fmt_num(v))?;
            }
        }
        if let Some(n) = self.grid_n {
            raw.set("grid_n", &n.to_string())?;
        }
        if let Some(s) = &self.scheme {
            raw.set("scheme", s)?;
        }
        for (key, v) in extra {
            raw.set(key, v)?;
        }
        let cfg = ScenarioConfig::from_raw(raw)?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Equilibria { common, out } => {
            commands::equilibria(&common.resolve(&[])?, out.as_deref())
        }
        Command::Ode { common, out } => commands::ode(&common.resolve(&[])?, &out),
        Command::Lyapunov { common, out } => {
            commands::lyapunov(&common.resolve(&[])?, out.as_deref())
        }
        Command::Sync {
            common,
            out,
            snapshots,
            controls,
        } => {
            let mut extra = Vec::new();
            if let Some(n) = snapshots {
                extra.push(("snapshot_count", n.to_string()));
            }
            if let Some(c) = controls {
                let v = match c {
                    Switch::On => "on",
                    Switch::Off => "off",
                };
                extra.push(("controls", v.to_string()));
            }
            let cfg = common.resolve(&extra)?;
            for w in cfg.warnings() {
                eprintln!("{w}");
            }
            commands::sync(&cfg, &out)
        }
        Command::StabilityCheck {
            common,
            u3_sup,
            from_manifest,
            out,
        } => {
            let cfg = common.resolve(&[])?;
            let bound = match (u3_sup, from_manifest) {
                (Some(s), _) => StateBound::from_u3(s),
                (None, Some(path)) => StateBound::from_manifest(&path)?,
                (None, None) => {
                    return Err(CliError::Config(
                        "stability-check needs --u3-sup or --from-manifest".into(),
                    ))
                }
            };
            if !bound.u_sup.iter().all(|x| x.is_finite()) {
                return Err(CliError::Config("state bound must be finite".into()));
            }
            commands::stability_check(&cfg, bound, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlsync: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
