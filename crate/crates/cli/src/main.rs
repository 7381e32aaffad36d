use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use isp_core::harness::{cmd_forward, cmd_invert, cmd_recover, cmd_sweep, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "isp", version, about = "Fixed-energy inverse scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Noisy,
    Alt,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Noisy => Mode::Noisy,
            ModeArg::Alt => Mode::Alt,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the exact amplitude matrix and solver diagnostics.
    Forward {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invert an amplitude file into a per-lambda report.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        amplitude: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover q(x) from Fourier samples (JSON) or an inversion report (CSV).
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured acceptance criterion and write the summary.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> isp_core::Result<bool> {
    let load = |p: &PathBuf| ExperimentConfig::load(p);
    let out_dir = |cfg: &ExperimentConfig, o: Option<PathBuf>| o.unwrap_or_else(|| cfg.out.clone());
    match cli.command {
        Command::Forward { config, out } => {
            let cfg = load(&config)?;
            let o = cmd_forward(&cfg, &out_dir(&cfg, out))?;
            println!("{}", o.amplitude.display());
            println!("{}", o.diagnostics.display());
            Ok(true)
        }
        Command::Invert {
            config,
            amplitude,
            mode,
            out,
        } => {
            let cfg = load(&config)?;
            let o = cmd_invert(&cfg, &amplitude, mode.into(), &out_dir(&cfg, out))?;
            println!("{} ({} rows, {} flagged)", o.report.display(), o.rows, o.flagged);
            if let Some(t) = o.trace {
                println!("{}", t.display());
            }
            Ok(true)
        }
        Command::Recover { config, input, out } => {
            let cfg = load(&config)?;
            println!("{}", cmd_recover(&cfg, &input, &out_dir(&cfg, out))?.display());
            Ok(true)
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config)?;
            let o = cmd_sweep(&cfg, &out_dir(&cfg, out))?;
            for c in &o.outcomes {
                println!("{:>2} {:<8} {} {}", c.criterion, c.status.as_str(), c.name, c.measured);
            }
            println!("{}", o.summary.display());
            Ok(o.complete())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
