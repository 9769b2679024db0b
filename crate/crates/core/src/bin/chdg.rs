use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chdg::io::{self, config::RunConfig};
use chdg::model::PresetName;

const OUTPUT_HELP: &str =
    "Output directory: --out, then `output_dir` in the config, then $CHDG_OUTPUT_DIR, then ./chdg_output.";

/// Cahn–Hilliard solver with SIPG in space and AVF in time.
#[derive(Parser)]
#[command(name = "chdg", version, after_help = OUTPUT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured problem.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a mesh ladder and report L2 errors and observed orders.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the named problems, or print the full defaults of one.
    #[command(group = clap::ArgGroup::new("what").required(true))]
    Preset {
        #[arg(long, group = "what")]
        list: bool,
        #[arg(long, group = "what")]
        show: Option<PresetName>,
    },
}

fn load(path: &Path) -> chdg::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| chdg::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    io::parse_config(&text).map_err(|e| match e {
        chdg::Error::Config { line, message } => chdg::Error::InvalidArgument(format!("{}:{line}: {message}", path.display())),
        other => other,
    })
}

fn execute(command: Command) -> chdg::Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = io::resolve_output_dir(out.as_deref(), &cfg);
            let s = io::run_config(&cfg, &dir)?;
            let last = s.series.len() - 1;
            println!(
                "{} steps, {} dofs, t = {:e}, energy {:e} -> {:e}, mass drift {:e}",
                s.steps,
                s.dofs,
                s.state.t,
                s.series.energy[0],
                s.series.energy[last],
                s.series.max_mass_drift()
            );
            if let Some(e) = s.l2_error {
                println!("L2 error at t = {:e}: {e:e}", s.state.t);
            }
            println!("outputs in {}", dir.display());
        }
        Command::Converge { config, levels, out } => {
            let cfg = load(&config)?;
            let dir = io::resolve_output_dir(out.as_deref(), &cfg);
            let rows = io::converge_to(&cfg, levels, &dir)?;
            print!("{}", io::output::convergence_report(&rows));
            println!("report in {}", dir.join(io::driver::CONVERGENCE_FILE).display());
        }
        Command::Preset { show: Some(p), .. } => print!("{}", RunConfig::from_preset(p).to_config_string()),
        Command::Preset { .. } => {
            for p in PresetName::ALL {
                println!("{:<16}{}", p.name(), p.description());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
