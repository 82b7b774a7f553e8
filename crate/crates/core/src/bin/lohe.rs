use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lohe_core::harness::commands::{
    cmd_check_ssp, cmd_plot, cmd_reduce_compare, cmd_simulate, cmd_sweep, RunOptions,
};
use lohe_core::harness::threads_from_env;

#[derive(Parser)]
#[command(name = "lohe", version, about = "Numerical experiments for the Lohe tensor model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for CSV/JSON/SVG outputs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Replace the seed given in the config.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Exit 1 when an enabled check fails (default).
    #[arg(long, overrides_with = "no_assert")]
    assert: bool,
    /// Always exit 0 unless an error occurs.
    #[arg(long)]
    no_assert: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            seed_override: self.seed_override,
            assert: !self.no_assert,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the diagnostics CSV and verdict JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check the splitting condition for the scenario's free flow and couplings.
    CheckSsp {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a low-rank model against its tensor embedding.
    ReduceCompare {
        /// kuramoto, sphere or lohe-matrix
        #[arg(long)]
        kind: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario over a grid of one or two parameters.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `name=v1,v2,...`; repeat for a second axis.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Render R, V and Dmax from a diagnostics CSV as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        log: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = threads_from_env() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let result = match &cli.command {
        Command::Simulate { config, common } => cmd_simulate(config, &common.options()),
        Command::CheckSsp { config, common } => cmd_check_ssp(config, &common.options()),
        Command::ReduceCompare { kind, config, common } => {
            cmd_reduce_compare(kind, config.as_deref(), &common.options())
        }
        Command::Sweep { config, axes, common } => cmd_sweep(config, axes, &common.options()),
        Command::Plot { csv, log, out_dir } => cmd_plot(csv, out_dir, *log).map(|p| {
            println!("{}", p.display());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
