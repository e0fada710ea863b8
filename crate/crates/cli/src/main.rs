use adsl_cli::commands::{self, Outcome};
use adsl_cli::manifest::default_fixture_dir;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "adslc",
    about = "Toolchain for the staged NPU kernel DSL: validate, simulate, lower, benchmark",
    version
)]
struct Cli {
    /// Machine-model configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Emit machine-readable JSON where the command supports it.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and run every semantic check. Diagnostics stream to
    /// stdout as JSON lines. Exit: 0 clean, 1 semantic errors, 2 parse
    /// errors, 3 I/O.
    Check {
        /// Path to a `.adsl` source file.
        path: PathBuf,
    },
    /// Execute a program on tensors read from a directory of `.adslt`
    /// containers (one `<param>.adslt` per input parameter).
    Sim {
        path: PathBuf,
        /// Directory holding the input tensors.
        #[arg(long)]
        inputs: PathBuf,
        /// Output directory (default `<program>_out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the cycle-approximate timed model and write cost.json.
        #[arg(long)]
        timed: bool,
    },
    /// Lower a program through the four passes and write the emitted
    /// host/kernel sources plus the pass trace.
    Compile {
        path: PathBuf,
        /// Output directory (default `<program>_build`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after pass N (1-4) and dump the intermediate unit.
        #[arg(long, value_name = "N", default_value_t = 4)]
        stop_after_pass: u8,
        /// Extension for emitted sources.
        #[arg(long, default_value = "cpp")]
        ext: String,
    },
    /// Benchmark every fixture in a manifest: correctness against the
    /// reference oracle, then configured vs naive (depth 1, one core)
    /// makespans.
    Bench {
        /// Fixture manifest (default `fixtures/manifest.json`).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compare emitted sources and traces byte-wise against the committed
    /// goldens for every fixture.
    Goldens {
        /// Fixture directory (default `fixtures/`).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Rewrite the goldens instead of comparing.
        #[arg(long)]
        update: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match commands::load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_IO as u8);
        }
    };

    let outcome: Outcome = match cli.command {
        Command::Check { path } => commands::cmd_check(&path, &cfg),
        Command::Sim {
            path,
            inputs,
            out,
            timed,
        } => {
            let out = out.unwrap_or_else(|| commands::default_out_dir(&path, "out"));
            commands::cmd_sim(&path, &inputs, &out, &cfg, timed, cli.json)
        }
        Command::Compile {
            path,
            out,
            stop_after_pass,
            ext,
        } => {
            if !(1..=4).contains(&stop_after_pass) {
                eprintln!("error: --stop-after-pass must be 1..=4");
                return ExitCode::from(commands::EXIT_IO as u8);
            }
            let out = out.unwrap_or_else(|| commands::default_out_dir(&path, "build"));
            commands::cmd_compile(&path, &out, &cfg, stop_after_pass, &ext)
        }
        Command::Bench { manifest } => {
            let manifest =
                manifest.unwrap_or_else(|| default_fixture_dir().join("manifest.json"));
            commands::cmd_bench(&manifest, &cfg, cli.json)
        }
        Command::Goldens { fixtures, update } => {
            let fixtures = fixtures.unwrap_or_else(default_fixture_dir);
            commands::cmd_goldens(&fixtures, &cfg, update)
        }
    };

    if outcome.code == commands::EXIT_OK {
        eprintln!("{}", outcome.message);
    } else {
        eprintln!("error: {}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
