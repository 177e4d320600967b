use std::path::PathBuf;
use std::process::ExitCode;

use bpve_core::environment::presets;
use bpve_core::experiment::{exit_code, run_to_dir};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpve", version, about = "Branching processes in varying and random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (default: all available cores). Results do not
        /// depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory.
        #[arg(long, env = "BPVE_OUT_DIR", default_value = "bpve-out")]
        out: PathBuf,
        /// Overwrite results left by a different config.
        #[arg(long)]
        force: bool,
    },
    /// Print the named environment presets.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets => {
            for p in presets() {
                let spec = serde_json::to_string(&p.spec).expect("presets serialize");
                println!("{}\n  {}\n  {}", p.name, p.description, spec);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, threads, out, force } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot start {n} worker threads: {e}");
                    return ExitCode::from(1);
                }
            }
            match run_to_dir(&config, &out, force) {
                Ok((output, written)) => {
                    println!("experiment {:?}, config digest {}", output.resolved.experiment, output.config_digest);
                    for p in written {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
    }
}
