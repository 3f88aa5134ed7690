use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snnhe::commands::{self, BackendChoice, RunConfig};
use snnhe::report::RunReport;
use snnhe::Error;
use snnhe_core::lif::LifMode;

#[derive(Parser)]
#[command(version, about = "Encrypted spiking-network inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate keys, including every rotation key the network needs
    Keygen {
        /// Network JSON file or shipped network name
        #[arg(long)]
        net: String,
        /// Parameter profile: lenet5, resnet19 or test
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt every input of a dataset file, run the network and decrypt the class sums
    Infer {
        #[arg(long)]
        net: String,
        /// Directory of weight CSV files
        #[arg(long)]
        weights: Option<PathBuf>,
        /// IDX images or SPKF file
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "switch")]
        mode: LifMode,
        #[arg(long, default_value = "ckks")]
        backend: BackendChoice,
        /// Key directory written by `keygen`
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Parameter profile for the sim backend when no keys are given
        #[arg(long, default_value = "test")]
        profile: String,
        /// Write the report here as well as to stdout
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare encrypted against plaintext inference on a dataset
    Evaluate {
        #[arg(long)]
        net: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// IDX images (labels found by name) or SPKF file
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value = "switch")]
        mode: LifMode,
        #[arg(long, default_value = "ckks")]
        backend: BackendChoice,
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        profile: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write seeded weights, inputs and golden plaintext traces for a network
    GenFixture {
        #[arg(long)]
        net: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(report: &RunReport, path: Option<&PathBuf>) -> Result<(), Error> {
    let text = report.render();
    print!("{text}");
    if let Some(p) = path {
        fs::write(p, &text).map_err(Error::io(p))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Keygen { net, profile, seed, out } => {
            let m = commands::keygen(&net, &profile, seed, &out)?;
            println!("rotation keys: {}", m.rotation_indices.len());
            for f in &m.files {
                println!("{} {} bytes sha256 {}", f.name, f.bytes, f.sha256);
            }
        }
        Command::Infer { net, weights, input, mode, backend, keys, profile, report } => {
            let cfg = RunConfig { mode, backend, keys, profile, compare_plaintext: false, command: "infer".into() };
            let r = commands::infer(&net, weights.as_deref(), &input, &cfg)?;
            emit(&r, report.as_ref())?;
        }
        Command::Evaluate { net, weights, dataset, count, mode, backend, keys, profile, report } => {
            let cfg = RunConfig { mode, backend, keys, profile, compare_plaintext: true, command: "evaluate".into() };
            let r = commands::evaluate(&net, weights.as_deref(), &dataset, count, &cfg)?;
            emit(&r, report.as_ref())?;
        }
        Command::GenFixture { net, seed, count, out } => {
            let s = commands::gen_fixture(&net, seed, count, &out)?;
            for (name, digest) in &s.files {
                println!("{name} {digest}");
            }
            println!("digest: {}", s.digest);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
