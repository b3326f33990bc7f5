use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdiqkd::otp::{self, KeyMaterial, OtpError};
use mdiqkd::pipeline::{self, ConfigSource, SimulateOptions};
use rand::{Rng, SeedableRng};

/// Time-bin MDI-QKD simulator and post-processing.
///
/// Set MDIQKD_LOG (error, warn, info, debug, trace) for log output.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write tallies, estimates and key-rate reports.
    Simulate {
        /// Config file (TOML or JSON) or preset name.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Number of partitions; defaults to 10^6 rounds each.
        #[arg(long)]
        partitions: Option<u64>,
    },
    /// Decoy bounds and key rate from an exported tally CSV.
    Estimate {
        #[arg(long)]
        tallies: PathBuf,
        #[arg(long)]
        config: String,
        /// Print JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// Print the stored reports of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// One-time pad with a key file.
    Otp {
        #[command(subcommand)]
        action: OtpCommand,
    },
}

#[derive(Subcommand)]
enum OtpCommand {
    /// XOR a file with unused key bits and advance the key offset.
    Encrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Same operation as encrypt.
    Decrypt {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a key file of pseudo-random bits, for testing.
    Keygen {
        #[arg(long)]
        bits: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show key length and offset.
    Info {
        #[arg(long)]
        key: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate { config, out, partitions } => {
            let source = ConfigSource::resolve(&config)?;
            let opts = SimulateOptions {
                partitions,
                checkpoint: None,
            };
            let manifest = pipeline::run_pipeline(&source, &out, &opts)?;
            println!("{}", pipeline::report(&out)?);
            println!("artifacts in {}: {:?}", out.display(), manifest.artifacts.values().collect::<Vec<_>>());
        }
        Command::Estimate { tallies, config, json } => {
            let source = ConfigSource::resolve(&config)?;
            let (estimate, report) = pipeline::estimate_only(&tallies, &source)?;
            if json {
                let v = serde_json::json!({ "estimate": estimate, "keyrate": report });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("e11 upper  {:.6}", estimate.e11_upper);
                println!("Y11 lower  {:.6e}", estimate.y11_lower);
                println!("{report}");
            }
        }
        Command::Report { run } => println!("{}", pipeline::report(&run)?),
        Command::Otp { action } => match action {
            OtpCommand::Encrypt { key, input, out } => {
                let used = otp::encrypt_file(&key, &input, &out)?;
                println!("used {used} key bits");
            }
            OtpCommand::Decrypt { key, input, out } => {
                let used = otp::decrypt_file(&key, &input, &out)?;
                println!("used {used} key bits");
            }
            OtpCommand::Keygen { bits, seed, out } => {
                let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
                let bytes: Vec<u8> = (0..bits.div_ceil(8)).map(|_| rng.random()).collect();
                KeyMaterial::from_packed(bytes, bits)?.save(&out)?;
            }
            OtpCommand::Info { key } => {
                let k = KeyMaterial::load(&key)?;
                println!("{} bits, {} consumed, {} remaining", k.len(), k.consumed(), k.remaining());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MDIQKD_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e.downcast_ref::<OtpError>(), Some(OtpError::InsufficientKey { .. })) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
