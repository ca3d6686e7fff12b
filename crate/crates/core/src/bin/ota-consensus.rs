use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ota_consensus::cli::{self, exit};
use ota_consensus::config::parse_config;
use ota_consensus::report::fmt_real;
use ota_consensus::Error;

#[derive(Parser)]
#[command(
    name = "ota-consensus",
    version,
    about = "Over-the-air ratio consensus simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes trajectory.csv and summary.json.
    Run(Common),
    /// One run per (value, seed) of the config's [sweep] block; writes sweep.csv.
    Sweep(Common),
    /// Invariant and oracle checks; writes verify.json.
    Verify(Common),
    /// Generate the configured topology; writes topology.txt.
    Topo(Common),
}

#[derive(Args)]
struct Common {
    /// Config file.
    #[arg(short, long)]
    config: PathBuf,
    /// `key=value` overrides applied after the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

fn execute(command: Command) -> Result<i32, Error> {
    let (Command::Run(c) | Command::Sweep(c) | Command::Verify(c) | Command::Topo(c)) = &command;
    let parsed = parse_config(&c.config, &c.overrides)?;
    match command {
        Command::Run(_) => {
            let out = cli::cmd_run(&parsed, &c.out)?;
            let s = &out.summary;
            println!(
                "{}: converged={} iterations={} target={} max_error={}",
                parsed.config.algorithm.name(),
                s.converged,
                s.iterations_used,
                fmt_real(s.target_average),
                fmt_real(s.final_max_error)
            );
            Ok(exit::SUCCESS)
        }
        Command::Sweep(_) => {
            let rows = cli::cmd_sweep(&parsed, &c.out)?;
            let converged = rows.iter().filter(|r| r.converged).count();
            println!("sweep: {} runs, {} converged", rows.len(), converged);
            Ok(exit::SUCCESS)
        }
        Command::Verify(_) => {
            let checks = cli::cmd_verify(&parsed, &c.out)?;
            for ch in &checks {
                println!(
                    "{:<40} {:<13} measured={} threshold={}",
                    ch.check_name,
                    ch.status.as_str(),
                    fmt_real(ch.measured_error),
                    fmt_real(ch.threshold)
                );
            }
            Ok(if checks.iter().all(|ch| ch.passed()) {
                exit::SUCCESS
            } else {
                exit::CHECK_FAILURE
            })
        }
        Command::Topo(_) => {
            let g = cli::cmd_topo(&parsed, &c.out)?;
            println!(
                "topology: n={} edges={} symmetric={} strongly_connected={}",
                g.n(),
                g.edge_count(),
                g.is_symmetric(),
                g.is_strongly_connected()
            );
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    match execute(args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
