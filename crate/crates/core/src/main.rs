use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qf3delta::cli::{error_kind, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(config) = args.config else {
        eprintln!("error[config]: --config <path> is required");
        return ExitCode::from(2);
    };
    let out = args.out.unwrap_or_else(|| PathBuf::from("."));
    match run(args.command, &config, &out, args.workers) {
        Ok(m) => {
            println!("{}: wrote {} files to {} in {:.2}s", m.subcommand, m.outputs.len() + 1, out.display(), m.wall_clock_seconds);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = error_kind(&e);
            let msg = match &e {
                qf3delta::Error::Config(m) => m.clone(),
                e => e.to_string(),
            };
            eprintln!("error[{kind}]: {}", msg.replace('\n', " "));
            ExitCode::from(if kind == "config" { 2 } else { 1 })
        }
    }
}
