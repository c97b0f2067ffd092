//! `vemcontact`: runs the patch, trig, Hertz or custom-mesh contact experiments.
//!
//! Exit status: 0 on success, 2 if any solve hit the iteration cap (reports are
//! still written), 1 on invalid input (nothing is written).

mod config;
mod output;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let args = match config::Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let cfg = match config::resolve(args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let artifacts = match run::run(&cfg) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = output::write_all(&cfg.out, &artifacts.files) {
        eprintln!("error: cannot write to {}: {e}", cfg.out.display());
        return ExitCode::from(1);
    }
    for line in &artifacts.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", artifacts.files.len(), cfg.out.display());
    if artifacts.non_converged {
        eprintln!("error: at least one solve did not converge");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
