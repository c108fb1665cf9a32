mod args;
mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
pub enum Failure {
    Invalid { kind: String, message: String },
    Certification { message: String },
}

impl Failure {
    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        Failure::Invalid {
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid { .. } => 2,
            Failure::Certification { .. } => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Invalid { kind, message } => (kind.as_str(), message.as_str()),
            Failure::Certification { message } => ("certification", message.as_str()),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } })
    }
}

impl From<dopt2k::Error> for Failure {
    fn from(e: dopt2k::Error) -> Self {
        if e.is_validation() {
            Failure::invalid(e.kind(), e.to_string())
        } else {
            Failure::Certification {
                message: e.to_string(),
            }
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::merge(argv) {
        Ok(a) => a,
        Err(f) => return report(&f),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            return report(&Failure::invalid(
                "usage",
                e.render().to_string().trim_end(),
            ));
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let mut out = std::io::stdout().lock();
    match commands::run(&cli, &mut out) {
        Ok(()) => {
            let _ = out.flush();
            ExitCode::SUCCESS
        }
        Err(f) => {
            let _ = out.flush();
            report(&f)
        }
    }
}

fn report(f: &Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.exit_code())
}
