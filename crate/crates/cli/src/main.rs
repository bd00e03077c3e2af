use std::process::ExitCode;

use clap::Parser;
use gdsmap_cli::{render, run, Cli, CliError, Format, RunConfig, EXIT_INVALID};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match RunConfig::from_cli(cli) {
        Ok(config) => {
            let out = run(&config);
            println!("{}", out.report);
            ExitCode::from(out.exit_code)
        }
        Err(e) => {
            report_invalid(&e, format);
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn report_invalid(e: &CliError, format: Format) {
    let value = serde_json::json!({ "error": { "kind": "invalid_option", "message": e.to_string(), "exit_code": EXIT_INVALID } });
    eprintln!("{}", render(&value, format));
}
