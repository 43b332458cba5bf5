use std::process::ExitCode;

use clap::Parser;
use gcx_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match gcx_cli::run(cli) {
        Ok(out) => {
            if json {
                println!("{}", serde_json::to_string_pretty(&out.value).expect("output serializes"));
            } else {
                println!("{}", out.text);
            }
            ExitCode::from(out.status)
        }
        Err(e) => {
            if json {
                println!("{}", e.to_json());
            }
            eprintln!("gcx: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
