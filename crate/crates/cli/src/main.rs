use std::io::{self, Write};
use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use elicit_cli::api;
use elicit_cli::commands::{execute, now, Cli, Command};
use elicit_cli::CliError;

fn serve(cli: &Cli) -> Result<(), CliError> {
    let Command::Serve { port, host, store } = &cli.command else { unreachable!() };
    let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let ts = cli.timestamp.clone();
    let clock: api::Clock = Arc::new(move || ts.clone().unwrap_or_else(now));
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("runtime", e))?;
    rt.block_on(api::serve(store.clone(), addr, clock))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { .. } => serve(&cli).map(|_| None),
        _ => execute(&cli, &mut io::stdin().lock(), &mut io::stderr()).map(Some),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(out)) => {
            let text = out.render(cli.format);
            if !text.is_empty() {
                let _ = writeln!(io::stdout(), "{text}");
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            let _ = writeln!(io::stderr(), "{}", serde_json::to_string(&e.to_json()).expect("json"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
