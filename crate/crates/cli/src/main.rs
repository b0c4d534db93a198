use clap::Parser;
use faqrank_cli::commands::{run, Cli};
use faqrank_cli::error::CliError;
use tracing_subscriber::EnvFilter;

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) | Err(CliError::OutputClosed) => {}
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            std::process::exit(e.exit_code());
        }
    }
}
