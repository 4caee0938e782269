use clap::Parser;
use rigor_server::cli::{execute, Cli};
use tracing_subscriber::EnvFilter;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let out = execute(Cli::parse())?;
    print!("{out}");
    Ok(())
}
