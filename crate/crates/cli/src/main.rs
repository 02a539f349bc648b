use clap::Parser;

use seqir_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli.command) {
        Ok(path) => {
            if !cli.quiet {
                println!("wrote {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("seqir {}: {e}", cli.command.name());
            std::process::exit(e.exit_code());
        }
    }
}
