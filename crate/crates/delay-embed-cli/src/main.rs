use std::io::Write;

use clap::Parser;
use delay_embed_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            // A closed pipe (e.g. `| head`) is not an error of the run.
            let _ = writeln!(std::io::stdout(), "{summary}");
        }
        Err(e) => {
            eprintln!("delay-embed: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
