use clap::Parser;
use jlab::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} = {} ({})", c.name, c.value, c.condition);
            }
            println!(
                "{} artifacts in {} ({:.1} s)",
                outcome.artifacts.len(),
                outcome.out_dir.display(),
                outcome.seconds
            );
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("jlab: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
