use clap::Parser;
use hydrolimit_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes")),
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.to_json()).expect("error serializes"));
            std::process::exit(e.exit_code());
        }
    }
}
