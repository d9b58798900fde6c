use clap::Parser;
use leadlag_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            println!(
                "{}",
                serde_json::json!({ "status": "ok", "out_dir": cli.out_dir.display().to_string(), "files": files })
            );
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
