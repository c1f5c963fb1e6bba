use clap::Parser;
use ellrisk::cli::{self, Cli};

fn main() {
    // ELLRISK_THREADS caps internal parallelism
    if let Ok(text) = std::env::var("ELLRISK_THREADS") {
        if let Ok(k) = text.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
        }
    }

    // usage errors exit 1, domain errors exit 2 with machine-readable JSON
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };

    if let Err(e) = cli::run(&cli) {
        let payload = serde_json::json!({ "error": e.code(), "message": e.to_string() });
        eprintln!("{payload}");
        std::process::exit(2);
    }
}
