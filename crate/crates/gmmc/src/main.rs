use std::process::ExitCode;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    match gmmc::cli::run(argv, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(gmmc::cli::Exit::Clap(e)) => {
            if e.use_stderr() {
                let msg = e.to_string();
                let line = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
                let line = line.trim_start_matches("error: ");
                eprintln!("gmmc: error[usage]: {line}");
                ExitCode::from(2)
            } else {
                let _ = e.print();
                ExitCode::SUCCESS
            }
        }
        Err(gmmc::cli::Exit::Error(e)) => {
            let msg = e.to_string().replace('\n', "; ");
            eprintln!("gmmc: error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
