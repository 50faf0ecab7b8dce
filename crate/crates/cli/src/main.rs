use clap::Parser;

fn main() {
    let cli = match singleshot::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version are not errors; every other parse failure is invalid input.
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    std::process::exit(singleshot::run(&cli));
}
