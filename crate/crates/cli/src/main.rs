use clap::Parser;

use iedd::config::Cli;
use iedd::exit;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors; usage errors map to the config code
            let code = if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(iedd::run(&cli));
}
