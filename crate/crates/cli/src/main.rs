use std::path::PathBuf;
use std::process::ExitCode;

use cantor_sio_lab::{run, Command};
use clap::Parser;

/// Runs one experiment and writes its JSON and CSV reports.
///
/// Exit status: 0 when every verdict passes, 1 on a failed or inconclusive verdict,
/// 2 on a configuration error or a refused kernel.
#[derive(Parser)]
#[command(name = "lab", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args.command, &args.config, Some(args.out), args.seed) {
        Ok((report, files)) => {
            for v in &report.verdicts {
                println!(
                    "{:<12} {} = {:e} (+/- {:e}) {} {:e}",
                    v.status.to_string(),
                    v.name,
                    v.value,
                    v.error,
                    v.comparison,
                    v.threshold
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            println!("{}: {}", report.experiment, report.overall);
            ExitCode::from(if report.passed() { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
