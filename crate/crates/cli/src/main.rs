use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use ottolab::output::write_all;
use ottolab::suite::{run_suite, Preset, SuiteOptions};

#[derive(Parser)]
#[command(name = "ottolab", version, about = "Interpolation-cost and entropic-transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance preset.
    Suite {
        #[arg(value_enum)]
        preset: Preset,
        #[arg(long, default_value = "ottolab-suite")]
        out: PathBuf,
        #[arg(long, hide = true)]
        inject_tolerance_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match cli.command {
        Cmd::Run { config, out } => ottolab::run_config(&config, out.as_deref()),
        Cmd::Suite { preset, out, inject_tolerance_fault } => (|| {
            let threads = ottolab::threads_from_env()?;
            let opts = SuiteOptions { tolerance_fault: inject_tolerance_fault };
            let r = run_suite(preset, opts, threads)?;
            for c in &r.criteria {
                println!("{}", c.line());
            }
            write_all(&out, &r.files)?;
            Ok(r.status())
        })(),
    };
    eprintln!("wall_time={:.3}s", start.elapsed().as_secs_f64());
    match result {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
