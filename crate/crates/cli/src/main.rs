use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nodecoy_cli::{load_config, run, EXIT_CONFIG, THREADS_ENV};

/// Secret-key rates of decoy-free BB84, NPAB BB84 and SARG04 over a
/// parameter sweep.
#[derive(Debug, Parser)]
#[command(name = "nodecoy", version)]
struct Args {
    /// Configuration file (flat key = value with [sections]).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output CSV; overrides output.path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads (0 uses all cores).
    #[arg(long, value_name = "N", env = THREADS_ENV, default_value_t = 0)]
    threads: usize,

    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    emit_plot_script: bool,

    /// Log every cell.
    #[arg(long, short)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    env_logger::Builder::new()
        .filter_level(if args.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Info })
        .parse_default_env()
        .init();
    if args.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let outcome = load_config(&args.config).and_then(|cfg| run(&cfg, args.out.as_deref(), args.emit_plot_script));
    match outcome {
        Ok(s) => {
            log::info!("wrote {} ({} cells, {} failed)", s.csv.display(), s.cells, s.failed);
            ExitCode::from(s.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
