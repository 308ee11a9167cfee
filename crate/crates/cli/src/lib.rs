//! Command-line front end: configuration parsing, sweep execution and output.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::{parse_config, ConfigError, Mode, RunConfig};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "NODECOY_THREADS";

/// Success.
pub const EXIT_OK: i32 = 0;
/// I/O failure.
pub const EXIT_IO: i32 = 1;
/// Invalid configuration.
pub const EXIT_CONFIG: i32 = 2;
/// More failed cells than `run.max_failed_cells`.
pub const EXIT_SOLVER: i32 = 3;

/// Failure of a run, with its exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub plot_script: Option<PathBuf>,
    pub cells: usize,
    pub failed: usize,
    pub exit_code: i32,
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(RunError::Config)
}

/// Runs the sweep and writes the CSV, the metadata sidecar and optionally
/// the plot script. `out` overrides `output.path`.
pub fn run(cfg: &RunConfig, out: Option<&Path>, emit_plot_script: bool) -> Result<RunSummary, RunError> {
    let csv_path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| RunError::Config(ConfigError("no output path: pass --out or set output.path".into())))?;
    log::info!(
        "{} sweep over {} ({} values) for {}",
        cfg.mode.name(),
        cfg.plan.axis,
        cfg.plan.values.len(),
        cfg.plan.protocols.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
    );
    let rows = nodecoy::run_sweep(&cfg.plan).map_err(|e| RunError::Config(ConfigError(e.to_string())))?;
    for r in &rows {
        match &r.error {
            Some(e) => log::warn!("{} {}={}: {e}", r.protocol, r.axis, r.axis_value),
            None => log::debug!(
                "{} {}={} mu={:.4e} rate={:.6e} status={} iterations={} {:.0} ms",
                r.protocol,
                r.axis,
                r.axis_value,
                r.mu,
                r.rate,
                r.status,
                r.iterations,
                r.runtime_ms
            ),
        }
    }
    let io = |p: &Path, e: &dyn std::fmt::Display| RunError::Io(format!("{}: {e}", p.display()));
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
    }
    let file = File::create(&csv_path).map_err(|e| io(&csv_path, &e))?;
    output::write_csv(BufWriter::new(file), &rows, cfg.timing).map_err(|e| io(&csv_path, &e))?;

    let meta_path = output::metadata_path(&csv_path);
    let meta = serde_json::to_string_pretty(&output::metadata(cfg, &rows)).expect("metadata serializes");
    std::fs::write(&meta_path, meta + "\n").map_err(|e| io(&meta_path, &e))?;

    let plot_script = if emit_plot_script {
        let p = output::plot_script_path(&csv_path);
        std::fs::write(&p, output::plot_script(&csv_path, output::axis_label(cfg.plan.axis))).map_err(|e| io(&p, &e))?;
        Some(p)
    } else {
        None
    };
    let failed = rows.iter().filter(|r| r.failed()).count();
    let exit_code = if failed > cfg.max_failed_cells {
        log::error!("{failed} failed cells exceed run.max_failed_cells = {}", cfg.max_failed_cells);
        EXIT_SOLVER
    } else {
        EXIT_OK
    };
    Ok(RunSummary {
        csv: csv_path,
        metadata: meta_path,
        plot_script,
        cells: rows.len(),
        failed,
        exit_code,
    })
}
