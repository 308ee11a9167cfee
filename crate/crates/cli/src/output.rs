//! CSV table, metadata sidecar and plot script.

use std::io::Write;
use std::path::{Path, PathBuf};

use nodecoy::SweepRow;
use serde_json::{json, Value};

use crate::config::{render_config, RunConfig};

/// CSV header, in column order.
pub const COLUMNS: [&str; 11] = [
    "protocol",
    "axis",
    "axis_value",
    "mu",
    "theta",
    "rate_per_signal",
    "key_length",
    "lower_bound",
    "status",
    "solver_iterations",
    "runtime_ms",
];

/// Seventeen significant digits, which round-trip every `f64`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes the sweep table. With `timing` false the runtime column is left
/// empty so that reruns produce identical bytes.
pub fn write_csv<W: Write>(w: W, rows: &[SweepRow], timing: bool) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in rows {
        out.write_record([
            r.protocol.name().to_string(),
            r.axis.name().to_string(),
            format_value(r.axis_value),
            format_value(r.mu),
            format_value(r.theta),
            format_value(r.rate),
            r.key_length.map(format_value).unwrap_or_default(),
            format_value(r.lower_bound),
            r.status.clone(),
            r.iterations.to_string(),
            if timing { format_value(r.runtime_ms) } else { String::new() },
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar path: `<csv>.meta.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Plot-script path: `<csv stem>.plot.py` next to the CSV.
pub fn plot_script_path(csv: &Path) -> PathBuf {
    csv.with_extension("plot.py")
}

/// Every resolved parameter, the equivalent configuration text and the
/// per-cell failures.
pub fn metadata(cfg: &RunConfig, rows: &[SweepRow]) -> Value {
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|e| {
                json!({
                    "protocol": r.protocol.name(),
                    "axis_value": r.axis_value,
                    "error": e,
                })
            })
        })
        .collect();
    let flat: Vec<Value> = rows
        .iter()
        .filter(|r| r.flat)
        .map(|r| json!({"protocol": r.protocol.name(), "axis_value": r.axis_value}))
        .collect();
    let cutoffs: serde_json::Map<String, Value> = cfg
        .cutoffs()
        .into_iter()
        .map(|(k, c)| (k.name().to_string(), json!(c)))
        .collect();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "parameters": cfg.resolved,
        "cutoff_per_protocol": cutoffs,
        "config": render_config(&cfg.resolved),
        "columns": COLUMNS,
        "cells": rows.len(),
        "failed_cells": failures,
        "zero_rate_on_mu_grid": flat,
    })
}

/// Standalone matplotlib script plotting rate against the swept axis on a
/// logarithmic rate axis, one line per protocol.
pub fn plot_script(csv: &Path, axis_label: &str) -> String {
    let name = csv.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        r#"#!/usr/bin/env python3
"""Plots secret-key rate per signal against {axis_label} from {name}."""
import csv
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, {name:?})
series = {{}}
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        rate = float(row["rate_per_signal"])
        if rate > 0:
            series.setdefault(row["protocol"], []).append((float(row["axis_value"]), rate))

fig, ax = plt.subplots(figsize=(6, 4.5))
for protocol, points in series.items():
    points.sort()
    ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=protocol)
ax.set_yscale("log")
ax.set_xlabel({axis_label:?})
ax.set_ylabel("Secret key rate per signal")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
out = os.path.splitext(path)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
"#
    )
}

/// Axis label used in plots.
pub fn axis_label(axis: nodecoy::Axis) -> &'static str {
    match axis {
        nodecoy::Axis::LossDb => "Loss (dB)",
        nodecoy::Axis::Visibility => "Visibility",
        nodecoy::Axis::Misalignment => "Misalignment (rad)",
        nodecoy::Axis::CutoffK => "Photon cutoff K",
        nodecoy::Axis::N => "Number of signals N",
    }
}
