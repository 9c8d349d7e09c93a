//! Persisting an envelope: the JSON report, CSV tables and SVG figures.

use super::analysis::ReportEnvelope;
use super::chunks::write_atomic;
use super::svg::render_figures;
use super::HarnessError;
use crate::disagreement::write_csv;
use std::path::{Path, PathBuf};

pub const REPORT_FILE: &str = "report.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn envelope_json(env: &ReportEnvelope) -> String {
    let mut s = serde_json::to_string_pretty(env).expect("envelope is always serialisable");
    s.push('\n');
    s
}

pub fn write_envelope(env: &ReportEnvelope, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join(REPORT_FILE);
    write_atomic(&path, envelope_json(env).as_bytes())?;
    Ok(path)
}

pub fn read_envelope(path: &Path) -> Result<ReportEnvelope, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: not a report envelope: {e}", path.display())))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn split_table_csv(env: &ReportEnvelope) -> Vec<u8> {
    let rows: Vec<Vec<String>> = env
        .split_table
        .iter()
        .map(|r| {
            vec![
                r.split_seed.to_string(),
                r.runs.to_string(),
                r.k_star.to_string(),
                opt(r.silhouette),
                r.h_norm.to_string(),
                r.acc_mean.to_string(),
                r.acc_std.to_string(),
                r.degenerate.to_string(),
                opt(r.mean_offset),
                opt(r.mean_delta),
                opt(r.max_delta),
            ]
        })
        .collect();
    csv_bytes(
        &["Split", "Runs", "k*", "Silh", "H_norm", "Acc mean", "Acc std", "Degenerate", "Mean offset", "Mean delta", "Max delta"],
        &rows,
    )
}

pub fn cluster_table_csv(env: &ReportEnvelope) -> Vec<u8> {
    let rows: Vec<Vec<String>> = env
        .cluster_table
        .iter()
        .map(|r| {
            vec![
                r.split_seed.to_string(),
                r.cluster.to_string(),
                r.runs.to_string(),
                r.support.to_string(),
                opt(r.c_mean),
                opt(r.c_std),
                opt(r.c_min),
                opt(r.c_max),
                r.acc_mean.to_string(),
                r.acc_std.to_string(),
            ]
        })
        .collect();
    csv_bytes(
        &["Split", "Cluster", "Runs", "Support", "C mean", "C std", "C min", "C max", "Acc mean", "Acc std"],
        &rows,
    )
}

fn profiles_csv(s: &super::analysis::SplitAnalysis) -> Vec<u8> {
    let mut rows = Vec::new();
    for p in &s.profiles {
        for (rank, (name, v)) in p.top_features.iter().enumerate() {
            rows.push(vec![p.cluster.to_string(), p.size.to_string(), (rank + 1).to_string(), name.clone(), v.to_string()]);
        }
    }
    csv_bytes(&["cluster", "runs", "rank", "feature", "mean_abs_shap"], &rows)
}

/// Write tables under `tables/` and figures under `figures/`; returns every
/// file written, sorted.
pub fn write_outputs(env: &ReportEnvelope, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let tables = out_dir.join("tables");
    let figures = out_dir.join("figures");
    for d in [&tables, &figures] {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (tables.join("split_table.csv"), split_table_csv(env)),
        (tables.join("cluster_table.csv"), cluster_table_csv(env)),
    ];
    for s in &env.splits {
        files.push((tables.join(format!("profiles_split{}.csv", s.split_seed)), profiles_csv(s)));
        if let Some(d) = &s.disagreement {
            let mut buf = Vec::new();
            write_csv(d, &mut buf).map_err(|e| HarnessError::Io {
                path: tables.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
            files.push((tables.join(format!("disagreement_split{}.csv", s.split_seed)), buf));
        }
    }
    for (name, svg) in render_figures(env) {
        files.push((figures.join(name), svg.into_bytes()));
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    written.sort();
    Ok(written)
}
