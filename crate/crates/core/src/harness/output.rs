use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ScenarioConfig;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub k: Option<usize>,
    pub eps: Option<f64>,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub wall_time: f64,
}

/// Append-only row collector; rows keep insertion order.
#[derive(Debug)]
pub struct RowSink {
    scenario: String,
    seed: u64,
    start: Instant,
    rows: Vec<ResultRow>,
}

impl RowSink {
    pub fn new(scenario: &str, seed: u64) -> Self {
        RowSink { scenario: scenario.to_string(), seed, start: Instant::now(), rows: Vec::new() }
    }

    pub fn push(&mut self, k: Option<usize>, eps: Option<f64>, statistic: &str, value: f64, stderr: Option<f64>) {
        self.rows.push(ResultRow {
            scenario: self.scenario.clone(),
            k,
            eps,
            statistic: statistic.to_string(),
            value,
            stderr,
            seed: self.seed,
            wall_time: self.start.elapsed().as_secs_f64(),
        });
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<ResultRow> {
        self.rows
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub schema_version: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub crate_version: String,
    pub files: Vec<String>,
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_rows_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `eps value` files, one per `(statistic, k)` series with at least two scales.
pub fn write_plot_files(dir: &Path, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    let mut series: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let (Some(k), Some(e)) = (r.k, r.eps) {
            series.entry((r.statistic.clone(), k)).or_default().push((e, r.value));
        }
    }
    let mut out = Vec::new();
    for ((stat, k), mut pts) in series {
        if pts.len() < 2 {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path = dir.join(format!("{stat}_k{k}.dat"));
        let mut text = format!("# eps {stat}\n");
        for (e, v) in pts {
            text.push_str(&format!("{e:.17e} {v:.17e}\n"));
        }
        fs::write(&path, text)?;
        out.push(path);
    }
    Ok(out)
}

/// Writes results, the report, plot files and the run manifest into `dir`.
pub fn write_outputs<R: Serialize>(
    dir: &Path,
    config: &ScenarioConfig,
    rows: &[ResultRow],
    report: &R,
    format: Format,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            write_rows_csv(&dir.join("results.csv"), rows)?;
            files.push("results.csv".to_string());
        }
        Format::Json => {
            fs::write(dir.join("results.json"), serde_json::to_string_pretty(rows)?)?;
            files.push("results.json".to_string());
        }
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    files.push("report.json".to_string());
    fs::write(dir.join("config.json"), config.to_json())?;
    files.push("config.json".to_string());
    for p in write_plot_files(dir, rows)? {
        files.push(p.file_name().expect("file name").to_string_lossy().into_owned());
    }
    let manifest = Manifest {
        scenario: config.scenario.to_string(),
        schema_version: config.schema_version,
        config_sha256: config_hash(config),
        seed: config.seed,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
