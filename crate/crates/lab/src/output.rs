//! Result persistence: summary JSON, the CSV ledger and `.dat` series.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rwde_core::experiments::{Check, ExperimentConfig, Outcome, Series};
use rwde_core::stats::EstimateReport;
use serde::{Deserialize, Serialize};

use crate::error::LabError;

pub const SCHEMA_VERSION: u32 = 1;
pub const LEDGER_FILE: &str = "ledger.csv";
pub const LEDGER_HEADER: [&str; 7] = ["target", "estimate", "ci_low", "ci_high", "n", "seed", "params_hash"];

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesFile {
    pub name: String,
    pub file: String,
    pub columns: [String; 2],
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: &'a str,
    seed: u64,
    passed: bool,
    config_hash: String,
    config: &'a ExperimentConfig,
    checks: &'a [Check],
    reports: &'a [EstimateReport],
    tables: &'a BTreeMap<String, serde_json::Value>,
    series: Vec<SeriesFile>,
}

/// The fields of a summary that `report` reads back.
#[derive(Debug, Deserialize)]
pub struct SummaryHead {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub config_hash: String,
    pub checks: Vec<CheckHead>,
}

#[derive(Debug, Deserialize)]
pub struct CheckHead {
    pub name: String,
    pub passed: bool,
}

pub fn summary_path(out: &Path, experiment: &str) -> PathBuf {
    out.join(format!("{experiment}_summary.json"))
}

/// Writes every artifact of one run and returns the files written.
pub fn write_outcome(out: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
    let experiment = cfg.name();
    let mut written = Vec::new();
    let mut series = Vec::new();
    for s in &outcome.series {
        let file = format!("{experiment}_{}.dat", s.name);
        let path = out.join(&file);
        write_file(&path, &dat_text(s))?;
        written.push(path);
        series.push(SeriesFile {
            name: s.name.clone(),
            file,
            columns: s.columns.clone(),
        });
    }

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        experiment,
        seed: outcome.seed,
        passed: outcome.passed(),
        config_hash: cfg.config_hash(),
        config: cfg,
        checks: &outcome.checks,
        reports: &outcome.reports,
        tables: &outcome.tables,
        series,
    };
    let path = summary_path(out, experiment);
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| LabError::data(&path, e))?;
    text.push('\n');
    write_file(&path, &text)?;
    written.push(path);

    let ledger = out.join(LEDGER_FILE);
    merge_ledger(&ledger, experiment, outcome.seed, &cfg.config_hash(), &outcome.reports)?;
    written.push(ledger);
    Ok(written)
}

fn write_file(path: &Path, text: &str) -> Result<(), LabError> {
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

fn dat_text(s: &Series) -> String {
    let mut text = format!("# {} {}\n", s.columns[0], s.columns[1]);
    for (x, y) in &s.points {
        text.push_str(&format!("{x:?} {y:?}\n"));
    }
    text
}

/// Ledger targets are `experiment:target`; repeated targets within one run
/// get a `#k` suffix in report order.
fn ledger_rows(experiment: &str, seed: u64, hash: &str, reports: &[EstimateReport]) -> Vec<Vec<String>> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    reports
        .iter()
        .map(|r| {
            let k = seen.entry(r.target.as_str()).or_insert(0);
            *k += 1;
            let target = if *k == 1 {
                format!("{experiment}:{}", r.target)
            } else {
                format!("{experiment}:{}#{k}", r.target)
            };
            vec![
                target,
                format!("{:?}", r.estimate),
                format!("{:?}", r.ci_low),
                format!("{:?}", r.ci_high),
                r.n_samples.to_string(),
                seed.to_string(),
                hash.to_string(),
            ]
        })
        .collect()
}

/// Rows of earlier runs are kept verbatim. Rows from the same experiment,
/// seed and configuration are replaced in place, so a rerun leaves the
/// file unchanged; any other run is appended.
pub fn merge_ledger(
    path: &Path,
    experiment: &str,
    seed: u64,
    hash: &str,
    reports: &[EstimateReport],
) -> Result<(), LabError> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    if path.exists() {
        let mut reader = csv::Reader::from_path(path).map_err(|e| LabError::data(path, e))?;
        let header = reader.headers().map_err(|e| LabError::data(path, e))?;
        if header.iter().ne(LEDGER_HEADER) {
            return Err(LabError::data(path, format!("unexpected ledger header {header:?}")));
        }
        for record in reader.records() {
            let record = record.map_err(|e| LabError::data(path, e))?;
            rows.push(record.iter().map(String::from).collect());
        }
    }

    let prefix = format!("{experiment}:");
    let seed_text = seed.to_string();
    let same_run = |row: &Vec<String>| row[0].starts_with(&prefix) && row[5] == seed_text && row[6] == hash;
    let at = rows.iter().position(same_run).unwrap_or(rows.len());
    rows.retain(|r| !same_run(r));
    let fresh = ledger_rows(experiment, seed, hash, reports);
    rows.splice(at.min(rows.len())..at.min(rows.len()), fresh);

    let mut writer = csv::Writer::from_path(path).map_err(|e| LabError::data(path, e))?;
    writer
        .write_record(LEDGER_HEADER)
        .map_err(|e| LabError::data(path, e))?;
    for row in &rows {
        writer.write_record(row).map_err(|e| LabError::data(path, e))?;
    }
    writer.flush().map_err(|e| LabError::io(path, e))
}

/// Summaries found in `out`, sorted by file name.
pub fn read_summaries(out: &Path) -> Result<Vec<(PathBuf, SummaryHead)>, LabError> {
    let entries = fs::read_dir(out).map_err(|e| LabError::Config(format!("{}: {e}", out.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_summary.json"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
            let head: SummaryHead = serde_json::from_str(&text).map_err(|e| LabError::data(&path, e))?;
            if head.schema_version != SCHEMA_VERSION {
                return Err(LabError::data(
                    &path,
                    format!("schema version {} is not {SCHEMA_VERSION}", head.schema_version),
                ));
            }
            Ok((path, head))
        })
        .collect()
}
