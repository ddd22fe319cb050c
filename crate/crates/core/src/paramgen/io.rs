use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{FactorTables, ParameterBucket, ParamgenConfig, ParamgenError};
use crate::query::{QueryInstance, QueryVariant};

pub const MANIFEST_FILE: &str = "manifest.json";
const FACTORS_DIR: &str = "factors";

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Manifest {
    config: ParamgenConfig,
    days: Vec<DayEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct DayEntry {
    day: NaiveDate,
    file: String,
    partial: bool,
    warnings: Vec<String>,
    counts: BTreeMap<QueryVariant, usize>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ParamgenError + '_ {
    move |source| ParamgenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one `YYYY-MM-DD.ldjson` file per bucket plus `manifest.json`.
pub fn write_parameters(
    dir: &Path,
    buckets: &[ParameterBucket],
    config: &ParamgenConfig,
) -> Result<(), ParamgenError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut days = Vec::new();
    for b in buckets {
        let file = format!("{}.ldjson", b.day.format("%Y-%m-%d"));
        let path = dir.join(&file);
        let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        for (&variant, params) in &b.per_query {
            for p in params {
                let line = serde_json::to_string(&QueryInstance::new(variant, p.clone()))
                    .expect("serializable");
                writeln!(out, "{line}").map_err(io_err(&path))?;
            }
        }
        out.flush().map_err(io_err(&path))?;
        days.push(DayEntry {
            day: b.day,
            file,
            partial: b.partial,
            warnings: b.warnings.clone(),
            counts: b.per_query.iter().map(|(&v, p)| (v, p.len())).collect(),
        });
    }
    let manifest = Manifest {
        config: config.clone(),
        days,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("serializable") + "\n",
    )
    .map_err(io_err(&path))
}

pub fn read_parameters(dir: &Path) -> Result<Vec<ParameterBucket>, ParamgenError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| ParamgenError::Parse {
        path: path.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let mut buckets = Vec::new();
    for entry in manifest.days {
        let path = dir.join(&entry.file);
        let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
        let mut per_query: BTreeMap<QueryVariant, Vec<_>> =
            entry.counts.keys().map(|&v| (v, Vec::new())).collect();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| ParamgenError::Parse {
                path: path.clone(),
                line: i as u64 + 1,
                message,
            };
            let q: QueryInstance =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            if !q.params.fits(q.variant) {
                return Err(parse_err(format!("parameters do not fit {}", q.variant)));
            }
            per_query.entry(q.variant).or_default().push(q.params);
        }
        buckets.push(ParameterBucket {
            day: entry.day,
            per_query,
            partial: entry.partial,
            warnings: entry.warnings,
        });
    }
    Ok(buckets)
}

/// Dumps each factor table as `key|frequency` CSV under `factors/`.
pub fn write_factor_tables(dir: &Path, tables: &FactorTables) -> Result<(), ParamgenError> {
    let dir = dir.join(FACTORS_DIR);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for t in tables.all() {
        let path = dir.join(format!("{}.csv", t.name));
        let mut out = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        writeln!(out, "key|frequency").map_err(io_err(&path))?;
        for r in &t.rows {
            let key = r
                .key
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(";");
            writeln!(out, "{key}|{}", r.frequency).map_err(io_err(&path))?;
        }
        out.flush().map_err(io_err(&path))?;
    }
    Ok(())
}
