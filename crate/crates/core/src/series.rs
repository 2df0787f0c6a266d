//! Cycle-series persistence: JSONL records plus a sidecar metadata record.
//! Simulated and real series use the same schema, so analysis is
//! backend-agnostic.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Backend, CycleRecord, CycleSeries, ExperimentConfig, Phase};

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("series file malformed: {0}")]
    Malformed(String),
}

/// Sidecar metadata written next to each JSONL series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub config: ExperimentConfig,
    pub phase: Phase,
    pub backend: Backend,
    pub wall_duration_ns: u64,
    pub rng_seed: Option<u64>,
    pub host: Option<String>,
    #[serde(default)]
    pub incomplete: bool,
}

/// Writes one record per line: index, start_time_ns, period_ns.
pub fn write_jsonl(path: &Path, series: &CycleSeries) -> Result<(), SeriesIoError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for rec in &series.records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<CycleRecord>, SeriesIoError> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut records = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CycleRecord = serde_json::from_str(&line)
            .map_err(|e| SeriesIoError::Malformed(format!("line {}: {e}", n + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

pub fn write_meta(path: &Path, meta: &SeriesMeta) -> Result<(), SeriesIoError> {
    fs::write(path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<SeriesMeta, SeriesIoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Loads a (jsonl, meta) pair back into a series.
pub fn read_series(jsonl: &Path, meta: &Path) -> Result<(CycleSeries, SeriesMeta), SeriesIoError> {
    let meta = read_meta(meta)?;
    let records = read_jsonl(jsonl)?;
    Ok((
        CycleSeries {
            phase: meta.phase,
            config_id: meta.config.id.clone(),
            records,
            wall_duration_ns: meta.wall_duration_ns,
        },
        meta,
    ))
}
