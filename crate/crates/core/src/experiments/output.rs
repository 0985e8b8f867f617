use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ResultRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::Parse(format!("unknown format {other:?}, expected csv or jsonl"))),
        }
    }
}

fn render(rows: &[ResultRow], format: OutputFormat, header: bool) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            if header {
                w.write_record(["experiment", "x", "estimate", "stderr", "reps", "n", "d", "seed"])
                    .map_err(|e| Error::Parse(e.to_string()))?;
            }
            for r in rows {
                w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Parse(e.to_string()))
        }
        OutputFormat::Jsonl => {
            let mut out = Vec::new();
            for r in rows {
                serde_json::to_writer(&mut out, r).map_err(|e| Error::Parse(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

/// Write `rows` to `path`. With `append`, rows are added after the existing
/// content (the CSV header is written only once). The new file is written to a
/// temporary sibling and renamed into place.
pub fn write_rows(rows: &[ResultRow], path: &Path, format: OutputFormat, append: bool) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut body = if append && path.exists() {
        std::fs::read(path).map_err(|e| Error::io(path, e))?
    } else {
        Vec::new()
    };
    body.extend(render(rows, format, body.is_empty())?);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&body).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Write to the configured output path, replacing any existing file.
pub fn write_results(rows: &[ResultRow], cfg: &ExperimentConfig) -> Result<()> {
    let path = cfg
        .output_path
        .as_deref()
        .ok_or_else(|| Error::Precondition("config has no output_path".into()))?;
    write_rows(rows, path, cfg.format, false)
}

pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .map(|r| r.map_err(|e| bad(e.to_string())))
            .collect(),
        OutputFormat::Jsonl => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| bad(e.to_string())))
            .collect(),
    }
}
