//! File formats.
//!
//! * Coupling matrices: dense CSV (one row per line, comma-separated) or
//!   sparse `i j value` triplets (0-indexed, whitespace-separated, symmetric
//!   closure applied). Auto-detection picks dense when any line has a comma.
//! * Field vectors: one value per line.
//! * Spin configurations: one `1` or `-1` per line (`+1` also accepted).
//! * CSV outputs start with a `# schema_version=N` line followed by a header.
//!
//! Blank lines and lines starting with `#` are ignored on input.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinVector};
use crate::parallel::RunTelemetry;
use crate::SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatrixFormat {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "sparse" => Ok(Self::Sparse),
            other => Err(Error::InvalidConfig(format!(
                "unknown matrix format {other:?} (expected auto, dense or sparse)"
            ))),
        }
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a non-negative integer index: {tok:?}"),
    })
}

pub fn parse_dense(text: &str) -> Result<Vec<Vec<f64>>> {
    content_lines(text)
        .map(|(line, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| parse_f64(t, line))
                .collect()
        })
        .collect()
}

pub fn parse_triplets(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    content_lines(text)
        .map(|(line, l)| {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `i j value`, found {} fields", toks.len()),
                });
            }
            Ok((
                parse_index(toks[0], line)?,
                parse_index(toks[1], line)?,
                parse_f64(toks[2], line)?,
            ))
        })
        .collect()
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(line, l)| parse_f64(l, line))
        .collect()
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

/// Model from a coupling file and an optional field file. Without a field the
/// field is zero; for triplets `n` then comes from the largest index.
pub fn read_model(
    j_path: &Path,
    h_path: Option<&Path>,
    format: MatrixFormat,
) -> Result<IsingModel> {
    let text = fs::read_to_string(j_path)?;
    let field = h_path.map(read_vector).transpose()?;
    model_from_text(&text, field, format)
}

pub fn model_from_text(
    text: &str,
    field: Option<Vec<f64>>,
    format: MatrixFormat,
) -> Result<IsingModel> {
    let dense = match format {
        MatrixFormat::Dense => true,
        MatrixFormat::Sparse => false,
        MatrixFormat::Auto => content_lines(text).any(|(_, l)| l.contains(',')),
    };
    if dense {
        let rows = parse_dense(text)?;
        let field = field.unwrap_or_else(|| vec![0.0; rows.len()]);
        IsingModel::from_rows(&rows, field)
    } else {
        let triplets = parse_triplets(text)?;
        let field = match field {
            Some(f) => f,
            None => {
                let n = triplets
                    .iter()
                    .map(|&(i, j, _)| i.max(j) + 1)
                    .max()
                    .unwrap_or(0);
                vec![0.0; n]
            }
        };
        IsingModel::from_triplets(field.len(), &triplets, field)
    }
}

pub fn write_dense(path: &Path, model: &IsingModel) -> Result<()> {
    let n = model.n();
    let j = model.dense_couplings();
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in j.chunks(n.max(1)).take(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_spins(x: &SpinVector) -> String {
    let mut s = String::with_capacity(3 * x.len());
    for &v in x.values() {
        s.push_str(if v > 0 { "1\n" } else { "-1\n" });
    }
    s
}

pub fn write_spins(path: &Path, x: &SpinVector) -> Result<()> {
    fs::write(path, format_spins(x))?;
    Ok(())
}

pub fn parse_spins(text: &str) -> Result<SpinVector> {
    let values = content_lines(text)
        .map(|(line, l)| match l {
            "1" | "+1" => Ok(1),
            "-1" => Ok(-1),
            other => Err(Error::Parse {
                line,
                msg: format!("expected 1 or -1, found {other:?}"),
            }),
        })
        .collect::<Result<Vec<i8>>>()?;
    SpinVector::full(values)
}

pub fn read_spins(path: &Path) -> Result<SpinVector> {
    parse_spins(&fs::read_to_string(path)?)
}

/// Many configurations in one file, separated by blank lines.
pub fn parse_spin_batch(text: &str) -> Result<Vec<SpinVector>> {
    text.split("\n\n")
        .filter(|block| {
            block
                .lines()
                .any(|l| !l.trim().is_empty() && !l.trim().starts_with('#'))
        })
        .map(parse_spins)
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_telemetry(path: &Path, tel: &RunTelemetry) -> Result<()> {
    write_json(path, tel)
}

pub fn read_telemetry(path: &Path) -> Result<RunTelemetry> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// CSV with a schema comment line and a header derived from `T`.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    fs::write(path, csv_string(rows)?)?;
    Ok(())
}

/// Parse a CSV written by [`write_csv`]; returns the schema version and rows.
pub fn parse_csv<T: DeserializeOwned>(text: &str) -> Result<(u32, Vec<T>)> {
    let first = text.lines().next().unwrap_or("");
    let version = first
        .strip_prefix("# schema_version=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing `# schema_version=` line".into(),
        })?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((version, rows))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(u32, Vec<T>)> {
    parse_csv(&fs::read_to_string(path)?)
}
