use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// On-disk layout of a feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    /// `v1,...,vd,label` per line; lines starting with `#` are skipped.
    DenseCsv,
    /// `label idx:val idx:val ...` with 1-based indices.
    SparsePairs,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-csv" | "csv" => Ok(DataFormat::DenseCsv),
            "sparse-pairs" | "libsvm" => Ok(DataFormat::SparsePairs),
            other => Err(Error::InvalidArgument(format!("unknown data format `{other}`"))),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::DenseCsv => "dense-csv",
            DataFormat::SparsePairs => "sparse-pairs",
        })
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&text, format, path, name)
}

/// Parses file contents; `path` is used only for error locations.
pub fn parse_dataset(text: &str, format: DataFormat, path: &Path, name: String) -> Result<Dataset> {
    let rows = match format {
        DataFormat::DenseCsv => parse_dense(text, path)?,
        DataFormat::SparsePairs => parse_sparse(text, path)?,
    };
    if rows.values.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let n = rows.values.len();
    let d = rows.dim;
    if d == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: rows.lines[0],
            msg: "no feature columns".into(),
        });
    }

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let labels = rows
        .labels
        .iter()
        .map(|tok| {
            *ids.entry(tok.as_str()).or_insert_with(|| {
                class_names.push(tok.clone());
                class_names.len() - 1
            })
        })
        .collect();

    let features = DMatrix::from_fn(n, d, |r, c| rows.values[r].get(c).copied().unwrap_or(0.0));
    Dataset::with_class_names(name, features, labels, class_names)
}

struct RawRows {
    values: Vec<Vec<f64>>,
    labels: Vec<String>,
    lines: Vec<usize>,
    dim: usize,
}

fn parse_value(tok: &str, path: &Path, line: usize, column: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("column {column}: cannot parse `{}` as a number", tok.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            path: path.to_path_buf(),
            line,
            column,
        });
    }
    Ok(v)
}

fn parse_dense(text: &str, path: &Path) -> Result<RawRows> {
    let mut out = RawRows {
        values: Vec::new(),
        labels: Vec::new(),
        lines: Vec::new(),
        dim: 0,
    };
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: "expected at least one feature and a label".into(),
            });
        }
        let d = fields.len() - 1;
        if out.values.is_empty() {
            out.dim = d;
        } else if d != out.dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected {} feature columns, found {d}", out.dim),
            });
        }
        let row = fields[..d]
            .iter()
            .enumerate()
            .map(|(c, tok)| parse_value(tok, path, lineno, c + 1))
            .collect::<Result<Vec<_>>>()?;
        let label = fields[d].trim();
        if label.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: "empty label".into(),
            });
        }
        out.values.push(row);
        out.labels.push(label.to_string());
        out.lines.push(lineno);
    }
    Ok(out)
}

fn parse_sparse(text: &str, path: &Path) -> Result<RawRows> {
    let mut out = RawRows {
        values: Vec::new(),
        labels: Vec::new(),
        lines: Vec::new(),
        dim: 0,
    };
    let mut pairs_per_row = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label = toks.next().unwrap_or_default().to_string();
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected idx:val, found `{tok}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("bad index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: "indices are 1-based; found 0".into(),
                });
            }
            if pairs.iter().any(|&(j, _)| j == idx - 1) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    msg: format!("index {idx} repeated"),
                });
            }
            let v = parse_value(val, path, lineno, idx)?;
            out.dim = out.dim.max(idx);
            pairs.push((idx - 1, v));
        }
        pairs_per_row.push(pairs);
        out.labels.push(label);
        out.lines.push(lineno);
    }
    out.values = pairs_per_row
        .into_iter()
        .map(|pairs| {
            let mut row = vec![0.0; out.dim];
            for (j, v) in pairs {
                row[j] = v;
            }
            row
        })
        .collect();
    Ok(out)
}
