use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{validate_pair, DataSet, PairingKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

const MAGIC: &str = "# dd-dataset v1";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses `key=value` tokens of a header line.
pub(crate) fn header_pairs(line: &str) -> Vec<(&str, &str)> {
    line.split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

/// Parses dataset text. `path` only labels error messages.
pub fn parse_dataset(text: &str, path: &Path, mu0: Option<f64>) -> Result<DataSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        Some((n, l)) => return Err(parse_err(path, n, format!("expected '{MAGIC}', found '{}'", l.trim()))),
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let (hline, header) = lines.next().ok_or_else(|| parse_err(path, 2, "missing header line"))?;
    let mut kind = None;
    let mut dim = None;
    for (k, v) in header_pairs(header) {
        match k {
            "kind" => kind = Some(v.parse::<PairingKind>().map_err(|e| parse_err(path, hline, e.to_string()))?),
            "dim" => {
                let d: usize = v.parse().map_err(|_| parse_err(path, hline, format!("invalid dim '{v}'")))?;
                if !(1..=3).contains(&d) {
                    return Err(parse_err(path, hline, format!("dim must be 1, 2 or 3, got {d}")));
                }
                dim = Some(d);
            }
            "units" if v != "SI" => {
                return Err(parse_err(path, hline, format!("unsupported units '{v}', expected SI")));
            }
            _ => {}
        }
    }
    let kind = kind.ok_or_else(|| parse_err(path, hline, "header lacks kind="))?;
    let dim = dim.ok_or_else(|| parse_err(path, hline, "header lacks dim="))?;
    let width = 2 * dim * dim;

    let mut pairs = Vec::new();
    for (n, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| parse_err(path, n, format!("invalid number '{tok}'"))))
            .collect::<Result<_>>()?;
        if values.len() != width {
            return Err(parse_err(
                path,
                n,
                format!("expected {width} values for dim={dim}, found {}", values.len()),
            ));
        }
        let strain = Tensor2::from_row_major(dim, &values[..dim * dim])?;
        let stress = Tensor2::from_row_major(dim, &values[dim * dim..])?;
        let pair = validate_pair(kind, dim, strain, stress).map_err(|m| parse_err(path, n, m))?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(parse_err(path, hline, "data set contains no tuples"));
    }
    let n = pairs.len();
    let mut set = DataSet::from_validated(kind, dim, pairs, 1.0);
    set = match mu0 {
        Some(m) => set.with_mu0(m)?,
        None => {
            let m = super::auto_mu0(&set).map_err(|e| parse_err(path, hline, format!("{e} ({n} tuples)")))?;
            set.with_mu0(m)?
        }
    };
    Ok(set)
}

/// Reads a dataset file. `mu0 = None` derives the scale from the data.
pub fn read_dataset(path: impl AsRef<Path>, mu0: Option<f64>) -> Result<DataSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path, mu0)
}

pub fn format_dataset(set: &DataSet) -> String {
    let mut out = String::with_capacity(64 + set.len() * set.dim() * set.dim() * 48);
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "kind={} dim={} units=SI", set.kind(), set.dim());
    for t in set.tuples() {
        let mut first = true;
        for v in t.strain.as_slice().iter().chain(t.stress.as_slice()) {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

/// Writes a dataset file that [`read_dataset`] reads back bit-identically.
pub fn write_dataset(path: impl AsRef<Path>, set: &DataSet) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    std::fs::write(&path, format_dataset(set)).map_err(|e| Error::io(path, e))
}
