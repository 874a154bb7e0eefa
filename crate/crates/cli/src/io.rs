//! Plain comma-separated text in and out.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mixgrad::Dataset;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Which column, if any, holds ground-truth labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelCol {
    Index(usize),
    Last,
}

impl LabelCol {
    pub fn parse(s: &str) -> CliResult<LabelCol> {
        if s.eq_ignore_ascii_case("last") {
            return Ok(LabelCol::Last);
        }
        s.parse().map(LabelCol::Index).map_err(|_| {
            CliError::Usage(format!(
                "--label-col expects a column index or `last`, got {s:?}"
            ))
        })
    }
}

#[derive(Debug)]
pub struct Loaded {
    pub data: Dataset,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("write to string");
    }
    s
}

/// Reads numeric rows; labels may be any token and are numbered in order of
/// first appearance.
pub fn read_data(path: &Path, header: bool, label_col: Option<LabelCol>) -> CliResult<Loaded> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse {
        path: path.into(),
        line: 1,
        column: 1,
        message: format!("not valid UTF-8: {e}"),
    })?;
    let parse_err = |line: usize, column: usize, message: String| CliError::Parse {
        path: path.into(),
        line,
        column,
        message,
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if header && i == 0 {
            continue;
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    line,
                    1,
                    format!("expected {w} fields, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        let label_at = match label_col {
            None => None,
            Some(LabelCol::Last) => Some(fields.len() - 1),
            Some(LabelCol::Index(c)) if c < fields.len() => Some(c),
            Some(LabelCol::Index(c)) => {
                return Err(parse_err(
                    line,
                    1,
                    format!("label column {c} out of range ({} fields)", fields.len()),
                ))
            }
        };
        for (j, f) in fields.iter().enumerate() {
            if Some(j) == label_at {
                let next = label_ids.len();
                labels.push(*label_ids.entry(f.to_string()).or_insert(next));
                continue;
            }
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("cannot parse {f:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("non-finite value {f:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0) - usize::from(label_col.is_some());
    if rows == 0 || p == 0 {
        return Err(parse_err(1, 1, "no data columns found".into()));
    }
    let mut data = Dataset::new(rows, p, values)?;
    if label_col.is_some() {
        data = data.with_labels(labels)?;
    }
    Ok(Loaded {
        data,
        sha256: sha256_hex(&bytes),
    })
}

/// Rows of `f64` with an optional trailing integer label.
pub fn format_rows(data: &Dataset, labels: Option<&[usize]>) -> String {
    let mut s = String::new();
    for (i, row) in data.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&num(*v));
        }
        if let Some(l) = labels {
            write!(s, ",{}", l[i]).expect("write to string");
        }
        s.push('\n');
    }
    s
}

/// Shortest round-trip form, switching to scientific notation for very small or
/// very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, header: bool, label: Option<LabelCol>) -> CliResult<Loaded> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, text).unwrap();
        read_data(&p, header, label)
    }

    #[test]
    fn parses_labels_and_header() {
        let l = load("x,y,c\n1,2,a\n3,4,b\n5,6,a\n", true, Some(LabelCol::Last)).unwrap();
        assert_eq!(l.data.p(), 2);
        assert_eq!(l.data.labels().unwrap(), &[0, 1, 0]);
        let l = load("a,1,2\nb,3,4\n", false, Some(LabelCol::Index(0))).unwrap();
        assert_eq!(l.data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn reports_line_and_column() {
        match load("1,2\n3,x\n", false, None) {
            Err(CliError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        match load("1,2\n3\n", false, None) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(load("", false, None).is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.5, -2.5e-30, 5.6e29, 1e-4, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(-2.5e-30), "-2.5e-30");
    }

    #[test]
    fn digest_is_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
