//! Text readers and writers for vectors and labels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use knnvis_core::{DataMatrix, LabeledSet};

use crate::error::{CliError, Result};

/// Reads a vector file: an `N d` header, then `N` rows of `d` reals.
pub fn ingest_vectors(path: &Path) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_vectors(&text, path)
}

pub fn parse_vectors(text: &str, path: &Path) -> Result<DataMatrix> {
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "missing `N d` header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_count = |s: &str| s.parse::<usize>().ok().filter(|&v| v > 0);
    let (n, d) = match fields.as_slice() {
        [n, d] => match (parse_count(n), parse_count(d)) {
            (Some(n), Some(d)) => (n, d),
            _ => {
                return Err(err(
                    1,
                    format!("header must be two positive integers, got `{header}`"),
                ))
            }
        },
        _ => return Err(err(1, format!("header must be `N d`, got `{header}`"))),
    };

    let mut values = Vec::with_capacity(n.saturating_mul(d).min(1 << 28));
    for row in 0..n {
        let lineno = row + 2;
        let (_, line) = lines
            .next()
            .ok_or_else(|| err(lineno, format!("expected {n} rows, found {row}")))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f32 = tok
                .parse()
                .map_err(|_| err(lineno, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value `{tok}`")));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != d {
            return Err(err(lineno, format!("expected {d} values, found {got}")));
        }
    }
    for (lineno, line) in lines {
        if !line.trim().is_empty() {
            return Err(err(lineno, format!("expected {n} rows, found more")));
        }
    }
    DataMatrix::new(n, d, values).map_err(|e| err(1, e.to_string()))
}

/// Writes `data` in the format read by [`ingest_vectors`], with nine
/// significant digits per value.
pub fn vectors_to_text(data: &DataMatrix) -> String {
    let mut out = String::with_capacity(16 + data.n_points() * data.dim() * 16);
    writeln!(out, "{} {}", data.n_points(), data.dim()).unwrap();
    for row in data.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v:.8e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_vectors(data: &DataMatrix, path: &Path) -> Result<()> {
    fs::write(path, vectors_to_text(data)).map_err(|e| CliError::io(path, e))
}

/// Reads `n` labels, one token per line.
pub fn ingest_labels(path: &Path, n: usize) -> Result<LabeledSet> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_labels(&text, n, path)
}

pub fn parse_labels(text: &str, n: usize, path: &Path) -> Result<LabeledSet> {
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let mut tokens = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let tok = line.trim();
        if tok.is_empty() {
            return Err(err(i + 1, "empty label".into()));
        }
        if tok.split_whitespace().nth(1).is_some() {
            return Err(err(i + 1, format!("label `{tok}` contains whitespace")));
        }
        tokens.push(tok);
    }
    if tokens.len() != n {
        return Err(err(
            tokens.len() + 1,
            format!("expected {n} labels, found {}", tokens.len()),
        ));
    }
    Ok(LabeledSet::from_tokens(tokens))
}

pub fn labels_to_text(labels: &LabeledSet) -> String {
    let mut out = String::new();
    for t in labels.tokens() {
        out.push_str(&t);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn reads_small_matrix() {
        let m = parse_vectors("2 2\n0 0\n1 1\n", p()).unwrap();
        assert_eq!((m.n_points(), m.dim()), (2, 2));
        assert_eq!(m.values(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn tolerates_trailing_whitespace() {
        let m = parse_vectors("2 1  \n0.5 \t\n-1\n\n\n", p()).unwrap();
        assert_eq!(m.values(), &[0.5, -1.0]);
    }

    #[test]
    fn missing_row_reports_the_line_after_the_last() {
        let e = parse_vectors("3 2\n0 0\n1 1\n", p()).unwrap_err();
        assert_eq!(e.line(), Some(4));
    }

    #[test]
    fn malformed_inputs_name_their_line() {
        let cases = [
            ("", 1),
            ("2\n0\n1\n", 1),
            ("x 2\n", 1),
            ("0 2\n", 1),
            ("2 2\n0 0\n1\n", 3),
            ("2 2\n0 0 0\n1 1\n", 2),
            ("2 2\n0 0\n1 nan\n", 3),
            ("2 2\n0 0\n1 inf\n", 3),
            ("2 2\n0 zz\n1 1\n", 2),
            ("1 1\n0\n7\n", 3),
        ];
        for (text, line) in cases {
            let e = parse_vectors(text, p()).unwrap_err();
            assert_eq!(e.line(), Some(line), "{text:?}: {e}");
        }
    }

    #[test]
    fn labels_map_to_dense_ids() {
        let l = parse_labels("a\nb\na\n", 3, p()).unwrap();
        assert_eq!(l.ids(), &[0, 1, 0]);
        assert!(parse_labels("a\nb\na\n", 4, p()).is_err());
        assert!(parse_labels("a\nb\na\n", 2, p()).is_err());
        assert!(parse_labels("a\n\na\n", 3, p()).is_err());
    }

    #[test]
    fn twenty_classes() {
        let text: String = (0..1000)
            .map(|i| format!("class{}\n", (i * 7) % 20))
            .collect();
        let l = parse_labels(&text, 1000, p()).unwrap();
        assert_eq!(l.n_classes(), 20);
        assert_eq!(l.ids().iter().max(), Some(&19));
        assert_eq!(parse_labels(&labels_to_text(&l), 1000, p()).unwrap(), l);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let m = DataMatrix::new(2, 3, vec![1.0, -2.5, 3.25e-7, 4e10, 0.0, -1e-30]).unwrap();
        write_vectors(&m, &path).unwrap();
        assert_eq!(ingest_vectors(&path).unwrap(), m);
        assert!(matches!(
            ingest_vectors(&dir.path().join("missing")),
            Err(CliError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn text_round_trip_keeps_values(
            rows in 1usize..20,
            dim in 1usize..8,
            seed in prop::collection::vec(-1e6f32..1e6, 160),
        ) {
            let values: Vec<f32> = seed.into_iter().cycle().take(rows * dim).collect();
            let m = DataMatrix::new(rows, dim, values).unwrap();
            let back = parse_vectors(&vectors_to_text(&m), p()).unwrap();
            for (a, b) in m.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-7 * a.abs());
            }
        }
    }
}
