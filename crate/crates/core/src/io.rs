//! CSV and JSON serialisation.
//!
//! Path CSV files have a header row `t,x_1,..,x_d` and may start with `#`
//! comment lines. Numbers are written in shortest round-trip form, so
//! reading back reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::DiscretePath;

/// Writes `# line` comments, the header and one row per grid point.
pub fn write_table<W: Write>(
    out: W,
    comments: &[String],
    header: &[String],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Column names `prefix_1..prefix_n`.
pub fn columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn write_path_csv<W: Write>(path: &DiscretePath, out: W, comments: &[String]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(columns("x", path.dim()));
    let rows = (0..path.len()).map(|k| {
        let mut row = vec![path.time(k)];
        row.extend_from_slice(path.point(k));
        row
    });
    write_table(out, comments, &header, rows)
}

/// Reads a numeric table, skipping `#` comments. Returns header and rows.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut text = String::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if !line.trim_start().starts_with('#') && !line.trim().is_empty() {
            text.push_str(&line);
            text.push('\n');
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: '{f}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_path_csv<R: Read>(input: R) -> Result<DiscretePath> {
    let (header, rows) = read_table(input)?;
    if header.len() < 2 || header[0] != "t" {
        return Err(Error::Parse("expected a header 't,x_1,...'".into()));
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let d = header.len() - 1;
    let times = rows.iter().map(|r| r[0]).collect();
    let values = rows
        .iter()
        .flat_map(|r| r[1..].iter().copied())
        .collect::<Vec<_>>();
    if values.len() != rows.len() * d {
        return Err(Error::Parse("ragged rows".into()));
    }
    DiscretePath::new(times, values, d)
}

/// Pretty JSON with keys in declaration order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Loads a path from `.json` (envelope) or any other extension (CSV).
pub fn load_path(file: &Path) -> Result<DiscretePath> {
    let f = File::open(file)?;
    if file.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_reader(BufReader::new(f))?)
    } else {
        read_path_csv(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let p = DiscretePath::sample(7, 1.0, 2, |t| vec![(3.1 * t).sin(), t / 3.0]).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf, &["config abc".into()]).unwrap();
        let q = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn json_round_trip() {
        let p = DiscretePath::sample(5, 2.0, 1, |t| vec![t.exp()]).unwrap();
        let q: DiscretePath = from_json(&to_json(&p).unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn malformed_csv() {
        assert!(matches!(
            read_path_csv("t,x_1\n0,abc\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(read_path_csv("t,x_1\n0,1\n1\n".as_bytes()).is_err());
        assert!(read_path_csv("a,b\n0,1\n".as_bytes()).is_err());
    }
}
