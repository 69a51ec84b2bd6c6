use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};

/// Parses a values file: one decimal number per line, surrounding
/// whitespace ignored, blank lines skipped. Line numbers in errors are
/// 1-based.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: idx + 1, message };
        let x: f64 = line
            .parse()
            .map_err(|_| parse_err(format!("not a decimal number: {line:?}")))?;
        if !x.is_finite() {
            return Err(parse_err(format!("value must be finite, got {line:?}")));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("values file contains no numbers".into()));
    }
    Ok(out)
}

pub fn read_values_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_values(&text)
}

/// One (method, replicate) outcome. `error` is NaN for a failed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario: Scenario,
    pub method: String,
    pub p: f64,
    pub d: usize,
    pub a: f64,
    pub eta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub error: f64,
    pub iters: usize,
    pub elapsed_ms: f64,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.error.is_nan()
    }
}

pub const RESULTS_HEADER: &str = "scenario,method,p,d,a,eta,K,n,rep,seed,error,iters,elapsed_ms";

pub fn write_results<W: Write>(out: W, rows: &[TrialResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULTS_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV. The header must match the fixed schema exactly.
pub fn read_results<R: Read>(input: R) -> Result<Vec<TrialResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != RESULTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: TrialResult = rec?;
        if !(row.error >= 0.0 || row.error.is_nan()) {
            return Err(Error::Parse {
                line: rows.len() + 2,
                message: format!("negative error {}", row.error),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Per-cell aggregate over replicates that did not fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub method: String,
    pub p: f64,
    pub d: usize,
    pub a: f64,
    pub eta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub n: usize,
    pub reps: usize,
    pub failed: usize,
    pub mean_error: f64,
    pub stderr: f64,
    pub median_error: f64,
}

pub fn write_summary<W: Write>(out: W, rows: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, rep: usize, error: f64) -> TrialResult {
        TrialResult {
            scenario: Scenario::Contamination,
            method: method.into(),
            p: 1.5,
            d: 8,
            a: 1.0,
            eta: Some(0.4),
            k: None,
            n: 1000,
            rep,
            seed: 42,
            error,
            iters: 17,
            elapsed_ms: 1.25,
        }
    }

    #[test]
    fn values_parsing() {
        assert_eq!(parse_values("1\n\n 2.5 \n-3e2\n").unwrap(), vec![1.0, 2.5, -300.0]);
        match parse_values("1\nabc\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_values("1\n2\ninf") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_values("NaN").is_err());
        assert!(parse_values("\n \n").is_err());
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![row("ERM-narrow", 0, 0.5), row("Mean", 1, f64::NAN)];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(RESULTS_HEADER));
        assert!(text.contains("Contamination,ERM-narrow,1.5,8,1.0,0.4,,1000,0,42,0.5,17,1.25"));
        let back = read_results(buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(back[1].failed());
    }

    #[test]
    fn empty_table_has_header() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{RESULTS_HEADER}\n"));
    }

    #[test]
    fn reader_rejects_wrong_header_and_negative_error() {
        assert!(read_results("a,b\n1,2\n".as_bytes()).is_err());
        let bad = format!("{RESULTS_HEADER}\nRegression,Mean,1.5,2,1,,,10,0,1,-1,3,0.1\n");
        assert!(read_results(bad.as_bytes()).is_err());
    }
}
