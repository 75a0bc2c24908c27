//! CSV and JSON serialization of sweep results.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::protocol::Method;

/// Header of the main results table.
pub const CSV_HEADER: &str = "method,snr_db,B,L,trials,accuracy,rate_bps_hz,overhead_slots,seed";

/// One `(method, SNR, B, L)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub snr_db: f64,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trials: usize,
    /// Fraction of APs whose identified codeword matches the best one.
    pub accuracy: f64,
    /// Mean per-AP achievable rate.
    pub rate_bps_hz: f64,
    pub overhead_slots: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows of one method in table order.
    pub fn method(&self, m: Method) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.method == m)
    }

    /// The row at `(method, snr, B, L)`, if present.
    pub fn find(&self, m: Method, snr_db: f64, b: usize, l: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == m && r.snr_db == snr_db && r.b == b && r.l == l)
    }
}

/// Accuracy and rate binned by AP distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub method: Method,
    pub snr_db: f64,
    pub distance_m: f64,
    pub samples: usize,
    pub accuracy: f64,
    pub rate_bps_hz: f64,
}

/// Modeled slot count for one method and array width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub codebook_size: usize,
    #[serde(rename = "K")]
    pub aps: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub overhead_slots: usize,
}

fn render<T: Serialize>(rows: &[T], header: Option<&str>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn parse<T: DeserializeOwned>(text: &str, header: Option<&str>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if let Some(h) = header {
        let got = r.headers()?.iter().collect::<Vec<_>>().join(",");
        if got != h {
            return Err(Error::Parse(format!("unexpected CSV header `{got}`")));
        }
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        render(&self.rows, Some(CSV_HEADER))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<ResultRow> = parse(text, Some(CSV_HEADER))?;
        if rows.is_empty() {
            return domain("results table has no rows");
        }
        Ok(Self { rows })
    }
}

pub fn write_csv(path: &Path, table: &ResultTable) -> Result<()> {
    write_text(path, &table.to_csv()?)
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    ResultTable::from_csv(&read_text(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_distance_csv(path: &Path, rows: &[DistanceRow]) -> Result<()> {
    write_text(path, &render(rows, None)?)
}

pub fn read_distance_csv(path: &Path) -> Result<Vec<DistanceRow>> {
    parse(&read_text(path)?, None)
}

pub fn write_overhead_csv(path: &Path, rows: &[OverheadRow]) -> Result<()> {
    write_text(path, &render(rows, None)?)
}

pub fn read_overhead_csv(path: &Path) -> Result<Vec<OverheadRow>> {
    parse(&read_text(path)?, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: Method, snr: f64) -> ResultRow {
        ResultRow {
            method: m,
            snr_db: snr,
            b: 16,
            l: 6,
            trials: 500,
            accuracy: 0.875,
            rate_bps_hz: 7.25,
            overhead_slots: 96,
            seed: 1,
        }
    }

    #[test]
    fn header_is_exact() {
        let t = ResultTable {
            rows: vec![row(Method::HmbHard, -5.0)],
        };
        let csv = t.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("hmb_hard,-5.0,16,6,500,0.875,7.25,96,1"));
    }

    #[test]
    fn csv_round_trip() {
        let t = ResultTable {
            rows: Method::ALL.iter().map(|&m| row(m, 0.1 + 0.2)).collect(),
        };
        let back = ResultTable::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "method,snr,B,L,trials,accuracy,rate_bps_hz,overhead_slots,seed\nhmb,0,1,1,1,1,1,1,1\n";
        assert!(ResultTable::from_csv(text).is_err());
        assert!(ResultTable::from_csv(&format!("{CSV_HEADER}\n")).is_err());
    }

    #[test]
    fn auxiliary_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = vec![DistanceRow {
            method: Method::Hmb,
            snr_db: 10.0,
            distance_m: 1.5,
            samples: 7,
            accuracy: 0.5,
            rate_bps_hz: 3.0,
        }];
        let o = vec![OverheadRow {
            method: Method::Eimb,
            n: 32,
            codebook_size: 168,
            aps: 2,
            b: 16,
            l: 6,
            overhead_slots: 192,
        }];
        let dp = dir.path().join("d.csv");
        let op = dir.path().join("o.csv");
        write_distance_csv(&dp, &d).unwrap();
        write_overhead_csv(&op, &o).unwrap();
        assert_eq!(read_distance_csv(&dp).unwrap(), d);
        assert_eq!(read_overhead_csv(&op).unwrap(), o);
    }
}
