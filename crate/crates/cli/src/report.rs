//! Report rows and their JSON and CSV encodings.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;

/// Output encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("format must be json or csv, got `{s}`")),
        }
    }
}

/// Seventeen significant digits in scientific notation.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Compact JSON whose floats carry 17 significant digits.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// A JSON array of `rows` followed by a newline. Non-finite floats become `null`.
pub fn write_json<T: Serialize, W: Write>(rows: &[T], sink: &mut W) -> io::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut *sink, Digits17);
    rows.serialize(&mut ser).map_err(io::Error::other)?;
    sink.write_all(b"\n")
}

/// A table with a header row; values are already formatted.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub fn write_csv<W: Write>(table: &Table, sink: &mut W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&table.header).map_err(io::Error::other)?;
    for r in &table.rows {
        w.write_record(r).map_err(io::Error::other)?;
    }
    w.flush()
}

/// An optional float as a CSV cell; missing and non-finite values are empty.
pub fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => float(x),
        _ => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: Vec<f64>,
        ok: bool,
    }

    fn json<T: Serialize>(rows: &[T]) -> String {
        let mut out = Vec::new();
        write_json(rows, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn empty_list() {
        assert_eq!(json::<Row>(&[]), "[]\n");
    }

    #[test]
    fn floats_round_trip() {
        let vals = [0.1, -1.0 / 3.0, 8.0 * std::f64::consts::PI.powi(2), 1e-300, 5e-324, f64::MAX];
        let s = json(&[Row { x: vals[0], y: vals.to_vec(), ok: true }]);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        for (k, want) in vals.iter().enumerate() {
            assert_eq!(v[0]["y"][k].as_f64().unwrap().to_bits(), want.to_bits());
        }
        assert!(s.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn non_finite_is_null() {
        let s = json(&[Row { x: f64::NAN, y: vec![f64::INFINITY], ok: false }]);
        assert_eq!(s, "[{\"x\":null,\"y\":[null],\"ok\":false}]\n");
    }

    #[test]
    fn csv_header_and_rows() {
        let t = Table { header: vec!["rank", "eigenvalue"], rows: vec![vec!["0".into(), float(-1.0)]] };
        let mut out = Vec::new();
        write_csv(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "rank,eigenvalue\n0,-1.0000000000000000e0\n");
        assert_eq!(cell(None), "");
        assert_eq!(cell(Some(f64::NAN)), "");
    }
}
