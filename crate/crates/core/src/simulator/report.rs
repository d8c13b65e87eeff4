use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AberRow {
    pub scheme: String,
    pub power_dbm: f64,
    pub series: String,
    pub aber: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub trials: u64,
    pub seed: u64,
}

/// ABER curves in the CSV schema
/// `scheme,power_dbm,series,aber,bit_errors,bits_total,trials,seed`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AberReport {
    pub rows: Vec<AberRow>,
}

impl AberReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(AberReport { rows })
    }

    /// Rows of one series, in power order.
    pub fn series(&self, scheme: &str, series: &str) -> Vec<&AberRow> {
        self.rows.iter().filter(|r| r.scheme == scheme && r.series == series).collect()
    }

    pub fn extend(&mut self, other: AberReport) {
        self.rows.extend(other.rows);
    }
}
