use std::io::Write;
use std::path::Path;

use crate::error::{FwError, Result};

pub const CSV_HEADER: [&str; 7] = ["k", "f", "gap", "alpha", "atom", "matvecs", "millis"];

/// State of one iterate `x^(k)`: its value, the gap measured at it, the
/// step size then applied, the atom chosen by the oracle, and cumulative
/// matrix-vector products. The last row has `alpha = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub gap: f64,
    /// Additive error bound of the oracle that produced `gap`.
    pub slack: f64,
    pub alpha: f64,
    pub atom: String,
    pub matvecs: u64,
    pub millis: u64,
}

impl TraceRow {
    /// Upper bound on `f - f*` certified by this row.
    pub fn certified_gap(&self) -> f64 {
        self.gap + self.slack
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Seed of the random stream used by the run, if any.
    pub seed: Option<u64>,
}

impl RunTrace {
    pub fn new(seed: Option<u64>) -> Self {
        Self { rows: Vec::new(), seed }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn total_matvecs(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.matvecs)
    }

    /// Rows where `gap + slack < f - f_star - tol`.
    pub fn weak_duality_violations(&self, f_star: f64, tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.certified_gap() + tol < r.f - f_star)
            .map(|r| r.k)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.f.to_string(),
                r.gap.to_string(),
                r.alpha.to_string(),
                r.atom.clone(),
                r.matvecs.to_string(),
                r.millis.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a trace written by [`RunTrace::write_csv`]. `slack` is not
    /// serialized and comes back as zero.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(FwError::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: format!("unexpected header {header:?}"),
            });
        }
        let mut rows = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| FwError::Parse { path: path.display().to_string(), line: idx + 2, msg };
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])));
            let int = |i: usize| rec[i].parse::<u64>().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])));
            rows.push(TraceRow {
                k: int(0)? as usize,
                f: num(1)?,
                gap: num(2)?,
                slack: 0.0,
                alpha: num(3)?,
                atom: rec[4].to_string(),
                matvecs: int(5)?,
                millis: int(6)?,
            });
        }
        Ok(Self { rows, seed: None })
    }
}
