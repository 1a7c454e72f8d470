//! The K x N_V matrix of virtual-node readings.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::Result;

/// Virtual-node readings, one row per clock cycle, one column per node.
/// Entry (k, m) is the state at time k T + (m + 1) theta, i.e. at the end of
/// node m's mask interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    entries: DMatrix<f64>,
    centered: bool,
}

impl StateMatrix {
    pub fn from_raw(entries: DMatrix<f64>) -> Self {
        StateMatrix { entries, centered: false }
    }

    pub fn from_centered(entries: DMatrix<f64>) -> Self {
        StateMatrix { entries, centered: true }
    }

    /// Subtract the per-node mean over all clock cycles. Idempotent.
    pub fn centered(self) -> StateMatrix {
        if self.centered {
            return self;
        }
        let mut entries = self.entries;
        let k = entries.nrows() as f64;
        for mut col in entries.column_iter_mut() {
            let mean = col.sum() / k;
            col.add_scalar_mut(-mean);
        }
        StateMatrix { entries, centered: true }
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_v(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest absolute entry (the "largest state response").
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV rows `k,m,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,m,value").map_err(io_err)?;
        for k in 0..self.k() {
            for m in 0..self.n_v() {
                writeln!(w, "{},{},{:.17e}", k, m, self.entries[(k, m)]).map_err(io_err)?;
            }
        }
        Ok(())
    }
}

fn io_err(e: std::io::Error) -> crate::error::Error {
    crate::error::Error::Config(format!("write failed: {e}"))
}
