//! CSV and JSON outputs.
//!
//! Every CSV file is UTF-8 with a header row; floats are written in
//! scientific notation with 17 significant digits, which round-trips every
//! `f64` exactly. Integers are written plainly.
//!
//! | file | columns |
//! |------|---------|
//! | `order_parameter.csv` | `t, re_r, im_r, abs_r` |
//! | `spectrum.csv` | `freq, power` |
//! | `gamma_fits.csv` | `N, gamma, gamma_over_kappa1, r_squared` |
//! | `sync.csv` | `N, t, s_c` |
//! | `phase_fluctuation.csv` | `t, delta2_theta, stderr` |
//! | `hist_<tag>.csv` | `q_bin_center, p_bin_center, density` |
//! | `eigenvalues.csv` | `index, re_lambda, im_lambda, residual` |
//! | `steady_state.csv` | `row, col, re, im` |
//! | `snapshots.csv` | `traj, t, n, re_a, im_a` |

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::EigenEstimate;
use crate::observables::{Histogram2D, PhaseFluctuation, PowerSpectrum};
use crate::sde::{EnsembleRecord, Snapshot};

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Buffered CSV writer with a fixed number of columns.
pub struct CsvWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    columns: usize,
    line: String,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            columns: header.len(),
            line: String::new(),
        };
        w.write_line(&header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        let mut line = std::mem::take(&mut self.line);
        line.clear();
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            match c {
                Cell::Int(i) => write!(line, "{i}").expect("write to string"),
                Cell::Float(x) => line.push_str(&format_float(*x)),
            }
        }
        let r = self.write_line(&line);
        self.line = line;
        r
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_order_parameter(path: &Path, record: &EnsembleRecord) -> Result<()> {
    let mut w = CsvWriter::create(path, &["t", "re_r", "im_r", "abs_r"])?;
    for (t, r) in record.times.iter().zip(&record.mean_field) {
        w.row(&[(*t).into(), r.re.into(), r.im.into(), r.norm().into()])?;
    }
    w.finish()
}

pub fn write_spectrum(path: &Path, spectrum: &PowerSpectrum) -> Result<()> {
    let mut w = CsvWriter::create(path, &["freq", "power"])?;
    for (f, p) in spectrum.freq.iter().zip(&spectrum.power) {
        w.row(&[(*f).into(), (*p).into()])?;
    }
    w.finish()
}

/// One row of `gamma_fits.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRow {
    pub n_osc: usize,
    pub gamma: f64,
    pub gamma_over_kappa1: f64,
    pub r_squared: f64,
}

pub fn write_gamma_fits(path: &Path, rows: &[GammaRow]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["N", "gamma", "gamma_over_kappa1", "r_squared"])?;
    for r in rows {
        w.row(&[
            r.n_osc.into(),
            r.gamma.into(),
            r.gamma_over_kappa1.into(),
            r.r_squared.into(),
        ])?;
    }
    w.finish()
}

/// One row of `sync.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncRow {
    pub n_osc: usize,
    pub t: f64,
    pub s_c: f64,
}

pub fn write_sync(path: &Path, rows: &[SyncRow]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["N", "t", "s_c"])?;
    for r in rows {
        w.row(&[r.n_osc.into(), r.t.into(), r.s_c.into()])?;
    }
    w.finish()
}

pub fn write_phase_fluctuation(path: &Path, rows: &[PhaseFluctuation]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["t", "delta2_theta", "stderr"])?;
    for r in rows {
        w.row(&[r.t.into(), r.value.into(), r.stderr.into()])?;
    }
    w.finish()
}

/// File name `hist_<tag>.csv` of a histogram.
pub fn histogram_file_name(hist: &Histogram2D) -> String {
    format!("hist_{}.csv", hist.source.tag())
}

pub fn write_histogram(path: &Path, hist: &Histogram2D) -> Result<()> {
    let mut w = CsvWriter::create(path, &["q_bin_center", "p_bin_center", "density"])?;
    let centers = hist.bin_centers();
    for (iq, q) in centers.iter().enumerate() {
        for (ip, p) in centers.iter().enumerate() {
            w.row(&[(*q).into(), (*p).into(), hist.get(iq, ip).into()])?;
        }
    }
    w.finish()
}

pub fn write_eigenvalues(path: &Path, eigs: &[EigenEstimate]) -> Result<()> {
    let mut w = CsvWriter::create(path, &["index", "re_lambda", "im_lambda", "residual"])?;
    for (k, e) in eigs.iter().enumerate() {
        w.row(&[k.into(), e.value.re.into(), e.value.im.into(), e.residual.into()])?;
    }
    w.finish()
}

/// Writes the nonzero entries of `rho`, column by column.
pub fn write_steady_state(path: &Path, rho: &Mat<Complex64>) -> Result<()> {
    let mut w = CsvWriter::create(path, &["row", "col", "re", "im"])?;
    for j in 0..rho.ncols() {
        for i in 0..rho.nrows() {
            let z = rho[(i, j)];
            if z != Complex64::ZERO {
                w.row(&[i.into(), j.into(), z.re.into(), z.im.into()])?;
            }
        }
    }
    w.finish()
}

/// Appends the amplitudes of one snapshot; `n` is the 1-based oscillator.
pub fn write_snapshot_rows(w: &mut CsvWriter, snapshot: &Snapshot) -> Result<()> {
    for (traj, amps) in snapshot.traj.iter().zip(&snapshot.amplitudes) {
        for (n, a) in amps.iter().enumerate() {
            w.row(&[(*traj).into(), snapshot.time.into(), (n + 1).into(), a.re.into(), a.im.into()])?;
        }
    }
    Ok(())
}

pub const SNAPSHOT_HEADER: [&str; 5] = ["traj", "t", "n", "re_a", "im_a"];

pub fn write_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = CsvWriter::create(path, &SNAPSHOT_HEADER)?;
    for s in snapshots {
        write_snapshot_rows(&mut w, s)?;
    }
    w.finish()
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a CSV produced by this module into its header and numeric rows.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|e| Error::Config(format!("{}: bad cell {c:?}: {e}", path.display())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sync.csv");
        let rows = [
            SyncRow { n_osc: 2, t: 1e4, s_c: 1.0 / 3.0 },
            SyncRow { n_osc: 50, t: 1e4, s_c: f64::INFINITY },
        ];
        write_sync(&path, &rows).unwrap();
        let (header, data) = read_numeric_csv(&path).unwrap();
        assert_eq!(header, ["N", "t", "s_c"]);
        assert_eq!(data[0], vec![2.0, 1e4, 1.0 / 3.0]);
        assert_eq!(data[1][2], f64::INFINITY);
    }

    #[test]
    fn steady_state_skips_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steady_state.csv");
        let mut rho = Mat::<Complex64>::zeros(3, 3);
        rho[(0, 0)] = Complex64::new(0.75, 0.0);
        rho[(2, 2)] = Complex64::new(0.25, 0.0);
        write_steady_state(&path, &rho).unwrap();
        let (_, data) = read_numeric_csv(&path).unwrap();
        assert_eq!(data, vec![vec![0.0, 0.0, 0.75, 0.0], vec![2.0, 2.0, 0.25, 0.0]]);
    }

    proptest! {
        #[test]
        fn floats_round_trip_bitwise(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let back: f64 = format_float(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
