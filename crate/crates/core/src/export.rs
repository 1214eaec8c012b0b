//! Byte-deterministic CSV tables for every exported dataset.
//!
//! Floats use the shortest representation that parses back to the same
//! `f64`, so identical inputs always give identical bytes.

use std::fmt::Write as _;

use crate::battery::WorkDistribution;
use crate::error::Result;
use crate::lmg::SpinState;
use crate::open_gaussian::CovarianceTrajectory;
use crate::oscillator::OscillatorTrajectory;
use crate::spin_wigner::WignerGrid;

/// Shortest round-trip decimal form of `x`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x == 0.0 {
        // Normalizes -0.
        "0".to_string()
    } else {
        let s = format!("{x:?}");
        s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
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

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; panics if the width does not match the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

/// `t, re_b, im_b, abs_s, theta`.
pub fn oscillator_table(traj: &OscillatorTrajectory<f64>) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["t", "re_b", "im_b", "abs_s", "theta"]);
    for s in &traj.samples {
        let sq = s.squeezing()?;
        t.push(vec![s.t.into(), s.b.re.into(), s.b.im.into(), sq.magnitude.into(), sq.phase.into()]);
    }
    Ok(t)
}

/// `t, sigma, re_sigma01, im_sigma01, n_excitations`.
pub fn covariance_table(traj: &CovarianceTrajectory<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["t", "sigma", "re_sigma01", "im_sigma01", "n_excitations"]);
    for c in &traj.samples {
        t.push(vec![c.t.into(), c.sigma.into(), c.sigma01.re.into(), c.sigma01.im.into(), c.excitations().into()]);
    }
    t
}

/// `n, W_over_omega, prob`.
pub fn distribution_table(dist: &WorkDistribution<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["n", "W_over_omega", "prob"]);
    for (n, w, p) in dist.levels() {
        t.push(vec![n.into(), w.into(), p.into()]);
    }
    t
}

/// `m, re_amp, im_amp`, rows ordered `m = J .. -J`.
pub fn spin_state_table(state: &SpinState<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["m", "re_amp", "im_amp"]);
    let j = state.n as f64 * 0.5;
    for (i, a) in state.amplitudes.iter().enumerate() {
        t.push(vec![(j - i as f64).into(), a.re.into(), a.im.into()]);
    }
    t
}

/// `theta, phi, W`, theta-major.
pub fn wigner_table(grid: &WignerGrid<f64>) -> CsvTable {
    let mut t = CsvTable::new(&["theta", "phi", "W"]);
    for (it, &th) in grid.thetas.iter().enumerate() {
        for (ip, &ph) in grid.phis.iter().enumerate() {
            t.push(vec![th.into(), ph.into(), grid.values[(it, ip)].into()]);
        }
    }
    t
}

/// Whitespace-separated matrix, one `theta` row per line, for gnuplot.
pub fn wigner_matrix(grid: &WignerGrid<f64>) -> String {
    let mut out = String::new();
    for it in 0..grid.thetas.len() {
        let row: Vec<String> = grid.values.row(it).iter().map(|&x| format_float(x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
