use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::qstate::StateVector;

/// Coherent-state width giving equal resolution in position and momentum on
/// a `dim`-point torus: `sigma^2 = dim / (4 pi)`.
pub fn default_sigma(dim: usize) -> f64 {
    (dim as f64 / (4.0 * PI)).sqrt()
}

/// Husimi distribution on the `dim x dim` phase-space grid.
///
/// `values[p0 * dim + x0]`; rows are momenta, columns positions. With the
/// unit-norm coherent states used here the grid sums to `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    dim: usize,
    sigma: f64,
    values: Vec<f64>,
}

impl HusimiGrid {
    pub fn zeros(dim: usize, sigma: f64) -> Self {
        Self {
            dim,
            sigma,
            values: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x0: usize, p0: usize) -> f64 {
        self.values[p0 * self.dim + x0]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Factor turning [`total`](Self::total) into a probability.
    pub fn normalization(&self) -> f64 {
        1.0 / self.dim as f64
    }

    pub fn column_mass(&self, x0: usize) -> f64 {
        (0..self.dim).map(|p0| self.get(x0, p0)).sum()
    }

    pub fn row_mass(&self, p0: usize) -> f64 {
        self.values[p0 * self.dim..(p0 + 1) * self.dim].iter().sum()
    }

    /// Column with the largest mass (lowest index on ties).
    pub fn heaviest_column(&self) -> usize {
        let masses: Vec<f64> = (0..self.dim).map(|x| self.column_mass(x)).collect();
        let mut best = 0;
        for (x, &m) in masses.iter().enumerate() {
            if m > masses[best] {
                best = x;
            }
        }
        best
    }

    /// `self += weight * other`, for ensemble averages.
    pub fn accumulate(&mut self, other: &HusimiGrid, weight: f64) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
        Ok(())
    }

    /// Block-sums the grid down to `bins x bins` (`bins` must divide `dim`).
    pub fn binned(&self, bins: usize) -> Result<HusimiGrid> {
        if bins == 0 || self.dim % bins != 0 {
            return Err(Error::InvalidConfig(format!(
                "bin count {bins} does not divide grid size {}",
                self.dim
            )));
        }
        let k = self.dim / bins;
        let mut out = HusimiGrid::zeros(bins, self.sigma);
        for p0 in 0..self.dim {
            for x0 in 0..self.dim {
                out.values[(p0 / k) * bins + x0 / k] += self.get(x0, p0);
            }
        }
        Ok(out)
    }

    /// Space-separated matrix, one line per momentum row.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p0 in 0..self.dim {
            let row = &self.values[p0 * self.dim..(p0 + 1) * self.dim];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Calls `f(x0, column)` with `column[p0] = H(x0, p0)`, where
/// `H(x0, p0) = |<c(x0, p0)|psi>|^2` for periodic Gaussian coherent states
/// `c ~ sum_x exp(-d(x, x0)^2 / (4 sigma^2)) exp(2 pi i p0 x / D) |x>`.
///
/// Each column is one FFT of the Gaussian-windowed state.
fn for_each_column<F: FnMut(usize, &[f64])>(state: &StateVector, sigma: f64, mut f: F) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("Husimi width must be positive, got {sigma}")));
    }
    let dim = state.dim();
    let window: Vec<f64> = (0..dim)
        .map(|d| {
            let d = d.min(dim - d) as f64;
            (-d * d / (4.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm_c: f64 = window.iter().map(|g| g * g).sum();

    let fft = FftPlanner::new().plan_fft_forward(dim);
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut column = vec![0.0; dim];
    let amps = state.amplitudes();
    for x0 in 0..dim {
        for (x, b) in buf.iter_mut().enumerate() {
            *b = amps[x] * window[x.abs_diff(x0)];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (c, z) in column.iter_mut().zip(&buf) {
            *c = z.norm_sqr() / norm_c;
        }
        f(x0, &column);
    }
    Ok(())
}

/// Full Husimi grid of `state`.
pub fn husimi(state: &StateVector, sigma: f64) -> Result<HusimiGrid> {
    let dim = state.dim();
    let mut grid = HusimiGrid::zeros(dim, sigma);
    for_each_column(state, sigma, |x0, column| {
        for (p0, &v) in column.iter().enumerate() {
            grid.values[p0 * dim + x0] = v;
        }
    })?;
    Ok(grid)
}

/// Binned grid plus full-resolution column masses, without storing the
/// `D x D` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiSummary {
    pub binned: HusimiGrid,
    /// Mass of every position column `x0`.
    pub columns: Vec<f64>,
}

impl HusimiSummary {
    pub fn zeros(dim: usize, bins: usize, sigma: f64) -> Self {
        Self {
            binned: HusimiGrid::zeros(bins, sigma),
            columns: vec![0.0; dim],
        }
    }

    /// `self += weight * other`.
    pub fn accumulate(&mut self, other: &HusimiSummary, weight: f64) -> Result<()> {
        if other.columns.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                left: self.columns.len(),
                right: other.columns.len(),
            });
        }
        self.binned.accumulate(&other.binned, weight)?;
        for (a, b) in self.columns.iter_mut().zip(&other.columns) {
            *a += weight * b;
        }
        Ok(())
    }

    /// Column with the largest mass (lowest index on ties).
    pub fn heaviest_column(&self) -> usize {
        let mut best = 0;
        for (x, &m) in self.columns.iter().enumerate() {
            if m > self.columns[best] {
                best = x;
            }
        }
        best
    }
}

/// Husimi distribution block-summed to `bins x bins`, with exact column
/// masses. `bins` must divide the dimension.
pub fn husimi_summary(state: &StateVector, sigma: f64, bins: usize) -> Result<HusimiSummary> {
    let dim = state.dim();
    if bins == 0 || dim % bins != 0 {
        return Err(Error::InvalidConfig(format!(
            "bin count {bins} does not divide grid size {dim}"
        )));
    }
    let k = dim / bins;
    let mut out = HusimiSummary::zeros(dim, bins, sigma);
    for_each_column(state, sigma, |x0, column| {
        out.columns[x0] = column.iter().sum();
        let bx = x0 / k;
        for (p0, &v) in column.iter().enumerate() {
            out.binned.values[(p0 / k) * bins + bx] += v;
        }
    })?;
    Ok(out)
}
