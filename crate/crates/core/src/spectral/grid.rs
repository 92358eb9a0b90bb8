use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[0, L)^n` sampled with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 2 or 3.
    pub dim: usize,
    /// Points per axis; a power of two, at least 8.
    pub points: usize,
    /// Box side length.
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    std::f64::consts::TAU
}

impl GridSpec {
    pub fn new(dim: usize, points: usize) -> Self {
        GridSpec {
            dim,
            points,
            length: default_length(),
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidGrid(format!(
                "dim must be 2 or 3, got {}",
                self.dim
            )));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N must be a power of two >= 8, got {}",
                self.points
            )));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "L must be positive, got {}",
                self.length
            )));
        }
        Ok(())
    }
}

/// Per-mode lookup data shared by every field on a grid.
struct ModeTable {
    /// Signed lattice index per axis (unused axes are 0).
    modes: Vec<[i32; 3]>,
    /// Physical wavenumbers for odd-order derivatives; Nyquist entries are
    /// zeroed so that derivatives of real fields stay real.
    k_odd: Vec<[f64; 3]>,
    /// |k|^2 over all modes, Nyquist included.
    ksq: Vec<f64>,
    /// |k_odd|^2.
    ksq_odd: Vec<f64>,
    /// Euclidean length of the lattice index, in units of 2π/L.
    lattice_norm: Vec<f64>,
    /// Modes kept by the 2/3 rule.
    dealias: Vec<bool>,
}

struct GridInner {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    table: ModeTable,
}

/// A validated grid with FFT plans and mode tables; cheap to clone.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Grid").field(&self.0.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.points);
        let inverse = planner.plan_fft_inverse(spec.points);
        let table = ModeTable::build(&spec);
        Ok(Grid(Arc::new(GridInner {
            spec,
            forward,
            inverse,
            table,
        })))
    }

    /// Shorthand for `Grid::new(GridSpec::new(dim, points))`.
    pub fn periodic(dim: usize, points: usize) -> Result<Self> {
        Grid::new(GridSpec::new(dim, points))
    }

    pub fn spec(&self) -> GridSpec {
        self.0.spec
    }
    pub fn dim(&self) -> usize {
        self.0.spec.dim
    }
    pub fn points(&self) -> usize {
        self.0.spec.points
    }
    pub fn length(&self) -> f64 {
        self.0.spec.length
    }
    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.points().pow(self.dim() as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self) -> f64 {
        self.length() / self.points() as f64
    }
    /// Box volume `L^n`.
    pub fn volume(&self) -> f64 {
        self.length().powi(self.dim() as i32)
    }
    /// Fundamental wavenumber `2π/L`.
    pub fn k0(&self) -> f64 {
        std::f64::consts::TAU / self.length()
    }

    /// Multi-index of a flat index; axis 0 varies slowest.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.points();
        match self.dim() {
            2 => [flat / n, flat % n, 0],
            _ => [flat / (n * n), (flat / n) % n, flat % n],
        }
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let n = self.points();
        match self.dim() {
            2 => idx[0] * n + idx[1],
            _ => (idx[0] * n + idx[1]) * n + idx[2],
        }
    }

    /// Physical coordinates of grid point `flat`.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.multi_index(flat);
        let mut x = [0.0; 3];
        for d in 0..self.dim() {
            x[d] = m[d] as f64 * h;
        }
        x
    }

    pub(crate) fn modes(&self) -> &[[i32; 3]] {
        &self.0.table.modes
    }
    pub(crate) fn k_odd(&self) -> &[[f64; 3]] {
        &self.0.table.k_odd
    }
    pub(crate) fn ksq(&self) -> &[f64] {
        &self.0.table.ksq
    }
    pub(crate) fn ksq_odd(&self) -> &[f64] {
        &self.0.table.ksq_odd
    }
    pub(crate) fn lattice_norm(&self) -> &[f64] {
        &self.0.table.lattice_norm
    }
    pub(crate) fn dealias_mask(&self) -> &[bool] {
        &self.0.table.dealias
    }

    /// Unnormalized forward transform, in place.
    pub(crate) fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.0.forward);
    }

    /// Inverse transform including the `1/N^n` normalization, in place.
    pub(crate) fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.0.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.points();
        let dim = self.dim();
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // Contiguous last axis: one batched call.
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        for axis in (0..dim - 1).rev() {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

/// Signed lattice index for FFT slot `i` of an `n`-point axis.
pub(crate) fn signed_mode(i: usize, n: usize) -> i32 {
    if i < n / 2 {
        i as i32
    } else {
        i as i32 - n as i32
    }
}

impl ModeTable {
    fn build(spec: &GridSpec) -> Self {
        let n = spec.points;
        let total = n.pow(spec.dim as u32);
        let k0 = std::f64::consts::TAU / spec.length;
        let nyquist = -(n as i32) / 2;
        let mut table = ModeTable {
            modes: Vec::with_capacity(total),
            k_odd: Vec::with_capacity(total),
            ksq: Vec::with_capacity(total),
            ksq_odd: Vec::with_capacity(total),
            lattice_norm: Vec::with_capacity(total),
            dealias: Vec::with_capacity(total),
        };
        for flat in 0..total {
            let idx = match spec.dim {
                2 => [flat / n, flat % n, 0],
                _ => [flat / (n * n), (flat / n) % n, flat % n],
            };
            let mut m = [0i32; 3];
            let mut k_odd = [0.0; 3];
            let mut ksq = 0.0;
            let mut ksq_odd = 0.0;
            let mut msq = 0.0;
            let mut keep = true;
            for d in 0..spec.dim {
                m[d] = signed_mode(idx[d], n);
                let k = k0 * m[d] as f64;
                ksq += k * k;
                msq += (m[d] as f64).powi(2);
                if m[d] != nyquist {
                    k_odd[d] = k;
                    ksq_odd += k * k;
                }
                if 3 * m[d].unsigned_abs() as usize > n {
                    keep = false;
                }
            }
            table.modes.push(m);
            table.k_odd.push(k_odd);
            table.ksq.push(ksq);
            table.ksq_odd.push(ksq_odd);
            table.lattice_norm.push(msq.sqrt());
            table.dealias.push(keep);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolution() {
        assert!(matches!(
            Grid::new(GridSpec::new(2, 12)),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::new(GridSpec::new(2, 4)).is_err());
        assert!(Grid::new(GridSpec::new(4, 16)).is_err());
        assert!(Grid::new(GridSpec::new(2, 16).with_length(-1.0)).is_err());
    }

    #[test]
    fn frequency_lattice_matches_fft_ordering() {
        let g = Grid::periodic(2, 8).unwrap();
        let mut seen: Vec<i32> = (0..8).map(|i| g.modes()[i][1]).collect();
        seen.sort();
        assert_eq!(seen, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        // Nyquist slot has zero odd wavenumber
        assert_eq!(g.k_odd()[4][1], 0.0);
        assert_eq!(g.ksq()[4], 16.0);
    }

    #[test]
    fn forward_inverse_round_trip_3d() {
        let g = Grid::periodic(3, 8).unwrap();
        let data: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.0))
            .collect();
        let mut work = data.clone();
        g.fft_forward(&mut work);
        g.fft_inverse(&mut work);
        for (a, b) in data.iter().zip(&work) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
