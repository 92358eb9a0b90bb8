use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::field::ScalarField;
use super::grid::Grid;

/// Resolutions above this use multilinear interpolation instead of exact
/// Fourier summation.
pub const DIRECT_SUMMATION_LIMIT: usize = 128;

/// Coefficients below this fraction of the largest one are treated as zero
/// when sizing the summation window.
const WINDOW_TOLERANCE: f64 = 1e-15;

/// Evaluates a batch of fields at arbitrary points.
///
/// On grids with `N <= 128` the trigonometric interpolant is summed
/// directly, so band-limited fields are reproduced exactly. The summation
/// only runs over the smallest centred window of modes that holds every
/// coefficient above round-off, which keeps smooth fields cheap.
pub struct OffGridEvaluator {
    grid: Grid,
    mode: Mode,
}

enum Mode {
    Direct {
        cut: usize,
        /// Per field, coefficients on the `(2 cut + 1)^n` window, already
        /// divided by `N^n`.
        coeffs: Vec<Vec<Complex64>>,
    },
    Multilinear {
        values: Vec<Vec<f64>>,
    },
}

impl OffGridEvaluator {
    pub fn new(fields: &[&ScalarField]) -> Self {
        assert!(!fields.is_empty());
        let grid = fields[0].grid().clone();
        if grid.points() > DIRECT_SUMMATION_LIMIT {
            return OffGridEvaluator {
                mode: Mode::Multilinear {
                    values: fields.iter().map(|f| f.values().to_vec()).collect(),
                },
                grid,
            };
        }
        let n = grid.points();
        let modes = grid.modes();
        let peak = fields
            .iter()
            .flat_map(|f| f.spectrum().iter().map(|c| c.norm()))
            .fold(0.0, f64::max);
        let mut cut = 0usize;
        for f in fields {
            for (m, c) in f.spectrum().iter().enumerate() {
                if c.norm() > WINDOW_TOLERANCE * peak {
                    for d in 0..grid.dim() {
                        cut = cut.max(modes[m][d].unsigned_abs() as usize);
                    }
                }
            }
        }
        let cut = cut.min(n / 2);
        let width = 2 * cut + 1;
        let dim = grid.dim();
        let scale = 1.0 / grid.len() as f64;
        let coeffs = fields
            .iter()
            .map(|f| {
                let mut w = vec![Complex64::default(); width.pow(dim as u32)];
                for (m, c) in f.spectrum().iter().enumerate() {
                    let idx = modes[m];
                    if (0..dim).all(|d| idx[d].unsigned_abs() as usize <= cut) {
                        let mut flat = 0;
                        for &i in idx.iter().take(dim) {
                            flat = flat * width + (i + cut as i32) as usize;
                        }
                        w[flat] = c * scale;
                    }
                }
                w
            })
            .collect();
        OffGridEvaluator {
            grid,
            mode: Mode::Direct { cut, coeffs },
        }
    }

    pub fn field_count(&self) -> usize {
        match &self.mode {
            Mode::Direct { coeffs, .. } => coeffs.len(),
            Mode::Multilinear { values } => values.len(),
        }
    }

    /// True when exact Fourier summation is in use.
    pub fn is_exact(&self) -> bool {
        matches!(self.mode, Mode::Direct { .. })
    }

    /// Values of every field at `x`, written into `out`.
    pub fn eval_into(&self, x: [f64; 3], out: &mut [f64]) {
        match &self.mode {
            Mode::Direct { cut, coeffs } => self.direct(*cut, coeffs, x, out),
            Mode::Multilinear { values } => self.multilinear(values, x, out),
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.field_count()];
        self.eval_into(x, &mut out);
        out
    }

    /// Evaluates at many points; result is indexed `[field][point]`.
    pub fn eval_many(&self, points: &[[f64; 3]]) -> Vec<Vec<f64>> {
        let k = self.field_count();
        let rows: Vec<Vec<f64>> = points
            .par_iter()
            .map(|&x| {
                let mut out = vec![0.0; k];
                self.eval_into(x, &mut out);
                out
            })
            .collect();
        (0..k)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect()
    }

    fn direct(&self, cut: usize, coeffs: &[Vec<Complex64>], x: [f64; 3], out: &mut [f64]) {
        let dim = self.grid.dim();
        let width = 2 * cut + 1;
        let k0 = self.grid.k0();
        let tables: Vec<Vec<Complex64>> = (0..dim)
            .map(|d| {
                let step = Complex64::from_polar(1.0, k0 * x[d]);
                let mut t = vec![Complex64::default(); width];
                t[cut] = Complex64::new(1.0, 0.0);
                for m in 1..=cut {
                    t[cut + m] = t[cut + m - 1] * step;
                    t[cut - m] = t[cut + m].conj();
                }
                t
            })
            .collect();
        for (slot, c) in out.iter_mut().zip(coeffs) {
            let mut acc = Complex64::default();
            if dim == 2 {
                for (a, row) in c.chunks_exact(width).enumerate() {
                    let mut s = Complex64::default();
                    for (v, e) in row.iter().zip(&tables[1]) {
                        s += v * e;
                    }
                    acc += s * tables[0][a];
                }
            } else {
                for (a, plane) in c.chunks_exact(width * width).enumerate() {
                    let mut sa = Complex64::default();
                    for (b, row) in plane.chunks_exact(width).enumerate() {
                        let mut s = Complex64::default();
                        for (v, e) in row.iter().zip(&tables[2]) {
                            s += v * e;
                        }
                        sa += s * tables[1][b];
                    }
                    acc += sa * tables[0][a];
                }
            }
            *slot = acc.re;
        }
    }

    fn multilinear(&self, values: &[Vec<f64>], x: [f64; 3], out: &mut [f64]) {
        let dim = self.grid.dim();
        let n = self.grid.points();
        let h = self.grid.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..dim {
            let s = (x[d] / h).rem_euclid(n as f64);
            let i = s.floor();
            base[d] = i as usize % n;
            frac[d] = s - i;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << dim) {
            let mut idx = [0usize; 3];
            let mut w = 1.0;
            for d in 0..dim {
                let up = (corner >> d) & 1 == 1;
                idx[d] = (base[d] + up as usize) % n;
                w *= if up { frac[d] } else { 1.0 - frac[d] };
            }
            let flat = self.grid.flat_index(idx);
            for (o, v) in out.iter_mut().zip(values) {
                *o += w * v[flat];
            }
        }
    }
}
