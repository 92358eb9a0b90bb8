use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Real scalar values on a periodic grid.
///
/// A field carries at least one of its two representations (grid values or
/// Fourier coefficients); the other is computed on first use and cached.
/// Fields are immutable once built.
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: OnceLock<Vec<f64>>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("has_values", &self.values.get().is_some())
            .field("has_spectrum", &self.spectrum.get().is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count does not match grid");
        ScalarField {
            grid: grid.clone(),
            values: OnceLock::from(values),
            spectrum: OnceLock::new(),
        }
    }

    /// Builds a field from Fourier coefficients in FFT order. The spectrum
    /// must be Hermitian; grid values are the real part of the inverse.
    pub fn from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> Self {
        assert_eq!(spectrum.len(), grid.len(), "mode count does not match grid");
        ScalarField {
            grid: grid.clone(),
            values: OnceLock::new(),
            spectrum: OnceLock::from(spectrum),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_values(grid, values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_values(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        let mut spectrum = vec![Complex64::default(); grid.len()];
        spectrum[0] = Complex64::default();
        let f = Self::from_spectrum(grid, spectrum);
        let _ = f.values.set(vec![0.0; grid.len()]);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let mut work = self.spectrum.get().expect("field has no data").clone();
            self.grid.fft_inverse(&mut work);
            work.into_iter().map(|c| c.re).collect()
        })
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut work: Vec<Complex64> = self
                .values
                .get()
                .expect("field has no data")
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.grid.fft_forward(&mut work);
            work
        })
    }

    pub fn has_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    /// Spatial mean over the box.
    pub fn mean(&self) -> f64 {
        if let Some(s) = self.spectrum.get() {
            s[0].re / self.grid.len() as f64
        } else {
            self.values().iter().sum::<f64>() / self.grid.len() as f64
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(&self.grid, self.values().iter().map(|&v| f(v)).collect())
    }

    /// Multiplies every Fourier coefficient by `multiplier(flat_index)`.
    pub fn apply_multiplier(&self, multiplier: impl Fn(usize) -> Complex64) -> Self {
        let spectrum = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(i, c)| c * multiplier(i))
            .collect();
        Self::from_spectrum(&self.grid, spectrum)
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let mask = self.grid.dealias_mask();
        let spectrum = self
            .spectrum()
            .iter()
            .zip(mask)
            .map(|(c, &keep)| if keep { *c } else { Complex64::default() })
            .collect();
        Self::from_spectrum(&self.grid, spectrum)
    }

    /// Pointwise product on the grid, without dealiasing.
    pub fn pointwise_mul(&self, other: &ScalarField) -> Self {
        check_same(&self.grid, &other.grid);
        let values = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .collect();
        Self::from_values(&self.grid, values)
    }

    /// `a * self + b * other`, computed in whichever representation both
    /// operands already share.
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        check_same(&self.grid, &other.grid);
        let both_values = self.values.get().is_some() && other.values.get().is_some();
        let both_spectra = self.has_spectrum() && other.has_spectrum();
        if both_values && !both_spectra {
            let values = self
                .values()
                .iter()
                .zip(other.values())
                .map(|(x, y)| a * x + b * y)
                .collect();
            Self::from_values(&self.grid, values)
        } else {
            let spectrum = self
                .spectrum()
                .iter()
                .zip(other.spectrum())
                .map(|(x, y)| x * a + y * b)
                .collect();
            Self::from_spectrum(&self.grid, spectrum)
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        if let Some(s) = self.spectrum.get() {
            Self::from_spectrum(&self.grid, s.iter().map(|c| c * a).collect())
        } else {
            self.map(|v| a * v)
        }
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_same(a: &Grid, b: &Grid) {
    assert!(a == b, "fields live on different grids");
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.lin_comb(1.0, rhs, 1.0)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.lin_comb(1.0, rhs, -1.0)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

/// An `n`-component vector field.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        assert!(!components.is_empty());
        let g = components[0].grid().clone();
        assert_eq!(components.len(), g.dim(), "component count must equal dim");
        for c in &components {
            check_same(&g, c.grid());
        }
        VectorField { components }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = grid.dim();
        let pts: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        VectorField::new(
            (0..n)
                .map(|d| ScalarField::from_values(grid, pts.iter().map(|p| p[d]).collect()))
                .collect(),
        )
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField::new((0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect())
    }

    pub fn constant(grid: &Grid, c: [f64; 3]) -> Self {
        VectorField::new(
            (0..grid.dim())
                .map(|d| ScalarField::constant(grid, c[d]))
                .collect(),
        )
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }
    pub fn dim(&self) -> usize {
        self.components.len()
    }
    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }
    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }
    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        VectorField::new(self.components.iter().map(f).collect())
    }

    pub fn lin_comb(&self, a: f64, other: &VectorField, b: f64) -> Self {
        VectorField::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.lin_comb(a, y, b))
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_components(|c| c.scale(a))
    }

    pub fn dealiased(&self) -> Self {
        self.map_components(ScalarField::dealiased)
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        self.map_components(|c| c.pointwise_mul(s))
    }

    /// Pointwise Euclidean length, maximized over the grid.
    pub fn max_abs(&self) -> f64 {
        let vals: Vec<&[f64]> = self.components.iter().map(|c| c.values()).collect();
        (0..self.grid().len())
            .map(|i| vals.iter().map(|v| v[i] * v[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Point value at grid index `flat`.
    pub fn at(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (d, c) in self.components.iter().enumerate() {
            out[d] = c.values()[flat];
        }
        out
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        self.lin_comb(1.0, rhs, 1.0)
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        self.lin_comb(1.0, rhs, -1.0)
    }
}

impl Mul<f64> for &VectorField {
    type Output = VectorField;
    fn mul(self, rhs: f64) -> VectorField {
        self.scale(rhs)
    }
}

/// A small dense matrix at one grid point; only the leading `n × n` block
/// is meaningful.
pub type PointMatrix = [[f64; 3]; 3];

/// An `n × n` matrix field stored row-major. Entry `(i, j)` of a Jacobian
/// is `∂_j v^i`.
#[derive(Clone, Debug)]
pub struct MatrixField {
    n: usize,
    entries: Vec<ScalarField>,
}

impl MatrixField {
    pub fn new(n: usize, entries: Vec<ScalarField>) -> Self {
        assert_eq!(entries.len(), n * n);
        assert_eq!(entries[0].grid().dim(), n);
        MatrixField { n, entries }
    }

    pub fn identity(grid: &Grid) -> Self {
        Self::constant(grid, &point::identity(grid.dim()))
    }

    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.dim();
        MatrixField::new(n, (0..n * n).map(|_| ScalarField::zeros(grid)).collect())
    }

    pub fn constant(grid: &Grid, m: &PointMatrix) -> Self {
        let n = grid.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(ScalarField::constant(grid, m[i][j]));
            }
        }
        MatrixField::new(n, entries)
    }

    pub fn grid(&self) -> &Grid {
        self.entries[0].grid()
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.n + j]
    }
    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// Matrix at grid point `flat`.
    pub fn at(&self, flat: usize) -> PointMatrix {
        let mut m = [[0.0; 3]; 3];
        for i in 0..self.n {
            for j in 0..self.n {
                m[i][j] = self.entries[i * self.n + j].values()[flat];
            }
        }
        m
    }

    /// Builds a matrix field by evaluating `f` at every grid point.
    pub fn from_points(grid: &Grid, f: impl Fn(usize) -> PointMatrix) -> Self {
        let n = grid.dim();
        let mats: Vec<PointMatrix> = (0..grid.len()).map(f).collect();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(ScalarField::from_values(
                    grid,
                    mats.iter().map(|m| m[i][j]).collect(),
                ));
            }
        }
        MatrixField::new(n, entries)
    }

    /// Applies `f` to the matrix at every grid point.
    pub fn map_points(&self, f: impl Fn(&PointMatrix) -> PointMatrix) -> Self {
        // Touch every entry once so the per-point gathers hit cached values.
        let vals: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        let n = self.n;
        Self::from_points(self.grid(), |p| {
            let mut m = [[0.0; 3]; 3];
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = vals[i * n + j][p];
                }
            }
            f(&m)
        })
    }

    /// Reduces the matrix at every grid point to a scalar.
    pub fn map_to_scalar(&self, f: impl Fn(&PointMatrix) -> f64) -> ScalarField {
        let vals: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        let n = self.n;
        let values = (0..self.grid().len())
            .map(|p| {
                let mut m = [[0.0; 3]; 3];
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] = vals[i * n + j][p];
                    }
                }
                f(&m)
            })
            .collect();
        ScalarField::from_values(self.grid(), values)
    }

    pub fn map_entries(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        MatrixField::new(self.n, self.entries.iter().map(f).collect())
    }

    pub fn lin_comb(&self, a: f64, other: &MatrixField, b: f64) -> Self {
        MatrixField::new(
            self.n,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(x, y)| x.lin_comb(a, y, b))
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_entries(|e| e.scale(a))
    }

    pub fn dealiased(&self) -> Self {
        self.map_entries(ScalarField::dealiased)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.entry(j, i).clone());
            }
        }
        MatrixField::new(n, entries)
    }

    pub fn trace(&self) -> ScalarField {
        let mut acc = self.entry(0, 0).clone();
        for i in 1..self.n {
            acc = &acc + self.entry(i, i);
        }
        acc
    }

    /// Pointwise matrix product `self · other`.
    pub fn matmul(&self, other: &MatrixField) -> Self {
        let n = self.n;
        let a: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        let b: Vec<&[f64]> = other.entries.iter().map(|e| e.values()).collect();
        let grid = self.grid().clone();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let values = (0..grid.len())
                    .map(|p| (0..n).map(|k| a[i * n + k][p] * b[k * n + j][p]).sum())
                    .collect();
                entries.push(ScalarField::from_values(&grid, values));
            }
        }
        MatrixField::new(n, entries)
    }

    /// Pointwise matrix-vector product `self · v`.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        let n = self.n;
        let a: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        let x: Vec<&[f64]> = v.components().iter().map(|c| c.values()).collect();
        let grid = self.grid().clone();
        VectorField::new(
            (0..n)
                .map(|i| {
                    let values = (0..grid.len())
                        .map(|p| (0..n).map(|k| a[i * n + k][p] * x[k][p]).sum())
                        .collect();
                    ScalarField::from_values(&grid, values)
                })
                .collect(),
        )
    }

    /// Pointwise `self : other = Σ_ij self_ij other_ji`.
    pub fn contract(&self, other: &MatrixField) -> ScalarField {
        let n = self.n;
        let a: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        let b: Vec<&[f64]> = other.entries.iter().map(|e| e.values()).collect();
        let grid = self.grid().clone();
        let values = (0..grid.len())
            .map(|p| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += a[i * n + j][p] * b[j * n + i][p];
                    }
                }
                s
            })
            .collect();
        ScalarField::from_values(&grid, values)
    }

    /// Largest pointwise Frobenius norm.
    pub fn max_frobenius(&self) -> f64 {
        let vals: Vec<&[f64]> = self.entries.iter().map(|e| e.values()).collect();
        (0..self.grid().len())
            .map(|p| vals.iter().map(|v| v[p] * v[p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest pointwise Frobenius distance to the identity.
    pub fn max_distance_to_identity(&self) -> f64 {
        let id = MatrixField::identity(self.grid());
        self.lin_comb(1.0, &id, -1.0).max_frobenius()
    }
}

/// Closed-form algebra on [`PointMatrix`] values of size 2 or 3.
pub mod point {
    use super::PointMatrix;

    pub fn identity(n: usize) -> PointMatrix {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate().take(n) {
            row[i] = 1.0;
        }
        m
    }

    pub fn det(n: usize, m: &PointMatrix) -> f64 {
        match n {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Transpose of the cofactor matrix.
    pub fn adjugate(n: usize, m: &PointMatrix) -> PointMatrix {
        let mut a = [[0.0; 3]; 3];
        match n {
            2 => {
                a[0][0] = m[1][1];
                a[0][1] = -m[0][1];
                a[1][0] = -m[1][0];
                a[1][1] = m[0][0];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor C_ji, minor with row j and column i removed
                        let r = [(j + 1) % 3, (j + 2) % 3];
                        let c = [(i + 1) % 3, (i + 2) % 3];
                        a[i][j] = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
                    }
                }
            }
        }
        a
    }

    pub fn inverse(n: usize, m: &PointMatrix) -> PointMatrix {
        let d = det(n, m);
        let mut a = adjugate(n, m);
        for row in a.iter_mut().take(n) {
            for v in row.iter_mut().take(n) {
                *v /= d;
            }
        }
        a
    }

    pub fn mul(n: usize, a: &PointMatrix, b: &PointMatrix) -> PointMatrix {
        let mut c = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    pub fn transpose(n: usize, a: &PointMatrix) -> PointMatrix {
        let mut t = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                t[i][j] = a[j][i];
            }
        }
        t
    }

    pub fn trace(n: usize, a: &PointMatrix) -> f64 {
        (0..n).map(|i| a[i][i]).sum()
    }

    pub fn add(n: usize, a: &PointMatrix, b: &PointMatrix, scale_b: f64) -> PointMatrix {
        let mut c = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                c[i][j] = a[i][j] + scale_b * b[i][j];
            }
        }
        c
    }

    pub fn frobenius(n: usize, a: &PointMatrix) -> f64 {
        let mut s = 0.0;
        for row in a.iter().take(n) {
            for v in row.iter().take(n) {
                s += v * v;
            }
        }
        s.sqrt()
    }

    pub fn apply(n: usize, a: &PointMatrix, x: &[f64; 3]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for i in 0..n {
            y[i] = (0..n).map(|k| a[i][k] * x[k]).sum();
        }
        y
    }
}
