use rustfft::num_complex::Complex64;

use super::field::{MatrixField, ScalarField, VectorField};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `∂_d f` by multiplication with `i k_d`.
pub fn partial(f: &ScalarField, d: usize) -> ScalarField {
    let k = f.grid().k_odd();
    f.apply_multiplier(|m| I * k[m][d])
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::new((0..f.grid().dim()).map(|d| partial(f, d)).collect())
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = v.grid();
    let k = grid.k_odd();
    let spectra: Vec<&[Complex64]> = v.components().iter().map(|c| c.spectrum()).collect();
    let out = (0..grid.len())
        .map(|m| {
            spectra
                .iter()
                .enumerate()
                .map(|(d, s)| I * k[m][d] * s[m])
                .sum()
        })
        .collect();
    ScalarField::from_spectrum(grid, out)
}

/// Entry `(i, j)` is `∂_j v^i`.
pub fn jacobian(v: &VectorField) -> MatrixField {
    let n = v.dim();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(partial(v.component(i), j));
        }
    }
    MatrixField::new(n, entries)
}

/// `∂_i ∂_j f`. Diagonal entries use the full wavenumber, off-diagonal
/// ones the odd-derivative wavenumbers.
pub fn second_partial(f: &ScalarField, i: usize, j: usize) -> ScalarField {
    let grid = f.grid();
    if i == j {
        let k0 = grid.k0();
        let modes = grid.modes();
        f.apply_multiplier(|m| {
            let k = k0 * modes[m][i] as f64;
            Complex64::new(-k * k, 0.0)
        })
    } else {
        let k = grid.k_odd();
        f.apply_multiplier(|m| Complex64::new(-k[m][i] * k[m][j], 0.0))
    }
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let ksq = f.grid().ksq();
    f.apply_multiplier(|m| Complex64::new(-ksq[m], 0.0))
}

pub fn vector_laplacian(v: &VectorField) -> VectorField {
    v.map_components(laplacian)
}

/// All second derivatives `∂_j ∂_k v^i` of a vector field, as one list.
pub fn hessian(v: &VectorField) -> Vec<ScalarField> {
    let n = v.dim();
    let mut out = Vec::with_capacity(n * n * n);
    for c in v.components() {
        for j in 0..n {
            for k in 0..n {
                out.push(second_partial(c, j, k));
            }
        }
    }
    out
}

/// Relative size of the zero mode against the field's L2 norm.
fn relative_mean(f: &ScalarField) -> f64 {
    let norm = lp_norm(f, 2.0);
    if norm == 0.0 {
        return 0.0;
    }
    f.mean().abs() * f.grid().volume().sqrt() / norm
}

/// Mean-zero solution of `Δg = f`.
pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let rel = relative_mean(f);
    if rel > 1e-10 {
        return Err(Error::NonZeroMean { mean: rel });
    }
    let ksq = f.grid().ksq();
    Ok(f.apply_multiplier(|m| {
        if ksq[m] == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(-1.0 / ksq[m], 0.0)
        }
    }))
}

/// `∇Δ⁻¹ g`, built from the odd-derivative symbol so that
/// `divergence(gradient_lift(g)) = g` on every mode a divergence can reach.
/// The zero mode of `g` is ignored.
pub fn gradient_lift(g: &ScalarField) -> VectorField {
    let grid = g.grid();
    let k = grid.k_odd();
    let ksq = grid.ksq_odd();
    let s = g.spectrum();
    VectorField::new(
        (0..grid.dim())
            .map(|d| {
                let out = (0..grid.len())
                    .map(|m| {
                        if ksq[m] == 0.0 {
                            Complex64::default()
                        } else {
                            -I * (k[m][d] / ksq[m]) * s[m]
                        }
                    })
                    .collect();
                ScalarField::from_spectrum(grid, out)
            })
            .collect(),
    )
}

/// Projection onto divergence-free fields, `v̂ ↦ (Id − k kᵀ/|k|²) v̂`.
pub fn leray_project(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let n = grid.dim();
    let k = grid.k_odd();
    let ksq = grid.ksq_odd();
    let spectra: Vec<&[Complex64]> = v.components().iter().map(|c| c.spectrum()).collect();
    let mut out = vec![vec![Complex64::default(); grid.len()]; n];
    for m in 0..grid.len() {
        let mut kv = Complex64::default();
        for d in 0..n {
            kv += k[m][d] * spectra[d][m];
        }
        for d in 0..n {
            out[d][m] = if ksq[m] == 0.0 {
                spectra[d][m]
            } else {
                spectra[d][m] - kv * (k[m][d] / ksq[m])
            };
        }
    }
    VectorField::new(
        out.into_iter()
            .map(|s| ScalarField::from_spectrum(grid, s))
            .collect(),
    )
}

/// The complementary gradient part, `v − leray_project(v)` with the mean
/// removed.
pub fn gradient_part(v: &VectorField) -> VectorField {
    let p = leray_project(v);
    let grid = v.grid();
    VectorField::new(
        v.components()
            .iter()
            .zip(p.components())
            .map(|(a, b)| {
                let mut s: Vec<Complex64> = a
                    .spectrum()
                    .iter()
                    .zip(b.spectrum())
                    .map(|(x, y)| x - y)
                    .collect();
                s[0] = Complex64::default();
                ScalarField::from_spectrum(grid, s)
            })
            .collect(),
    )
}

/// Anything whose pointwise magnitude is the Euclidean norm of a list of
/// scalar parts: scalars, vectors, and matrices (Frobenius).
pub trait Pointwise {
    fn parts(&self) -> Vec<&ScalarField>;
}

impl Pointwise for ScalarField {
    fn parts(&self) -> Vec<&ScalarField> {
        vec![self]
    }
}

impl Pointwise for VectorField {
    fn parts(&self) -> Vec<&ScalarField> {
        self.components().iter().collect()
    }
}

impl Pointwise for Vec<ScalarField> {
    fn parts(&self) -> Vec<&ScalarField> {
        self.iter().collect()
    }
}

impl Pointwise for MatrixField {
    fn parts(&self) -> Vec<&ScalarField> {
        self.entries().iter().collect()
    }
}

/// `L_p` norm by uniform-grid quadrature of the pointwise magnitude. `p = 2`
/// is evaluated through Parseval when spectra are cached; `p = ∞` is the
/// grid maximum.
pub fn lp_norm<F: Pointwise + ?Sized>(f: &F, p: f64) -> f64 {
    let parts = f.parts();
    let grid = parts[0].grid();
    if p.is_infinite() {
        let vals: Vec<&[f64]> = parts.iter().map(|c| c.values()).collect();
        return (0..grid.len())
            .map(|i| vals.iter().map(|v| v[i] * v[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
    }
    let cell = grid.spacing().powi(grid.dim() as i32);
    if p == 2.0 {
        if parts.iter().all(|c| c.has_spectrum()) {
            let total: f64 = parts
                .iter()
                .map(|c| c.spectrum().iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
            return (cell * total / grid.len() as f64).sqrt();
        }
        let total: f64 = parts
            .iter()
            .map(|c| c.values().iter().map(|v| v * v).sum::<f64>())
            .sum();
        return (cell * total).sqrt();
    }
    let vals: Vec<&[f64]> = parts.iter().map(|c| c.values()).collect();
    let total: f64 = (0..grid.len())
        .map(|i| {
            vals.iter()
                .map(|v| v[i] * v[i])
                .sum::<f64>()
                .sqrt()
                .powf(p)
        })
        .sum();
    (cell * total).powf(1.0 / p)
}
