//! Volume-preserving maps built by composing shears.
//!
//! A shear moves one coordinate by a periodic function of the others, so
//! its Jacobian is unit triangular and has determinant one. Compositions of
//! shears keep that property exactly, which makes them convenient test
//! flows for identities that need `det DX ≡ 1`.

use rand::Rng;

use crate::spectral::{point, Grid, PointMatrix, ScalarField, VectorField};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct ShearTerm {
    pub amplitude: f64,
    /// Lattice wave vector; its component along the shear axis is zero.
    pub wave: [i32; 3],
    pub phase: f64,
}

/// `y_axis += s · Σ a sin(k0 m·y + φ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shear {
    pub axis: usize,
    pub terms: Vec<ShearTerm>,
}

/// A composition of shears, scaled by a parameter `s`; `s = 0` is the
/// identity and `s = 1` the map itself.
#[derive(Clone, Debug, PartialEq)]
pub struct ShearMap {
    pub dim: usize,
    /// Fundamental wavenumber `2π/L`.
    pub k0: f64,
    pub shears: Vec<Shear>,
}

impl ShearMap {
    /// A random map with one shear per axis applied twice in cyclic order;
    /// each shear has up to three terms with wave numbers up to `max_wave`.
    pub fn random(grid: &Grid, amplitude: f64, max_wave: i32, rng: &mut impl Rng) -> Self {
        let dim = grid.dim();
        let mut shears = Vec::new();
        for round in 0..2 {
            for axis in 0..dim {
                let count = rng.random_range(1..=3);
                let terms = (0..count)
                    .map(|_| {
                        let mut wave = [0i32; 3];
                        loop {
                            for (d, w) in wave.iter_mut().enumerate().take(dim) {
                                *w = if d == axis {
                                    0
                                } else {
                                    rng.random_range(-max_wave..=max_wave)
                                };
                            }
                            if wave.iter().any(|&w| w != 0) {
                                break;
                            }
                        }
                        ShearTerm {
                            amplitude: amplitude * rng.random_range(0.3..1.0) / count as f64
                                / (1 + round) as f64,
                            wave,
                            phase: rng.random_range(0.0..std::f64::consts::TAU),
                        }
                    })
                    .collect();
                shears.push(Shear { axis, terms });
            }
        }
        ShearMap {
            dim,
            k0: grid.k0(),
            shears,
        }
    }

    /// A single shear `y_axis += Σ a sin(k0 m·y + φ)`.
    pub fn single(grid: &Grid, shear: Shear) -> Self {
        ShearMap {
            dim: grid.dim(),
            k0: grid.k0(),
            shears: vec![shear],
        }
    }

    /// `X_s(y)` and `∂_s X_s(y)`.
    pub fn apply_with_rate(&self, y: [f64; 3], s: f64) -> ([f64; 3], [f64; 3]) {
        let mut x = y;
        let mut dx = [0.0; 3];
        for sh in &self.shears {
            let mut f = 0.0;
            let mut grad_dot = 0.0;
            for t in &sh.terms {
                let arg: f64 = (0..self.dim).map(|d| self.k0 * t.wave[d] as f64 * x[d]).sum::<f64>() + t.phase;
                let (sn, cs) = arg.sin_cos();
                f += t.amplitude * sn;
                let dir: f64 = (0..self.dim).map(|d| self.k0 * t.wave[d] as f64 * dx[d]).sum();
                grad_dot += t.amplitude * cs * dir;
            }
            x[sh.axis] += s * f;
            dx[sh.axis] += f + s * grad_dot;
        }
        (x, dx)
    }

    pub fn apply(&self, y: [f64; 3], s: f64) -> [f64; 3] {
        self.apply_with_rate(y, s).0
    }

    /// `D_y X_s(y)` by the chain rule.
    pub fn jacobian_at(&self, y: [f64; 3], s: f64) -> PointMatrix {
        let n = self.dim;
        let mut x = y;
        let mut j = point::identity(n);
        for sh in &self.shears {
            let mut grad = [0.0; 3];
            let mut f = 0.0;
            for t in &sh.terms {
                let arg: f64 = (0..n).map(|d| self.k0 * t.wave[d] as f64 * x[d]).sum::<f64>() + t.phase;
                let (sn, cs) = arg.sin_cos();
                f += t.amplitude * sn;
                for (d, g) in grad.iter_mut().enumerate().take(n) {
                    *g += t.amplitude * cs * self.k0 * t.wave[d] as f64;
                }
            }
            let mut step = point::identity(n);
            for d in 0..n {
                step[sh.axis][d] += s * grad[d];
            }
            j = point::mul(n, &step, &j);
            x[sh.axis] += s * f;
        }
        j
    }

    /// Displacement `X_s(y) − y` on the grid.
    pub fn displacement(&self, grid: &Grid, s: f64) -> VectorField {
        VectorField::from_fn(grid, |y| {
            let x = self.apply(y, s);
            [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
        })
    }

    /// `∂_s X_s(y)` on the grid: the Lagrangian velocity of the flow
    /// `t ↦ X_t`.
    pub fn velocity(&self, grid: &Grid, s: f64) -> VectorField {
        VectorField::from_fn(grid, |y| self.apply_with_rate(y, s).1)
    }

    /// Lagrangian velocity samples of `t ↦ X_{λ t}` on `[0, T]`.
    pub fn velocity_trajectory(&self, grid: &Grid, rate: f64, dt: f64, steps: usize) -> Trajectory<VectorField> {
        Trajectory::from_fn(dt, steps, |t| self.velocity(grid, rate * t).scale(rate))
    }

    /// Largest sampled `|D X_s − Id|` (Frobenius).
    pub fn max_deviation(&self, grid: &Grid, s: f64) -> f64 {
        let n = self.dim;
        (0..grid.len())
            .map(|i| {
                let j = self.jacobian_at(grid.coords(i), s);
                point::frobenius(n, &point::add(n, &j, &point::identity(n), -1.0))
            })
            .fold(0.0, f64::max)
    }
}

/// A random real trigonometric polynomial with wave numbers up to
/// `max_wave` in each direction and zero mean.
pub fn random_band_limited(grid: &Grid, max_wave: i32, terms: usize, rng: &mut impl Rng) -> ScalarField {
    let dim = grid.dim();
    let k0 = grid.k0();
    let modes: Vec<([i32; 3], f64, f64)> = (0..terms)
        .map(|_| {
            let mut wave = [0i32; 3];
            while wave.iter().all(|&w| w == 0) {
                for w in wave.iter_mut().take(dim) {
                    *w = rng.random_range(-max_wave..=max_wave);
                }
            }
            (wave, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(w, a, ph)| {
                let arg: f64 = (0..dim).map(|d| k0 * w[d] as f64 * x[d]).sum();
                a * (arg + ph).sin()
            })
            .sum()
    })
}

pub fn random_band_limited_vector(
    grid: &Grid,
    max_wave: i32,
    terms: usize,
    rng: &mut impl Rng,
) -> VectorField {
    VectorField::new(
        (0..grid.dim())
            .map(|_| random_band_limited(grid, max_wave, terms, rng))
            .collect(),
    )
}
