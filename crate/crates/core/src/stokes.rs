//! The Stokes problem with prescribed divergence,
//!
//! ```text
//! ∂_t u − μ Δu + ∇P = f,   div u = g,   u(0) = u0,
//! ```
//!
//! solved by splitting `u = ∇Δ⁻¹ g + w` with `w` divergence free.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm_with, ep_norm_with, BesovIndex, Cutoff, EpNormReport};
use crate::error::{Error, Result};
use crate::spectral::{
    divergence, gradient, gradient_lift, gradient_part, leray_project, lp_norm, vector_laplacian,
    ScalarField, VectorField,
};
use crate::trajectory::{trapezoid, Pair, Trajectory};

/// Inputs of one Stokes solve. `f`, `g` and `r` share a uniform time grid
/// and `∂_t g = div r`.
#[derive(Clone, Debug)]
pub struct StokesData {
    pub u0: VectorField,
    pub f: Trajectory<VectorField>,
    pub g: Trajectory<ScalarField>,
    pub r: Trajectory<VectorField>,
    pub mu: f64,
}

/// Tolerance on `‖g(0) − div u0‖_{L2}`, relative to `max(1, ‖u0‖_{L2})`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;
/// Tolerance on the zero mode of `g`, relative to `max(‖g‖_{L2}, ‖u0‖_{L2})`.
pub const MEAN_TOLERANCE: f64 = 1e-8;

impl StokesData {
    /// Data with `f = g = r = 0` on `steps` steps of size `dt`.
    pub fn free(u0: VectorField, mu: f64, dt: f64, steps: usize) -> Self {
        let grid = u0.grid().clone();
        StokesData {
            f: Trajectory::new(dt, vec![VectorField::zeros(&grid); steps + 1]),
            g: Trajectory::new(dt, vec![ScalarField::zeros(&grid); steps + 1]),
            r: Trajectory::new(dt, vec![VectorField::zeros(&grid); steps + 1]),
            u0,
            mu,
        }
    }

    pub fn dt(&self) -> f64 {
        self.f.dt()
    }

    pub fn steps(&self) -> usize {
        self.f.steps()
    }

    /// Scales every datum by `a` (the solution map is linear).
    pub fn scaled(&self, a: f64) -> Self {
        StokesData {
            u0: self.u0.scale(a),
            f: self.f.scale(a),
            g: self.g.scale(a),
            r: self.r.scale(a),
            mu: self.mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "mu".into(),
                reason: "viscosity must be positive".into(),
            });
        }
        self.f.require(2)?;
        if self.g.len() != self.f.len() || self.r.len() != self.f.len() {
            return Err(Error::IncompatibleData(
                "f, g and R must share one time grid".into(),
            ));
        }
        let scale = lp_norm(&self.u0, 2.0).max(1.0);
        let mismatch = lp_norm(&(self.g.sample(0) - &divergence(&self.u0)), 2.0);
        if mismatch > COMPATIBILITY_TOLERANCE * scale {
            return Err(Error::IncompatibleData(format!(
                "g(0) - div u0 has L2 norm {mismatch:e}"
            )));
        }
        let u0_norm = lp_norm(&self.u0, 2.0);
        let volume = self.u0.grid().volume().sqrt();
        for (k, g) in self.g.samples().iter().enumerate() {
            let mean = g.mean().abs() * volume;
            let reference = lp_norm(g, 2.0).max(u0_norm);
            if mean > MEAN_TOLERANCE * reference && mean > 1e-300 {
                return Err(Error::IncompatibleData(format!(
                    "g at step {k} has nonzero mean ({mean:e} in L2)"
                )));
            }
        }
        Ok(())
    }

    /// `sup_k ‖(g_{k+1} − g_k)/Δt − div R(t_k + Δt/2)‖_{L2}`, with the
    /// midpoint value of `R` taken as the average of its neighbours.
    pub fn consistency_residual(&self) -> f64 {
        let dt = self.dt();
        (0..self.steps())
            .map(|k| {
                let dg = self.g.sample(k + 1).lin_comb(1.0 / dt, self.g.sample(k), -1.0 / dt);
                let rm = self.r.sample(k).lin_comb(0.5, self.r.sample(k + 1), 0.5);
                lp_norm(&(&dg - &divergence(&rm)), 2.0)
            })
            .fold(0.0, f64::max)
    }
}

/// `R = ∇Δ⁻¹ ∂_t g`, with `∂_t g` from second-order differences. This is a
/// derived convenience; callers that know an exact `R` should pass it.
pub fn canonical_r(g: &Trajectory<ScalarField>) -> Result<Trajectory<VectorField>> {
    Ok(g.time_derivative()?.map(gradient_lift))
}

/// Weights `(E, c0, c1)` of the exponential step for decay rate `lambda`:
/// `ŵ ← E ŵ + c0 F̂_k + c1 F̂_{k+1}` integrates `∂_t ŵ = −λ ŵ + F̂` exactly
/// when `F̂` is linear in time over the step.
fn exponential_weights(lambda: f64, h: f64) -> (f64, f64, f64) {
    let z = lambda * h;
    if z < 1e-3 {
        let e = (-z).exp();
        let c0 = h * (0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0);
        let c1 = h * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
        (e, c0, c1)
    } else {
        let e = (-z).exp();
        let c0 = h * (1.0 - e * (1.0 + z)) / (z * z);
        let c1 = h * (z - 1.0 + e) / (z * z);
        (e, c0, c1)
    }
}

/// Solves the Stokes problem on the time grid of `data`.
///
/// The divergence-free part evolves by an exponential integrator per
/// Fourier mode with linearly interpolated forcing; the pressure gradient
/// is diagnosed afterwards as the gradient part of `f − ∂_t u + μ Δu`.
pub fn solve_stokes(data: &StokesData) -> Result<Pair> {
    data.validate()?;
    Ok(solve_stokes_unchecked(data))
}

/// [`solve_stokes`] without validating the data.
pub fn solve_stokes_unchecked(data: &StokesData) -> Pair {
    let grid = data.u0.grid().clone();
    let dt = data.dt();
    let mu = data.mu;
    let ksq = grid.ksq();
    let weights: Vec<(f64, f64, f64)> = ksq
        .iter()
        .map(|&k2| exponential_weights(mu * k2, dt))
        .collect();

    let forcing: Vec<VectorField> = data.f.samples().iter().map(leray_project).collect();
    let mut w: Vec<Vec<Complex64>> = leray_project(&data.u0)
        .components()
        .iter()
        .map(|c| c.spectrum().to_vec())
        .collect();
    let mut velocity = Vec::with_capacity(data.f.len());
    let to_field = |w: &[Vec<Complex64>]| {
        VectorField::new(
            w.iter()
                .map(|s| ScalarField::from_spectrum(&grid, s.clone()))
                .collect(),
        )
    };
    velocity.push(&to_field(&w) + &gradient_lift(data.g.sample(0)));
    for k in 0..data.steps() {
        let f0 = &forcing[k];
        let f1 = &forcing[k + 1];
        for (d, wd) in w.iter_mut().enumerate() {
            let a = f0.component(d).spectrum();
            let b = f1.component(d).spectrum();
            for (m, slot) in wd.iter_mut().enumerate() {
                let (e, c0, c1) = weights[m];
                *slot = *slot * e + a[m] * c0 + b[m] * c1;
            }
        }
        velocity.push(&to_field(&w) + &gradient_lift(data.g.sample(k + 1)));
    }
    let velocity = Trajectory::new(dt, velocity);
    let dudt = velocity
        .time_derivative()
        .expect("at least two samples after validation");
    let pressure = velocity.map_indexed(|k, u| {
        let residual = data
            .f
            .sample(k)
            .lin_comb(1.0, dudt.sample(k), -1.0)
            .lin_comb(1.0, &vector_laplacian(u), mu);
        gradient_part(&residual)
    });
    Pair::new(velocity, pressure)
}

/// Terms of the maximal-regularity estimate and their ratio.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub solution: EpNormReport,
    /// `∫ ‖f‖`.
    pub forcing: f64,
    /// `μ ∫ ‖∇g‖`.
    pub divergence: f64,
    /// `∫ ‖R‖`.
    pub r_term: f64,
    /// `‖u0‖`.
    pub initial: f64,
    /// Solution norm over data norm.
    pub ratio: f64,
}

/// Ratio of `‖(u, ∇P)‖_{E_p}` to `∫(‖f‖ + μ‖∇g‖ + ‖R‖) + ‖u0‖`, all in
/// `Ḃ^{n/p−1}_{p,1}`.
pub fn verify_estimate(data: &StokesData, solution: &Pair, p: f64) -> Result<EstimateReport> {
    verify_estimate_with(data, solution, p, Cutoff::Sharp)
}

pub fn verify_estimate_with(
    data: &StokesData,
    solution: &Pair,
    p: f64,
    cutoff: Cutoff,
) -> Result<EstimateReport> {
    let n = data.u0.dim();
    let idx = BesovIndex::velocity(n, p);
    let dt = data.dt();
    let norm = |f: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..data.f.len()).map(f).collect();
        trapezoid(&v, dt)
    };
    let forcing = norm(&|k| besov_norm_with(data.f.sample(k), idx, cutoff).total);
    let divergence =
        data.mu * norm(&|k| besov_norm_with(&gradient(data.g.sample(k)), idx, cutoff).total);
    let r_term = norm(&|k| besov_norm_with(data.r.sample(k), idx, cutoff).total);
    let initial = besov_norm_with(&data.u0, idx, cutoff).total;
    let denominator = forcing + divergence + r_term + initial;
    if denominator == 0.0 {
        return Err(Error::ZeroData);
    }
    let solution = ep_norm_with(
        &solution.velocity,
        &solution.pressure_gradient,
        p,
        data.mu,
        cutoff,
    )?;
    Ok(EstimateReport {
        ratio: solution.total / denominator,
        solution,
        forcing,
        divergence,
        r_term,
        initial,
    })
}

/// Manufactured solutions for convergence studies.
pub mod manufactured {
    use super::*;
    use crate::spectral::Grid;

    /// `u*(t, x) = φ(t) · (∂_2 ψ, −∂_1 ψ)` with
    /// `ψ = sin(x1) sin(2 x2) + 0.5 cos(2 x1 + x2)` and `φ(t) = 1 + sin(3t)/2`,
    /// together with `∇P*`, `P* = sin(t) cos(x1 + x2)`, in two dimensions.
    pub struct Manufactured {
        pub grid: Grid,
        pub mu: f64,
    }

    impl Manufactured {
        pub fn new(grid: &Grid, mu: f64) -> Self {
            assert_eq!(grid.dim(), 2, "manufactured solution is two-dimensional");
            Manufactured {
                grid: grid.clone(),
                mu,
            }
        }

        fn phi(t: f64) -> (f64, f64) {
            (1.0 + 0.5 * (3.0 * t).sin(), 1.5 * (3.0 * t).cos())
        }

        /// Spatial profile `curl ψ` and its Laplacian.
        fn profile(x: [f64; 3]) -> ([f64; 2], [f64; 2]) {
            let (a, b) = (x[0], x[1]);
            // ψ = sin a sin 2b + ½ cos(2a + b)
            let psi_b = 2.0 * a.sin() * (2.0 * b).cos() - 0.5 * (2.0 * a + b).sin();
            let psi_a = a.cos() * (2.0 * b).sin() - (2.0 * a + b).sin();
            let u = [psi_b, -psi_a];
            // Each term of ψ is an eigenfunction: −Δ = 5 for both.
            let lap = [-5.0 * u[0], -5.0 * u[1]];
            (u, lap)
        }

        pub fn velocity(&self, t: f64) -> VectorField {
            let (p, _) = Self::phi(t);
            VectorField::from_fn(&self.grid, |x| {
                let (u, _) = Self::profile(x);
                [p * u[0], p * u[1], 0.0]
            })
        }

        pub fn pressure_gradient(&self, t: f64) -> VectorField {
            let s = t.sin();
            VectorField::from_fn(&self.grid, |x| {
                let g = -s * (x[0] + x[1]).sin();
                [g, g, 0.0]
            })
        }

        pub fn forcing(&self, t: f64) -> VectorField {
            let (p, dp) = Self::phi(t);
            let s = t.sin();
            let mu = self.mu;
            VectorField::from_fn(&self.grid, |x| {
                let (u, lap) = Self::profile(x);
                let gp = -s * (x[0] + x[1]).sin();
                [
                    dp * u[0] - mu * p * lap[0] + gp,
                    dp * u[1] - mu * p * lap[1] + gp,
                    0.0,
                ]
            })
        }

        pub fn data(&self, dt: f64, steps: usize) -> StokesData {
            let g = ScalarField::zeros(&self.grid);
            let z = VectorField::zeros(&self.grid);
            StokesData {
                u0: self.velocity(0.0),
                f: Trajectory::from_fn(dt, steps, |t| self.forcing(t)),
                g: Trajectory::new(dt, vec![g; steps + 1]),
                r: Trajectory::new(dt, vec![z; steps + 1]),
                mu: self.mu,
            }
        }

        /// `max_k ‖u_k − u*(t_k)‖_{L2}`.
        pub fn velocity_error(&self, solution: &Pair) -> f64 {
            solution
                .velocity
                .samples()
                .iter()
                .enumerate()
                .map(|(k, u)| lp_norm(&(u - &self.velocity(solution.velocity.time(k))), 2.0))
                .fold(0.0, f64::max)
        }
    }
}
