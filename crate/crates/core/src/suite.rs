//! Seeded datum suites shared by the tests, the acceptance run and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::besov::{besov, BesovIndex, Cutoff};
use crate::error::{Error, Result};
use crate::flow::shear::{random_band_limited, random_band_limited_vector};
use crate::lagrangian::ProblemData;
use crate::spectral::{leray_project, Grid, ScalarField, VectorField};
use crate::stokes::{canonical_r, solve_stokes, verify_estimate, StokesData};
use crate::trajectory::Trajectory;

fn rng_for(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

fn shear_mode(grid: &Grid, k: f64) -> VectorField {
    VectorField::from_fn(grid, |x| [(k * grid.k0() * x[1]).sin(), 0.0, 0.0])
}

/// Stokes data probing the estimate: single heat modes on three shells,
/// a time-dependent force, a divergence datum with its canonical `R`, and a
/// mix of all three. Wave numbers stay below 4 so the suite is resolved
/// identically on every grid with `N >= 16`.
pub fn stokes_estimate_suite(grid: &Grid, mu: f64, dt: f64, steps: usize, seed: u64) -> Vec<StokesData> {
    let mut out: Vec<StokesData> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&k| StokesData::free(shear_mode(grid, k), mu, dt, steps))
        .collect();
    let mut rng = rng_for(seed, 0);
    let force = random_band_limited_vector(grid, 3, 4, &mut rng);
    let forced = StokesData {
        u0: VectorField::zeros(grid),
        f: Trajectory::from_fn(dt, steps, |t| force.scale(1.0 + 0.5 * (3.0 * t).sin())),
        g: Trajectory::from_fn(dt, steps, |_| ScalarField::zeros(grid)),
        r: Trajectory::from_fn(dt, steps, |_| VectorField::zeros(grid)),
        mu,
    };
    let h = random_band_limited(grid, 3, 4, &mut rng);
    let end = dt * steps as f64;
    let g = Trajectory::from_fn(dt, steps, |t| h.scale((std::f64::consts::PI * t / end).sin()));
    let r = canonical_r(&g).expect("mean-free divergence datum");
    let divergent = StokesData {
        u0: VectorField::zeros(grid),
        f: Trajectory::from_fn(dt, steps, |_| VectorField::zeros(grid)),
        g,
        r,
        mu,
    };
    let u0 = leray_project(&random_band_limited_vector(grid, 3, 4, &mut rng));
    let mixed = StokesData {
        u0: u0.clone(),
        f: forced.f.scale(0.5),
        g: divergent.g.clone(),
        r: divergent.r.clone(),
        mu,
    };
    out.push(forced);
    out.push(divergent);
    out.push(mixed);
    out
}

/// Largest estimate ratio over [`stokes_estimate_suite`] on `[0, 1]`.
pub fn measured_stokes_constant(grid: &Grid, mu: f64, p: f64, steps: usize, seed: u64) -> Result<f64> {
    let dt = 1.0 / steps as f64;
    let mut worst: f64 = 0.0;
    for data in stokes_estimate_suite(grid, mu, dt, steps, seed) {
        let sol = solve_stokes(&data)?;
        worst = worst.max(verify_estimate(&data, &sol, p)?.ratio);
    }
    Ok(worst)
}

/// Time grid, viscosity and integrability of a suite of problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteShape {
    pub mu: f64,
    pub p: f64,
    pub dt: f64,
    pub steps: usize,
}

/// Small data: `ρ0 − 1` a smooth band-limited field with sup norm in
/// `[0.003, 0.012]`, `u0` a divergence-free band-limited field with
/// `‖u0‖_{Ḃ^{n/p−1}_{p,1}} / μ` in `[0.002, 0.008]`. Member `i` depends only
/// on `(seed, i)`.
pub fn small_data_suite(grid: &Grid, shape: SuiteShape, count: usize, seed: u64) -> Result<Vec<ProblemData>> {
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, i + 1);
            let rho_target = rng.random_range(0.003..0.012);
            let u_target = rng.random_range(0.002..0.008);
            let dev = random_band_limited(grid, 2, 3, &mut rng);
            let rho0 = dev.scale(rho_target / dev.max_abs()).map(|d| 1.0 + d);
            let raw = leray_project(&random_band_limited_vector(grid, 3, 4, &mut rng));
            let norm = besov(&raw, BesovIndex::velocity(grid.dim(), shape.p), Cutoff::Sharp);
            if norm == 0.0 {
                return Err(Error::ZeroData);
            }
            let u0 = raw.scale(u_target * shape.mu / norm);
            ProblemData::new(rho0, u0, shape.mu, shape.p, shape.dt, shape.steps)
        })
        .collect()
}
