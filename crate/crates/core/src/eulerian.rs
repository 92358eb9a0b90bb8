//! Eulerian variables from Lagrangian solutions, residual checks of the
//! Eulerian equations, an independent reference solver, and the
//! density-jump experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{multiplier_norm_lower_bound, BesovIndex};
use crate::error::{Error, Result};
use crate::flow::{self, compose_many};
use crate::lagrangian::{solve_global_small, IterationDiagnostics, ProblemData, Settings};
use crate::spectral::{
    gradient, jacobian, laplacian, leray_project, lp_norm, point, Grid, MatrixField,
    OffGridEvaluator, ScalarField, VectorField,
};
use crate::trajectory::Pair;

/// Largest `‖ρ0 − 1‖_∞` accepted by the reference solver.
pub const REFERENCE_CONTRAST_LIMIT: f64 = 0.2;

/// Density, velocity and pressure gradient at one time.
#[derive(Clone, Debug)]
pub struct EulerianSnapshot {
    pub time: f64,
    pub rho: ScalarField,
    pub u: VectorField,
    pub grad_p: VectorField,
}

impl EulerianSnapshot {
    /// `‖div u‖_{L2} / ‖∇u‖_{L2}`.
    pub fn divergence_ratio(&self) -> f64 {
        let div = lp_norm(&crate::spectral::divergence(&self.u), 2.0);
        let grad = lp_norm(&jacobian(&self.u), 2.0);
        if grad == 0.0 {
            div
        } else {
            div / grad
        }
    }
}

/// The Eulerian fields at one sample of a Lagrangian trajectory, given the
/// inverse-flow displacement at that time.
fn snapshot_at(
    solution: &Pair,
    rho0: &ScalarField,
    flow_state: &flow::FlowState,
    k: usize,
    inverse: &VectorField,
) -> Result<EulerianSnapshot> {
    let ubar = solution.velocity.sample(k);
    let pulled = flow_state.inverse.transpose().apply(solution.pressure_gradient.sample(k));
    let mut fields: Vec<&ScalarField> = vec![rho0];
    fields.extend(ubar.components());
    fields.extend(pulled.components());
    let mut out = compose_many(&fields, inverse)?.into_iter();
    let rho = out.next().expect("density");
    let n = ubar.dim();
    let u = VectorField::new(out.by_ref().take(n).collect());
    let grad_p = VectorField::new(out.take(n).collect());
    Ok(EulerianSnapshot {
        time: solution.velocity.time(k),
        rho,
        u,
        grad_p,
    })
}

/// Eulerian snapshots at the given sample indices (increasing).
pub fn to_eulerian_at(solution: &Pair, rho0: &ScalarField, indices: &[usize]) -> Result<Vec<EulerianSnapshot>> {
    let vel = &solution.velocity;
    let times: Vec<f64> = indices.iter().map(|&k| vel.time(k)).collect();
    let inverses = flow::inverse_flow_series(vel, &times)?;
    let series = flow::displacement_series(vel);
    indices
        .iter()
        .zip(&inverses)
        .map(|(&k, y)| {
            let state = flow::FlowState::from_displacement(vel.time(k), series.sample(k).clone())?;
            snapshot_at(solution, rho0, &state, k, y)
        })
        .collect()
}

/// `ρ = ρ0 ∘ Y`, `u = ū ∘ Y` and `∇P = (ᵀA ∇P̄) ∘ Y` at every sample.
pub fn to_eulerian(solution: &Pair, rho0: &ScalarField) -> Result<Vec<EulerianSnapshot>> {
    let indices: Vec<usize> = (0..solution.velocity.len()).collect();
    to_eulerian_at(solution, rho0, &indices)
}

/// Eulerian velocity gradient `(∂_j u^i) = (Dū · A) ∘ Y` at sample `k`.
pub fn eulerian_velocity_gradient(solution: &Pair, k: usize) -> Result<MatrixField> {
    let vel = &solution.velocity;
    let state = flow::flow_from_lagrangian_velocity(vel, vel.time(k))?;
    let inverse = flow::inverse_flow(vel, vel.time(k))?;
    let lag = jacobian(vel.sample(k)).matmul(&state.inverse);
    let n = lag.dim();
    let fields: Vec<&ScalarField> = lag.entries().iter().collect();
    Ok(MatrixField::new(n, compose_many(&fields, &inverse)?))
}

/// Relative residuals of the Eulerian equations at one interior time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub time: f64,
    /// `‖∂_t ρ + u·∇ρ‖ / max(‖∂_t ρ‖, ‖u·∇ρ‖)`.
    pub mass: f64,
    /// `‖ρ(∂_t u + u·∇u) − μΔu + ∇P‖` over the largest of its terms.
    pub momentum: f64,
    /// `‖div u‖ / ‖∇u‖`.
    pub divergence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NseResidual {
    pub rows: Vec<ResidualRow>,
}

impl NseResidual {
    pub fn max(&self) -> ResidualRow {
        let mut m = ResidualRow {
            time: f64::NAN,
            mass: 0.0,
            momentum: 0.0,
            divergence: 0.0,
        };
        for r in &self.rows {
            m.mass = m.mass.max(r.mass);
            m.momentum = m.momentum.max(r.momentum);
            m.divergence = m.divergence.max(r.divergence);
        }
        m
    }
}

fn relative(residual: f64, scales: &[f64], floor: f64) -> f64 {
    let scale = scales.iter().cloned().fold(0.0, f64::max);
    if scale <= floor {
        0.0
    } else {
        residual / scale
    }
}

fn advect(u: &VectorField, f: &ScalarField) -> ScalarField {
    let g = gradient(f);
    let mut acc = ScalarField::zeros(f.grid());
    for d in 0..u.dim() {
        acc = acc.lin_comb(1.0, &u.component(d).pointwise_mul(g.component(d)), 1.0);
    }
    acc
}

fn advect_vector(u: &VectorField, v: &VectorField) -> VectorField {
    VectorField::new(v.components().iter().map(|c| advect(u, c)).collect())
}

/// Residuals at every interior snapshot by centred differences in time.
/// Snapshots must be equally spaced.
pub fn nse_residual(snaps: &[EulerianSnapshot], mu: f64) -> Result<NseResidual> {
    if snaps.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            got: snaps.len(),
        });
    }
    let mut rows = Vec::with_capacity(snaps.len() - 2);
    for w in snaps.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let h = c.time - a.time;
        let drho = c.rho.lin_comb(1.0 / h, &a.rho, -1.0 / h);
        let transport = advect(&b.u, &b.rho);
        let floor = 1e-13 * lp_norm(&b.rho, 2.0);
        let mass = relative(
            lp_norm(&drho.lin_comb(1.0, &transport, 1.0), 2.0),
            &[lp_norm(&drho, 2.0), lp_norm(&transport, 2.0)],
            floor,
        );
        let dudt = c.u.lin_comb(1.0 / h, &a.u, -1.0 / h).mul_scalar(&b.rho);
        let convect = advect_vector(&b.u, &b.u).mul_scalar(&b.rho);
        let visc = VectorField::new(b.u.components().iter().map(laplacian).collect()).scale(mu);
        let res = dudt
            .lin_comb(1.0, &convect, 1.0)
            .lin_comb(1.0, &visc, -1.0)
            .lin_comb(1.0, &b.grad_p, 1.0);
        let momentum = relative(
            lp_norm(&res, 2.0),
            &[
                lp_norm(&dudt, 2.0),
                lp_norm(&convect, 2.0),
                lp_norm(&visc, 2.0),
                lp_norm(&b.grad_p, 2.0),
            ],
            1e-300,
        );
        rows.push(ResidualRow {
            time: b.time,
            mass,
            momentum,
            divergence: b.divergence_ratio(),
        });
    }
    Ok(NseResidual { rows })
}

/// First-order reference scheme, structurally unrelated to the Lagrangian
/// solver: semi-Lagrangian density transport, explicit advection, implicit
/// viscosity with a constant-density projection, then one sweep correcting
/// for `1/ρ`. Returns a snapshot every `save_every` steps (and the last).
pub fn reference_eulerian_solve_sampled(
    rho0: &ScalarField,
    u0: &VectorField,
    mu: f64,
    t_end: f64,
    dt: f64,
    save_every: usize,
) -> Result<Vec<EulerianSnapshot>> {
    let contrast = rho0.map(|r| r - 1.0).max_abs();
    if contrast > REFERENCE_CONTRAST_LIMIT {
        return Err(Error::DensityContrastTooLarge {
            contrast,
            limit: REFERENCE_CONTRAST_LIMIT,
        });
    }
    if !(dt > 0.0) || save_every == 0 {
        return Err(Error::InvalidConfig {
            key: "dt".into(),
            reason: "need a positive step and a positive save stride".into(),
        });
    }
    let grid = u0.grid().clone();
    let steps = (t_end / dt).round() as usize;
    let ksq = grid.ksq();
    let mut rho = rho0.clone();
    let mut u = leray_project(u0);
    let mut grad_p = VectorField::zeros(&grid);
    let mut out = vec![EulerianSnapshot {
        time: 0.0,
        rho: rho.clone(),
        u: u.clone(),
        grad_p: grad_p.clone(),
    }];
    let points: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    for step in 1..=steps {
        // Density: ρ^{n+1}(x) = ρ^n(x − Δt u^n(x)).
        let moving = u.max_abs() > 0.0;
        let next_rho = if moving {
            let eval = OffGridEvaluator::new(&[&rho]);
            let departures: Vec<[f64; 3]> = points
                .par_iter()
                .enumerate()
                .map(|(i, x)| {
                    let mut y = *x;
                    for d in 0..grid.dim() {
                        y[d] -= dt * u.component(d).values()[i];
                    }
                    y
                })
                .collect();
            ScalarField::from_values(&grid, eval.eval_many(&departures).pop().expect("one field"))
        } else {
            rho.clone()
        };
        // Constant-density step.
        let explicit = u.lin_comb(1.0, &advect_vector(&u, &u).dealiased(), -dt);
        let implicit = explicit.map_components(|c| {
            c.apply_multiplier(|i| (1.0 / (1.0 + mu * dt * ksq[i])).into())
        });
        let u1 = leray_project(&implicit);
        let gp1 = implicit.lin_comb(1.0 / dt, &u1, -1.0 / dt);
        // Correction for 1/ρ − 1 in front of the viscous and pressure forces.
        let sigma = rho.map(|r| 1.0 / r - 1.0);
        let visc = VectorField::new(u1.components().iter().map(laplacian).collect());
        let force = visc.lin_comb(mu, &gp1, -1.0).mul_scalar(&sigma);
        let corrected = u1.lin_comb(1.0, &force, dt);
        let next_u = leray_project(&corrected);
        grad_p = gp1.lin_comb(1.0, &corrected.lin_comb(1.0 / dt, &next_u, -1.0 / dt), 1.0);
        u = next_u;
        rho = next_rho;
        if step % save_every == 0 || step == steps {
            out.push(EulerianSnapshot {
                time: step as f64 * dt,
                rho: rho.clone(),
                u: u.clone(),
                grad_p: grad_p.clone(),
            });
        }
    }
    Ok(out)
}

/// [`reference_eulerian_solve_sampled`] keeping every step.
pub fn reference_eulerian_solve(
    rho0: &ScalarField,
    u0: &VectorField,
    mu: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<EulerianSnapshot>> {
    reference_eulerian_solve_sampled(rho0, u0, mu, t_end, dt, 1)
}

/// Taylor–Green vortex `(sin x cos y, −cos x sin y) e^{−2μt}` scaled by
/// `amplitude` on a 2π-periodic grid, with its pressure gradient.
pub fn taylor_green(grid: &Grid, amplitude: f64, mu: f64, t: f64) -> (VectorField, VectorField) {
    let k = grid.k0();
    let decay = amplitude * (-2.0 * mu * k * k * t).exp();
    let u = VectorField::from_fn(grid, |x| {
        [
            decay * (k * x[0]).sin() * (k * x[1]).cos(),
            -decay * (k * x[0]).cos() * (k * x[1]).sin(),
            0.0,
        ]
    });
    // P = (cos 2kx + cos 2ky) decay² / 4.
    let q = decay * decay / 4.0;
    let grad_p = VectorField::from_fn(grid, |x| {
        [
            -2.0 * k * q * (2.0 * k * x[0]).sin(),
            -2.0 * k * q * (2.0 * k * x[1]).sin(),
            0.0,
        ]
    });
    (u, grad_p)
}

/// Disc `|x − center| < radius` (minimum-image distance on the torus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disc {
    fn signed_distance(&self, grid: &Grid, x: [f64; 3]) -> f64 {
        let l = grid.length();
        let mut r2 = 0.0;
        for d in 0..2 {
            let mut dx = x[d] - self.center[d];
            dx -= l * (dx / l).round();
            r2 += dx * dx;
        }
        r2.sqrt() - self.radius
    }

    /// Sharp indicator on the grid.
    pub fn indicator(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            if self.signed_distance(grid, x) < 0.0 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Indicator convolved with a Gaussian of standard deviation `width`
    /// (exact for a half plane): `½ erfc(d / (√2 width))`.
    pub fn mollified(&self, grid: &Grid, width: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            0.5 * libm::erfc(self.signed_distance(grid, x) / (std::f64::consts::SQRT_2 * width))
        })
    }

    /// `count` equally spaced boundary points.
    pub fn markers(&self, count: usize) -> Vec<[f64; 2]> {
        (0..count)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / count as f64;
                [
                    self.center[0] + self.radius * th.cos(),
                    self.center[1] + self.radius * th.sin(),
                ]
            })
            .collect()
    }
}

/// Shoelace area of a closed polygon.
pub fn polygon_area(points: &[[f64; 2]]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

/// Curvature of the circle through each marker and its two neighbours.
pub fn discrete_curvature(points: &[[f64; 2]]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = points[(i + n - 1) % n];
            let b = points[i];
            let c = points[(i + 1) % n];
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            2.0 * cross / (dist(a, b) * dist(b, c) * dist(a, c))
        })
        .collect()
}

/// Parameters of the density-jump experiment.
#[derive(Clone, Debug)]
pub struct JumpConfig {
    pub disc: Disc,
    pub sigma: f64,
    /// Mollification width in grid spacings.
    pub width_cells: f64,
    pub markers: usize,
    pub u0: VectorField,
    pub mu: f64,
    pub p: f64,
    pub dt: f64,
    pub steps: usize,
    pub settings: Settings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpReport {
    pub times: Vec<f64>,
    /// `|Ω_t| / |Ω_0| − 1` from the marker polygon.
    pub area_drift: Vec<f64>,
    /// Largest relative change of the discrete boundary curvature.
    pub curvature_change: Vec<f64>,
    pub max_area_drift: f64,
    /// Multiplier-norm lower bound of `σ χ_Ω` (sharp indicator).
    pub multiplier_bound: f64,
    pub mollification_width: f64,
    /// Marker polygon at a few times (start, quarters, end).
    pub frames: Vec<BoundaryFrame>,
    pub diagnostics: Option<IterationDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub time: f64,
    pub points: Vec<[f64; 2]>,
}

const FRAMES: usize = 4;

/// Solves with `ρ0 = 1 + σ χ_Ω` (mollified) and tracks `Ω_t = X_u(t, Ω_0)`
/// with boundary markers moved by RK4 through the Eulerian velocity.
pub fn density_jump_experiment(config: &JumpConfig) -> Result<JumpReport> {
    let grid = config.u0.grid().clone();
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if config.p <= (grid.dim() - 1) as f64 {
        return Err(Error::InvalidConfig {
            key: "p".into(),
            reason: "the jump experiment needs p > n - 1".into(),
        });
    }
    let width = config.width_cells * grid.spacing();
    let sharp = config.disc.indicator(&grid).scale(config.sigma);
    let multiplier_bound = if config.sigma == 0.0 {
        0.0
    } else {
        multiplier_norm_lower_bound(
            &sharp,
            BesovIndex::velocity(2, config.p),
            config.settings.multiplier_trials,
            config.settings.seed,
        )
    };
    let rho0 = config.disc.mollified(&grid, width).map(|c| 1.0 + config.sigma * c);
    let data = ProblemData::new(rho0.clone(), config.u0.clone(), config.mu, config.p, config.dt, config.steps)?;
    let times: Vec<f64> = (0..=config.steps).map(|k| k as f64 * config.dt).collect();
    let mut markers = config.disc.markers(config.markers);
    let area0 = polygon_area(&markers);
    let kappa0 = discrete_curvature(&markers);
    let track = |m: &[[f64; 2]]| {
        let drift = polygon_area(m) / area0 - 1.0;
        let kappa = discrete_curvature(m);
        let change = kappa
            .iter()
            .zip(&kappa0)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        (drift, change)
    };
    if config.u0.max_abs() == 0.0 {
        let (d, c) = track(&markers);
        return Ok(JumpReport {
            area_drift: vec![d; times.len()],
            curvature_change: vec![c; times.len()],
            times,
            max_area_drift: d.abs(),
            multiplier_bound,
            mollification_width: width,
            frames: vec![
                BoundaryFrame { time: 0.0, points: markers.clone() },
                BoundaryFrame { time: config.steps as f64 * config.dt, points: markers },
            ],
            diagnostics: None,
        });
    }
    let (solution, diagnostics) = solve_global_small(&data, &config.settings)?;
    let snaps = to_eulerian(&solution, &rho0)?;
    let evaluators: Vec<OffGridEvaluator> = snaps
        .iter()
        .map(|s| OffGridEvaluator::new(&[s.u.component(0), s.u.component(1)]))
        .collect();
    let velocity_at = |k: usize, theta: f64, pts: &[[f64; 2]]| -> Vec<[f64; 2]> {
        pts.par_iter()
            .map(|p| {
                let x = [p[0], p[1], 0.0];
                let a = evaluators[k].eval(x);
                if theta == 0.0 {
                    return [a[0], a[1]];
                }
                let b = evaluators[k + 1].eval(x);
                [
                    (1.0 - theta) * a[0] + theta * b[0],
                    (1.0 - theta) * a[1] + theta * b[1],
                ]
            })
            .collect()
    };
    let step = |pts: &[[f64; 2]], h: f64, k: &[[f64; 2]]| -> Vec<[f64; 2]> {
        pts.iter()
            .zip(k)
            .map(|(p, v)| [p[0] + h * v[0], p[1] + h * v[1]])
            .collect()
    };
    let mut area_drift = Vec::with_capacity(times.len());
    let mut curvature_change = Vec::with_capacity(times.len());
    let (d, c) = track(&markers);
    area_drift.push(d);
    curvature_change.push(c);
    let h = config.dt;
    let stride = config.steps.div_ceil(FRAMES).max(1);
    let mut frames = vec![BoundaryFrame { time: 0.0, points: markers.clone() }];
    for k in 0..config.steps {
        let k1 = velocity_at(k, 0.0, &markers);
        let k2 = velocity_at(k, 0.5, &step(&markers, 0.5 * h, &k1));
        let k3 = velocity_at(k, 0.5, &step(&markers, 0.5 * h, &k2));
        let k4 = velocity_at(k + 1, 0.0, &step(&markers, h, &k3));
        for (i, m) in markers.iter_mut().enumerate() {
            for d in 0..2 {
                m[d] += h / 6.0 * (k1[i][d] + 2.0 * k2[i][d] + 2.0 * k3[i][d] + k4[i][d]);
            }
        }
        let (d, c) = track(&markers);
        area_drift.push(d);
        curvature_change.push(c);
        if (k + 1) % stride == 0 || k + 1 == config.steps {
            frames.push(BoundaryFrame { time: times[k + 1], points: markers.clone() });
        }
    }
    let max_area_drift = area_drift.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
    Ok(JumpReport {
        times,
        area_drift,
        curvature_change,
        max_area_drift,
        multiplier_bound,
        mollification_width: width,
        frames,
        diagnostics: Some(diagnostics),
    })
}

/// Pointwise `max |a − b|` between two matrix fields (Frobenius).
pub fn max_matrix_distance(a: &MatrixField, b: &MatrixField) -> f64 {
    let n = a.dim();
    a.lin_comb(1.0, b, -1.0)
        .map_to_scalar(|m| point::frobenius(n, m))
        .max_abs()
}
