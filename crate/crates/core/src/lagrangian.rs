//! Fixed-point construction of solutions in Lagrangian coordinates.
//!
//! For a given Lagrangian velocity `v̄` with flow `X_v` and `A = (DX_v)⁻¹`,
//! the linear map `Ψ` sends a candidate `(w̄, ∇Q̄)` to the solution of the
//! Stokes problem with
//!
//! ```text
//! f = (1 − ρ0) ∂_t w̄ + μ div((A ᵀA − Id) ∇w̄) + (Id − ᵀA) ∇Q̄,
//! g = Dw̄ : (Id − A),      R = (Id − A) ∂_t w̄ − ∂_t A w̄.
//! ```
//!
//! Its fixed point is `Φ(v̄)`; the fixed point of `Φ` solves the nonlinear
//! system. Every product is dealiased by the 2/3 rule.

use serde::{Deserialize, Serialize};

use crate::besov::{
    besov, ep_norm_with, multiplier_norm_lower_bound, BesovIndex, Cutoff, EpNormReport,
};
use crate::error::{Error, Result};
use crate::flow::{self, FlowState};
use crate::spectral::{
    divergence, gradient, jacobian, point, MatrixField, ScalarField, VectorField,
};
use crate::stokes::{solve_stokes, StokesData};
use crate::trajectory::{trapezoid, Pair, Trajectory};

/// Default smallness constant `c`.
pub const DEFAULT_SMALLNESS: f64 = 0.05;

/// Default Stokes constant `C`: the largest estimate ratio measured by
/// [`crate::suite::measured_stokes_constant`] is about 3.006 on every grid
/// from `N = 32` up, rounded up here.
pub const DEFAULT_STOKES_CONSTANT: f64 = 3.1;

/// Density, initial velocity and discretization of one problem.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub rho0: ScalarField,
    pub u0: VectorField,
    pub mu: f64,
    pub p: f64,
    pub dt: f64,
    pub steps: usize,
}

impl ProblemData {
    pub fn new(rho0: ScalarField, u0: VectorField, mu: f64, p: f64, dt: f64, steps: usize) -> Result<Self> {
        rho0.same_grid(u0.component(0))?;
        let dim = u0.dim();
        BesovIndex::velocity(dim, p).check_product_range(dim)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "mu".into(),
                reason: "viscosity must be positive".into(),
            });
        }
        if !(dt > 0.0) || steps == 0 {
            return Err(Error::InvalidConfig {
                key: "dt".into(),
                reason: "need a positive step and at least one step".into(),
            });
        }
        let norm = crate::spectral::lp_norm(&u0, 2.0);
        let div = crate::spectral::lp_norm(&divergence(&u0), 2.0);
        if div > 1e-8 * norm.max(f64::MIN_POSITIVE) && div > 1e-14 {
            return Err(Error::IncompatibleData(format!(
                "initial velocity is not divergence free (|div u0| = {div:e})"
            )));
        }
        Ok(ProblemData {
            rho0,
            u0,
            mu,
            p,
            dt,
            steps,
        })
    }

    pub fn grid(&self) -> &crate::spectral::Grid {
        self.u0.grid()
    }

    pub fn dim(&self) -> usize {
        self.u0.dim()
    }

    pub fn end_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn velocity_index(&self) -> BesovIndex {
        BesovIndex::velocity(self.dim(), self.p)
    }

    pub fn algebra_index(&self) -> BesovIndex {
        BesovIndex::algebra(self.dim(), self.p)
    }

    /// Same data on a different time horizon.
    pub fn with_steps(&self, steps: usize) -> Self {
        ProblemData {
            steps,
            ..self.clone()
        }
    }

    pub fn with_u0(&self, u0: VectorField) -> Self {
        ProblemData {
            u0,
            ..self.clone()
        }
    }

    /// The two data smallness measures: `m_ρ`, a multiplier-norm lower bound
    /// of `ρ0 − 1`, and `m_u = ‖u0‖ / μ`.
    pub fn smallness(&self, settings: &Settings) -> DataSmallness {
        let dev = self.rho0.map(|r| r - 1.0);
        let m_rho = if dev.max_abs() == 0.0 {
            0.0
        } else {
            multiplier_norm_lower_bound(
                &dev,
                self.velocity_index(),
                settings.multiplier_trials,
                settings.seed,
            )
        };
        let u0_norm = besov(&self.u0, self.velocity_index(), settings.cutoff);
        DataSmallness {
            m_rho,
            u0_norm,
            m_u: u0_norm / self.mu,
            rho: Margin::new(m_rho, settings.c),
            u0: Margin::new(2.0 * settings.big_c * u0_norm, settings.c * self.mu),
        }
    }
}

/// A measured quantity against its limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub measured: f64,
    pub limit: f64,
    pub ok: bool,
}

impl Margin {
    pub fn new(measured: f64, limit: f64) -> Self {
        Margin {
            measured,
            limit,
            ok: measured <= limit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSmallness {
    pub m_rho: f64,
    /// `‖u0‖_{Ḃ^{n/p−1}_{p,1}}`.
    pub u0_norm: f64,
    pub m_u: f64,
    /// `m_ρ <= c`.
    pub rho: Margin,
    /// `2 C ‖u0‖ <= c μ`.
    pub u0: Margin,
}

/// Constants, tolerances and policies of the iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    /// Smallness constant `c`.
    pub c: f64,
    /// Stokes constant `C`.
    pub big_c: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub outer_max: usize,
    /// Abort when an iterate leaves the ball of radius `R`.
    pub strict: bool,
    /// Refuse data failing the smallness conditions up front.
    pub enforce_smallness: bool,
    pub cutoff: Cutoff,
    pub multiplier_trials: usize,
    pub seed: u64,
    /// Bound on the number of horizon halvings in the local scheme.
    pub max_halvings: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            c: DEFAULT_SMALLNESS,
            big_c: DEFAULT_STOKES_CONSTANT,
            inner_tol: 1e-12,
            inner_max: 60,
            outer_tol: 1e-9,
            outer_max: 60,
            strict: false,
            enforce_smallness: true,
            cutoff: Cutoff::Sharp,
            multiplier_trials: 32,
            seed: 0,
            max_halvings: 20,
        }
    }
}

/// Coefficients of `Ψ` for one velocity `v̄`. `A` is taken as `adj(DX)`,
/// which equals `DX⁻¹` for volume-preserving flows and keeps
/// `div((Id − A) w) = Dw : (Id − A)` exact for the intermediate iterates,
/// whose flows are only volume preserving at the fixed point.
pub struct FlowCoefficients {
    pub flows: Vec<FlowState>,
    /// `A ᵀA − Id`.
    viscous: Vec<MatrixField>,
    /// `Id − ᵀA`.
    pressure: Vec<MatrixField>,
    /// `Id − A`.
    divergence: Vec<MatrixField>,
    /// `∂_t A`.
    rate: Vec<MatrixField>,
    /// True when `A ≡ Id` at every sample.
    identity: bool,
}

impl FlowCoefficients {
    pub fn new(velocity: &Trajectory<VectorField>) -> Result<Self> {
        let flows = flow::flow_sequence(velocity)?;
        let n = velocity.sample(0).dim();
        let id = point::identity(n);
        let identity = velocity.samples().iter().all(|v| v.max_abs() == 0.0);
        let mut viscous = Vec::with_capacity(flows.len());
        let mut pressure = Vec::with_capacity(flows.len());
        let mut divergence = Vec::with_capacity(flows.len());
        let mut rate = Vec::with_capacity(flows.len());
        for (f, v) in flows.iter().zip(velocity.samples()) {
            viscous.push(f.adjugate.map_points(|a| {
                point::add(n, &point::mul(n, a, &point::transpose(n, a)), &id, -1.0)
            }));
            pressure.push(f.adjugate.map_points(|a| point::add(n, &id, &point::transpose(n, a), -1.0)));
            divergence.push(f.adjugate.map_points(|a| point::add(n, &id, a, -1.0)));
            rate.push(flow::inverse_time_derivative(f, v));
        }
        Ok(FlowCoefficients {
            flows,
            viscous,
            pressure,
            divergence,
            rate,
            identity,
        })
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Largest `sup |det DX − 1|` over the samples.
    pub fn det_drift(&self) -> f64 {
        self.flows.iter().map(|f| f.det_drift()).fold(0.0, f64::max)
    }
}

fn dealiased_apply(m: &MatrixField, v: &VectorField) -> VectorField {
    m.apply(v).dealiased()
}

/// Forcing `f(w̄, ∇Q̄)` at every sample.
pub fn rhs_f(
    w: &Trajectory<VectorField>,
    grad_q: &Trajectory<VectorField>,
    rho0: &ScalarField,
    coeffs: &FlowCoefficients,
    mu: f64,
) -> Result<Trajectory<VectorField>> {
    let dwdt = w.time_derivative()?;
    let one_minus_rho = rho0.map(|r| 1.0 - r);
    let density_trivial = one_minus_rho.max_abs() == 0.0;
    Ok(w.map_indexed(|k, wk| {
        let mut f = if density_trivial {
            VectorField::zeros(wk.grid())
        } else {
            dwdt.sample(k).mul_scalar(&one_minus_rho).dealiased()
        };
        if !coeffs.identity {
            let viscous = VectorField::new(
                wk.components()
                    .iter()
                    .map(|c| divergence(&dealiased_apply(&coeffs.viscous[k], &gradient(c))))
                    .collect(),
            );
            f = f.lin_comb(1.0, &viscous, mu);
            f = f.lin_comb(1.0, &dealiased_apply(&coeffs.pressure[k], grad_q.sample(k)), 1.0);
        }
        f
    }))
}

/// Divergence datum `g = Dw̄ : (Id − A)` and `R = (Id − A) ∂_t w̄ − ∂_t A w̄`
/// at every sample, for a volume-preserving flow. The zero mode of `g`,
/// which vanishes in exact arithmetic, is removed; the largest removed mean
/// (in L2) is returned.
pub fn rhs_g(
    w: &Trajectory<VectorField>,
    coeffs: &FlowCoefficients,
) -> Result<(Trajectory<ScalarField>, Trajectory<VectorField>, f64)> {
    for f in &coeffs.flows {
        f.require_unit_determinant()?;
    }
    assemble_g(w, coeffs)
}

/// [`rhs_g`] without the determinant check. With `A = adj(DX)` the
/// contraction form is the divergence of `(Id − A) w̄` for any flow.
fn assemble_g(
    w: &Trajectory<VectorField>,
    coeffs: &FlowCoefficients,
) -> Result<(Trajectory<ScalarField>, Trajectory<VectorField>, f64)> {
    let grid = w.sample(0).grid().clone();
    if coeffs.identity {
        return Ok((
            w.map(|_| ScalarField::zeros(&grid)),
            w.map(|_| VectorField::zeros(&grid)),
            0.0,
        ));
    }
    let dwdt = w.time_derivative()?;
    let volume = grid.volume().sqrt();
    let mut removed: f64 = 0.0;
    let mut g = Vec::with_capacity(w.len());
    for (k, wk) in w.samples().iter().enumerate() {
        let raw = jacobian(wk).contract(&coeffs.divergence[k]).dealiased();
        let mut s = raw.spectrum().to_vec();
        removed = removed.max((s[0].re / grid.len() as f64).abs() * volume);
        s[0] = Default::default();
        g.push(ScalarField::from_spectrum(&grid, s));
    }
    let g = Trajectory::new(w.dt(), g);
    let r = w.map_indexed(|k, wk| {
        dealiased_apply(&coeffs.divergence[k], dwdt.sample(k))
            .lin_comb(1.0, &dealiased_apply(&coeffs.rate[k], wk), -1.0)
    });
    Ok((g, r, removed))
}

/// One application of `Ψ`.
pub fn psi_map(coeffs: &FlowCoefficients, candidate: &Pair, data: &ProblemData) -> Result<Pair> {
    let f = rhs_f(
        &candidate.velocity,
        &candidate.pressure_gradient,
        &data.rho0,
        coeffs,
        data.mu,
    )?;
    let (g, r, _) = assemble_g(&candidate.velocity, coeffs)?;
    solve_stokes(&StokesData {
        u0: data.u0.clone(),
        f,
        g,
        r,
        mu: data.mu,
    })
}

fn ep(pair: &Pair, data: &ProblemData, cutoff: Cutoff) -> Result<EpNormReport> {
    ep_norm_with(
        &pair.velocity,
        &pair.pressure_gradient,
        data.p,
        data.mu,
        cutoff,
    )
}

/// `‖a − b‖_{E_p}`.
pub fn ep_distance(a: &Pair, b: &Pair, data: &ProblemData, cutoff: Cutoff) -> Result<f64> {
    Ok(ep(&a.lin_comb(1.0, b, -1.0), data, cutoff)?.total)
}

/// `∫ ‖Dv̄‖_{Ḃ^{n/p}_{p,1}} dt`.
pub fn flow_smallness(velocity: &Trajectory<VectorField>, p: f64, cutoff: Cutoff) -> f64 {
    let dim = velocity.sample(0).dim();
    let idx = BesovIndex::algebra(dim, p);
    let v: Vec<f64> = velocity
        .samples()
        .iter()
        .map(|u| besov(&jacobian(u), idx, cutoff))
        .collect();
    trapezoid(&v, velocity.dt())
}

/// Convergence record of one `Φ` evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub iterations: usize,
    /// Relative `E_p` change after each application of `Ψ`.
    pub changes: Vec<f64>,
    /// Ratios of consecutive absolute changes.
    pub ratios: Vec<f64>,
    /// `∫ ‖Dv̄‖_{Ḃ^{n/p}}` of the frozen velocity.
    pub flow_smallness: f64,
    /// Largest removed mean of `g`.
    pub removed_mean: f64,
}

/// `Φ(v̄, ∇Q̄)`: iterates `Ψ` for the flow of `v̄` until the relative
/// `E_p` change drops below `inner_tol`, starting from the input pair.
pub fn phi_map(input: &Pair, data: &ProblemData, settings: &Settings) -> Result<(Pair, InnerReport)> {
    let coeffs = FlowCoefficients::new(&input.velocity)?;
    phi_with_coefficients(&coeffs, input, data, settings)
}

fn phi_with_coefficients(
    coeffs: &FlowCoefficients,
    start: &Pair,
    data: &ProblemData,
    settings: &Settings,
) -> Result<(Pair, InnerReport)> {
    let density_trivial = data.rho0.map(|r| r - 1.0).max_abs() == 0.0;
    let mut report = InnerReport {
        iterations: 0,
        changes: Vec::new(),
        ratios: Vec::new(),
        flow_smallness: 0.0,
        removed_mean: 0.0,
    };
    let mut x = start.clone();
    let mut last_abs: Option<f64> = None;
    for it in 1..=settings.inner_max {
        let next = psi_map(coeffs, &x, data)?;
        report.iterations = it;
        if coeffs.identity && density_trivial {
            // Ψ does not depend on its argument.
            report.changes.push(0.0);
            return Ok((next, report));
        }
        let diff = ep_distance(&next, &x, data, settings.cutoff)?;
        let norm = ep(&next, data, settings.cutoff)?.total;
        let change = if norm == 0.0 { diff } else { diff / norm };
        report.changes.push(change);
        if let Some(prev) = last_abs {
            if prev > 0.0 {
                report.ratios.push(diff / prev);
            }
        }
        last_abs = Some(diff);
        x = next;
        if change < settings.inner_tol || norm == 0.0 {
            return Ok((x, report));
        }
    }
    Err(Error::InnerNotConverged {
        iterations: settings.inner_max,
        last: *report.changes.last().unwrap_or(&f64::NAN),
    })
}

/// Per-iteration record of the outer Picard iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `‖(v̄, ∇Q̄)_{k}‖_{E_p}` of the new iterate.
    pub ep_norm: f64,
    /// `‖x_k − x_{k−1}‖_{E_p}`.
    pub difference: f64,
    /// `difference_k / difference_{k−1}`.
    pub ratio: Option<f64>,
    pub inner_iterations: usize,
    /// Largest ratio of consecutive inner changes.
    pub inner_ratio: Option<f64>,
    /// `∫ ‖Dv̄‖_{Ḃ^{n/p}}` of the velocity frozen in this step.
    pub flow_smallness: f64,
    /// Whether the new iterate lies in the ball of radius `R`.
    pub in_ball: bool,
}

/// Everything measured during a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub records: Vec<OuterRecord>,
    pub data: DataSmallness,
    /// Radius `R` of the ball the iterates should stay in.
    pub ball_radius: f64,
    /// Largest `∫ ‖Dv̄‖` seen, against `c`.
    pub flow: Margin,
    /// Final solution norm against `2 C ‖u0‖`.
    pub bound: Margin,
    pub solution_norm: EpNormReport,
    /// `sup_t sup_y |det DX_u − 1|` of the converged velocity.
    pub liouville_drift: f64,
    /// `‖x − Φ(x)‖_{E_p} / ‖x‖_{E_p}` at the returned iterate.
    pub fixed_point_residual: f64,
    pub left_ball: bool,
}

impl IterationDiagnostics {
    /// Rows `step,time,quantity,value` for the norm log.
    pub fn to_csv_rows(&self) -> Vec<(usize, f64, String, f64)> {
        let mut rows = Vec::new();
        for r in &self.records {
            rows.push((r.iteration, 0.0, "ep_norm".to_string(), r.ep_norm));
            rows.push((r.iteration, 0.0, "difference".to_string(), r.difference));
            if let Some(q) = r.ratio {
                rows.push((r.iteration, 0.0, "outer_ratio".to_string(), q));
            }
            if let Some(q) = r.inner_ratio {
                rows.push((r.iteration, 0.0, "inner_ratio".to_string(), q));
            }
            rows.push((r.iteration, 0.0, "flow_smallness".to_string(), r.flow_smallness));
        }
        rows
    }

    pub fn max_outer_ratio_after_first(&self) -> f64 {
        self.records
            .iter()
            .skip(2)
            .filter_map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

fn check_data(data: &ProblemData, settings: &Settings, require_u0: bool) -> Result<DataSmallness> {
    let s = data.smallness(settings);
    if settings.enforce_smallness {
        if !s.rho.ok {
            return Err(Error::smallness(
                "density multiplier norm m_rho <= c",
                s.rho.measured,
                s.rho.limit,
            ));
        }
        if require_u0 && !s.u0.ok {
            return Err(Error::smallness(
                "initial velocity 2C|u0| <= c mu",
                s.u0.measured,
                s.u0.limit,
            ));
        }
    }
    Ok(s)
}

/// Outer Picard iteration `x ↦ Φ(x)` from `start`, shared by the global
/// and local schemes. `center` is subtracted before the ball test.
fn picard(
    data: &ProblemData,
    settings: &Settings,
    start: Pair,
    center: Option<&Pair>,
    radius: f64,
    smallness: DataSmallness,
) -> Result<(Pair, IterationDiagnostics)> {
    let mut records = Vec::new();
    let mut x = start;
    let mut prev_diff: Option<f64> = None;
    let mut worst_flow: f64 = 0.0;
    let mut left_ball = false;
    for it in 1..=settings.outer_max {
        let coeffs = FlowCoefficients::new(&x.velocity)?;
        let smallv = flow_smallness(&x.velocity, data.p, settings.cutoff);
        worst_flow = worst_flow.max(smallv);
        let (next, inner) = phi_with_coefficients(&coeffs, &x, data, settings)?;
        let difference = ep_distance(&next, &x, data, settings.cutoff)?;
        let norm = ep(&next, data, settings.cutoff)?.total;
        let offset = match center {
            Some(c) => ep_distance(&next, c, data, settings.cutoff)?,
            None => norm,
        };
        let in_ball = offset <= radius;
        if !in_ball {
            left_ball = true;
            if settings.strict {
                return Err(Error::smallness("iterate stays in the ball of radius R", offset, radius));
            }
        }
        records.push(OuterRecord {
            iteration: it,
            ep_norm: norm,
            difference,
            ratio: prev_diff.filter(|&d| d > 0.0).map(|d| difference / d),
            inner_iterations: inner.iterations,
            inner_ratio: inner.ratios.iter().cloned().reduce(f64::max),
            flow_smallness: smallv,
            in_ball,
        });
        prev_diff = Some(difference);
        x = next;
        let rel = if norm == 0.0 { difference } else { difference / norm };
        if rel < settings.outer_tol || norm == 0.0 {
            let solution_norm = ep(&x, data, settings.cutoff)?;
            let drift = flow::liouville_check(&x.velocity)
                .into_iter()
                .fold(0.0, f64::max);
            let fixed_point_residual = if solution_norm.total == 0.0 { 0.0 } else { rel };
            let diagnostics = IterationDiagnostics {
                records,
                ball_radius: radius,
                flow: Margin::new(worst_flow, settings.c),
                bound: Margin::new(solution_norm.total, 2.0 * settings.big_c * smallness.u0_norm),
                data: smallness,
                solution_norm,
                liouville_drift: drift,
                fixed_point_residual,
                left_ball,
            };
            return Ok((x, diagnostics));
        }
    }
    Err(Error::OuterNotConverged {
        iterations: settings.outer_max,
        last: prev_diff.unwrap_or(f64::NAN),
    })
}

/// Global solution for small data: Picard iteration on `Φ` from `(0, 0)`
/// in the ball of radius `R = c μ`.
pub fn solve_global_small(data: &ProblemData, settings: &Settings) -> Result<(Pair, IterationDiagnostics)> {
    let smallness = check_data(data, settings, true)?;
    let start = Pair::zeros(data.grid(), data.dt, data.steps);
    picard(data, settings, start, None, settings.c * data.mu, smallness)
}

/// The free Stokes evolution of `u0` on the time grid of `data`.
pub fn free_solution(data: &ProblemData) -> Result<Pair> {
    solve_stokes(&StokesData::free(data.u0.clone(), data.mu, data.dt, data.steps))
}

/// Admissibility of a horizon for the local scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub requested: f64,
    /// Largest `T_req / 2^m` passing every condition.
    pub admissible: f64,
    pub halvings: usize,
    /// Time at which `∫_0^T ‖Du_L‖_{Ḃ^{n/p}}` reaches `c/2`, if it does
    /// within the requested horizon.
    pub crossing: Option<f64>,
    /// `∫_0^T ‖Du_L‖_{Ḃ^{n/p}}` on the admissible horizon.
    pub free_gradient: f64,
    /// Left-hand sides of the two free-solution conditions at the
    /// admissible horizon.
    pub free_forcing: f64,
    pub free_l2: f64,
}

/// Cumulative `∫_0^{t_k} ‖Du_L‖_{Ḃ^{n/p}_{p,1}}`.
pub fn free_gradient_integral(free: &Pair, p: f64, cutoff: Cutoff) -> Vec<f64> {
    let dim = free.velocity.sample(0).dim();
    let idx = BesovIndex::algebra(dim, p);
    let v: Vec<f64> = free
        .velocity
        .samples()
        .iter()
        .map(|u| besov(&jacobian(u), idx, cutoff))
        .collect();
    crate::trajectory::cumulative_trapezoid(&v, free.dt())
}

/// First time the running integral reaches `level`, by linear
/// interpolation between samples.
pub fn crossing_time(cumulative: &[f64], dt: f64, level: f64) -> Option<f64> {
    for k in 1..cumulative.len() {
        if cumulative[k] >= level {
            let a = cumulative[k - 1];
            let b = cumulative[k];
            let theta = if b > a { (level - a) / (b - a) } else { 0.0 };
            return Some((k as f64 - 1.0 + theta) * dt);
        }
    }
    None
}

/// Time at which `∫_0^T ‖Du_L‖ = level` for a free solution that is a
/// single heat mode: `‖Du_L(t)‖ = d0 e^{−μ|k|² t}`, so the integral is
/// `d0 (1 − e^{−μ|k|² T}) / (μ|k|²)`. `None` if the level is never reached.
pub fn single_mode_crossing_time(d0: f64, mu: f64, ksq: f64, level: f64) -> Option<f64> {
    let rate = mu * ksq;
    let x = 1.0 - level * rate / d0;
    (x > 0.0).then(|| -x.ln() / rate)
}

/// Checks the free-solution conditions on `[0, T]` for `T = T_req / 2^m`,
/// halving until they hold.
pub fn admissible_horizon(data: &ProblemData, settings: &Settings) -> Result<(HorizonReport, Pair)> {
    let free = free_solution(data)?;
    let dim = data.dim();
    let alg = BesovIndex::algebra(dim, data.p);
    let vel = BesovIndex::velocity(dim, data.p);
    let cutoff = settings.cutoff;
    let grad = free_gradient_integral(&free, data.p, cutoff);
    let dudt = free.velocity.time_derivative()?;
    let rate: Vec<f64> = (0..free.velocity.len())
        .map(|k| {
            besov(dudt.sample(k), vel, cutoff)
                + data.mu * besov(&crate::spectral::hessian(free.velocity.sample(k)), vel, cutoff)
                + besov(free.pressure_gradient.sample(k), vel, cutoff)
        })
        .collect();
    let l2sq: Vec<f64> = free
        .velocity
        .samples()
        .iter()
        .map(|u| besov(u, alg, cutoff).powi(2))
        .collect();
    let rate_cum = crate::trajectory::cumulative_trapezoid(&rate, data.dt);
    let l2_cum = crate::trajectory::cumulative_trapezoid(&l2sq, data.dt);
    let c = settings.c;
    let big_c = settings.big_c;
    let radius = c * data.mu / 2.0;
    let crossing = crossing_time(&grad, data.dt, c / 2.0);
    let requested = data.end_time();
    let mut horizon = requested;
    for halvings in 0..=settings.max_halvings {
        let k = (horizon / data.dt).round() as usize;
        if k == 0 {
            break;
        }
        let first = big_c * c * rate_cum[k] + big_c * l2_cum[k];
        let second = big_c / data.mu.sqrt() * l2_cum[k].sqrt();
        if grad[k] <= c / 2.0 && first <= radius / 2.0 && second <= 0.5 {
            return Ok((
                HorizonReport {
                    requested,
                    admissible: k as f64 * data.dt,
                    halvings,
                    crossing,
                    free_gradient: grad[k],
                    free_forcing: first,
                    free_l2: second,
                },
                free,
            ));
        }
        horizon /= 2.0;
    }
    Err(Error::HorizonCollapsed {
        horizon,
        dt: data.dt,
    })
}

/// Local solution for data of any size: iterate `Φ` around the free
/// solution on an admissible horizon, in the ball of radius `R = c μ / 2`.
pub fn solve_local_large(
    data: &ProblemData,
    settings: &Settings,
) -> Result<(Pair, IterationDiagnostics, HorizonReport)> {
    let smallness = check_data(data, settings, false)?;
    let (horizon, free) = admissible_horizon(data, settings)?;
    let steps = (horizon.admissible / data.dt).round() as usize;
    let local = data.with_steps(steps);
    let start = Pair::new(
        Trajectory::new(data.dt, free.velocity.samples()[..=steps].to_vec()),
        Trajectory::new(data.dt, free.pressure_gradient.samples()[..=steps].to_vec()),
    );
    let (sol, diag) = picard(
        &local,
        settings,
        start.clone(),
        Some(&start),
        settings.c * data.mu / 2.0,
        smallness,
    )?;
    Ok((sol, diag, horizon))
}

/// Norms of the difference terms `δf_0 … δf_5` and `δR_1 … δR_4`, in
/// `L_1` in time; `δf_4`, `δf_5` in `Ḃ^{n/p}`, the rest in `Ḃ^{n/p−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceTerms {
    pub delta_f: [f64; 6],
    pub delta_r: [f64; 4],
}

/// Measures the difference terms for two inputs `(v̄_i, ∇Q̄_i)` with images
/// `(ū_i, ∇P̄_i)`; `rho_b` is the second density (equal to the first for
/// contraction measurements, so that `δf_0 = 0`).
pub fn difference_terms(
    data: &ProblemData,
    rho_b: &ScalarField,
    coeffs1: &FlowCoefficients,
    coeffs2: &FlowCoefficients,
    out1: &Pair,
    out2: &Pair,
    cutoff: Cutoff,
) -> Result<DifferenceTerms> {
    let dim = data.dim();
    let vel = BesovIndex::velocity(dim, data.p);
    let alg = BesovIndex::algebra(dim, data.p);
    let dt = data.dt;
    let du = out2.velocity.lin_comb(1.0, &out1.velocity, -1.0);
    let dp = out2.pressure_gradient.lin_comb(1.0, &out1.pressure_gradient, -1.0);
    let ddu = du.time_derivative()?;
    let du1 = out1.velocity.time_derivative()?;
    let drho = rho_b.lin_comb(1.0, &data.rho0, -1.0);
    let one_minus_rho = data.rho0.map(|r| 1.0 - r);
    let id = MatrixField::identity(data.grid());
    let len = du.len();
    let mut f = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut r = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for k in 0..len {
        let a1 = &coeffs1.flows[k].adjugate;
        let a2 = &coeffs2.flows[k].adjugate;
        let a_diff = a1.lin_comb(1.0, a2, -1.0);
        f[0][k] = besov(&du1.sample(k).mul_scalar(&drho).dealiased(), vel, cutoff);
        f[1][k] = besov(&ddu.sample(k).mul_scalar(&one_minus_rho).dealiased(), vel, cutoff);
        let b2 = id.lin_comb(1.0, &a2.transpose(), -1.0);
        f[2][k] = besov(&dealiased_apply(&b2, dp.sample(k)), vel, cutoff);
        f[3][k] = besov(&dealiased_apply(&a_diff.transpose(), out1.pressure_gradient.sample(k)), vel, cutoff);
        let m2 = a2.matmul(&a2.transpose());
        let m1 = a1.matmul(&a1.transpose());
        let g1 = jacobian(out1.velocity.sample(k)).transpose();
        let gdu = jacobian(du.sample(k)).transpose();
        // Columns of the transposed Jacobian are the component gradients.
        f[4][k] = besov(&m2.lin_comb(1.0, &m1, -1.0).matmul(&g1).dealiased(), alg, cutoff);
        f[5][k] = besov(&m2.lin_comb(1.0, &id, -1.0).matmul(&gdu).dealiased(), alg, cutoff);
        let rate2 = &coeffs2.rate[k];
        let rate_diff = coeffs1.rate[k].lin_comb(1.0, rate2, -1.0);
        let n2 = id.lin_comb(1.0, a2, -1.0);
        r[0][k] = besov(&dealiased_apply(rate2, du.sample(k)).scale(-1.0), vel, cutoff);
        r[1][k] = besov(&dealiased_apply(&n2, ddu.sample(k)), vel, cutoff);
        r[2][k] = besov(&dealiased_apply(&rate_diff, out1.velocity.sample(k)), vel, cutoff);
        r[3][k] = besov(&dealiased_apply(&a_diff, du1.sample(k)), vel, cutoff);
    }
    let mut delta_f = [0.0; 6];
    for (slot, series) in delta_f.iter_mut().zip(&f) {
        *slot = trapezoid(series, dt);
    }
    let mut delta_r = [0.0; 4];
    for (slot, series) in delta_r.iter_mut().zip(&r) {
        *slot = trapezoid(series, dt);
    }
    Ok(DifferenceTerms { delta_f, delta_r })
}

/// Measured Lipschitz ratio of `Φ` on a pair of inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub factor: f64,
    pub input_distance: f64,
    pub output_distance: f64,
    pub terms: DifferenceTerms,
}

/// `‖Φ(x2) − Φ(x1)‖_{E_p} / ‖x2 − x1‖_{E_p}`.
pub fn contraction_factor(
    data: &ProblemData,
    pair1: &Pair,
    pair2: &Pair,
    settings: &Settings,
) -> Result<ContractionReport> {
    let input_distance = ep_distance(pair2, pair1, data, settings.cutoff)?;
    if input_distance == 0.0 {
        return Err(Error::IdenticalInputs);
    }
    let c1 = FlowCoefficients::new(&pair1.velocity)?;
    let c2 = FlowCoefficients::new(&pair2.velocity)?;
    let (o1, _) = phi_with_coefficients(&c1, pair1, data, settings)?;
    let (o2, _) = phi_with_coefficients(&c2, pair2, data, settings)?;
    let output_distance = ep_distance(&o2, &o1, data, settings.cutoff)?;
    let terms = difference_terms(data, &data.rho0, &c1, &c2, &o1, &o2, settings.cutoff)?;
    Ok(ContractionReport {
        factor: output_distance / input_distance,
        input_distance,
        output_distance,
        terms,
    })
}

/// Lipschitz ratio of `Ψ` for a frozen flow: `‖Ψ(x2) − Ψ(x1)‖ / ‖x2 − x1‖`.
pub fn frozen_contraction_factor(
    coeffs: &FlowCoefficients,
    data: &ProblemData,
    x1: &Pair,
    x2: &Pair,
    cutoff: Cutoff,
) -> Result<f64> {
    let input = ep_distance(x2, x1, data, cutoff)?;
    if input == 0.0 {
        return Err(Error::IdenticalInputs);
    }
    let y1 = psi_map(coeffs, x1, data)?;
    let y2 = psi_map(coeffs, x2, data)?;
    Ok(ep_distance(&y2, &y1, data, cutoff)? / input)
}

/// Two solves from nearby data and the size of their difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `‖δ(ū, ∇P̄)‖_{E_p}`.
    pub solution_distance: f64,
    /// Multiplier bound of `δρ0` plus `‖δu0‖_{Ḃ^{n/p−1}_{p,1}}`.
    pub data_distance: f64,
    pub ratio: f64,
    pub terms: DifferenceTerms,
}

/// Measured Lipschitz ratio of the data-to-solution map between two small
/// data sets on the same grid and time grid.
pub fn stability_ratio(a: &ProblemData, b: &ProblemData, settings: &Settings) -> Result<StabilityReport> {
    let (sa, _) = solve_global_small(a, settings)?;
    let (sb, _) = solve_global_small(b, settings)?;
    let drho = b.rho0.lin_comb(1.0, &a.rho0, -1.0);
    let rho_part = if drho.max_abs() == 0.0 {
        0.0
    } else {
        multiplier_norm_lower_bound(&drho, a.velocity_index(), settings.multiplier_trials, settings.seed)
    };
    let du0 = b.u0.lin_comb(1.0, &a.u0, -1.0);
    let data_distance = rho_part + besov(&du0, a.velocity_index(), settings.cutoff);
    if data_distance == 0.0 {
        return Err(Error::IdenticalInputs);
    }
    let solution_distance = ep_distance(&sb, &sa, a, settings.cutoff)?;
    let ca = FlowCoefficients::new(&sa.velocity)?;
    let cb = FlowCoefficients::new(&sb.velocity)?;
    let terms = difference_terms(a, &b.rho0, &ca, &cb, &sa, &sb, settings.cutoff)?;
    Ok(StabilityReport {
        solution_distance,
        data_distance,
        ratio: solution_distance / data_distance,
        terms,
    })
}
