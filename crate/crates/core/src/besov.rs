//! Littlewood–Paley blocks, homogeneous Besov norms `Ḃ^s_{p,1}`, the
//! solution-space norm `E_p`, and empirical multiplier bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{hessian, lp_norm, Grid, Pointwise, ScalarField, VectorField};
use crate::trajectory::{trapezoid, Trajectory};

/// Regularity `s` and integrability `p` of `Ḃ^s_{p,1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64) -> Self {
        BesovIndex { s, p }
    }

    /// `Ḃ^{n/p − 1}_{p,1}`, the critical space for velocities.
    pub fn velocity(dim: usize, p: f64) -> Self {
        BesovIndex::new(dim as f64 / p - 1.0, p)
    }

    /// `Ḃ^{n/p}_{p,1}`, the multiplicative algebra.
    pub fn algebra(dim: usize, p: f64) -> Self {
        BesovIndex::new(dim as f64 / p, p)
    }

    /// Product laws in `Ḃ^{n/p−1}_{p,1}` need `1 <= p < 2n`.
    pub fn check_product_range(&self, dim: usize) -> Result<()> {
        if self.p >= 1.0 && self.p < 2.0 * dim as f64 {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                key: "p".into(),
                reason: format!("need 1 <= p < {} for product estimates", 2 * dim),
            })
        }
    }
}

/// Shape of the dyadic partition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    /// Indicator of `2^j <= |m| < 2^{j+1}`, `m` the lattice index.
    #[default]
    Sharp,
    /// Smooth bumps with one-octave transitions, summing to one on the
    /// resolvable band.
    Smooth,
}

/// Resolvable shells: `0 ..= floor(log2(N/3))`.
pub fn shell_range(grid: &Grid) -> (i32, i32) {
    let top = ((grid.points() as f64) / 3.0).log2().floor() as i32;
    (0, top)
}

/// Upper edge (exclusive) of the resolvable band in lattice units.
fn band_edge(grid: &Grid) -> f64 {
    2f64.powi(shell_range(grid).1 + 1)
}

/// `C^∞` step: 1 on `r <= 1`, 0 on `r >= 2`.
fn theta(r: f64) -> f64 {
    fn g(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    let a = g(2.0 - r);
    let b = g(r - 1.0);
    if a + b == 0.0 {
        if r <= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

/// Weight of shell `j` at lattice radius `r`.
fn shell_weight(r: f64, j: i32, top: i32, cutoff: Cutoff) -> f64 {
    if r == 0.0 || r >= 2f64.powi(top + 1) {
        return 0.0;
    }
    match cutoff {
        Cutoff::Sharp => {
            let lo = 2f64.powi(j);
            if r >= lo && r < 2.0 * lo {
                1.0
            } else {
                0.0
            }
        }
        Cutoff::Smooth => {
            let upper = if j == top {
                1.0
            } else {
                theta(r / 2f64.powi(j))
            };
            let lower = if j == 0 {
                0.0
            } else {
                theta(r / 2f64.powi(j - 1))
            };
            upper - lower
        }
    }
}

fn check_shell(grid: &Grid, j: i32) -> Result<()> {
    let (min, max) = shell_range(grid);
    if j < min || j > max {
        Err(Error::ShellOutOfRange { j, min, max })
    } else {
        Ok(())
    }
}

/// `Δ̇_j u` with the sharp cutoff.
pub fn dyadic_block(u: &ScalarField, j: i32) -> Result<ScalarField> {
    dyadic_block_with(u, j, Cutoff::Sharp)
}

pub fn dyadic_block_with(u: &ScalarField, j: i32, cutoff: Cutoff) -> Result<ScalarField> {
    let grid = u.grid();
    check_shell(grid, j)?;
    let top = shell_range(grid).1;
    let r = grid.lattice_norm();
    Ok(u.apply_multiplier(|m| Complex64::new(shell_weight(r[m], j, top, cutoff), 0.0)))
}

/// Per-shell breakdown of a Besov norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub index: BesovIndex,
    pub cutoff: Cutoff,
    pub j_min: i32,
    pub j_max: i32,
    /// `2^{js} ‖Δ̇_j u‖_{L_p}` for `j = j_min ..= j_max`.
    pub contributions: Vec<f64>,
    pub total: f64,
    /// L2 norm of the content above the resolvable band.
    pub tail_l2: f64,
    /// L2 norm of the zero mode, which homogeneous norms ignore.
    pub mean_l2: f64,
}

impl BesovReport {
    /// Rows `shell,j,contribution`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shell,j,contribution\n");
        for (i, c) in self.contributions.iter().enumerate() {
            s.push_str(&format!("{},{},{:.17e}\n", i, self.j_min + i as i32, c));
        }
        s
    }
}

pub fn besov_norm<F: Pointwise + ?Sized>(u: &F, index: BesovIndex) -> BesovReport {
    besov_norm_with(u, index, Cutoff::Sharp)
}

/// Besov norm of a scalar, vector or matrix field; vector-valued blocks are
/// measured through their pointwise Euclidean magnitude.
pub fn besov_norm_with<F: Pointwise + ?Sized>(
    u: &F,
    index: BesovIndex,
    cutoff: Cutoff,
) -> BesovReport {
    let parts = u.parts();
    let grid = parts[0].grid();
    let (j_min, j_max) = shell_range(grid);
    let r = grid.lattice_norm();
    let edge = band_edge(grid);
    let cell = grid.spacing().powi(grid.dim() as i32);
    let norm_l2 = |sum_sq: f64| (cell * sum_sq / grid.len() as f64).sqrt();

    let mut tail = 0.0;
    let mut mean = 0.0;
    for part in &parts {
        for (m, c) in part.spectrum().iter().enumerate() {
            if r[m] == 0.0 {
                mean += c.norm_sqr();
            } else if r[m] >= edge {
                tail += c.norm_sqr();
            }
        }
    }

    let shells = (j_max - j_min + 1) as usize;
    let contributions: Vec<f64> = if index.p == 2.0 {
        let mut sq = vec![0.0; shells];
        for part in &parts {
            for (m, c) in part.spectrum().iter().enumerate() {
                if r[m] == 0.0 || r[m] >= edge {
                    continue;
                }
                let e = c.norm_sqr();
                match cutoff {
                    Cutoff::Sharp => {
                        let j = r[m].log2().floor() as i32;
                        sq[(j.clamp(j_min, j_max) - j_min) as usize] += e;
                    }
                    Cutoff::Smooth => {
                        for (i, slot) in sq.iter_mut().enumerate() {
                            let w = shell_weight(r[m], j_min + i as i32, j_max, cutoff);
                            if w != 0.0 {
                                *slot += w * w * e;
                            }
                        }
                    }
                }
            }
        }
        sq.iter()
            .enumerate()
            .map(|(i, &s)| 2f64.powf((j_min + i as i32) as f64 * index.s) * norm_l2(s))
            .collect()
    } else {
        (0..shells)
            .map(|i| {
                let j = j_min + i as i32;
                let blocks: Vec<ScalarField> = parts
                    .iter()
                    .map(|p| dyadic_block_with(p, j, cutoff).expect("shell in range"))
                    .collect();
                2f64.powf(j as f64 * index.s) * lp_norm(&blocks, index.p)
            })
            .collect()
    };
    BesovReport {
        index,
        cutoff,
        j_min,
        j_max,
        total: contributions.iter().sum(),
        contributions,
        tail_l2: norm_l2(tail),
        mean_l2: norm_l2(mean),
    }
}

/// Shorthand for the total of [`besov_norm_with`].
pub fn besov<F: Pointwise + ?Sized>(u: &F, index: BesovIndex, cutoff: Cutoff) -> f64 {
    besov_norm_with(u, index, cutoff).total
}

/// Components of the `E_p` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpNormReport {
    /// `sup_t ‖u‖_{Ḃ^{n/p−1}_{p,1}}`.
    pub sup_velocity: f64,
    /// `∫ ‖∂_t u‖`.
    pub time_derivative: f64,
    /// `μ ∫ ‖∇² u‖`.
    pub viscous: f64,
    /// `∫ ‖∇P‖`.
    pub pressure: f64,
    pub total: f64,
}

impl EpNormReport {
    pub fn zero() -> Self {
        EpNormReport {
            sup_velocity: 0.0,
            time_derivative: 0.0,
            viscous: 0.0,
            pressure: 0.0,
            total: 0.0,
        }
    }

    /// Rows `term,value`.
    pub fn to_csv(&self) -> String {
        format!(
            "term,value\nsup_velocity,{:.17e}\ntime_derivative,{:.17e}\nviscous,{:.17e}\npressure,{:.17e}\ntotal,{:.17e}\n",
            self.sup_velocity, self.time_derivative, self.viscous, self.pressure, self.total
        )
    }
}

/// The `E_p` norm of a velocity / pressure-gradient pair: the sup-in-time
/// velocity norm plus trapezoid integrals of `∂_t u`, `μ ∇² u` and `∇P`, all
/// in `Ḃ^{n/p−1}_{p,1}`.
pub fn ep_norm(
    velocity: &Trajectory<VectorField>,
    pressure_gradient: &Trajectory<VectorField>,
    p: f64,
    mu: f64,
) -> Result<EpNormReport> {
    ep_norm_with(velocity, pressure_gradient, p, mu, Cutoff::Sharp)
}

pub fn ep_norm_with(
    velocity: &Trajectory<VectorField>,
    pressure_gradient: &Trajectory<VectorField>,
    p: f64,
    mu: f64,
    cutoff: Cutoff,
) -> Result<EpNormReport> {
    velocity.require(2)?;
    let dim = velocity.sample(0).dim();
    let idx = BesovIndex::velocity(dim, p);
    let dt = velocity.dt();
    let dudt = velocity.time_derivative()?;
    let sup_velocity = velocity
        .samples()
        .iter()
        .map(|u| besov(u, idx, cutoff))
        .fold(0.0, f64::max);
    let series = |f: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..velocity.len()).map(f).collect();
        trapezoid(&v, dt)
    };
    let time_derivative = series(&|k| besov(dudt.sample(k), idx, cutoff));
    let viscous = mu * series(&|k| besov(&hessian(velocity.sample(k)), idx, cutoff));
    let pressure = series(&|k| besov(pressure_gradient.sample(k), idx, cutoff));
    Ok(EpNormReport {
        sup_velocity,
        time_derivative,
        viscous,
        pressure,
        total: sup_velocity + time_derivative + viscous + pressure,
    })
}

/// Random real field supported on 1 to 4 resolvable shells with Gaussian
/// coefficients, so every mode gets a random phase.
pub fn random_atom(grid: &Grid, rng: &mut impl Rng) -> ScalarField {
    let (j_min, j_max) = shell_range(grid);
    let available: Vec<i32> = (j_min..=j_max).collect();
    let count = rng.random_range(1..=available.len().min(4));
    let mut chosen = available.clone();
    for i in 0..count {
        let k = rng.random_range(i..chosen.len());
        chosen.swap(i, k);
    }
    let chosen = &chosen[..count];
    let weights: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let r = grid.lattice_norm();
    let mut spec = vec![Complex64::default(); grid.len()];
    for (m, slot) in spec.iter_mut().enumerate() {
        if r[m] == 0.0 {
            continue;
        }
        let j = r[m].log2().floor() as i32;
        if let Some(pos) = chosen.iter().position(|&c| c == j) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *slot = Complex64::new(re, im) * weights[pos];
        }
    }
    // Keep the real part; shells are symmetric under m -> -m so the support
    // is unchanged.
    let complex = ScalarField::from_spectrum(grid, spec);
    ScalarField::from_values(grid, complex.values().to_vec())
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Projected gradient-ascent steps applied to each random atom.
pub const MULTIPLIER_ASCENT_STEPS: usize = 40;

/// `Σ_j 2^{js} ‖Δ̇_j f‖_p` and its gradient with respect to `f` in the grid
/// inner product. Blocks are self-adjoint, so the gradient of one term is
/// `Δ̇_j(|b|^{p−2} b) / ‖b‖_p^{p−1}` with `b = Δ̇_j f`.
fn norm_with_gradient(f: &ScalarField, index: BesovIndex, cutoff: Cutoff) -> (f64, ScalarField) {
    let (j_min, j_max) = shell_range(f.grid());
    let mut total = 0.0;
    let mut grad = ScalarField::zeros(f.grid());
    for j in j_min..=j_max {
        let b = dyadic_block_with(f, j, cutoff).expect("shell in range");
        let n = lp_norm(&b, index.p);
        if n == 0.0 {
            continue;
        }
        let w = 2f64.powf(j as f64 * index.s);
        total += w * n;
        let dual = if index.p == 2.0 {
            b
        } else {
            b.map(|x| x.signum() * x.abs().powf(index.p - 1.0))
        };
        let dual = dyadic_block_with(&dual, j, cutoff).expect("shell in range");
        grad = grad.lin_comb(1.0, &dual, w / n.powf(index.p - 1.0));
    }
    (total, grad)
}

/// Drops the mean and the modes beyond the resolvable band, which the norm
/// does not see.
fn restrict_to_band(f: &ScalarField) -> ScalarField {
    let edge = band_edge(f.grid());
    let r = f.grid().lattice_norm();
    f.apply_multiplier(|m| {
        let keep = r[m] > 0.0 && r[m] < edge;
        Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
    })
}

fn ratio(a: &ScalarField, psi: &ScalarField, index: BesovIndex, cutoff: Cutoff) -> f64 {
    let norm = besov(psi, index, cutoff);
    if norm == 0.0 {
        0.0
    } else {
        besov(&psi.pointwise_mul(a), index, cutoff) / norm
    }
}

/// Increases `‖ψ a‖ / ‖ψ‖` by projected gradient ascent with a
/// backtracking step. Every iterate is a valid test function, so the
/// returned ratio is still a lower bound.
pub fn refine_multiplier_atom(
    a: &ScalarField,
    psi: &ScalarField,
    index: BesovIndex,
    cutoff: Cutoff,
    steps: usize,
) -> (f64, ScalarField) {
    let mut best = restrict_to_band(psi);
    let mut value = ratio(a, &best, index, cutoff);
    let raw = ratio(a, psi, index, cutoff);
    if steps == 0 || value == 0.0 {
        return if raw >= value { (raw, psi.clone()) } else { (value, best) };
    }
    best = best.scale(1.0 / lp_norm(&best, 2.0));
    let mut step = 0.5;
    for _ in 0..steps {
        let (num, grad_num) = norm_with_gradient(&best.pointwise_mul(a), index, cutoff);
        let (den, grad_den) = norm_with_gradient(&best, index, cutoff);
        let r = num / den;
        let grad = restrict_to_band(
            &grad_num
                .pointwise_mul(a)
                .lin_comb(1.0 / den, &grad_den, -r / den),
        );
        let size = lp_norm(&grad, 2.0);
        if size == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-6 {
            let trial = best.lin_comb(1.0, &grad, step / size);
            let trial = trial.scale(1.0 / lp_norm(&trial, 2.0));
            let v = ratio(a, &trial, index, cutoff);
            if v > value {
                best = trial;
                value = v;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if raw > value {
        (raw, psi.clone())
    } else {
        (value, best)
    }
}

/// Per-trial ratios `‖ψ a‖ / ‖ψ‖` in `Ḃ^s_{p,1}`, each from a random atom
/// refined by [`refine_multiplier_atom`]. Trial `i` draws from its own
/// stream of the master seed, so the first `k` entries never depend on how
/// many trials follow.
pub fn multiplier_trials(
    a: &ScalarField,
    index: BesovIndex,
    trials: usize,
    seed: u64,
    cutoff: Cutoff,
) -> Vec<f64> {
    multiplier_trials_with(a, index, trials, seed, cutoff, MULTIPLIER_ASCENT_STEPS)
}

pub fn multiplier_trials_with(
    a: &ScalarField,
    index: BesovIndex,
    trials: usize,
    seed: u64,
    cutoff: Cutoff,
    ascent_steps: usize,
) -> Vec<f64> {
    let grid = a.grid();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let psi = random_atom(grid, &mut rng);
            refine_multiplier_atom(a, &psi, index, cutoff, ascent_steps).0
        })
        .collect()
}

/// Certified lower bound for the multiplier norm of `a` on `Ḃ^s_{p,1}`:
/// the largest ratio over `trials` refined random atoms.
pub fn multiplier_norm_lower_bound(
    a: &ScalarField,
    index: BesovIndex,
    trials: usize,
    seed: u64,
) -> f64 {
    multiplier_trials(a, index, trials, seed, Cutoff::Sharp)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Largest sampled `‖uv‖ / (‖u‖ ‖v‖)` over random atom pairs in
/// `Ḃ^{n/p}_{p,1}`; a lower bound for the algebra constant.
pub fn algebra_constant(grid: &Grid, index: BesovIndex, samples: usize, seed: u64) -> Result<f64> {
    let expected = grid.dim() as f64 / index.p;
    if (index.s - expected).abs() > 1e-12 {
        return Err(Error::InvalidConfig {
            key: "s".into(),
            reason: format!("algebra constant needs s = n/p = {expected}"),
        });
    }
    Ok((0..samples)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let u = random_atom(grid, &mut rng);
            let v = random_atom(grid, &mut rng);
            product_ratio(&u, &v, index)
        })
        .reduce(|| 0.0, f64::max))
}

/// `‖uv‖ / (‖u‖ ‖v‖)` in `Ḃ^s_{p,1}`.
pub fn product_ratio(u: &ScalarField, v: &ScalarField, index: BesovIndex) -> f64 {
    let nu = besov(u, index, Cutoff::Sharp);
    let nv = besov(v, index, Cutoff::Sharp);
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    besov(&u.pointwise_mul(v), index, Cutoff::Sharp) / (nu * nv)
}
