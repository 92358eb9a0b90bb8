//! One function per experiment kind. Each returns the rows, fields and
//! plots the artifact writer turns into files.

use std::collections::BTreeMap;

use lagns_core::besov::{
    besov, besov_norm_with, dyadic_block_with, multiplier_norm_lower_bound, shell_range, BesovIndex, Cutoff,
};
use lagns_core::eulerian::{
    density_jump_experiment, nse_residual, reference_eulerian_solve_sampled, taylor_green, to_eulerian_at, Disc,
    JumpConfig,
};
use lagns_core::flow::shear::{random_band_limited, random_band_limited_vector, ShearMap};
use lagns_core::flow::{
    adjugate_expansion_residual, compose, compose_vector, liouville_check, magic_divergence_residual, FlowState,
};
use lagns_core::lagrangian::{
    free_gradient_integral, free_solution, solve_global_small, solve_local_large, IterationDiagnostics, ProblemData,
};
use lagns_core::spectral::{divergence, leray_project, lp_norm};
use lagns_core::stokes::{solve_stokes, verify_estimate_with};
use lagns_core::suite::stokes_estimate_suite;
use lagns_core::trajectory::Pair;
use lagns_core::{Grid, MatrixField, ScalarField, Trajectory, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, Profile};
use crate::error::CliError;
use crate::plot::{Plot, Series};

/// One line of `norms.csv` or `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Row {
    pub step: usize,
    pub time: f64,
    pub quantity: String,
    pub value: f64,
}

fn row(step: usize, time: f64, quantity: impl Into<String>, value: f64) -> Row {
    Row { step, time, quantity: quantity.into(), value }
}

#[derive(Default)]
pub struct RunOutput {
    pub norms: Vec<Row>,
    pub diagnostics: Vec<Row>,
    pub report: Value,
    /// File stem and the scalar fields stored in it.
    pub fields: Vec<(String, Vec<ScalarField>)>,
    pub plots: Vec<Plot>,
    pub failed_checks: Vec<String>,
}

/// An error together with whatever was measured before it.
pub struct Failure {
    pub error: CliError,
    pub report: Value,
}

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { error: e.into(), report: Value::Null }
    }
}

type Outcome = std::result::Result<RunOutput, Failure>;

pub fn execute(cfg: &ExperimentConfig) -> Outcome {
    match cfg.kind {
        Kind::IdentitySuite => identity_suite(cfg),
        Kind::StokesSuite => stokes_suite(cfg),
        Kind::GlobalSmall => global_small(cfg),
        Kind::LocalLarge => local_large(cfg),
        Kind::DensityJump => density_jump(cfg),
        Kind::CrossValidate => cross_validate(cfg),
        Kind::BesovSuite => besov_suite(cfg),
    }
}

/// Threshold checks collected into the report.
#[derive(Default)]
struct Checks {
    entries: Vec<Value>,
    failed: Vec<String>,
}

impl Checks {
    fn at_most(&mut self, name: &str, measured: f64, threshold: f64) {
        let pass = measured <= threshold;
        if !pass {
            self.failed.push(format!("{name} = {measured:e} > {threshold:e}"));
        }
        self.entries.push(json!({ "name": name, "measured": measured, "threshold": threshold, "pass": pass }));
    }

    fn finish(self, out: &mut RunOutput) {
        out.report["checks"] = Value::Array(self.entries);
        out.failed_checks = self.failed;
    }
}

fn velocity_index(cfg: &ExperimentConfig) -> BesovIndex {
    BesovIndex::velocity(cfg.grid.dim, cfg.physics.p)
}

fn unit_field(v: &VectorField, cfg: &ExperimentConfig) -> VectorField {
    let norm = besov(v, velocity_index(cfg), cfg.tolerance.cutoff);
    if norm == 0.0 {
        v.clone()
    } else {
        v.scale(1.0 / norm)
    }
}

/// `ρ0 = 1 + contrast · f / sup|f|` for a random band-limited `f`.
pub fn initial_density(cfg: &ExperimentConfig, g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let f = random_band_limited(g, cfg.data.max_wave.min(2), 3, rng);
    if cfg.data.rho_contrast == 0.0 || f.max_abs() == 0.0 {
        return ScalarField::constant(g, 1.0);
    }
    f.scale(cfg.data.rho_contrast / f.max_abs()).map(|d| 1.0 + d)
}

/// Initial velocity of the configured profile with `‖u0‖_{Ḃ^{n/p−1}_{p,1}}`
/// equal to `data.u0_norm`, plus the optional perturbation.
pub fn initial_velocity(cfg: &ExperimentConfig, g: &Grid, rng: &mut ChaCha8Rng) -> VectorField {
    let d = &cfg.data;
    let k0 = g.k0();
    let shape = match d.profile {
        Profile::Random => leray_project(&random_band_limited_vector(g, d.max_wave, d.terms, rng)),
        Profile::Shear => VectorField::from_fn(g, |x| [(k0 * x[1]).sin(), 0.0, 0.0]),
        Profile::TaylorGreen => taylor_green(g, 1.0, cfg.physics.mu, 0.0).0,
    };
    let mut u0 = unit_field(&shape, cfg).scale(d.u0_norm);
    if d.perturbation > 0.0 {
        let mut prng = ChaCha8Rng::seed_from_u64(d.perturbation_seed);
        let extra = leray_project(&random_band_limited_vector(g, d.max_wave, d.terms, &mut prng));
        u0 = u0.lin_comb(1.0, &unit_field(&extra, cfg), d.perturbation * d.u0_norm);
    }
    u0
}

fn problem(cfg: &ExperimentConfig) -> std::result::Result<(Grid, ProblemData), Failure> {
    let g = cfg.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rho0 = initial_density(cfg, &g, &mut rng);
    let u0 = initial_velocity(cfg, &g, &mut rng);
    let data = ProblemData::new(rho0, u0, cfg.physics.mu, cfg.physics.p, cfg.time.dt, cfg.time.steps)?;
    Ok((g, data))
}

fn vector_fields(v: &VectorField) -> Vec<ScalarField> {
    v.components().to_vec()
}

/// Per-step norms of a solution pair, plus the determinant drift of its flow.
fn solution_rows(sol: &Pair, cfg: &ExperimentConfig) -> Vec<Row> {
    let idx = velocity_index(cfg);
    let cutoff = cfg.tolerance.cutoff;
    let drift = liouville_check(&sol.velocity);
    let mut rows = Vec::new();
    for k in 0..sol.velocity.len() {
        let t = sol.velocity.time(k);
        let u = sol.velocity.sample(k);
        rows.push(row(k, t, "velocity_besov", besov(u, idx, cutoff)));
        rows.push(row(k, t, "velocity_l2", lp_norm(u, 2.0)));
        rows.push(row(k, t, "pressure_gradient_besov", besov(sol.pressure_gradient.sample(k), idx, cutoff)));
        rows.push(row(k, t, "determinant_drift", drift[k]));
    }
    rows
}

fn iteration_rows(diag: &IterationDiagnostics) -> Vec<Row> {
    diag.to_csv_rows().into_iter().map(|(s, t, q, v)| row(s, t, q, v)).collect()
}

fn convergence_plot(diag: &IterationDiagnostics) -> Plot {
    Plot::Lines {
        name: "convergence".into(),
        series: vec![Series {
            label: "outer difference".into(),
            points: diag.records.iter().map(|r| (r.iteration as f64, r.difference)).collect(),
        }],
        log_y: true,
    }
}

fn drift_plot(rows: &[Row]) -> Plot {
    Plot::Lines {
        name: "determinant_drift".into(),
        series: vec![Series {
            label: "sup |det DX - 1|".into(),
            points: rows.iter().filter(|r| r.quantity == "determinant_drift").map(|r| (r.time, r.value)).collect(),
        }],
        log_y: true,
    }
}

fn smallness_report(data: &ProblemData, cfg: &ExperimentConfig) -> Value {
    json!({ "smallness": data.smallness(&cfg.settings()) })
}

fn global_small(cfg: &ExperimentConfig) -> Outcome {
    let (_, data) = problem(cfg)?;
    let settings = cfg.settings();
    let (sol, diag) = solve_global_small(&data, &settings)
        .map_err(|e| Failure { error: e.into(), report: smallness_report(&data, cfg) })?;
    let mut norms = solution_rows(&sol, cfg);
    let last = data.steps;
    let s = &diag.solution_norm;
    for (q, v) in [
        ("ep_sup_velocity", s.sup_velocity),
        ("ep_time_derivative", s.time_derivative),
        ("ep_viscous", s.viscous),
        ("ep_pressure", s.pressure),
        ("ep_total", s.total),
    ] {
        norms.push(row(last, data.end_time(), q, v));
    }
    let plots = vec![convergence_plot(&diag), drift_plot(&norms)];
    Ok(RunOutput {
        report: json!({
            "bound_ratio": diag.solution_norm.total / diag.data.u0_norm,
            "diagnostics": diag,
        }),
        diagnostics: iteration_rows(&diag),
        fields: vec![
            ("rho0".into(), vec![data.rho0.clone()]),
            ("u0".into(), vector_fields(&data.u0)),
            ("velocity_final".into(), vector_fields(sol.velocity.last())),
            ("grad_p_final".into(), vector_fields(sol.pressure_gradient.last())),
        ],
        norms,
        plots,
        failed_checks: Vec::new(),
    })
}

fn local_large(cfg: &ExperimentConfig) -> Outcome {
    let (_, data) = problem(cfg)?;
    let settings = cfg.settings();
    let (sol, diag, horizon) = solve_local_large(&data, &settings)
        .map_err(|e| Failure { error: e.into(), report: smallness_report(&data, cfg) })?;
    let free = free_solution(&data)?;
    let cum = free_gradient_integral(&free, data.p, settings.cutoff);
    let mut norms = solution_rows(&sol, cfg);
    for (k, v) in cum.iter().enumerate() {
        norms.push(row(k, k as f64 * data.dt, "free_gradient_integral", *v));
    }
    let level = settings.c / 2.0;
    let plots = vec![
        convergence_plot(&diag),
        Plot::Lines {
            name: "free_gradient".into(),
            series: vec![
                Series {
                    label: "cumulative free gradient".into(),
                    points: cum.iter().enumerate().map(|(k, v)| (k as f64 * data.dt, *v)).collect(),
                },
                Series { label: "c/2".into(), points: vec![(0.0, level), (data.end_time(), level)] },
            ],
            log_y: false,
        },
    ];
    Ok(RunOutput {
        report: json!({ "horizon": horizon, "diagnostics": diag }),
        diagnostics: iteration_rows(&diag),
        fields: vec![
            ("rho0".into(), vec![data.rho0.clone()]),
            ("u0".into(), vector_fields(&data.u0)),
            ("velocity_final".into(), vector_fields(sol.velocity.last())),
        ],
        norms,
        plots,
        failed_checks: Vec::new(),
    })
}

fn density_jump(cfg: &ExperimentConfig) -> Outcome {
    let g = cfg.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let _ = initial_density(cfg, &g, &mut rng);
    let u0 = initial_velocity(cfg, &g, &mut rng);
    let j = &cfg.jump;
    let disc = Disc { center: j.center, radius: j.radius };
    let sigma = cfg.physics.sigma;
    let rho0 = disc.mollified(&g, j.width_cells * g.spacing()).map(|c| 1.0 + sigma * c);
    let config = JumpConfig {
        disc,
        sigma,
        width_cells: j.width_cells,
        markers: j.markers,
        u0: u0.clone(),
        mu: cfg.physics.mu,
        p: cfg.physics.p,
        dt: cfg.time.dt,
        steps: cfg.time.steps,
        settings: cfg.settings(),
    };
    let report = density_jump_experiment(&config).map_err(|e| {
        let data = ProblemData::new(rho0.clone(), u0.clone(), cfg.physics.mu, cfg.physics.p, cfg.time.dt, cfg.time.steps);
        let report = data.map(|d| smallness_report(&d, cfg)).unwrap_or(Value::Null);
        Failure { error: e.into(), report }
    })?;
    let mut norms = Vec::new();
    for (k, t) in report.times.iter().enumerate() {
        norms.push(row(k, *t, "area_drift", report.area_drift[k]));
        norms.push(row(k, *t, "curvature_change", report.curvature_change[k]));
    }
    norms.push(row(0, 0.0, "multiplier_bound", report.multiplier_bound));
    let diagnostics = report.diagnostics.as_ref().map(iteration_rows).unwrap_or_default();
    let plots = vec![
        Plot::Lines {
            name: "area_drift".into(),
            series: vec![Series {
                label: "|Omega_t|/|Omega_0| - 1".into(),
                points: report.times.iter().zip(&report.area_drift).map(|(t, d)| (*t, *d)).collect(),
            }],
            log_y: true,
        },
        Plot::Polygons {
            name: "interface".into(),
            frames: report.frames.iter().map(|f| f.points.clone()).collect(),
            extent: cfg.length(),
        },
    ];
    Ok(RunOutput {
        report: json!({ "jump": report }),
        diagnostics,
        fields: vec![("rho0".into(), vec![rho0]), ("u0".into(), vector_fields(&u0))],
        norms,
        plots,
        failed_checks: Vec::new(),
    })
}

fn cross_validate(cfg: &ExperimentConfig) -> Outcome {
    let (_, data) = problem(cfg)?;
    let settings = cfg.settings();
    let (sol, diag) = solve_global_small(&data, &settings)
        .map_err(|e| Failure { error: e.into(), report: smallness_report(&data, cfg) })?;
    let stride = cfg.sample_every();
    let centers: Vec<usize> = (stride..data.steps).step_by(stride).collect();
    if centers.is_empty() {
        return Err(CliError::config("time.sample_every", "no interior sample times").into());
    }
    let indices: Vec<usize> = centers
        .iter()
        .flat_map(|&c| [c - 1, c, c + 1])
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let snaps: BTreeMap<usize, _> = indices.iter().copied().zip(to_eulerian_at(&sol, &data.rho0, &indices)?).collect();
    let reference =
        reference_eulerian_solve_sampled(&data.rho0, &data.u0, data.mu, data.end_time(), data.dt, stride)
            .map_err(|e| Failure { error: e.into(), report: smallness_report(&data, cfg) })?;
    let mut checks = Checks::default();
    let mut norms = Vec::new();
    let (mut worst_res, mut worst_cross): (f64, f64) = (0.0, 0.0);
    for &c in &centers {
        let triple = [snaps[&(c - 1)].clone(), snaps[&c].clone(), snaps[&(c + 1)].clone()];
        let r = nse_residual(&triple, data.mu)?.max();
        let t = snaps[&c].time;
        norms.push(row(c, t, "residual_mass", r.mass));
        norms.push(row(c, t, "residual_momentum", r.momentum));
        norms.push(row(c, t, "residual_divergence", r.divergence));
        worst_res = worst_res.max(r.mass).max(r.momentum).max(r.divergence);
        let reference_snap = &reference[c / stride];
        let e = &snaps[&c].u;
        let cross = lp_norm(&(&reference_snap.u - e), 2.0) / lp_norm(e, 2.0);
        norms.push(row(c, t, "cross_solver_l2", cross));
        worst_cross = worst_cross.max(cross);
    }
    checks.at_most("max Eulerian residual", worst_res, 1e-3);
    checks.at_most("max cross-solver relative L2", worst_cross, 5e-2);
    let mut out = RunOutput {
        report: json!({ "diagnostics": diag }),
        diagnostics: iteration_rows(&diag),
        plots: vec![Plot::Lines {
            name: "cross_solver".into(),
            series: vec![Series {
                label: "relative L2 difference".into(),
                points: norms.iter().filter(|r| r.quantity == "cross_solver_l2").map(|r| (r.time, r.value)).collect(),
            }],
            log_y: true,
        }],
        fields: vec![
            ("rho0".into(), vec![data.rho0.clone()]),
            ("u0".into(), vector_fields(&data.u0)),
            ("velocity_final".into(), vector_fields(sol.velocity.last())),
        ],
        norms,
        failed_checks: Vec::new(),
    };
    checks.finish(&mut out);
    Ok(out)
}

fn stokes_suite(cfg: &ExperimentConfig) -> Outcome {
    let g = cfg.grid()?;
    let (dt, steps) = (cfg.time.dt, cfg.time.steps);
    let mut norms = Vec::new();
    let mut series = Vec::new();
    let mut ratios = Vec::new();
    let mut div_err: f64 = 0.0;
    for (i, data) in stokes_estimate_suite(&g, cfg.physics.mu, dt, steps, cfg.seed).iter().enumerate() {
        let sol = solve_stokes(data)?;
        let est = verify_estimate_with(data, &sol, cfg.physics.p, cfg.tolerance.cutoff)?;
        let mut pts = Vec::new();
        for (k, u) in sol.velocity.samples().iter().enumerate() {
            let t = k as f64 * dt;
            let l2 = lp_norm(u, 2.0);
            norms.push(row(k, t, format!("problem{i}.velocity_l2"), l2));
            pts.push((t, l2));
            div_err = div_err.max((&divergence(u) - data.g.sample(k)).max_abs());
        }
        norms.push(row(i, 0.0, "estimate_ratio", est.ratio));
        series.push(Series { label: format!("problem {i}"), points: pts });
        ratios.push(est);
    }
    let constant = ratios.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut checks = Checks::default();
    checks.at_most("max |div u - g|", div_err, 1e-10);
    checks.at_most("measured Stokes constant", constant, cfg.tolerance.big_c);
    let mut out = RunOutput {
        report: json!({ "measured_constant": constant, "estimates": ratios }),
        norms,
        plots: vec![Plot::Lines { name: "velocity_l2".into(), series, log_y: true }],
        ..RunOutput::default()
    };
    checks.finish(&mut out);
    Ok(out)
}

fn random_matrix(g: &Grid, size: f64, rng: &mut ChaCha8Rng) -> MatrixField {
    let n = g.dim();
    let raw = MatrixField::new(n, (0..n * n).map(|_| random_band_limited(g, 2, 3, rng)).collect());
    raw.scale(size / raw.max_frobenius())
}

fn identity_suite(cfg: &ExperimentConfig) -> Outcome {
    let g = cfg.grid()?;
    let d = &cfg.data;
    let mut norms = Vec::new();
    let (mut magic, mut div_id, mut det): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..d.count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let map = ShearMap::random(&g, d.flow_amplitude, d.max_wave.min(2), &mut rng);
        let disp = map.displacement(&g, 1.0);
        let state = FlowState::from_displacement(1.0, disp.clone())?;
        let w = random_band_limited_vector(&g, d.max_wave, d.terms, &mut rng);
        let m = magic_divergence_residual(&w, &state)?.relative();
        let h = random_band_limited_vector(&g, d.max_wave, d.terms, &mut rng);
        let lhs = compose(&divergence(&h), &disp)?;
        let rhs = divergence(&state.adjugate.apply(&compose_vector(&h, &disp)?));
        let di = lp_norm(&(&lhs - &rhs), 2.0) / lp_norm(&lhs, 2.0);
        let dd = state.det_drift();
        norms.push(row(i, 0.0, "magic_relative", m));
        norms.push(row(i, 0.0, "divergence_identity_relative", di));
        norms.push(row(i, 0.0, "determinant_drift", dd));
        magic = magic.max(m);
        div_id = div_id.max(di);
        det = det.max(dd);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = random_matrix(&g, 0.5, &mut rng);
    let base = adjugate_expansion_residual(&c)?;
    let adjugate = if g.dim() == 2 {
        base
    } else {
        [0.5, 0.25]
            .iter()
            .map(|&l| adjugate_expansion_residual(&c.scale(l)).map(|r| (r / base / (l * l) - 1.0).abs()))
            .collect::<lagns_core::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max)
    };
    norms.push(row(0, 0.0, "adjugate_expansion", adjugate));
    let a = d.flow_amplitude;
    let shear = Trajectory::from_fn(cfg.time.dt, cfg.time.steps, |t| {
        VectorField::from_fn(&g, |y| [a * (1.0 + t) * y[1].sin(), 0.0, 0.0])
    });
    let liouville = liouville_check(&shear);
    for (k, v) in liouville.iter().enumerate() {
        norms.push(row(k, k as f64 * cfg.time.dt, "liouville_drift", *v));
    }
    let liouville = liouville.iter().cloned().fold(0.0, f64::max);
    let mut checks = Checks::default();
    checks.at_most("magic formula relative residual", magic, 1e-8);
    checks.at_most("divergence identity relative mismatch", div_id, 1e-8);
    checks.at_most("determinant drift of shear maps", det, 1e-8);
    if g.dim() == 2 {
        checks.at_most("adjugate expansion residual (n=2)", adjugate, 1e-12);
    } else {
        checks.at_most("deviation from quadratic adjugate remainder (n=3)", adjugate, 1e-6);
    }
    checks.at_most("Liouville drift of shear velocity", liouville, 1e-10);
    let mut out = RunOutput { report: json!({ "flows": d.count }), norms, ..RunOutput::default() };
    checks.finish(&mut out);
    Ok(out)
}

fn besov_suite(cfg: &ExperimentConfig) -> Outcome {
    let g = cfg.grid()?;
    let n = g.dim();
    let p = cfg.physics.p;
    let k0 = g.k0();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = random_band_limited(&g, cfg.data.max_wave, cfg.data.terms, &mut rng).map(|v| v + 0.5);
    let (lo, hi) = shell_range(&g);
    let target = u.map(|v| v - u.mean());
    let mut norms = Vec::new();
    let mut partition: f64 = 0.0;
    for (name, cutoff) in [("sharp", Cutoff::Sharp), ("smooth", Cutoff::Smooth)] {
        let mut sum = ScalarField::zeros(&g);
        for j in lo..=hi {
            sum = &sum + &dyadic_block_with(&u, j, cutoff)?;
        }
        let r = lp_norm(&(&sum - &target), 2.0) / lp_norm(&target, 2.0);
        norms.push(row(0, 0.0, format!("partition_residual_{name}"), r));
        partition = partition.max(r);
    }
    let idx = velocity_index(cfg);
    let report = besov_norm_with(&u, idx, cfg.tolerance.cutoff);
    for (i, c) in report.contributions.iter().enumerate() {
        norms.push(row(i, 0.0, "shell_contribution", *c));
    }
    // cos(3x + 2y) lies in shell 1.
    let single = ScalarField::from_fn(&g, |x| (k0 * (3.0 * x[0] + 2.0 * x[1])).cos());
    let single_err =
        (besov(&single, idx, Cutoff::Sharp) / (2f64.powf(idx.s) * lp_norm(&single, p)) - 1.0).abs();
    norms.push(row(0, 0.0, "single_shell_error", single_err));
    // Dilation u(x) → u(2x); on the torus the dilate repeats 2^n times, so
    // the whole-space factor is recovered by (2^n)^{−1/p}.
    let wave = ScalarField::from_fn(&g, |x| (k0 * (x[0] + 2.0 * x[1])).cos());
    let dilate = ScalarField::from_fn(&g, |x| (k0 * (2.0 * x[0] + 4.0 * x[1])).cos());
    let ratio = besov(&dilate, idx, Cutoff::Sharp) / besov(&wave, idx, Cutoff::Sharp)
        * 2f64.powf(n as f64).powf(-1.0 / p);
    let scaling = (ratio / 2f64.powf(idx.s - n as f64 / p) - 1.0).abs();
    norms.push(row(0, 0.0, "dyadic_scaling_error", scaling));
    let mut multiplier = Value::Null;
    if n == 2 {
        let j = &cfg.jump;
        let sharp = Disc { center: j.center, radius: j.radius }.indicator(&g).scale(cfg.physics.sigma);
        let bound = multiplier_norm_lower_bound(&sharp, idx, cfg.tolerance.multiplier_trials, cfg.tolerance.multiplier_seed);
        norms.push(row(0, 0.0, "multiplier_bound", bound));
        multiplier = json!(bound);
    }
    let mut checks = Checks::default();
    checks.at_most("partition-of-unity residual", partition, 1e-10);
    checks.at_most("single-shell norm error", single_err, 1e-12);
    checks.at_most("dyadic scaling error", scaling, 0.05);
    let mut out = RunOutput {
        report: json!({ "besov": report, "multiplier_bound": multiplier }),
        norms,
        fields: vec![("sample".into(), vec![u])],
        ..RunOutput::default()
    };
    checks.finish(&mut out);
    Ok(out)
}
