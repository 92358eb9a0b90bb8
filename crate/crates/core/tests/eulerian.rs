use approx::assert_relative_eq;
use lagns_core::eulerian::*;
use lagns_core::lagrangian::{solve_global_small, ProblemData, Settings};
use lagns_core::spectral::{lp_norm, Grid, ScalarField, VectorField};
use lagns_core::trajectory::Pair;
use lagns_core::{Error, Trajectory};

fn grid(n: usize) -> Grid {
    Grid::periodic(2, n).unwrap()
}

fn blob(g: &Grid, amp: f64) -> ScalarField {
    ScalarField::from_fn(g, |x| 1.0 + amp * (-((x[0] - 3.0).powi(2) + (x[1] - 3.2).powi(2))).exp())
}

fn min_max(f: &ScalarField) -> (f64, f64) {
    f.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

#[test]
fn zero_velocity_leaves_everything_in_place() {
    let g = grid(16);
    let rho0 = blob(&g, 0.1);
    let sol = Pair::zeros(&g, 0.1, 4);
    let snaps = to_eulerian(&sol, &rho0).unwrap();
    assert_eq!(snaps.len(), 5);
    for s in &snaps {
        assert!((&s.rho - &rho0).max_abs() < 1e-13);
        assert_eq!(s.u.max_abs(), 0.0);
    }
    let res = nse_residual(&snaps, 1.0).unwrap().max();
    assert_eq!((res.mass, res.momentum, res.divergence), (0.0, 0.0, 0.0));
}

/// Lagrangian velocity of the shear `X = (y1 + s(t) sin y2, y2)`, `s = a(1 − e^{−t})`.
fn shear_pair(g: &Grid, a: f64, dt: f64, steps: usize) -> Pair {
    let v = Trajectory::from_fn(dt, steps, |t| VectorField::from_fn(g, |y| [a * (-t).exp() * y[1].sin(), 0.0, 0.0]));
    let zero = Trajectory::from_fn(dt, steps, |_| VectorField::zeros(g));
    Pair::new(v, zero)
}

#[test]
fn constant_density_is_invariant() {
    let g = grid(16);
    let snaps = to_eulerian(&shear_pair(&g, 0.3, 0.05, 10), &ScalarField::constant(&g, 1.0)).unwrap();
    for s in &snaps {
        assert!(s.rho.map(|r| r - 1.0).max_abs() < 1e-13);
    }
}

#[test]
fn blob_under_shear_matches_closed_form_inverse() {
    let g = grid(32);
    let a = 0.3;
    let (dt, steps) = (1.0 / 64.0, 32);
    let rho0_fn = |y: [f64; 3]| 1.0 + 0.1 * (y[0].cos() + 0.5 * (y[1] + y[0]).sin());
    let rho0 = ScalarField::from_fn(&g, rho0_fn);
    let snaps = to_eulerian(&shear_pair(&g, a, dt, steps), &rho0).unwrap();
    let (lo, hi) = min_max(&rho0);
    for s in &snaps {
        let shift = a * (1.0 - (-s.time).exp());
        let want = ScalarField::from_fn(&g, |x| rho0_fn([x[0] - shift * x[1].sin(), x[1], 0.0]));
        assert!((&s.rho - &want).max_abs() < 1e-6, "t = {}", s.time);
        let u_want = ScalarField::from_fn(&g, |x| a * (-s.time).exp() * x[1].sin());
        assert!((s.u.component(0) - &u_want).max_abs() < 1e-8);
        let (l, h) = min_max(&s.rho);
        assert!(l >= lo - 1e-6 && h <= hi + 1e-6);
        assert_relative_eq!(s.rho.mean(), rho0.mean(), max_relative = 1e-10);
    }
}

fn taylor_green_snaps(g: &Grid, mu: f64, t: f64, h: f64) -> Vec<EulerianSnapshot> {
    [t - h, t, t + h]
        .iter()
        .map(|&s| {
            let (u, grad_p) = taylor_green(g, 0.5, mu, s);
            EulerianSnapshot { time: s, rho: ScalarField::constant(g, 1.0), u, grad_p }
        })
        .collect()
}

#[test]
fn taylor_green_residual_is_second_order_in_time() {
    let g = grid(32);
    let mu = 0.2;
    let r1 = nse_residual(&taylor_green_snaps(&g, mu, 0.5, 0.02), mu).unwrap().max();
    let r2 = nse_residual(&taylor_green_snaps(&g, mu, 0.5, 0.01), mu).unwrap().max();
    assert!(r1.momentum < 1e-3);
    assert_relative_eq!(r1.momentum / r2.momentum, 4.0, max_relative = 0.02);
    assert!(r1.divergence < 1e-12 && r1.mass == 0.0);
}

#[test]
fn residual_needs_three_snapshots() {
    let g = grid(16);
    let snaps = taylor_green_snaps(&g, 1.0, 0.5, 0.1);
    assert!(matches!(nse_residual(&snaps[..2], 1.0), Err(Error::TooFewSnapshots { needed: 3, got: 2 })));
}

#[test]
fn converged_solution_satisfies_the_eulerian_equations() {
    let g = grid(32);
    let a = 0.0005;
    let u0 = VectorField::from_fn(&g, |x| [a * x[1].sin() + 2.0 * a * (x[0] + 2.0 * x[1]).cos(), -a * (x[0] + 2.0 * x[1]).cos(), 0.0]);
    let rho0 = ScalarField::from_fn(&g, |x| 1.0 + 0.02 * x[0].cos() * x[1].sin());
    let data = ProblemData::new(rho0.clone(), u0, 1.0, 2.0, 1e-3, 100).unwrap();
    let (sol, _) = solve_global_small(&data, &Settings::default()).unwrap();
    let snaps = to_eulerian_at(&sol, &rho0, &[49, 50, 51, 98, 99, 100]).unwrap();
    for w in snaps.chunks(3) {
        let r = nse_residual(w, 1.0).unwrap().max();
        assert!(r.mass <= 1e-3 && r.momentum <= 1e-3 && r.divergence <= 1e-3, "{r:?}");
    }
    assert!(snaps.iter().all(|s| s.divergence_ratio() <= 1e-6));
}

#[test]
fn reference_solver_follows_taylor_green_at_first_order() {
    let g = grid(32);
    let mu = 0.5;
    let (u0, _) = taylor_green(&g, 0.5, mu, 0.0);
    let one = ScalarField::constant(&g, 1.0);
    let (exact, _) = taylor_green(&g, 0.5, mu, 0.5);
    let err = |dt: f64| {
        let out = reference_eulerian_solve_sampled(&one, &u0, mu, 0.5, dt, 1000).unwrap();
        let last = out.last().unwrap();
        assert_relative_eq!(last.time, 0.5, max_relative = 1e-12);
        lp_norm(&(&last.u - &exact), 2.0) / lp_norm(&exact, 2.0)
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 0.05);
    assert!((e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
}

#[test]
fn reference_solver_trivial_cases() {
    let g = grid(16);
    let rho0 = blob(&g, 0.1);
    let out = reference_eulerian_solve(&rho0, &VectorField::zeros(&g), 1.0, 0.1, 0.02).unwrap();
    assert_eq!(out.len(), 6);
    for s in &out {
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.rho.values(), rho0.values());
    }
    assert!(matches!(
        reference_eulerian_solve(&blob(&g, 0.5), &VectorField::zeros(&g), 1.0, 0.1, 0.02),
        Err(Error::DensityContrastTooLarge { .. })
    ));
}

#[test]
fn reference_solver_conserves_mass() {
    let g = grid(32);
    let rho0 = blob(&g, 0.1);
    let u0 = VectorField::from_fn(&g, |x| [0.2 * x[1].sin(), 0.1 * x[0].cos(), 0.0]);
    let out = reference_eulerian_solve_sampled(&rho0, &u0, 0.5, 0.2, 0.01, 5).unwrap();
    for s in &out {
        assert_relative_eq!(s.rho.mean(), rho0.mean(), max_relative = 1e-6);
    }
}

#[test]
fn reference_and_lagrangian_solvers_agree() {
    let g = grid(32);
    let a = 0.0005;
    let u0 = VectorField::from_fn(&g, |x| [a * x[1].sin(), a * x[0].cos(), 0.0]);
    let rho0 = ScalarField::from_fn(&g, |x| 1.0 + 0.02 * x[0].cos() * x[1].sin());
    let dt = 1.0 / 256.0;
    let data = ProblemData::new(rho0.clone(), u0.clone(), 1.0, 2.0, dt, 64).unwrap();
    let (sol, _) = solve_global_small(&data, &Settings::default()).unwrap();
    let lag = to_eulerian_at(&sol, &rho0, &[64]).unwrap();
    let reference = reference_eulerian_solve_sampled(&rho0, &u0, 1.0, 0.25, dt / 4.0, 1024).unwrap();
    let e = &lag[0].u;
    let r = &reference.last().unwrap().u;
    assert!(lp_norm(&(r - e), 2.0) <= 5e-2 * lp_norm(e, 2.0));
}

fn jump_config(sigma: f64, u0: VectorField) -> JumpConfig {
    JumpConfig {
        disc: Disc { center: [3.0, 3.2], radius: 1.0 },
        sigma,
        width_cells: 2.0,
        markers: 128,
        u0,
        mu: 1.0,
        p: 2.0,
        dt: 1.0 / 32.0,
        steps: 32,
        settings: Settings { c: 0.1, multiplier_trials: 8, ..Settings::default() },
    }
}

#[test]
fn disc_helpers() {
    let g = grid(64);
    let d = Disc { center: [3.0, 3.2], radius: 1.0 };
    let area = d.indicator(&g).mean() * g.volume();
    assert!((area - std::f64::consts::PI).abs() < 0.05);
    // The erfc profile integrated radially gives π(R² + w²).
    let w = 2.0 * g.spacing();
    let m = d.mollified(&g, w);
    assert_relative_eq!(m.mean() * g.volume(), std::f64::consts::PI * (1.0 + w * w), max_relative = 1e-6);
    let pts = d.markers(256);
    assert_relative_eq!(polygon_area(&pts), std::f64::consts::PI, max_relative = 1e-3);
    assert!(discrete_curvature(&pts).iter().all(|k| (k - 1.0).abs() < 1e-10));
}

#[test]
fn jump_without_flow_keeps_the_domain() {
    let g = grid(32);
    let r = density_jump_experiment(&jump_config(0.05, VectorField::zeros(&g))).unwrap();
    assert!(r.diagnostics.is_none());
    assert!(r.max_area_drift < 1e-12);
    assert!(r.curvature_change.iter().all(|&c| c < 1e-10));
    assert!(r.multiplier_bound > 0.0);
}

#[test]
fn jump_experiment_preserves_area() {
    let g = grid(32);
    let a = 0.0005;
    let u0 = VectorField::from_fn(&g, |x| [a * x[1].sin(), a * x[0].cos(), 0.0]);
    let flat = density_jump_experiment(&jump_config(0.0, u0.clone())).unwrap();
    assert_eq!(flat.multiplier_bound, 0.0);
    assert!(flat.max_area_drift <= 1e-4);
    let r = density_jump_experiment(&jump_config(0.05, u0)).unwrap();
    assert!(r.max_area_drift <= 1e-4);
    assert!(r.diagnostics.unwrap().liouville_drift <= 1e-6);
    assert_relative_eq!(r.mollification_width, 2.0 * g.spacing());
    assert!(r.curvature_change.last().unwrap() < &1e-2);
}

#[test]
fn jump_experiment_rejects_bad_configurations() {
    let g3 = Grid::periodic(3, 8).unwrap();
    assert!(matches!(
        density_jump_experiment(&jump_config(0.05, VectorField::zeros(&g3))),
        Err(Error::UnsupportedDimension(3))
    ));
    let g = grid(16);
    let mut cfg = jump_config(0.05, VectorField::zeros(&g));
    cfg.p = 1.0;
    assert!(matches!(density_jump_experiment(&cfg), Err(Error::InvalidConfig { .. })));
}
