use approx::assert_relative_eq;
use lagns_core::besov::{besov, BesovIndex, Cutoff};
use lagns_core::flow::shear::{random_band_limited, random_band_limited_vector, Shear, ShearMap, ShearTerm};
use lagns_core::flow::*;
use lagns_core::spectral::{divergence, jacobian, point, Grid, MatrixField, PointMatrix, ScalarField, VectorField};
use lagns_core::trajectory::trapezoid;
use lagns_core::{Error, Trajectory};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> Grid {
    Grid::periodic(2, n).unwrap()
}

fn shear_velocity(g: &Grid, gamma: f64) -> VectorField {
    VectorField::from_fn(g, |y| [gamma * y[1].sin(), 0.0, 0.0])
}

/// Gauss–Jordan inverse with partial pivoting and the determinant from the
/// same elimination; independent of the cofactor formulas under test.
fn gauss_jordan(n: usize, m: &PointMatrix) -> (PointMatrix, f64) {
    let mut a = *m;
    let mut inv = point::identity(n);
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let d = a[col][col];
        det *= d;
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    (inv, det)
}

fn random_matrix_field(g: &Grid, size: f64, rng: &mut impl Rng) -> MatrixField {
    let n = g.dim();
    let raw = MatrixField::new(n, (0..n * n).map(|_| random_band_limited(g, 2, 3, rng)).collect());
    raw.scale(size / raw.max_frobenius())
}

#[test]
fn constant_velocity_translates() {
    let g = grid(32);
    let c = [0.3, -0.2, 0.0];
    let v = Trajectory::from_fn(0.1, 10, |_| VectorField::constant(&g, c));
    let f = flow_from_lagrangian_velocity(&v, 0.7).unwrap();
    assert!((f.displacement.component(0).mean() - 0.21).abs() < 1e-14);
    assert!((f.displacement.component(1).mean() + 0.14).abs() < 1e-14);
    assert_eq!(f.deviation(), 0.0);
    assert_eq!(f.inverse.max_distance_to_identity(), 0.0);
    assert!(f.det_drift() < 1e-15);
}

#[test]
fn steady_shear_closed_form() {
    let g = grid(32);
    let gamma = 0.4;
    let v = Trajectory::from_fn(0.05, 20, |_| shear_velocity(&g, gamma));
    for t in [0.0, 0.35, 1.0] {
        let f = flow_from_lagrangian_velocity(&v, t).unwrap();
        let cos = ScalarField::from_fn(&g, |y| t * gamma * y[1].cos());
        assert!((f.dx.entry(0, 1) - &cos).max_abs() < 1e-12);
        assert!((f.inverse.entry(0, 1) + &cos).max_abs() < 1e-12);
        assert!(f.dx.entry(1, 0).max_abs() < 1e-12);
        assert!((f.dx.entry(0, 0).map(|x| x - 1.0)).max_abs() < 1e-12);
        assert!(f.det_drift() < 1e-12);
    }
}

#[test]
fn linear_in_time_velocity_gives_half_t_squared() {
    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_band_limited_vector(&g, 2, 2, &mut rng).scale(0.1);
    let v = Trajectory::from_fn(0.1, 10, |t| w.scale(t));
    for t in [0.3, 0.55, 1.0] {
        let f = flow_from_lagrangian_velocity(&v, t).unwrap();
        assert!((&f.displacement - &w.scale(0.5 * t * t)).max_abs() < 1e-14);
    }
}

#[test]
fn quadratic_in_time_velocity_converges_at_second_order() {
    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w = random_band_limited_vector(&g, 2, 2, &mut rng).scale(0.1);
    let errors: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&steps| {
            let v = Trajectory::from_fn(1.0 / steps as f64, steps, |t| w.scale(t * t));
            let f = flow_from_lagrangian_velocity(&v, 1.0).unwrap();
            (&f.displacement - &w.scale(1.0 / 3.0)).max_abs()
        })
        .collect();
    assert_relative_eq!(errors[0] / errors[1], 4.0, max_relative = 1e-6);
    assert_relative_eq!(errors[1] / errors[2], 4.0, max_relative = 1e-6);
}

#[test]
fn flow_outside_time_span_or_too_large_is_rejected() {
    let g = grid(16);
    let v = Trajectory::from_fn(0.1, 10, |_| shear_velocity(&g, 0.4));
    assert!(matches!(flow_from_lagrangian_velocity(&v, 1.5), Err(Error::TimeOutOfRange { .. })));
    let fast = Trajectory::from_fn(0.1, 10, |_| shear_velocity(&g, 2.0));
    assert!(matches!(flow_from_lagrangian_velocity(&fast, 1.0), Err(Error::SmallnessViolated { .. })));
}

#[test]
fn neumann_examples() {
    let g = grid(16);
    let id = MatrixField::identity(&g);
    for kmax in [0, 1, 5] {
        let r = inverse_jacobian_neumann(&id, kmax).unwrap();
        assert_eq!(r.inverse.max_distance_to_identity(), 0.0);
        assert_eq!(r.residual, 0.0);
    }
    let c = ScalarField::from_fn(&g, |y| 0.6 * y[0].sin());
    let zero = ScalarField::zeros(&g);
    let nil = MatrixField::new(2, vec![zero.clone(), c.clone(), zero.clone(), zero.clone()]);
    let dx = id.lin_comb(1.0, &nil, 1.0);
    let r = inverse_jacobian_neumann(&dx, 1).unwrap();
    assert!(r.residual < 1e-15);
    assert!(r.inverse.lin_comb(1.0, &id.lin_comb(1.0, &nil, -1.0), -1.0).max_frobenius() < 1e-15);
    let big = id.lin_comb(1.0, &nil, 2.0);
    assert!(matches!(inverse_jacobian_neumann(&big, 3), Err(Error::Divergent { .. })));
}

#[test]
fn neumann_residual_decays_geometrically() {
    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = random_matrix_field(&g, 0.3, &mut rng);
    let dx = MatrixField::identity(&g).lin_comb(1.0, &c, 1.0);
    let res: Vec<f64> = (0..8).map(|k| inverse_jacobian_neumann(&dx, k).unwrap().residual).collect();
    for w in res.windows(2) {
        assert!(w[1] / w[0] <= 0.35, "{res:?}");
    }
}

#[test]
fn neumann_agrees_with_direct_inverse() {
    let g = Grid::periodic(3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = random_matrix_field(&g, 0.25, &mut rng);
    let dx = MatrixField::identity(&g).lin_comb(1.0, &c, 1.0);
    let mut k = 0;
    let r = loop {
        let r = inverse_jacobian_neumann(&dx, k).unwrap();
        if r.residual < 1e-9 {
            break r;
        }
        k += 1;
    };
    let direct = pointwise_inverse(&dx).unwrap();
    assert!(r.inverse.lin_comb(1.0, &direct, -1.0).max_frobenius() < 1e-8);
}

#[test]
fn adjugate_examples() {
    let g = grid(8);
    assert_eq!(adjugate(&MatrixField::identity(&g)).unwrap().max_distance_to_identity(), 0.0);
    let m = [[1.5, -0.3, 0.0], [2.0, 0.7, 0.0], [0.0; 3]];
    let a = adjugate(&MatrixField::constant(&g, &m)).unwrap().at(5);
    assert_eq!([a[0][0], a[0][1], a[1][0], a[1][1]], [0.7, 0.3, -2.0, 1.5]);

    let g3 = Grid::periodic(3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let mut m = [[0.0; 3]; 3];
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.random_range(-2.0..2.0);
            }
        }
        let (inv, det) = gauss_jordan(3, &m);
        let adj = adjugate(&MatrixField::constant(&g3, &m)).unwrap().at(0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((adj[i][j] - det * inv[i][j]).abs() < 1e-12 * (1.0 + det.abs()));
            }
        }
    }
}

#[test]
fn adjugate_times_matrix_is_determinant() {
    let g = Grid::periodic(3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = MatrixField::identity(&g).lin_comb(1.0, &random_matrix_field(&g, 0.8, &mut rng), 1.0);
    let adj = adjugate(&m).unwrap();
    let det = determinant(&m).unwrap();
    let prod = m.matmul(&adj);
    for i in 0..g.len() {
        let p = prod.at(i);
        let d = det.values()[i];
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { d } else { 0.0 };
                assert!((p[r][c] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn adjugate_expansion_is_linear_in_two_dimensions() {
    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_matrix_field(&g, 0.9, &mut rng);
    assert!(adjugate_expansion_residual(&c).unwrap() < 1e-12);
    assert_eq!(adjugate_expansion_residual(&MatrixField::zeros(&g)).unwrap(), 0.0);
}

#[test]
fn adjugate_remainder_is_quadratic_in_three_dimensions() {
    let g = Grid::periodic(3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = random_matrix_field(&g, 0.5, &mut rng);
    let base = adjugate_expansion_residual(&c).unwrap();
    assert!(base > 1e-3);
    for lambda in [0.5, 0.25] {
        let r = adjugate_expansion_residual(&c.scale(lambda)).unwrap();
        assert_relative_eq!(r / base, lambda * lambda, max_relative = 1e-6);
    }
    assert_eq!(adjugate_expansion_residual(&MatrixField::zeros(&g)).unwrap(), 0.0);
}

#[test]
fn magic_formula_for_identity_and_constant_shear() {
    let g = grid(32);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = random_band_limited_vector(&g, 4, 4, &mut rng);
    let r = magic_divergence_residual(&w, &FlowState::identity(&g, 0.0)).unwrap();
    assert_eq!(r.residual, 0.0);

    // Linear displacement y1 += m y2 is not periodic, so build the state by
    // hand: DX = Id + M with M = [[0, m], [0, 0]].
    let m = 0.3;
    let mut f = FlowState::identity(&g, 0.0);
    f.dx = MatrixField::constant(&g, &[[1.0, m, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
    f.inverse = MatrixField::constant(&g, &[[1.0, -m, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
    let r = magic_divergence_residual(&w, &f).unwrap();
    assert!(r.residual <= 1e-10 * r.scale.max(1.0), "{r:?}");
}

#[test]
fn magic_formula_along_volume_preserving_flow() {
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let map = ShearMap::random(&g, 0.05, 2, &mut rng);
    let f = FlowState::from_displacement(1.0, map.displacement(&g, 1.0)).unwrap();
    assert!(f.det_drift() < 1e-6);
    let w = random_band_limited_vector(&g, 3, 4, &mut rng);
    let r = magic_divergence_residual(&w, &f).unwrap();
    let w_l2 = lagns_core::spectral::lp_norm(&w, 2.0);
    assert!(r.residual <= 1e-8 * w_l2, "{r:?}");
}

#[test]
fn magic_formula_refuses_compressible_flows() {
    let g = grid(32);
    let d = VectorField::from_fn(&g, |y| [0.2 * y[0].sin(), 0.0, 0.0]);
    let f = FlowState::from_displacement(0.0, d).unwrap();
    let w = VectorField::constant(&g, [1.0, 0.0, 0.0]);
    assert!(matches!(magic_divergence_residual(&w, &f), Err(Error::DeterminantNotUnit { .. })));
}

#[test]
fn liouville_for_zero_and_shear() {
    let g = grid(32);
    let z = Trajectory::from_fn(0.1, 10, |_| VectorField::zeros(&g));
    assert!(liouville_check(&z).iter().all(|&d| d == 0.0));
    let v = Trajectory::from_fn(0.1, 10, |t| shear_velocity(&g, 0.3 * (1.0 + t)));
    let drift = liouville_check(&v);
    assert_eq!(drift.len(), 11);
    assert!(drift.iter().all(|&d| d < 1e-10));
}

#[test]
fn divergence_transforms_through_the_adjugate() {
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let map = ShearMap::single(
        &g,
        Shear { axis: 0, terms: vec![ShearTerm { amplitude: 0.1, wave: [0, 1, 0], phase: 0.4 }] },
    );
    let disp = map.displacement(&g, 1.0);
    let f = FlowState::from_displacement(1.0, disp.clone()).unwrap();
    let h = random_band_limited_vector(&g, 2, 3, &mut rng);
    let h_bar = compose_vector(&h, &disp).unwrap();
    let lhs = compose(&divergence(&h), &disp).unwrap();
    let rhs = divergence(&f.adjugate.apply(&h_bar));
    let scale = h.max_abs();
    assert!((&lhs - &rhs).max_abs() <= 1e-8 * scale, "{}", (&lhs - &rhs).max_abs());
}

#[test]
fn transposed_adjugate_times_inverse_stays_near_identity() {
    // ‖adj(DX)ᵀ A − Id‖ / ∫‖Dv̄‖ in the algebra norm, for shrinking data.
    let g = grid(32);
    let idx = BesovIndex::algebra(2, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w = random_band_limited_vector(&g, 2, 3, &mut rng);
    let ks: Vec<f64> = [0.02, 0.04, 0.08]
        .iter()
        .map(|&a| {
            let v = Trajectory::from_fn(0.05, 20, |t| w.scale(a * (1.0 + t)));
            let f = flow_from_lagrangian_velocity(&v, 1.0).unwrap();
            let m = f.adjugate.transpose().matmul(&f.inverse).lin_comb(1.0, &MatrixField::identity(&g), -1.0);
            let grads: Vec<f64> = v.samples().iter().map(|s| besov(&jacobian(s), idx, Cutoff::Sharp)).collect();
            besov(&m, idx, Cutoff::Sharp) / trapezoid(&grads, v.dt())
        })
        .collect();
    for k in &ks {
        assert!(k.is_finite() && *k < 10.0, "{ks:?}");
    }
    assert!((ks[0] / ks[2] - 1.0).abs() < 0.5, "{ks:?}");
}

#[test]
fn inverse_difference_is_controlled_by_velocity_difference() {
    let g = grid(32);
    let idx = BesovIndex::algebra(2, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let a = random_band_limited_vector(&g, 2, 3, &mut rng).scale(0.03);
        let b = random_band_limited_vector(&g, 2, 3, &mut rng).scale(0.003);
        let v1 = Trajectory::from_fn(0.05, 20, |_| a.clone());
        let v2 = Trajectory::from_fn(0.05, 20, |t| a.lin_comb(1.0, &b, t));
        let f1 = flow_from_lagrangian_velocity(&v1, 1.0).unwrap();
        let f2 = flow_from_lagrangian_velocity(&v2, 1.0).unwrap();
        let num = besov(&f2.inverse.lin_comb(1.0, &f1.inverse, -1.0), idx, Cutoff::Sharp);
        let dv = v2.lin_comb(1.0, &v1, -1.0);
        let grads: Vec<f64> = dv.samples().iter().map(|s| besov(&jacobian(s), idx, Cutoff::Sharp)).collect();
        worst = worst.max(num / trapezoid(&grads, dv.dt()));
    }
    assert!(worst.is_finite() && worst < 5.0, "{worst}");
}

#[test]
fn inverse_flow_of_translation() {
    let g = grid(16);
    let v = Trajectory::from_fn(0.05, 10, |_| VectorField::constant(&g, [0.4, -0.1, 0.0]));
    let y = inverse_flow(&v, 0.5).unwrap();
    assert!((y.component(0).map(|d| d + 0.2)).max_abs() < 1e-12);
    assert!((y.component(1).map(|d| d - 0.05)).max_abs() < 1e-12);
}

#[test]
fn inverse_flow_of_shear() {
    let g = grid(32);
    let gamma = 0.3;
    let v = Trajectory::from_fn(0.01, 50, |_| shear_velocity(&g, gamma));
    let y = inverse_flow(&v, 0.5).unwrap();
    let expected = ScalarField::from_fn(&g, |x| -0.5 * gamma * x[1].sin());
    assert!((y.component(0) - &expected).max_abs() < 1e-9);
    assert!(y.component(1).max_abs() < 1e-14);
}

#[test]
fn inverse_flow_round_trip() {
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = random_band_limited_vector(&g, 2, 3, &mut rng);
    let b = random_band_limited_vector(&g, 2, 3, &mut rng);
    let t_end = 0.25;
    let dt = 1e-3;
    let steps = (t_end / dt) as usize;
    let v = Trajectory::from_fn(dt, steps, |t| a.lin_comb(0.2, &b, 0.3 * (4.0 * t).sin()));
    let y = inverse_flow(&v, t_end).unwrap();
    let f = flow_from_lagrangian_velocity(&v, t_end).unwrap();
    // X(Y(x)) − x = d_Y(x) + d_X(x + d_Y(x)).
    let back = compose_vector(&f.displacement, &y).unwrap();
    let err = (&back + &y).max_abs();
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn compose_examples() {
    let g = grid(32);
    let f = ScalarField::from_fn(&g, |x| x[0].sin() + 0.2 * (x[0] - 2.0 * x[1]).cos());
    let same = compose(&f, &VectorField::zeros(&g)).unwrap();
    assert!((&same - &f).max_abs() < 1e-12);

    let s = ScalarField::from_fn(&g, |x| x[0].sin());
    let a = 0.37;
    let shifted = compose(&s, &VectorField::constant(&g, [a, 0.0, 0.0])).unwrap();
    let expected = ScalarField::from_fn(&g, |x| (x[0] + a).sin());
    assert!((&shifted - &expected).max_abs() < 1e-10);

    let big = VectorField::constant(&g, [g.length() / 3.0, 0.0, 0.0]);
    assert!(matches!(compose(&f, &big), Err(Error::DisplacementTooLarge { .. })));
}

#[test]
fn compose_with_inverse_map_recovers_field() {
    let g = grid(32);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let d = random_band_limited_vector(&g, 2, 2, &mut rng).scale(0.05);
    let f = random_band_limited(&g, 3, 4, &mut rng);
    // Inverse displacement e with x + e + d(x + e) = x, by fixed point.
    let mut e = d.scale(-1.0);
    for _ in 0..60 {
        e = compose_vector(&d, &e).unwrap().scale(-1.0);
    }
    let there = compose(&f, &d).unwrap();
    let back = compose(&there, &e).unwrap();
    assert!((&back - &f).max_abs() <= 1e-6 * f.max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shear_compositions_preserve_volume(seed in 0u64..1000, amp in 0.01f64..0.08) {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = ShearMap::random(&g, amp, 2, &mut rng);
        let n = 2;
        for i in (0..g.len()).step_by(37) {
            let j = map.jacobian_at(g.coords(i), 1.0);
            prop_assert!((point::det(n, &j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_state_invariants_hold(seed in 0u64..1000, amp in 0.01f64..0.2) {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_band_limited_vector(&g, 2, 3, &mut rng);
        let d = d.scale(amp / jacobian(&d).max_frobenius());
        let f = FlowState::from_displacement(0.5, d).unwrap();
        prop_assert!(f.dx.matmul(&f.inverse).max_distance_to_identity() < 1e-8);
        let scaled = f.inverse.map_entries(|e| e.pointwise_mul(&f.det));
        prop_assert!(scaled.lin_comb(1.0, &f.adjugate, -1.0).max_frobenius() < 1e-8);
    }
}
