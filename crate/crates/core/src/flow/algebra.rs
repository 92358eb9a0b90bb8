use super::FlowState;
use crate::error::{Error, Result};
use crate::spectral::{divergence, jacobian, lp_norm, point, MatrixField, ScalarField, VectorField};
use crate::trajectory::Trajectory;

fn check_dim(m: &MatrixField) -> Result<usize> {
    match m.dim() {
        n @ (2 | 3) => Ok(n),
        n => Err(Error::UnsupportedDimension(n)),
    }
}

/// Transpose of the cofactor matrix, pointwise.
pub fn adjugate(m: &MatrixField) -> Result<MatrixField> {
    let n = check_dim(m)?;
    Ok(m.map_points(|x| point::adjugate(n, x)))
}

pub fn determinant(m: &MatrixField) -> Result<ScalarField> {
    let n = check_dim(m)?;
    Ok(m.map_to_scalar(|x| point::det(n, x)))
}

/// Direct pointwise inverse through the adjugate.
pub fn pointwise_inverse(m: &MatrixField) -> Result<MatrixField> {
    let n = check_dim(m)?;
    Ok(m.map_points(|x| point::inverse(n, x)))
}

/// Truncated Neumann series for `(Id + C)⁻¹`.
#[derive(Clone, Debug)]
pub struct NeumannInverse {
    /// `Σ_{k <= kmax} (−C)^k`.
    pub inverse: MatrixField,
    /// `sup |DX · inverse − Id|`, which equals `sup |C^{kmax+1}|`.
    pub residual: f64,
    /// `sup |C|` (pointwise Frobenius).
    pub perturbation: f64,
}

pub fn inverse_jacobian_neumann(dx: &MatrixField, kmax: usize) -> Result<NeumannInverse> {
    let n = check_dim(dx)?;
    let perturbation = dx.max_distance_to_identity();
    if perturbation >= 1.0 {
        return Err(Error::Divergent { norm: perturbation });
    }
    let id = point::identity(n);
    let inverse = dx.map_points(|m| {
        let c = point::add(n, m, &id, -1.0);
        let mut term = id;
        let mut sum = id;
        for _ in 0..kmax {
            term = point::mul(n, &term, &c);
            for row in term.iter_mut().take(n) {
                for v in row.iter_mut().take(n) {
                    *v = -*v;
                }
            }
            sum = point::add(n, &sum, &term, 1.0);
        }
        sum
    });
    let residual = dx.matmul(&inverse).max_distance_to_identity();
    Ok(NeumannInverse {
        inverse,
        residual,
        perturbation,
    })
}

/// `sup |Id − adj(Id + C) − (C − tr(C) Id)|`. Zero in two dimensions; in
/// three it is the size of a remainder that is exactly quadratic in `C`.
pub fn adjugate_expansion_residual(c: &MatrixField) -> Result<f64> {
    let n = check_dim(c)?;
    let id = point::identity(n);
    let r = c.map_points(|m| {
        let adj = point::adjugate(n, &point::add(n, &id, m, 1.0));
        let tr = point::trace(n, m);
        let mut out = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = id[i][j] - adj[i][j] - (m[i][j] - tr * id[i][j]);
            }
        }
        out
    });
    Ok(r.max_frobenius())
}

/// Both sides of `div((Id − A) w) = Dw : (Id − A)` and their difference.
#[derive(Clone, Debug)]
pub struct MagicResidual {
    /// `‖div((Id − A) w) − Dw : (Id − A)‖_{L2}`.
    pub residual: f64,
    /// `‖Dw : (Id − A)‖_{L2}`, the natural scale of either side.
    pub scale: f64,
}

impl MagicResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

/// Compares the divergence form and the contraction form
/// (`A : B = Σ A_ij B_ji`) for a volume-preserving flow.
pub fn magic_divergence_residual(w: &VectorField, flow: &FlowState) -> Result<MagicResidual> {
    flow.require_unit_determinant()?;
    let id = MatrixField::identity(w.grid());
    let m = id.lin_comb(1.0, &flow.inverse, -1.0);
    let lhs = divergence(&m.apply(w));
    let rhs = jacobian(w).contract(&m);
    let diff = &lhs - &rhs;
    Ok(MagicResidual {
        residual: lp_norm(&diff, 2.0),
        scale: lp_norm(&rhs, 2.0),
    })
}

/// `sup |det DX(t_k) − 1|` at every sample of `v̄`.
pub fn liouville_check(velocity: &Trajectory<VectorField>) -> Vec<f64> {
    let series = super::displacement_series(velocity);
    series
        .samples()
        .iter()
        .map(|d| {
            let dx = jacobian(d).lin_comb(1.0, &MatrixField::identity(d.grid()), 1.0);
            let n = dx.dim();
            dx.map_to_scalar(|m| point::det(n, m))
                .values()
                .iter()
                .fold(0.0f64, |acc, v| acc.max((v - 1.0).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn neumann_is_exact_for_nilpotent_shear() {
        let g = Grid::periodic(2, 16).unwrap();
        let c = ScalarField::from_fn(&g, |y| 0.4 * y[0].cos());
        let z = ScalarField::zeros(&g);
        let one = ScalarField::constant(&g, 1.0);
        let dx = MatrixField::new(2, vec![one.clone(), c.clone(), z, one]);
        let inv = inverse_jacobian_neumann(&dx, 1).unwrap();
        assert!(inv.residual < 1e-15);
        assert!((inv.inverse.entry(0, 1) + &c).max_abs() < 1e-15);
    }

    #[test]
    fn divergent_series_is_refused() {
        let g = Grid::periodic(2, 8).unwrap();
        let dx = MatrixField::constant(&g, &[[2.5, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]);
        assert!(matches!(
            inverse_jacobian_neumann(&dx, 4),
            Err(Error::Divergent { .. })
        ));
    }
}
