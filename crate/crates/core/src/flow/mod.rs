//! Flow maps `X(t, y) = y + ∫_0^t v̄(τ, y) dτ` built from Lagrangian
//! velocities, with their Jacobians, inverses and adjugates.

mod algebra;
mod compose;
pub mod shear;

pub use algebra::{
    adjugate, adjugate_expansion_residual, determinant, inverse_jacobian_neumann,
    liouville_check, magic_divergence_residual, pointwise_inverse, MagicResidual, NeumannInverse,
};
pub use compose::{compose, compose_many, compose_vector, inverse_flow, inverse_flow_series};

use crate::error::{Error, Result};
use crate::spectral::{jacobian, point, MatrixField, ScalarField, VectorField};
use crate::trajectory::Trajectory;

/// Largest pointwise `|DX − Id|` (Frobenius) for which the flow is treated as
/// invertible.
pub const INVERTIBILITY_THRESHOLD: f64 = 0.5;

/// Determinants may deviate from one by this much before identities that
/// assume volume preservation refuse to run.
pub const UNIT_DETERMINANT_TOLERANCE: f64 = 1e-6;

/// The flow map at one time.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub time: f64,
    /// `X(t, y) − y`.
    pub displacement: VectorField,
    /// `DX = Id + D(displacement)`.
    pub dx: MatrixField,
    /// `A = DX⁻¹`.
    pub inverse: MatrixField,
    pub adjugate: MatrixField,
    pub det: ScalarField,
}

impl FlowState {
    /// Builds the state from a displacement, refusing flows whose Jacobian
    /// strays more than [`INVERTIBILITY_THRESHOLD`] from the identity.
    pub fn from_displacement(time: f64, displacement: VectorField) -> Result<Self> {
        let c = jacobian(&displacement);
        let dx = c.lin_comb(1.0, &MatrixField::identity(displacement.grid()), 1.0);
        Self::from_parts(time, displacement, dx)
    }

    fn from_parts(time: f64, displacement: VectorField, dx: MatrixField) -> Result<Self> {
        let dev = dx.max_distance_to_identity();
        if dev > INVERTIBILITY_THRESHOLD {
            return Err(Error::smallness(
                "sup |DX - Id| (flow invertibility)",
                dev,
                INVERTIBILITY_THRESHOLD,
            ));
        }
        let n = dx.dim();
        let inverse = dx.map_points(|m| point::inverse(n, m));
        let adjugate = dx.map_points(|m| point::adjugate(n, m));
        let det = dx.map_to_scalar(|m| point::det(n, m));
        Ok(FlowState {
            time,
            displacement,
            dx,
            inverse,
            adjugate,
            det,
        })
    }

    /// Identity flow.
    pub fn identity(grid: &crate::spectral::Grid, time: f64) -> Self {
        Self::from_displacement(time, VectorField::zeros(grid)).expect("identity is invertible")
    }

    /// `sup |det DX − 1|`.
    pub fn det_drift(&self) -> f64 {
        self.det.values().iter().fold(0.0, |m, d| m.max((d - 1.0).abs()))
    }

    /// `sup |DX − Id|` (pointwise Frobenius).
    pub fn deviation(&self) -> f64 {
        self.dx.max_distance_to_identity()
    }

    /// Fails with [`Error::DeterminantNotUnit`] if the flow is not volume
    /// preserving within [`UNIT_DETERMINANT_TOLERANCE`].
    pub fn require_unit_determinant(&self) -> Result<()> {
        let deviation = self.det_drift();
        if deviation > UNIT_DETERMINANT_TOLERANCE {
            Err(Error::DeterminantNotUnit {
                deviation,
                tolerance: UNIT_DETERMINANT_TOLERANCE,
            })
        } else {
            Ok(())
        }
    }
}

/// Displacements `∫_0^{t_k} v̄` at every sample time, by the trapezoid rule.
pub fn displacement_series(velocity: &Trajectory<VectorField>) -> Trajectory<VectorField> {
    let dt = velocity.dt();
    let mut out = Vec::with_capacity(velocity.len());
    let mut acc = VectorField::zeros(velocity.sample(0).grid());
    out.push(acc.clone());
    for k in 1..velocity.len() {
        let incr = velocity.sample(k - 1).lin_comb(0.5 * dt, velocity.sample(k), 0.5 * dt);
        acc = acc.lin_comb(1.0, &incr, 1.0);
        out.push(acc.clone());
    }
    Trajectory::new(dt, out)
}

/// Displacement at an arbitrary time `t`, integrating the piecewise-linear
/// interpolant of the samples.
pub fn displacement_at(
    velocity: &Trajectory<VectorField>,
    series: &Trajectory<VectorField>,
    t: f64,
) -> Result<VectorField> {
    let end = velocity.end_time();
    let dt = velocity.dt();
    if t < 0.0 || t > end + 1e-9 * dt {
        return Err(Error::TimeOutOfRange { t, end });
    }
    let s = (t / dt).min(velocity.steps() as f64);
    let k = s.floor() as usize;
    let tau = t - k as f64 * dt;
    if k >= velocity.steps() || tau <= 0.0 {
        return Ok(series.sample(k.min(velocity.steps())).clone());
    }
    let vt = velocity.at_time(t)?;
    let incr = velocity.sample(k).lin_comb(0.5 * tau, &vt, 0.5 * tau);
    Ok(series.sample(k).lin_comb(1.0, &incr, 1.0))
}

/// The flow state of `v̄` at time `t`.
pub fn flow_from_lagrangian_velocity(
    velocity: &Trajectory<VectorField>,
    t: f64,
) -> Result<FlowState> {
    velocity.require(1)?;
    let series = displacement_series(velocity);
    FlowState::from_displacement(t, displacement_at(velocity, &series, t)?)
}

/// Flow states at every sample time of `v̄`.
pub fn flow_sequence(velocity: &Trajectory<VectorField>) -> Result<Vec<FlowState>> {
    velocity.require(1)?;
    let series = displacement_series(velocity);
    series
        .samples()
        .iter()
        .enumerate()
        .map(|(k, d)| FlowState::from_displacement(velocity.time(k), d.clone()))
        .collect()
}

/// `∂_t A` along the flow of `v̄`, `d adj(DX)[Dv̄]` at unit determinant:
/// `det · (tr(A E) A − A E A)` with `E = Dv̄`.
pub fn inverse_time_derivative(flow: &FlowState, velocity: &VectorField) -> MatrixField {
    let e = jacobian(velocity);
    let n = e.dim();
    let a_vals: Vec<&[f64]> = flow.inverse.entries().iter().map(|x| x.values()).collect();
    let e_vals: Vec<&[f64]> = e.entries().iter().map(|x| x.values()).collect();
    let det = flow.det.values();
    MatrixField::from_points(flow.dx.grid(), |p| {
        let mut a = [[0.0; 3]; 3];
        let mut em = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = a_vals[i * n + j][p];
                em[i][j] = e_vals[i * n + j][p];
            }
        }
        let ae = point::mul(n, &a, &em);
        let aea = point::mul(n, &ae, &a);
        let tr = point::trace(n, &ae);
        let mut out = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = det[p] * (tr * a[i][j] - aea[i][j]);
            }
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn translation_has_identity_jacobian() {
        let g = Grid::periodic(2, 16).unwrap();
        let v = Trajectory::from_fn(0.1, 10, |_| VectorField::constant(&g, [0.3, -0.2, 0.0]));
        let f = flow_from_lagrangian_velocity(&v, 1.0).unwrap();
        assert!((f.displacement.component(0).values()[5] - 0.3).abs() < 1e-13);
        assert!(f.deviation() < 1e-13);
        assert!(f.det_drift() < 1e-13);
    }

    #[test]
    fn large_jacobian_is_rejected() {
        let g = Grid::periodic(2, 16).unwrap();
        let v = Trajectory::from_fn(0.1, 10, |_| {
            VectorField::from_fn(&g, |y| [y[1].sin(), 0.0, 0.0])
        });
        assert!(matches!(
            flow_from_lagrangian_velocity(&v, 1.0),
            Err(Error::SmallnessViolated { .. })
        ));
        assert!(flow_from_lagrangian_velocity(&v, 0.3).is_ok());
    }
}
