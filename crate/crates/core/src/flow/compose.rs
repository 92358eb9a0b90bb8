use rayon::prelude::*;

use super::{displacement_at, displacement_series, INVERTIBILITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::spectral::{jacobian, point, OffGridEvaluator, ScalarField, VectorField};
use crate::trajectory::Trajectory;

/// Target time step of the inverse-flow integrator.
const INVERSE_FLOW_STEP: f64 = 0.02;

fn check_displacement(d: &VectorField) -> Result<()> {
    let limit = d.grid().length() / 4.0;
    let max = d.max_abs();
    if max > limit {
        Err(Error::DisplacementTooLarge { max, limit })
    } else {
        Ok(())
    }
}

fn target_points(d: &VectorField) -> Vec<[f64; 3]> {
    let grid = d.grid();
    (0..grid.len())
        .map(|i| {
            let mut x = grid.coords(i);
            for (c, slot) in d.components().iter().zip(x.iter_mut()) {
                *slot += c.values()[i];
            }
            x
        })
        .collect()
}

/// `f(x + d(x))` at every grid point `x`.
pub fn compose(f: &ScalarField, d: &VectorField) -> Result<ScalarField> {
    Ok(compose_many(&[f], d)?.pop().expect("one field"))
}

pub fn compose_many(fields: &[&ScalarField], d: &VectorField) -> Result<Vec<ScalarField>> {
    check_displacement(d)?;
    let grid = d.grid();
    let eval = OffGridEvaluator::new(fields);
    Ok(eval
        .eval_many(&target_points(d))
        .into_iter()
        .map(|v| ScalarField::from_values(grid, v))
        .collect())
}

pub fn compose_vector(v: &VectorField, d: &VectorField) -> Result<VectorField> {
    let parts: Vec<&ScalarField> = v.components().iter().collect();
    Ok(VectorField::new(compose_many(&parts, d)?))
}

/// Velocity `−A v̄` of the inverse map, sampled at arbitrary points.
struct InverseVelocity {
    dim: usize,
    eval: OffGridEvaluator,
}

impl InverseVelocity {
    fn at_time(
        velocity: &Trajectory<VectorField>,
        series: &Trajectory<VectorField>,
        t: f64,
    ) -> Result<Self> {
        let d = displacement_at(velocity, series, t)?;
        let c = jacobian(&d);
        let dev = c.max_frobenius();
        if dev > INVERTIBILITY_THRESHOLD {
            return Err(Error::smallness(
                "sup |DX - Id| (inverse flow)",
                dev,
                INVERTIBILITY_THRESHOLD,
            ));
        }
        let v = velocity.at_time(t)?;
        let mut fields: Vec<&ScalarField> = v.components().iter().collect();
        fields.extend(c.entries().iter());
        Ok(InverseVelocity {
            dim: d.dim(),
            eval: OffGridEvaluator::new(&fields),
        })
    }

    fn rates(&self, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let n = self.dim;
        points
            .par_iter()
            .map(|&y| {
                let vals = self.eval.eval(y);
                let mut dx = point::identity(n);
                for i in 0..n {
                    for j in 0..n {
                        dx[i][j] += vals[n + i * n + j];
                    }
                }
                let a = point::inverse(n, &dx);
                let mut v = [0.0; 3];
                v[..n].copy_from_slice(&vals[..n]);
                let r = point::apply(n, &a, &v);
                [-r[0], -r[1], -r[2]]
            })
            .collect()
    }
}

fn axpy(y: &[[f64; 3]], h: f64, k: &[[f64; 3]]) -> Vec<[f64; 3]> {
    y.iter()
        .zip(k)
        .map(|(a, b)| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]])
        .collect()
}

/// Inverse flow `Y(t, ·)` at several increasing times, returned as
/// displacements `Y(t, x) − x`. Integrates `dY/dt = −A(t, Y) v̄(t, Y)` with
/// classical RK4, sampling `v̄` and `DX` between stored times by linear
/// interpolation.
pub fn inverse_flow_series(
    velocity: &Trajectory<VectorField>,
    times: &[f64],
) -> Result<Vec<VectorField>> {
    velocity.require(1)?;
    let grid = velocity.sample(0).grid().clone();
    let series = displacement_series(velocity);
    let mut y: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    let origin = y.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut cached: Option<(f64, InverseVelocity)> = None;
    for &target in times {
        if target < t - 1e-12 {
            return Err(Error::InvalidConfig {
                key: "times".into(),
                reason: "inverse-flow times must increase".into(),
            });
        }
        let span = target - t;
        let steps = (span / INVERSE_FLOW_STEP).ceil() as usize;
        let h = if steps == 0 { 0.0 } else { span / steps as f64 };
        for s in 0..steps {
            let t0 = t + s as f64 * h;
            let start = match cached.take() {
                Some((tc, f)) if (tc - t0).abs() < 1e-14 => f,
                _ => InverseVelocity::at_time(velocity, &series, t0)?,
            };
            let mid = InverseVelocity::at_time(velocity, &series, t0 + 0.5 * h)?;
            let end = InverseVelocity::at_time(velocity, &series, (t0 + h).min(target))?;
            let k1 = start.rates(&y);
            let k2 = mid.rates(&axpy(&y, 0.5 * h, &k1));
            let k3 = mid.rates(&axpy(&y, 0.5 * h, &k2));
            let k4 = end.rates(&axpy(&y, h, &k3));
            for i in 0..y.len() {
                for d in 0..3 {
                    y[i][d] += h / 6.0 * (k1[i][d] + 2.0 * k2[i][d] + 2.0 * k3[i][d] + k4[i][d]);
                }
            }
            cached = Some((t0 + h, end));
        }
        t = target;
        let n = grid.dim();
        out.push(VectorField::new(
            (0..n)
                .map(|d| {
                    ScalarField::from_values(
                        &grid,
                        y.iter().zip(&origin).map(|(a, b)| a[d] - b[d]).collect(),
                    )
                })
                .collect(),
        ));
    }
    Ok(out)
}

/// Inverse flow at one time; see [`inverse_flow_series`].
pub fn inverse_flow(velocity: &Trajectory<VectorField>, t: f64) -> Result<VectorField> {
    Ok(inverse_flow_series(velocity, &[t])?.pop().expect("one time"))
}
