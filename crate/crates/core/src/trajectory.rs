//! Uniformly sampled time series of fields.

use crate::error::{Error, Result};
use crate::spectral::{MatrixField, ScalarField, VectorField};

/// Fields that can be combined linearly.
pub trait Linear: Clone {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self;
    fn scale(&self, a: f64) -> Self;
}

impl Linear for ScalarField {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        ScalarField::lin_comb(self, a, other, b)
    }
    fn scale(&self, a: f64) -> Self {
        ScalarField::scale(self, a)
    }
}

impl Linear for VectorField {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        VectorField::lin_comb(self, a, other, b)
    }
    fn scale(&self, a: f64) -> Self {
        VectorField::scale(self, a)
    }
}

impl Linear for MatrixField {
    fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        MatrixField::lin_comb(self, a, other, b)
    }
    fn scale(&self, a: f64) -> Self {
        MatrixField::scale(self, a)
    }
}

/// Samples `x_k` taken at `t_k = k · dt`, `k = 0..len`.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    dt: f64,
    samples: Vec<T>,
}

impl<T> Trajectory<T> {
    pub fn new(dt: f64, samples: Vec<T>) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        Trajectory { dt, samples }
    }

    pub fn from_fn(dt: f64, steps: usize, f: impl Fn(f64) -> T) -> Self {
        Trajectory::new(dt, (0..=steps).map(|k| f(k as f64 * dt)).collect())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    /// Number of time steps, `len − 1`.
    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }
    pub fn end_time(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
    pub fn sample(&self, k: usize) -> &T {
        &self.samples[k]
    }
    pub fn samples(&self) -> &[T] {
        &self.samples
    }
    pub fn last(&self) -> &T {
        self.samples.last().expect("empty trajectory")
    }
    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Trajectory<U> {
        Trajectory::new(self.dt, self.samples.iter().map(f).collect())
    }

    pub fn map_indexed<U>(&self, f: impl Fn(usize, &T) -> U) -> Trajectory<U> {
        Trajectory::new(
            self.dt,
            self.samples.iter().enumerate().map(|(k, x)| f(k, x)).collect(),
        )
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.samples.len() < needed {
            Err(Error::EmptyTrajectory {
                needed,
                got: self.samples.len(),
            })
        } else {
            Ok(())
        }
    }
}

impl<T: Linear> Trajectory<T> {
    /// Time derivative by second-order differences: centred inside,
    /// one-sided at the ends. Two samples fall back to a first-order
    /// difference.
    pub fn time_derivative(&self) -> Result<Trajectory<T>> {
        self.require(2)?;
        let n = self.samples.len();
        let dt = self.dt;
        let s = &self.samples;
        if n == 2 {
            let d = s[1].lin_comb(1.0 / dt, &s[0], -1.0 / dt);
            return Ok(Trajectory::new(dt, vec![d.clone(), d]));
        }
        let mut out = Vec::with_capacity(n);
        let first = s[0]
            .lin_comb(-1.5 / dt, &s[1], 2.0 / dt)
            .lin_comb(1.0, &s[2], -0.5 / dt);
        out.push(first);
        for k in 1..n - 1 {
            out.push(s[k + 1].lin_comb(0.5 / dt, &s[k - 1], -0.5 / dt));
        }
        let last = s[n - 1]
            .lin_comb(1.5 / dt, &s[n - 2], -2.0 / dt)
            .lin_comb(1.0, &s[n - 3], 0.5 / dt);
        out.push(last);
        Ok(Trajectory::new(dt, out))
    }

    /// Linear interpolation in time.
    pub fn at_time(&self, t: f64) -> Result<T> {
        self.require(1)?;
        let end = self.end_time();
        if t < -1e-12 * self.dt.max(1.0) || t > end + 1e-9 * self.dt {
            return Err(Error::TimeOutOfRange { t, end });
        }
        let s = (t / self.dt).clamp(0.0, self.steps() as f64);
        let k = (s.floor() as usize).min(self.steps().saturating_sub(1));
        let theta = s - k as f64;
        if self.samples.len() == 1 || theta == 0.0 {
            return Ok(self.samples[k].clone());
        }
        Ok(self.samples[k].lin_comb(1.0 - theta, &self.samples[k + 1], theta))
    }

    pub fn lin_comb(&self, a: f64, other: &Trajectory<T>, b: f64) -> Trajectory<T> {
        assert_eq!(self.len(), other.len(), "trajectories differ in length");
        Trajectory::new(
            self.dt,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| x.lin_comb(a, y, b))
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Trajectory<T> {
        self.map(|x| x.scale(a))
    }
}

/// Velocity and pressure gradient sampled on a shared time grid.
#[derive(Clone, Debug)]
pub struct Pair {
    pub velocity: Trajectory<VectorField>,
    pub pressure_gradient: Trajectory<VectorField>,
}

impl Pair {
    pub fn new(velocity: Trajectory<VectorField>, pressure_gradient: Trajectory<VectorField>) -> Self {
        assert_eq!(velocity.len(), pressure_gradient.len());
        Pair {
            velocity,
            pressure_gradient,
        }
    }

    pub fn zeros(grid: &crate::spectral::Grid, dt: f64, steps: usize) -> Self {
        let z = VectorField::zeros(grid);
        Pair::new(
            Trajectory::new(dt, vec![z.clone(); steps + 1]),
            Trajectory::new(dt, vec![z; steps + 1]),
        )
    }

    pub fn dt(&self) -> f64 {
        self.velocity.dt()
    }

    pub fn lin_comb(&self, a: f64, other: &Pair, b: f64) -> Pair {
        Pair::new(
            self.velocity.lin_comb(a, &other.velocity, b),
            self.pressure_gradient.lin_comb(a, &other.pressure_gradient, b),
        )
    }

    pub fn scale(&self, a: f64) -> Pair {
        Pair::new(self.velocity.scale(a), self.pressure_gradient.scale(a))
    }
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Running trapezoid integral; entry `k` integrates over `[0, t_k]`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * dt * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let g = Grid::periodic(2, 8).unwrap();
        let base = ScalarField::from_fn(&g, |x| x[0].sin());
        let traj = Trajectory::from_fn(0.1, 6, |t| base.scale(t * t));
        let d = traj.time_derivative().unwrap();
        for k in 0..d.len() {
            let want = 2.0 * traj.time(k);
            assert!((d.sample(k) - &base.scale(want)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_matches_linear_integrand() {
        let v: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        assert!((trapezoid(&v, 0.1) - 0.5).abs() < 1e-14);
        assert!((cumulative_trapezoid(&v, 0.1)[10] - 0.5).abs() < 1e-14);
    }
}
