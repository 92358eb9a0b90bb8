//! Experiment configuration: one TOML or JSON file per run.
//!
//! A manifest written by a previous run is also accepted; its embedded
//! configuration is used.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lagns_core::besov::Cutoff;
use lagns_core::lagrangian::Settings;
use lagns_core::{Grid, GridSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    IdentitySuite,
    StokesSuite,
    GlobalSmall,
    LocalLarge,
    DensityJump,
    CrossValidate,
    BesovSuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::IdentitySuite => "identity-suite",
            Kind::StokesSuite => "stokes-suite",
            Kind::GlobalSmall => "global-small",
            Kind::LocalLarge => "local-large",
            Kind::DensityJump => "density-jump",
            Kind::CrossValidate => "cross-validate",
            Kind::BesovSuite => "besov-suite",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Seed of the generated data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    #[serde(default)]
    pub jump: JumpSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("lagns-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Box side; `2π` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub steps: usize,
    /// Stride between sampled times in reports; `0` picks `steps / 4`.
    pub sample_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 1.0 / 64.0, steps: 64, sample_every: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub mu: f64,
    pub p: f64,
    /// Density jump across the disc boundary.
    pub sigma: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig { mu: 1.0, p: 2.0, sigma: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Divergence-free band-limited field with random modes.
    Random,
    /// `(a sin y, 0)`, a single heat mode.
    Shear,
    TaylorGreen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub profile: Profile,
    /// `‖u0‖_{Ḃ^{n/p−1}_{p,1}}` of the generated initial velocity.
    pub u0_norm: f64,
    /// `sup |ρ0 − 1|` of the generated density.
    pub rho_contrast: f64,
    pub max_wave: i32,
    pub terms: usize,
    /// Members of a suite (identity and Stokes experiments).
    pub count: usize,
    /// Amplitude of the shear maps in the identity suite.
    pub flow_amplitude: f64,
    /// Relative size of an extra random velocity added to `u0`; used to
    /// build perturbed pairs for stability measurements.
    pub perturbation: f64,
    pub perturbation_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            profile: Profile::Random,
            u0_norm: 0.005,
            rho_contrast: 0.01,
            max_wave: 3,
            terms: 4,
            count: 10,
            flow_amplitude: 0.05,
            perturbation: 0.0,
            perturbation_seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub c: f64,
    pub big_c: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub outer_max: usize,
    pub strict: bool,
    pub enforce_smallness: bool,
    pub cutoff: Cutoff,
    pub multiplier_trials: usize,
    /// Seed of the multiplier-norm estimator, independent of the data seed.
    pub multiplier_seed: u64,
    pub max_halvings: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let s = Settings::default();
        ToleranceConfig {
            c: s.c,
            big_c: s.big_c,
            inner_tol: s.inner_tol,
            inner_max: s.inner_max,
            outer_tol: s.outer_tol,
            outer_max: s.outer_max,
            strict: s.strict,
            enforce_smallness: s.enforce_smallness,
            cutoff: s.cutoff,
            multiplier_trials: s.multiplier_trials,
            multiplier_seed: s.seed,
            max_halvings: s.max_halvings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpSection {
    pub center: [f64; 2],
    pub radius: f64,
    /// Mollification width in grid spacings.
    pub width_cells: f64,
    pub markers: usize,
}

impl Default for JumpSection {
    fn default() -> Self {
        JumpSection { center: [PI, PI], radius: 1.0, width_cells: 2.0, markers: 256 }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::config(key, reason)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Reads a TOML or JSON config, or the `config` member of a manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let cfg = if is_json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(&toml_key(&e).unwrap_or_else(|| "config".into()), e.message()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        let value = match value.get("config") {
            Some(inner) if value.get("tool").and_then(|t| t.as_str()) == Some("lagns") => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| bad("config", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field before any computation, naming the first
    /// offending key.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.dim == 2 || g.dim == 3) {
            return Err(bad("grid.dim", format!("must be 2 or 3, got {}", g.dim)));
        }
        if self.kind == Kind::DensityJump && g.dim != 2 {
            return Err(bad("grid.dim", "the density-jump experiment is two-dimensional"));
        }
        if g.n < 8 || !g.n.is_power_of_two() {
            return Err(bad("grid.N", format!("must be a power of two >= 8, got {}", g.n)));
        }
        if let Some(l) = g.length {
            positive("grid.length", l)?;
        }
        positive("time.dt", self.time.dt)?;
        if self.time.steps < 2 {
            return Err(bad("time.steps", "need at least two steps"));
        }
        if self.time.sample_every > self.time.steps {
            return Err(bad("time.sample_every", "larger than the number of steps"));
        }
        positive("physics.mu", self.physics.mu)?;
        let p = self.physics.p;
        if !(p >= 1.0 && p < 2.0 * g.dim as f64) {
            return Err(bad("physics.p", format!("need 1 <= p < 2n, got {p}")));
        }
        if !(self.physics.sigma.is_finite() && self.physics.sigma.abs() < 1.0) {
            return Err(bad("physics.sigma", "need |sigma| < 1 so the density stays positive"));
        }
        let d = &self.data;
        if !(d.u0_norm.is_finite() && d.u0_norm >= 0.0) {
            return Err(bad("data.u0_norm", "must be finite and nonnegative"));
        }
        if !(d.rho_contrast.is_finite() && (0.0..1.0).contains(&d.rho_contrast)) {
            return Err(bad("data.rho_contrast", "need 0 <= contrast < 1"));
        }
        if d.max_wave < 1 || 3 * d.max_wave as usize >= g.n {
            return Err(bad("data.max_wave", format!("need 1 <= max_wave < N/3, got {}", d.max_wave)));
        }
        if d.terms == 0 {
            return Err(bad("data.terms", "need at least one mode"));
        }
        if d.count == 0 {
            return Err(bad("data.count", "need at least one member"));
        }
        positive("data.flow_amplitude", d.flow_amplitude)?;
        if !(d.perturbation.is_finite() && d.perturbation >= 0.0) {
            return Err(bad("data.perturbation", "must be finite and nonnegative"));
        }
        let t = &self.tolerance;
        positive("tolerance.c", t.c)?;
        positive("tolerance.big_c", t.big_c)?;
        positive("tolerance.inner_tol", t.inner_tol)?;
        positive("tolerance.outer_tol", t.outer_tol)?;
        if t.inner_max == 0 || t.outer_max == 0 {
            return Err(bad("tolerance.outer_max", "iteration caps must be positive"));
        }
        if t.multiplier_trials == 0 {
            return Err(bad("tolerance.multiplier_trials", "need at least one trial"));
        }
        if self.kind == Kind::DensityJump {
            if p <= 1.0 {
                return Err(bad("physics.p", "the density-jump experiment needs p > n - 1"));
            }
            let j = &self.jump;
            positive("jump.radius", j.radius)?;
            if j.radius >= self.length() / 2.0 {
                return Err(bad("jump.radius", "the disc must fit in the box"));
            }
            positive("jump.width_cells", j.width_cells)?;
            if j.markers < 8 {
                return Err(bad("jump.markers", "need at least 8 markers"));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.grid.length.unwrap_or(2.0 * PI)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(GridSpec { dim: self.grid.dim, points: self.grid.n, length: self.length() })?)
    }

    pub fn settings(&self) -> Settings {
        let t = &self.tolerance;
        Settings {
            c: t.c,
            big_c: t.big_c,
            inner_tol: t.inner_tol,
            inner_max: t.inner_max,
            outer_tol: t.outer_tol,
            outer_max: t.outer_max,
            strict: t.strict,
            enforce_smallness: t.enforce_smallness,
            cutoff: t.cutoff,
            multiplier_trials: t.multiplier_trials,
            seed: t.multiplier_seed,
            max_halvings: t.max_halvings,
        }
    }

    pub fn sample_every(&self) -> usize {
        match self.time.sample_every {
            0 => (self.time.steps / 4).max(1),
            s => s,
        }
    }
}

/// Dotted path of the key a TOML error points at, when it can be recovered
/// from the span.
fn toml_key(e: &toml::de::Error) -> Option<String> {
    let msg = e.message();
    // "unknown field `x`" and "missing field `x`"
    let start = msg.find('`')?;
    let end = msg[start + 1..].find('`')? + start + 1;
    Some(msg[start + 1..end].to_string())
}
