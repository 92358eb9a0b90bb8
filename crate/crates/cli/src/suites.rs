//! Named batches of runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::compare::{compare, Comparison};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const SUITES: [&str; 3] = ["smoke", "sigma-sweep", "stability"];

#[derive(Clone, Debug, Serialize)]
pub struct MemberResult {
    pub name: String,
    pub dir: PathBuf,
    pub exit_code: i32,
    pub error: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub members: Vec<MemberResult>,
    pub comparisons: Vec<Comparison>,
    pub exit_code: i32,
}

fn cfg(text: &str) -> ExperimentConfig {
    let c = ExperimentConfig::from_toml(text).expect("built-in suite config parses");
    c.validate().expect("built-in suite config is valid");
    c
}

/// The configs of a suite, by member name.
pub fn members(name: &str) -> Result<Vec<(String, ExperimentConfig)>> {
    let list = match name {
        "smoke" => vec![
            ("identity".into(), cfg("kind = \"identity-suite\"\n[grid]\nN = 32\n")),
            ("besov".into(), cfg("kind = \"besov-suite\"\n[grid]\nN = 64\n")),
            (
                "stokes".into(),
                cfg("kind = \"stokes-suite\"\n[grid]\nN = 32\n[time]\ndt = 0.03125\nsteps = 32\n"),
            ),
            (
                "global-small".into(),
                cfg("kind = \"global-small\"\n[grid]\nN = 32\n[time]\ndt = 0.03125\nsteps = 32\n"),
            ),
        ],
        "sigma-sweep" => [0.0125, 0.025, 0.05, 0.1, 0.2]
            .iter()
            .map(|s| {
                let text = format!(
                    "kind = \"density-jump\"\n[grid]\nN = 32\n[time]\ndt = 0.03125\nsteps = 32\n\
                     [physics]\nsigma = {s}\n[data]\nu0_norm = 0.002\n[tolerance]\nc = 0.1\n"
                );
                (format!("sigma-{s}"), cfg(&text))
            })
            .collect(),
        "stability" => [32, 64]
            .iter()
            .flat_map(|n| {
                [("base", 0.0), ("perturbed", 0.01)].map(|(tag, eps)| {
                    let text = format!(
                        "kind = \"global-small\"\n[grid]\nN = {n}\n[time]\ndt = 0.03125\nsteps = 32\n\
                         [data]\nperturbation = {eps}\n"
                    );
                    (format!("n{n}-{tag}"), cfg(&text))
                })
            })
            .collect(),
        other => return Err(CliError::UnknownSuite(other.into())),
    };
    Ok(list)
}

/// Runs every member of `name` under `out`, `jobs` at a time.
pub fn run_suite(name: &str, out: &Path, jobs: usize, threads: usize) -> Result<SuiteSummary> {
    let list = members(name)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::io("thread pool", e))?;
    let results: Vec<Result<MemberResult>> = pool.install(|| {
        list.par_iter()
            .map(|(member, c)| {
                let dir = out.join(member);
                let (exit_code, error) = crate::run(c, &dir, threads)?;
                Ok(MemberResult { name: member.clone(), dir, exit_code, error: error.map(|e| e.to_json()) })
            })
            .collect()
    });
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    if name == "stability" {
        for pair in members.chunks(2) {
            if pair.iter().all(|m| m.exit_code == 0) {
                comparisons.push(compare(&pair[0].dir, &pair[1].dir)?);
            }
        }
    }
    // The sweep is meant to cross the smallness threshold, so refusals there
    // are results rather than failures.
    let smallness = crate::error::exit_code(lagns_core::ErrorClass::Smallness);
    let exit_code = members
        .iter()
        .map(|m| m.exit_code)
        .find(|&c| c != 0 && !(name == "sigma-sweep" && c == smallness))
        .unwrap_or(0);
    let summary = SuiteSummary { suite: name.into(), members, comparisons, exit_code };
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&json!(summary)).map_err(|e| CliError::io("summary.json", e))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(summary)
}
