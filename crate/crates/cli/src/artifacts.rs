//! Output directory layout: CSV logs, report, field dumps, plots and the
//! manifest that ties them together.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lagns_core::spectral::io::write_fields;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{class_name, CliError, Result};
use crate::experiments::{Failure, Row, RunOutput};

pub const MANIFEST: &str = "manifest.json";
pub const NORMS: &str = "norms.csv";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const REPORT: &str = "report.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<Value>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            return Err(CliError::MissingManifest(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(path.display().to_string(), e))
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path.display().to_string(), e)
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    // Header written by hand so empty logs still have one.
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    w.write_record(["step", "time", "quantity", "value"]).map_err(|e| CliError::io(path.display().to_string(), e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::io(path.display().to_string(), e))).collect()
}

fn sha256_hex(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let digest = Sha256::digest(&bytes);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, bytes.len() as u64))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::io(path.display().to_string(), e))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn write_output(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut add = |name: String| {
        let p = dir.join(&name);
        files.push(PathBuf::from(name));
        p
    };
    write_rows(&add(NORMS.into()), &out.norms)?;
    write_rows(&add(DIAGNOSTICS.into()), &out.diagnostics)?;
    write_json(&add(REPORT.into()), &out.report)?;
    for (stem, fields) in &out.fields {
        let path = add(format!("{stem}.lagf"));
        let refs: Vec<_> = fields.iter().collect();
        let f = File::create(&path).map_err(io_err(&path))?;
        write_fields(BufWriter::new(f), &refs)?;
    }
    for plot in &out.plots {
        plot.render(&add(format!("{}.png", plot.name())))?;
    }
    Ok(files)
}

/// Writes everything under `dir` and returns the exit code of the run. The
/// manifest is written even when the experiment failed.
pub fn persist(
    dir: &Path,
    cfg: &ExperimentConfig,
    threads: usize,
    result: std::result::Result<RunOutput, Failure>,
) -> Result<(i32, Option<CliError>)> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (files, error, report) = match result {
        Ok(out) => {
            let files = write_output(dir, &out)?;
            let err = (!out.failed_checks.is_empty()).then(|| CliError::ChecksFailed(out.failed_checks.join("; ")));
            (files, err, None)
        }
        Err(Failure { error, report }) => (Vec::new(), Some(error), Some(report)),
    };
    let mut files = files;
    if let Some(report) = report {
        let mut report = if report.is_null() { serde_json::json!({}) } else { report };
        if let Some(e) = &error {
            report["error"] = e.to_json();
        }
        write_json(&dir.join(REPORT), &report)?;
        files.push(PathBuf::from(REPORT));
    }
    let mut entries = Vec::new();
    for f in &files {
        let (sha256, bytes) = sha256_hex(&dir.join(f))?;
        entries.push(FileEntry { path: f.display().to_string(), sha256, bytes });
    }
    let exit_code = error.as_ref().map_or(0, |e| e.exit_code());
    let manifest = Manifest {
        tool: "lagns".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind.name().into(),
        seed: cfg.seed,
        threads,
        config: cfg.clone(),
        status: error.as_ref().map_or("ok", |e| class_name(e.class())).into(),
        exit_code,
        error: error.as_ref().map(|e| e.to_json()),
        files: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok((exit_code, error))
}
