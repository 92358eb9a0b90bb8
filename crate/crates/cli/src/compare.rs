//! Differences between two run directories.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use lagns_core::besov::{besov, BesovIndex, Cutoff};
use lagns_core::spectral::io::read_fields;
use lagns_core::VectorField;
use serde::Serialize;

use crate::artifacts::{read_rows, Manifest, NORMS};
use crate::error::{CliError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct QuantityDiff {
    pub quantity: String,
    pub rows: usize,
    pub max_abs_diff: f64,
    /// Largest `|a − b| / max(|a|, |b|)`.
    pub max_rel_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub kinds: [String; 2],
    pub compared_rows: usize,
    /// Quantities whose rows differ; identical quantities are omitted.
    pub differing: Vec<QuantityDiff>,
    /// Rows present in only one run, as `quantity@step`.
    pub unmatched: Vec<String>,
    /// `‖δu(T)‖ / ‖δu0‖` in `Ḃ^{n/p−1}_{p,1}`, when both runs stored fields.
    pub stability_ratio: Option<f64>,
}

fn load_velocity(dir: &Path, stem: &str) -> Result<Option<VectorField>> {
    let path = dir.join(format!("{stem}.lagf"));
    if !path.is_file() {
        return Ok(None);
    }
    let f = File::open(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let (_, fields) = read_fields(BufReader::new(f))?;
    Ok(Some(VectorField::new(fields)))
}

fn stability(a: &Path, b: &Path, p: f64) -> Result<Option<f64>> {
    let fields = (
        load_velocity(a, "u0")?,
        load_velocity(b, "u0")?,
        load_velocity(a, "velocity_final")?,
        load_velocity(b, "velocity_final")?,
    );
    let (Some(u0a), Some(u0b), Some(uta), Some(utb)) = fields else {
        return Ok(None);
    };
    if u0a.grid() != u0b.grid() || uta.grid() != utb.grid() {
        return Ok(None);
    }
    let idx = BesovIndex::velocity(u0a.dim(), p);
    let d0 = besov(&(&u0a - &u0b), idx, Cutoff::Sharp);
    if d0 == 0.0 {
        return Ok(None);
    }
    Ok(Some(besov(&(&uta - &utb), idx, Cutoff::Sharp) / d0))
}

pub fn compare(a: &Path, b: &Path) -> Result<Comparison> {
    let ma = Manifest::read(a)?;
    let mb = Manifest::read(b)?;
    let key = |r: &crate::experiments::Row| (r.quantity.clone(), r.step);
    let ra: BTreeMap<_, f64> = read_rows(&a.join(NORMS))?.iter().map(|r| (key(r), r.value)).collect();
    let rb: BTreeMap<_, f64> = read_rows(&b.join(NORMS))?.iter().map(|r| (key(r), r.value)).collect();
    let mut per: BTreeMap<String, QuantityDiff> = BTreeMap::new();
    let mut compared = 0;
    for (k, va) in &ra {
        let Some(vb) = rb.get(k) else { continue };
        compared += 1;
        let d = per.entry(k.0.clone()).or_insert_with(|| QuantityDiff {
            quantity: k.0.clone(),
            rows: 0,
            max_abs_diff: 0.0,
            max_rel_diff: 0.0,
        });
        d.rows += 1;
        let abs = (va - vb).abs();
        let scale = va.abs().max(vb.abs());
        d.max_abs_diff = d.max_abs_diff.max(abs);
        if scale > 0.0 {
            d.max_rel_diff = d.max_rel_diff.max(abs / scale);
        }
    }
    let only: BTreeSet<_> = ra.keys().filter(|k| !rb.contains_key(*k)).chain(rb.keys().filter(|k| !ra.contains_key(*k))).collect();
    let same_grid = ma.config.grid.n == mb.config.grid.n && ma.config.grid.dim == mb.config.grid.dim;
    Ok(Comparison {
        a: a.display().to_string(),
        b: b.display().to_string(),
        kinds: [ma.kind.clone(), mb.kind.clone()],
        compared_rows: compared,
        differing: per.into_values().filter(|d| d.max_abs_diff > 0.0).collect(),
        unmatched: only.into_iter().map(|(q, s)| format!("{q}@{s}")).collect(),
        stability_ratio: if same_grid { stability(a, b, ma.config.physics.p)? } else { None },
    })
}
