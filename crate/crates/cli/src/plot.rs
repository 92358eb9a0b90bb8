//! Minimal PNG plots: polylines on a framed canvas, no text.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{CliError, Result};

const W: u32 = 640;
const H: u32 = 400;
const MARGIN: f64 = 30.0;

const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [214, 39, 40],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [23, 190, 207],
];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub enum Plot {
    /// Lines over a shared axis; `log_y` plots `log10 |y|`.
    Lines { name: String, series: Vec<Series>, log_y: bool },
    /// Closed polygons in a square box of side `extent`.
    Polygons { name: String, frames: Vec<Vec<[f64; 2]>>, extent: f64 },
}

impl Plot {
    pub fn name(&self) -> &str {
        match self {
            Plot::Lines { name, .. } | Plot::Polygons { name, .. } => name,
        }
    }

    pub fn render(&self, path: &Path) -> Result<()> {
        let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
        match self {
            Plot::Lines { series, log_y, .. } => {
                frame(&mut img);
                let tf = |y: f64| if *log_y { y.abs().max(1e-300).log10() } else { y };
                let pts: Vec<Vec<(f64, f64)>> = series
                    .iter()
                    .map(|s| s.points.iter().map(|&(x, y)| (x, tf(y))).filter(|p| p.1.is_finite()).collect())
                    .collect();
                let all = pts.iter().flatten();
                let (x0, x1) = bounds(all.clone().map(|p| p.0));
                let (y0, y1) = bounds(all.map(|p| p.1));
                for (i, line) in pts.iter().enumerate() {
                    let px: Vec<(f64, f64)> = line.iter().map(|&(x, y)| to_px(x, y, x0, x1, y0, y1)).collect();
                    polyline(&mut img, &px, PALETTE[i % PALETTE.len()], false);
                }
            }
            Plot::Polygons { frames, extent, .. } => {
                // Equal aspect: a centred square of side H − 2·MARGIN.
                let side = H as f64 - 2.0 * MARGIN;
                let left = (W as f64 - side) / 2.0;
                let (l, r) = (left, left + side);
                let (t, b) = (MARGIN, H as f64 - MARGIN);
                polyline(&mut img, &[(l, t), (r, t), (r, b), (l, b)], [160, 160, 160], true);
                for (i, f) in frames.iter().enumerate() {
                    let px: Vec<(f64, f64)> =
                        f.iter().map(|p| (left + p[0] / extent * side, b - p[1] / extent * side)).collect();
                    polyline(&mut img, &px, PALETTE[i % PALETTE.len()], true);
                }
            }
        }
        img.save(path).map_err(|e| CliError::io(path.display().to_string(), e))
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn to_px(x: f64, y: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> (f64, f64) {
    let w = W as f64 - 2.0 * MARGIN;
    let h = H as f64 - 2.0 * MARGIN;
    (MARGIN + (x - x0) / (x1 - x0) * w, H as f64 - MARGIN - (y - y0) / (y1 - y0) * h)
}

fn frame(img: &mut RgbImage) {
    let (l, r) = (MARGIN, W as f64 - MARGIN);
    let (t, b) = (MARGIN, H as f64 - MARGIN);
    polyline(img, &[(l, t), (r, t), (r, b), (l, b)], [0, 0, 0], true);
}

fn polyline(img: &mut RgbImage, pts: &[(f64, f64)], color: [u8; 3], closed: bool) {
    if pts.len() == 1 {
        put(img, pts[0].0, pts[0].1, color);
    }
    for w in pts.windows(2) {
        segment(img, w[0], w[1], color);
    }
    if closed && pts.len() > 2 {
        segment(img, pts[pts.len() - 1], pts[0], color);
    }
}

fn segment(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: [u8; 3]) {
    let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=n {
        let s = i as f64 / n as f64;
        put(img, a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1), color);
    }
}

fn put(img: &mut RgbImage, x: f64, y: f64, color: [u8; 3]) {
    let (x, y) = (x.round(), y.round());
    if x >= 0.0 && y >= 0.0 && (x as u32) < W && (y as u32) < H {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}
