//! Per-vertex color and texture histograms and the chi-square distance between them.

use crate::error::{Error, Result};
use crate::lab::LabImage;

pub const COLOR_BINS_PER_CHANNEL: usize = 25;
pub const COLOR_BINS: usize = 3 * COLOR_BINS_PER_CHANNEL;
pub const ORIENTATIONS: usize = 8;
pub const MAGNITUDE_BINS: usize = 10;
/// One magnitude histogram per (channel, orientation).
pub const TEXTURE_CHANNELS: usize = 3 * ORIENTATIONS;
pub const TEXTURE_BINS: usize = TEXTURE_CHANNELS * MAGNITUDE_BINS;

/// Gaussian derivative scale of the texture filters, in pixels.
pub const TEXTURE_SIGMA: f64 = 1.5;
/// Texture magnitudes are binned uniformly over [0, this quantile of all magnitudes].
pub const TEXTURE_QUANTILE: f64 = 0.99;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Normalized color and texture histograms of a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub color: Vec<f64>,
    pub texture: Vec<f64>,
}

impl Features {
    pub fn new(color: Vec<f64>, texture: Vec<f64>) -> Self {
        Self { color, texture }
    }

    /// Accumulates the histograms of the given pixels.
    pub fn from_pixels(bins: &PixelBins, pixels: impl IntoIterator<Item = usize>) -> Self {
        let mut color = vec![0.0; COLOR_BINS];
        let mut texture = vec![0.0; TEXTURE_BINS];
        let mut n = 0usize;
        for p in pixels {
            for &c in &bins.color[p] {
                color[c as usize] += 1.0;
            }
            for (ch, &b) in bins.texture[p].iter().enumerate() {
                texture[ch * MAGNITUDE_BINS + b as usize] += 1.0;
            }
            n += 1;
        }
        if n > 0 {
            let cn = 1.0 / (3 * n) as f64;
            let tn = 1.0 / (TEXTURE_CHANNELS * n) as f64;
            color.iter_mut().for_each(|v| *v *= cn);
            texture.iter_mut().for_each(|v| *v *= tn);
        }
        Self { color, texture }
    }

    /// Weighted mean of several feature sets, renormalized.
    pub fn weighted_mean<'a>(parts: impl IntoIterator<Item = (&'a Features, f64)>) -> Self {
        let mut color = vec![0.0; COLOR_BINS];
        let mut texture = vec![0.0; TEXTURE_BINS];
        for (f, w) in parts {
            for (acc, v) in color.iter_mut().zip(&f.color) {
                *acc += w * v;
            }
            for (acc, v) in texture.iter_mut().zip(&f.texture) {
                *acc += w * v;
            }
        }
        renormalize(&mut color);
        renormalize(&mut texture);
        Self { color, texture }
    }

    pub fn check_normalized(&self) -> Result<()> {
        check_histogram(&self.color)?;
        check_histogram(&self.texture)
    }
}

fn renormalize(h: &mut [f64]) {
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        h.iter_mut().for_each(|v| *v /= s);
    }
}

fn check_histogram(h: &[f64]) -> Result<()> {
    let sum: f64 = h.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || h.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::NotNormalized { sum });
    }
    Ok(())
}

/// Chi-square distance `½ Σ (p−q)² / (p+q)`; empty bins on both sides contribute nothing.
///
/// Lies in [0, 1] for normalized inputs.
pub fn chi_square(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let s = a + b;
        if s > 0.0 {
            let d = a - b;
            acc += d * d / s;
        }
    }
    (0.5 * acc).clamp(0.0, 1.0)
}

/// Precomputed histogram bin of every pixel.
#[derive(Debug, Clone)]
pub struct PixelBins {
    /// Global color bin (0..75) of each Lab channel.
    pub color: Vec<[u8; 3]>,
    /// Magnitude bin (0..10) for each of the 24 channel×orientation responses.
    pub texture: Vec<[u8; TEXTURE_CHANNELS]>,
}

impl PixelBins {
    pub fn compute(image: &LabImage) -> Self {
        let color = image.pixels().iter().map(|&lab| color_bins(lab)).collect();
        let texture = texture_bins(image);
        Self { color, texture }
    }
}

fn quantize(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (v - lo) / (hi - lo);
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn color_bins(lab: [f64; 3]) -> [u8; 3] {
    let l = quantize(lab[0], 0.0, 100.0, COLOR_BINS_PER_CHANNEL);
    let a = quantize(lab[1], -128.0, 128.0, COLOR_BINS_PER_CHANNEL);
    let b = quantize(lab[2], -128.0, 128.0, COLOR_BINS_PER_CHANNEL);
    [
        l as u8,
        (COLOR_BINS_PER_CHANNEL + a) as u8,
        (2 * COLOR_BINS_PER_CHANNEL + b) as u8,
    ]
}

fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let radius = (3.0 * sigma).ceil() as i64;
    let g: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let gs: f64 = g.iter().sum();
    let g: Vec<f64> = g.into_iter().map(|v| v / gs).collect();
    let d = (-radius..=radius)
        .zip(&g)
        .map(|(i, gv)| -(i as f64) / (sigma * sigma) * gv)
        .collect();
    (g, d)
}

/// 1-D convolution along rows (`horizontal`) or columns with edge replication.
fn convolve(src: &[f64], w: usize, h: usize, kernel: &[f64], horizontal: bool) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let o = k as i64 - r;
                let (sx, sy) = if horizontal {
                    ((x as i64 - o).clamp(0, w as i64 - 1) as usize, y)
                } else {
                    (x, (y as i64 - o).clamp(0, h as i64 - 1) as usize)
                };
                acc += kv * src[sy * w + sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Oriented first-derivative-of-Gaussian magnitudes, steered from the x/y derivatives.
///
/// Returned layout: `[channel * ORIENTATIONS + orientation][pixel]`.
pub fn texture_responses(image: &LabImage) -> Vec<Vec<f64>> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let (g, d) = gaussian_kernels(TEXTURE_SIGMA);
    let mut out = Vec::with_capacity(TEXTURE_CHANNELS);
    for ch in 0..3 {
        let plane: Vec<f64> = image.pixels().iter().map(|p| p[ch]).collect();
        let gx = convolve(&convolve(&plane, w, h, &d, true), w, h, &g, false);
        let gy = convolve(&convolve(&plane, w, h, &g, true), w, h, &d, false);
        for o in 0..ORIENTATIONS {
            let theta = std::f64::consts::PI * o as f64 / ORIENTATIONS as f64;
            let (s, c) = theta.sin_cos();
            out.push(gx.iter().zip(&gy).map(|(x, y)| (c * x + s * y).abs()).collect());
        }
    }
    out
}

/// Responses below this are rounding residue of the zero-sum derivative kernel.
const RESPONSE_FLOOR: f64 = 1e-9;

fn texture_bins(image: &LabImage) -> Vec<[u8; TEXTURE_CHANNELS]> {
    let responses = texture_responses(image);
    let mut all: Vec<f64> = responses.iter().flatten().copied().collect();
    let k = ((all.len() - 1) as f64 * TEXTURE_QUANTILE).round() as usize;
    let (_, &mut top, _) = all.select_nth_unstable_by(k, f64::total_cmp);

    let n = image.len();
    let mut bins = vec![[0u8; TEXTURE_CHANNELS]; n];
    if top > RESPONSE_FLOOR {
        for (ch, resp) in responses.iter().enumerate() {
            for (p, &m) in resp.iter().enumerate() {
                bins[p][ch] = quantize(m, 0.0, top, MAGNITUDE_BINS) as u8;
            }
        }
    }
    bins
}
