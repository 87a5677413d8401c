//! Procedurally generated figure-ground images with exact ground truth.
//!
//! Each image has a background of shaded Voronoi patches, a ROI made of one or two shapes (ellipses or
//! star-shaped polygons), non-ROI distractor shapes, optional stripe textures, and
//! additive noise.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::propagate::SegmentationMask;

pub const DEFAULT_WIDTH: u32 = 320;
pub const DEFAULT_HEIGHT: u32 = 240;

const NOISE_AMPLITUDE: i32 = 12;

enum Shape {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, rot: f64 },
    Polygon(Vec<[f64; 2]>),
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, w: f64, h: f64, scale: f64) -> Self {
        let cx = rng.gen_range(0.3..0.7) * w;
        let cy = rng.gen_range(0.3..0.7) * h;
        let r = scale * w.min(h);
        if rng.gen_bool(0.5) {
            Shape::Ellipse {
                cx,
                cy,
                rx: r * rng.gen_range(0.7..1.3),
                ry: r * rng.gen_range(0.6..1.1),
                rot: rng.gen_range(0.0..std::f64::consts::PI),
            }
        } else {
            let n = rng.gen_range(3..=7);
            let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            // spread vertices so the polygon is not a sliver
            let angles: Vec<f64> = angles
                .iter()
                .enumerate()
                .map(|(i, a)| 0.5 * a + 0.5 * std::f64::consts::TAU * i as f64 / n as f64)
                .collect();
            Shape::Polygon(
                angles
                    .iter()
                    .map(|a| {
                        let rr = r * rng.gen_range(0.9..1.4);
                        [cx + rr * a.cos(), cy + rr * a.sin()]
                    })
                    .collect(),
            )
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Ellipse { cx, cy, rx, ry, rot } => {
                let (s, c) = rot.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Polygon(pts) => {
                // vertices are in angular order, so the polygon is star-shaped around its
                // center; use even-odd ray casting, which holds for any simple polygon
                let mut inside = false;
                let n = pts.len();
                for i in 0..n {
                    let (a, b) = (pts[i], pts[(i + 1) % n]);
                    if (a[1] > y) != (b[1] > y) {
                        let xi = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                        if x < xi {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)]
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Draws a color at least `min_dist` (RGB Euclidean) from every color in `avoid`.
fn distinct_color(rng: &mut ChaCha8Rng, avoid: &[[f64; 3]], min_dist: f64) -> [f64; 3] {
    loop {
        let c = random_color(rng);
        if avoid.iter().all(|&a| color_distance(a, c) >= min_dist) {
            return c;
        }
    }
}

/// Sinusoidal stripes layered over a region's base color.
struct Texture {
    freq: f64,
    dir: (f64, f64),
    amplitude: f64,
}

impl Texture {
    fn random(rng: &mut ChaCha8Rng) -> Option<Self> {
        rng.gen_bool(0.5).then(|| {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            Self { freq: rng.gen_range(0.2..0.6), dir: (a.cos(), a.sin()), amplitude: rng.gen_range(6.0..16.0) }
        })
    }

    fn offset(&self, x: f64, y: f64) -> f64 {
        self.amplitude * (self.freq * (x * self.dir.0 + y * self.dir.1)).sin()
    }
}

struct Region {
    shape: Shape,
    color: [f64; 3],
    texture: Option<Texture>,
    roi: bool,
}

/// Generates image number `index` of the suite. Same index, same pixels.
///
/// The ROI is one or two overlapping parts of different colors. Up to three non-ROI
/// distractors are drawn first, one of them possibly close in color to the ROI.
pub fn generate(index: u64, width: u32, height: u32) -> (RgbImage, SegmentationMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + index);
    let (w, h) = (width as f64, height as f64);

    let n_patches = rng.gen_range(3..=6);
    let mut patches: Vec<([f64; 2], [f64; 3], Option<Texture>)> = Vec::with_capacity(n_patches);
    for _ in 0..n_patches {
        let site = [rng.gen_range(0.0..w), rng.gen_range(0.0..h)];
        let avoid: Vec<[f64; 3]> = patches.iter().map(|p| p.1).collect();
        let color = distinct_color(&mut rng, &avoid, 40.0);
        patches.push((site, color, Texture::random(&mut rng)));
    }
    let bg_colors: Vec<[f64; 3]> = patches.iter().map(|p| p.1).collect();
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (gs, gc) = angle.sin_cos();
    let shade = rng.gen_range(10.0..40.0);

    let fg = distinct_color(&mut rng, &bg_colors, 110.0);
    let mut regions = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let color = if i == 0 && rng.gen_bool(0.5) {
            distinct_color(&mut rng, &bg_colors, 60.0)
        } else {
            distinct_color(&mut rng, &[bg_colors.as_slice(), &[fg]].concat(), 80.0)
        };
        let scale = rng.gen_range(0.08..0.16);
        let shape = Shape::random(&mut rng, w, h, scale);
        regions.push(Region { shape, color, texture: Texture::random(&mut rng), roi: false });
    }
    let roi_scale = rng.gen_range(0.18..0.3);
    let shape = Shape::random(&mut rng, w, h, roi_scale);
    regions.push(Region { shape, color: fg, texture: Texture::random(&mut rng), roi: true });
    if rng.gen_bool(0.5) {
        let color = distinct_color(&mut rng, &[bg_colors.as_slice(), &[fg]].concat(), 70.0);
        let (cx, cy, r) = match &regions.last().unwrap().shape {
            Shape::Ellipse { cx, cy, rx, .. } => (*cx, *cy, *rx),
            Shape::Polygon(pts) => (pts[0][0], pts[0][1], roi_scale * w.min(h)),
        };
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (px, py) = (cx + 0.8 * r * a.cos(), cy + 0.8 * r * a.sin());
        let rr = rng.gen_range(0.35..0.6) * r;
        let shape = Shape::Ellipse { cx: px, cy: py, rx: rr, ry: rr * rng.gen_range(0.6..1.0), rot: a };
        regions.push(Region { shape, color, texture: Texture::random(&mut rng), roi: true });
    }

    let mut mask = vec![0u8; (width * height) as usize];
    let img = RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        let t = (fx / w - 0.5) * gc + (fy / h - 0.5) * gs;
        let (_, base, bg_texture) = patches
            .iter()
            .min_by(|a, b| {
                let d = |p: &[f64; 2]| (p[0] - fx).powi(2) + (p[1] - fy).powi(2);
                d(&a.0).total_cmp(&d(&b.0))
            })
            .unwrap();
        let mut c = base.map(|v| v + shade * t);
        let mut texture = bg_texture.as_ref();
        let mut roi = false;
        for region in regions.iter().filter(|r| r.shape.contains(fx, fy)) {
            c = region.color;
            texture = region.texture.as_ref();
            roi = region.roi;
        }
        mask[(y * width + x) as usize] = roi as u8;
        let stripe = texture.map_or(0.0, |t| t.offset(fx, fy));
        let px = c.map(|v| {
            (v + stripe) as i32 + rng.gen_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE)
        });
        Rgb(px.map(|v| v.clamp(0, 255) as u8))
    });
    (img, SegmentationMask { width, height, data: mask })
}

/// Writes `count` pairs as `<dir>/synth_NN.png` and `<dir>/synth_NN_gt.png`.
pub fn write_suite(dir: impl AsRef<Path>, count: usize, width: u32, height: u32) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for i in 0..count {
        let (img, gt) = generate(i as u64, width, height);
        img.save(dir.join(format!("synth_{i:02}.png")))?;
        gt.save(dir.join(format!("synth_{i:02}_gt.png")))?;
    }
    Ok(())
}
