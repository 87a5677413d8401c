//! SLIC over-segmentation on a fixed seed grid, followed by a connectivity pass.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::features::{Features, PixelBins};
use crate::lab::LabImage;

pub const COMPACTNESS: f64 = 10.0;
pub const ITERATIONS: usize = 10;

/// A 4-connected region of the over-segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpixel {
    pub id: usize,
    /// Row-major pixel indices, ascending.
    pub pixels: Vec<usize>,
    /// Display centroid: the member pixel closest to the mean position.
    pub centroid: [f64; 2],
    /// Mean (x, y) of the member pixels.
    pub mean_position: [f64; 2],
    pub features: Features,
    /// Containing tree; filled in once trees are built.
    pub tree_id: usize,
}

impl Superpixel {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Over-segmentation of an image: per-pixel labels plus the region list.
#[derive(Debug, Clone)]
pub struct SuperpixelMap {
    pub width: u32,
    pub height: u32,
    /// Superpixel id of every pixel, row-major.
    pub labels: Vec<usize>,
    pub superpixels: Vec<Superpixel>,
}

impl SuperpixelMap {
    /// Builds regions from an explicit label map. Labels must be `0..k` with every label used.
    pub fn from_labels(image: &LabImage, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != image.len() {
            return Err(Error::DegenerateImage("label map size mismatch".into()));
        }
        let bins = PixelBins::compute(image);
        Self::assemble(image.width(), image.height(), labels, &bins)
    }

    fn assemble(width: u32, height: u32, labels: Vec<usize>, bins: &PixelBins) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (p, &l) in labels.iter().enumerate() {
            members[l].push(p);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::DegenerateImage(format!("superpixel {empty} has no pixels")));
        }
        let w = width as usize;
        let superpixels = members
            .into_iter()
            .enumerate()
            .map(|(id, pixels)| {
                let n = pixels.len() as f64;
                let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), &p| {
                    (sx + (p % w) as f64, sy + (p / w) as f64)
                });
                let mean = [sx / n, sy / n];
                let display = pixels
                    .iter()
                    .map(|&p| {
                        let dx = (p % w) as f64 - mean[0];
                        let dy = (p / w) as f64 - mean[1];
                        (dx * dx + dy * dy, p)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, p)| p)
                    .unwrap();
                Superpixel {
                    id,
                    features: Features::from_pixels(bins, pixels.iter().copied()),
                    centroid: [(display % w) as f64, (display / w) as f64],
                    mean_position: mean,
                    pixels,
                    tree_id: 0,
                }
            })
            .collect();
        Ok(Self { width, height, labels, superpixels })
    }

    pub fn len(&self) -> usize {
        self.superpixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superpixels.is_empty()
    }

    /// Unique 4-neighbour adjacent superpixel pairs `(a, b)` with `a < b`, sorted.
    pub fn adjacency(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width as usize, self.height as usize);
        let mut pairs = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let a = self.labels[y * w + x];
                if x + 1 < w {
                    let b = self.labels[y * w + x + 1];
                    if a != b {
                        pairs.push((a.min(b), a.max(b)));
                    }
                }
                if y + 1 < h {
                    let b = self.labels[(y + 1) * w + x];
                    if a != b {
                        pairs.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

fn grid_shape(w: usize, h: usize, n: usize) -> (usize, usize) {
    let nx = ((n as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, n.min(w));
    let ny = ((n as f64 / nx as f64).round() as usize).clamp(1, h);
    (nx, ny)
}

fn gradient(image: &LabImage, x: usize, y: usize) -> f64 {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let at = |x: usize, y: usize| image.get(x as u32, y as u32);
    let sq = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
    sq(at(xr, y), at(xl, y)) + sq(at(x, yd), at(x, yu))
}

/// Over-segments `image` into roughly `n` superpixels.
///
/// Deterministic: seeds sit on a fixed grid and are only nudged to the lowest-gradient
/// pixel of their 3×3 neighbourhood. A 1×1 image yields its single pixel as one region.
pub fn build_superpixels(image: &LabImage, n: usize) -> Result<SuperpixelMap> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let npix = w * h;
    if n == 0 {
        return Err(Error::InvalidParams("superpixel count must be positive".into()));
    }
    if n > npix {
        return Err(Error::TooManySuperpixels { requested: n, pixels: npix });
    }
    if (w < 2 || h < 2) && npix > 1 {
        return Err(Error::DegenerateImage(format!("{w}x{h} is smaller than 2x2")));
    }

    let (nx, ny) = grid_shape(w, h, n);
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let step = (npix as f64 / (nx * ny) as f64).sqrt();
    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * sx) as usize).min(w - 1);
            let cy = (((j as f64 + 0.5) * sy) as usize).min(h - 1);
            let (mut bx, mut by) = (cx, cy);
            let mut best = gradient(image, cx, cy);
            for yy in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                for xx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                    let g = gradient(image, xx, yy);
                    if g < best {
                        best = g;
                        bx = xx;
                        by = yy;
                    }
                }
            }
            centers.push(Center { lab: image.get(bx as u32, by as u32), x: bx as f64, y: by as f64 });
        }
    }

    let spatial = (COMPACTNESS / step).powi(2);
    let radius = sx.max(sy).ceil() as i64;
    let mut labels = vec![usize::MAX; npix];
    let mut dist = vec![f64::INFINITY; npix];
    for _ in 0..ITERATIONS {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as i64, c.y.round() as i64);
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius) as usize).min(w - 1);
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let lab = image.pixels()[p];
                    let dc: f64 = (0..3).map(|i| (lab[i] - c.lab[i]).powi(2)).sum();
                    let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = dc + ds * spatial;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k;
                    }
                }
            }
        }
        for p in 0..npix {
            if labels[p] == usize::MAX || dist[p].is_infinite() {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                labels[p] = centers
                    .iter()
                    .enumerate()
                    .min_by(|a, b| {
                        let da = (a.1.x - x).powi(2) + (a.1.y - y).powi(2);
                        let db = (b.1.x - x).powi(2) + (b.1.y - y).powi(2);
                        da.total_cmp(&db)
                    })
                    .map(|(k, _)| k)
                    .unwrap();
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let lab = image.pixels()[p];
            let s = &mut sums[l];
            s[0] += lab[0];
            s[1] += lab[1];
            s[2] += lab[2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                *c = Center { lab: [s[0] / s[5], s[1] / s[5], s[2] / s[5]], x: s[3] / s[5], y: s[4] / s[5] };
            }
        }
    }

    let labels = enforce_connectivity(&labels, w, h, (npix / centers.len() / 4).max(1));
    let bins = PixelBins::compute(image);
    SuperpixelMap::assemble(image.width(), image.height(), labels, &bins)
}

/// Relabels 4-connected components in raster order; components smaller than `min_size`
/// are absorbed by the already-labeled neighbour of their first pixel.
fn enforce_connectivity(labels: &[usize], w: usize, h: usize, min_size: usize) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let mut out = vec![NONE; labels.len()];
    let mut next = 0usize;
    let mut queue = VecDeque::new();
    let mut component = Vec::new();
    for start in 0..labels.len() {
        if out[start] != NONE {
            continue;
        }
        let (x0, y0) = (start % w, start / w);
        let mut adjacent = None;
        for (dx, dy) in [(-1i64, 0i64), (0, -1), (1, 0), (0, 1)] {
            let (x, y) = (x0 as i64 + dx, y0 as i64 + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                let q = y as usize * w + x as usize;
                if out[q] != NONE {
                    adjacent = Some(out[q]);
                }
            }
        }

        component.clear();
        out[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            component.push(p);
            let (px, py) = (p % w, p / w);
            let mut visit = |q: usize| {
                if out[q] == NONE && labels[q] == labels[start] {
                    out[q] = next;
                    queue.push_back(q);
                }
            };
            if px > 0 {
                visit(p - 1);
            }
            if px + 1 < w {
                visit(p + 1);
            }
            if py > 0 {
                visit(p - w);
            }
            if py + 1 < h {
                visit(p + w);
            }
        }

        match adjacent {
            Some(target) if component.len() < min_size => {
                for &p in &component {
                    out[p] = target;
                }
            }
            _ => next += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_connected(sp: &Superpixel, w: usize) -> bool {
        let set: std::collections::HashSet<usize> = sp.pixels.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![sp.pixels[0]];
        seen.insert(sp.pixels[0]);
        while let Some(p) = stack.pop() {
            let mut nb = vec![];
            if p % w > 0 {
                nb.push(p - 1);
            }
            if p % w + 1 < w {
                nb.push(p + 1);
            }
            if p >= w {
                nb.push(p - w);
            }
            nb.push(p + w);
            for q in nb {
                if set.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen.len() == set.len()
    }

    #[test]
    fn single_pixel_image() {
        let img = LabImage::uniform(1, 1, [50.0, 0.0, 0.0]).unwrap();
        let map = build_superpixels(&img, 1).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map.superpixels[0].pixels, vec![0]);
        assert_eq!(map.superpixels[0].centroid, [0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_requests() {
        let img = LabImage::uniform(4, 4, [50.0, 0.0, 0.0]).unwrap();
        assert!(matches!(build_superpixels(&img, 17), Err(Error::TooManySuperpixels { .. })));
        assert!(build_superpixels(&img, 0).is_err());
        let thin = LabImage::uniform(1, 8, [50.0, 0.0, 0.0]).unwrap();
        assert!(matches!(build_superpixels(&thin, 2), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn uniform_quadrants() {
        // Oracle: with no color contrast the assignment is the spatial Voronoi diagram of the
        // 2×2 seed grid, i.e. four exact 50×50 quadrants.
        let img = LabImage::uniform(100, 100, [60.0, 5.0, 5.0]).unwrap();
        let map = build_superpixels(&img, 4).unwrap();
        assert_eq!(map.len(), 4);
        for sp in &map.superpixels {
            let area = sp.area() as f64;
            assert!((area - 2500.0).abs() <= 500.0, "area {area}");
        }
        assert_eq!(map.superpixels.iter().map(|s| s.area()).sum::<usize>(), 10_000);
        assert_eq!(map.adjacency(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn partition_is_connected_and_covering() {
        let (w, h) = (64u32, 48u32);
        let pixels = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let inside = (x - 30.0).powi(2) + (y - 20.0).powi(2) < 200.0;
                if inside { [70.0, 40.0, 20.0] } else { [30.0 + x * 0.2, -10.0, 5.0] }
            })
            .collect();
        let img = LabImage::new(w, h, pixels).unwrap();
        let map = build_superpixels(&img, 48).unwrap();
        let mut covered = vec![false; (w * h) as usize];
        for sp in &map.superpixels {
            assert!(!sp.pixels.is_empty());
            assert!(is_connected(sp, w as usize), "superpixel {} split", sp.id);
            for &p in &sp.pixels {
                assert!(!covered[p]);
                covered[p] = true;
                assert_eq!(map.labels[p], sp.id);
            }
            sp.features.check_normalized().unwrap();
            let c = (sp.centroid[1] as usize) * w as usize + sp.centroid[0] as usize;
            assert_eq!(map.labels[c], sp.id, "display centroid lies inside its region");
        }
        assert!(covered.iter().all(|&c| c));
        let n = map.len() as f64;
        assert!((n - 48.0).abs() <= 0.2 * 48.0, "got {n} superpixels");
    }

    #[test]
    fn connectivity_pass_absorbs_fragments() {
        // label 1 appears twice: a big block and a single stray pixel inside label 0
        let labels = vec![
            0, 0, 0, 1, 1, //
            0, 1, 0, 1, 1, //
            0, 0, 0, 1, 1, //
        ];
        let out = enforce_connectivity(&labels, 5, 3, 2);
        assert_eq!(out[6], 0);
        assert_eq!(out.iter().max(), Some(&1));
    }
}
