//! Label propagation over the graph, rasterization to pixel masks, and the Dice score.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, Luma};

use crate::error::{Error, Result};
use crate::geodesic::{geodesic_from_set, nearest_label};
use crate::graph::TwoLayerGraph;
use crate::slic::SuperpixelMap;

/// Per-pixel binary ROI mask (1 = ROI), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl SegmentationMask {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DegenerateImage("mask size does not match dimensions".into()));
        }
        Ok(Self { width, height, data: data.into_iter().map(|v| (v != 0) as u8).collect() })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self { width, height, data: vec![(value != 0) as u8; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn roi_pixels(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Ground-truth style decode: any gray value above 127 is ROI.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.pixels().map(|p| (p.0[0] > 127) as u8).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([self.get(x, y) * 255]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_gray(&image::open(path)?.to_luma8()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_gray().save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    /// 8-bit grayscale PNG, 0 = non-ROI, 255 = ROI.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut buf = Cursor::new(Vec::new());
        self.to_gray().write_to(&mut buf, ImageFormat::Png)?;
        Ok(buf.into_inner())
    }
}

/// Labels every superpixel with the label of its geodesically nearest labeled vertex.
///
/// Tree vertices only carry paths; labeled vertices keep their own label.
pub fn propagate(graph: &TwoLayerGraph, labeled: &BTreeMap<usize, u8>) -> Result<Vec<u8>> {
    if labeled.is_empty() {
        return Err(Error::EmptySources);
    }
    let sources: Vec<usize> = labeled.keys().copied().collect();
    let field = geodesic_from_set(graph.adjacency(), &sources)?;
    Ok((0..graph.n_superpixels())
        .map(|v| match labeled.get(&v) {
            Some(&l) => l,
            None => nearest_label(&field, labeled, v),
        })
        .collect())
}

/// Paints each pixel with its superpixel's label.
pub fn rasterize(labels: &[u8], map: &SuperpixelMap) -> Result<SegmentationMask> {
    if labels.len() < map.len() {
        return Err(Error::MissingLabel(labels.len()));
    }
    Ok(SegmentationMask {
        width: map.width,
        height: map.height,
        data: map.labels.iter().map(|&s| (labels[s] != 0) as u8).collect(),
    })
}

/// `2|C ∩ G| / (|C| + |G|)`; two empty masks agree perfectly (1.0).
pub fn dice(computed: &SegmentationMask, truth: &SegmentationMask) -> Result<f64> {
    if computed.width != truth.width || computed.height != truth.height {
        return Err(Error::DimensionMismatch(computed.width, computed.height, truth.width, truth.height));
    }
    let (mut inter, mut c, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in computed.data.iter().zip(&truth.data) {
        c += a as usize;
        g += b as usize;
        inter += (a & b) as usize;
    }
    if c + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (c + g) as f64)
}
