use image::RgbImage;

use crate::error::{Error, Result};
use crate::graph::{build_graph, TwoLayerGraph};
use crate::lab::LabImage;
use crate::params::Params;
use crate::slic::{build_superpixels, SuperpixelMap};
use crate::trees::{build_trees, Tree};

/// An image after preprocessing: superpixels, trees and the two-layer graph.
///
/// Immutable once built; share it behind an `Arc` across sessions or threads.
#[derive(Debug, Clone)]
pub struct Scene {
    pub superpixels: SuperpixelMap,
    pub trees: Vec<Tree>,
    pub graph: TwoLayerGraph,
}

impl Scene {
    pub fn build(image: &LabImage, params: &Params) -> Result<Self> {
        params.validate()?;
        if image.width() < 2 || image.height() < 2 {
            return Err(Error::DegenerateImage(format!(
                "{}x{} is smaller than 2x2",
                image.width(),
                image.height()
            )));
        }
        let n = params.n_superpixels.min(image.len());
        let mut superpixels = build_superpixels(image, n)?;
        let trees = build_trees(
            &superpixels.superpixels,
            &superpixels.adjacency(),
            params.theta_t,
            params.min_tree_superpixels,
        );
        for t in &trees {
            for &m in &t.members {
                superpixels.superpixels[m].tree_id = t.id;
            }
        }
        let graph = build_graph(&superpixels, &trees);
        Ok(Self { superpixels, trees, graph })
    }

    pub fn from_rgb(image: &RgbImage, params: &Params) -> Result<Self> {
        Self::build(&LabImage::from_rgb(image)?, params)
    }

    pub fn width(&self) -> u32 {
        self.superpixels.width
    }

    pub fn height(&self) -> u32 {
        self.superpixels.height
    }

    pub fn area_px(&self) -> usize {
        self.superpixels.labels.len()
    }

    pub fn n_superpixels(&self) -> usize {
        self.superpixels.len()
    }

    /// Superpixel under pixel `(x, y)`.
    pub fn superpixel_at(&self, x: u32, y: u32) -> usize {
        self.superpixels.labels[y as usize * self.width() as usize + x as usize]
    }
}
