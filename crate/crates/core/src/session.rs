//! Round-by-round interaction state: proposals, swipe interpretation and label merging.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::propagate::{propagate, rasterize, SegmentationMask};
use crate::proposer::{propose_round, QueryProposal};
use crate::scene::Scene;

/// A pointer polyline in image coordinates. Empty strokes are legal and hit nothing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwipeStroke {
    pub points: Vec<[f64; 2]>,
}

impl SwipeStroke {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStroke("non-finite coordinate".into()));
        }
        Ok(Self { points })
    }

    /// Clamps every point into `[0, w-1] × [0, h-1]`.
    pub fn clamped(&self, width: u32, height: u32) -> Self {
        let (mx, my) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
        Self { points: self.points.iter().map(|p| [p[0].clamp(0.0, mx), p[1].clamp(0.0, my)]).collect() }
    }

    /// Euclidean distance from `p` to the polyline; infinite for an empty stroke.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        match self.points.as_slice() {
            [] => f64::INFINITY,
            [q] => ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(),
            pts => pts.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLabel {
    pub superpixel: usize,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundTiming {
    pub proposal: Duration,
    pub propagation: Duration,
}

/// Serializable snapshot of a session, enough to rebuild it from the same image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub image_hash: String,
    pub params: Params,
    pub labeled_0: Vec<usize>,
    pub labeled_1: Vec<usize>,
    pub round: usize,
}

/// SHA-256 over the dimensions and raw RGB bytes.
pub fn image_hash(image: &RgbImage) -> String {
    let mut h = Sha256::new();
    h.update(image.width().to_le_bytes());
    h.update(image.height().to_le_bytes());
    h.update(image.as_raw());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub id: String,
    pub params: Params,
    pub scene: Arc<Scene>,
    pub image_hash: String,
    pub labeled_0: BTreeSet<usize>,
    pub labeled_1: BTreeSet<usize>,
    pub round: usize,
    pub pending: Option<QueryProposal>,
    pub current_labels: Option<Vec<u8>>,
    /// Costs of the latest propagation and proposal.
    pub timing: RoundTiming,
}

/// Builds the graph for `image` and proposes the first query set.
pub fn start_session(image: &RgbImage, params: Params) -> Result<(SessionState, QueryProposal)> {
    params.validate()?;
    let scene = Arc::new(Scene::from_rgb(image, &params)?);
    let state = SessionState::with_scene(scene, params, image_hash(image))?;
    let proposal = state.pending.clone().unwrap_or_default();
    Ok((state, proposal))
}

impl SessionState {
    /// Starts a session over an already-built scene.
    pub fn with_scene(scene: Arc<Scene>, params: Params, image_hash: String) -> Result<Self> {
        params.validate()?;
        let mut state = Self {
            id: image_hash.chars().take(12).collect(),
            params,
            scene,
            image_hash,
            labeled_0: BTreeSet::new(),
            labeled_1: BTreeSet::new(),
            round: 0,
            pending: None,
            current_labels: None,
            timing: RoundTiming::default(),
        };
        state.refresh_proposal();
        Ok(state)
    }

    pub fn restore(checkpoint: &Checkpoint, image: &RgbImage) -> Result<Self> {
        let got = image_hash(image);
        if got != checkpoint.image_hash {
            return Err(Error::CheckpointMismatch { expected: checkpoint.image_hash.clone(), got });
        }
        let scene = Arc::new(Scene::from_rgb(image, &checkpoint.params)?);
        Self::from_checkpoint(checkpoint, scene)
    }

    /// Rebuilds state on a scene the caller already holds for the checkpointed image.
    pub fn from_checkpoint(checkpoint: &Checkpoint, scene: Arc<Scene>) -> Result<Self> {
        let n = scene.n_superpixels();
        let l0: BTreeSet<usize> = checkpoint.labeled_0.iter().copied().collect();
        let l1: BTreeSet<usize> = checkpoint.labeled_1.iter().copied().collect();
        if l0.intersection(&l1).next().is_some() {
            return Err(Error::InvalidCheckpoint("a vertex carries both labels".into()));
        }
        if let Some(&bad) = l0.iter().chain(&l1).find(|&&v| v >= n) {
            return Err(Error::InvalidCheckpoint(format!("superpixel {bad} does not exist")));
        }
        let mut state = Self::with_scene(scene, checkpoint.params.clone(), checkpoint.image_hash.clone())?;
        state.labeled_0 = l0;
        state.labeled_1 = l1;
        state.round = checkpoint.round;
        if !state.labeled().is_empty() {
            state.current_labels = Some(propagate(&state.scene.graph, &state.labeled())?);
        }
        state.refresh_proposal();
        Ok(state)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            image_hash: self.image_hash.clone(),
            params: self.params.clone(),
            labeled_0: self.labeled_0.iter().copied().collect(),
            labeled_1: self.labeled_1.iter().copied().collect(),
            round: self.round,
        }
    }

    /// All user labels so far, keyed by superpixel.
    pub fn labeled(&self) -> BTreeMap<usize, u8> {
        self.labeled_0.iter().map(|&v| (v, 0)).chain(self.labeled_1.iter().map(|&v| (v, 1))).collect()
    }

    fn labeled_set(&self) -> BTreeSet<usize> {
        self.labeled_0.union(&self.labeled_1).copied().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_none()
    }

    fn refresh_proposal(&mut self) {
        let start = Instant::now();
        let labeled = self.labeled_set();
        self.pending = if self.round >= self.params.rounds || labeled.len() >= self.scene.n_superpixels() {
            None
        } else {
            let p = propose_round(&self.scene, &labeled, self.round, &self.params);
            (!p.is_empty()).then_some(p)
        };
        self.timing.proposal = start.elapsed();
    }

    /// Hit-tests every pending seed against the stroke: label 1 iff its centroid lies within
    /// `hit_radius_px` of the polyline.
    pub fn hit_test(&self, stroke: &SwipeStroke) -> Result<Vec<SeedLabel>> {
        let pending = self.pending.as_ref().ok_or(Error::NoPendingProposal)?;
        let stroke = stroke.clamped(self.scene.width(), self.scene.height());
        Ok(pending
            .seeds
            .iter()
            .map(|s| SeedLabel {
                superpixel: s.superpixel,
                label: (stroke.distance_to(s.centroid) <= self.params.hit_radius_px) as u8,
            })
            .collect())
    }

    pub fn apply_swipe(&mut self, stroke: &SwipeStroke) -> Result<Vec<SeedLabel>> {
        let labels: Vec<u8> = self.hit_test(stroke)?.iter().map(|l| l.label).collect();
        self.apply_labels(&labels)
    }

    /// Labels the pending seeds in proposal order, propagates, and prepares the next round.
    pub fn apply_labels(&mut self, labels: &[u8]) -> Result<Vec<SeedLabel>> {
        let pending = self.pending.as_ref().ok_or(Error::NoPendingProposal)?;
        if labels.len() != pending.len() {
            return Err(Error::LabelCount { expected: pending.len(), got: labels.len() });
        }
        let applied: Vec<SeedLabel> = pending
            .seeds
            .iter()
            .zip(labels)
            .map(|(s, &l)| SeedLabel { superpixel: s.superpixel, label: (l != 0) as u8 })
            .collect();
        for a in &applied {
            if a.label == 1 {
                self.labeled_1.insert(a.superpixel);
            } else {
                self.labeled_0.insert(a.superpixel);
            }
        }
        self.round += 1;

        let start = Instant::now();
        self.current_labels = Some(propagate(&self.scene.graph, &self.labeled())?);
        self.timing.propagation = start.elapsed();
        self.refresh_proposal();
        Ok(applied)
    }

    pub fn current_mask(&self) -> Result<SegmentationMask> {
        let labels = self.current_labels.as_ref().ok_or(Error::NoLabels)?;
        rasterize(labels, &self.scene.superpixels)
    }
}
