use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunable knobs for graph construction, seed proposal and the interaction loop.
///
/// Distances (`theta_d_px`, `hit_radius_px`) are in original-image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// Target superpixel count for SLIC.
    pub n_superpixels: usize,
    /// Scale of the tree merge threshold, in pixels.
    pub theta_t: f64,
    /// Trees with fewer members are folded into a neighbour.
    pub min_tree_superpixels: usize,
    /// Weight of the influence term in the seed score.
    pub theta_s: f64,
    /// Seeds proposed per round.
    pub theta_k: usize,
    /// Minimum centroid separation between seeds of one proposal.
    pub theta_d_px: f64,
    /// A seed is hit when the stroke passes within this radius of its centroid.
    pub hit_radius_px: f64,
    /// Round budget of a session.
    pub rounds: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n_superpixels: 700,
            theta_t: 3000.0,
            min_tree_superpixels: 3,
            theta_s: 0.7,
            theta_k: 5,
            theta_d_px: 57.0,
            hit_radius_px: 28.0,
            rounds: 30,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if self.n_superpixels == 0 {
            return bad("n_superpixels must be positive");
        }
        if !(self.theta_t.is_finite() && self.theta_t > 0.0) {
            return bad("theta_t must be positive");
        }
        if self.min_tree_superpixels == 0 {
            return bad("min_tree_superpixels must be positive");
        }
        if !(self.theta_s.is_finite() && self.theta_s > 0.0 && self.theta_s <= 1.0) {
            return bad("theta_s must lie in (0, 1]");
        }
        if self.theta_k == 0 {
            return bad("theta_k must be at least 1");
        }
        if !(self.theta_d_px.is_finite() && self.theta_d_px > 0.0) {
            return bad("theta_d_px must be positive");
        }
        if !(self.hit_radius_px.is_finite() && self.hit_radius_px > 0.0) {
            return bad("hit_radius_px must be positive");
        }
        if self.rounds == 0 {
            return bad("rounds must be positive");
        }
        Ok(())
    }
}
