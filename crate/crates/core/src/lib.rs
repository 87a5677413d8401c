//! Interactive figure-ground segmentation driven by diversified query seeds.
//!
//! An image is over-segmented into superpixels, grouped into trees, and turned into a
//! two-layer graph. Each round the engine proposes a few well-separated, informative
//! seeds; the user answers by swiping through the ones inside the region of interest,
//! and labels spread to the rest of the image along shortest paths in the graph.

pub mod error;
pub mod features;
pub mod geodesic;
pub mod graph;
pub mod harness;
pub mod lab;
pub mod params;
pub mod propagate;
pub mod proposer;
pub mod scene;
pub mod session;
pub mod slic;
pub mod synthetic;
pub mod trees;

pub use error::{Error, Result};
pub use geodesic::{geodesic_from_set, nearest_label, Adjacency, DistanceField};
pub use graph::{build_graph, edge_weight, TwoLayerGraph};
pub use lab::LabImage;
pub use params::Params;
pub use propagate::{dice, propagate, rasterize, SegmentationMask};
pub use proposer::{propose_round, QueryProposal, SeedCandidate};
pub use scene::Scene;
pub use session::{start_session, Checkpoint, SeedLabel, SessionState, SwipeStroke};
pub use slic::{build_superpixels, Superpixel, SuperpixelMap};
pub use trees::{build_trees, fh_threshold, Tree};
