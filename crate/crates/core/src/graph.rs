//! The two-layer superpixel/tree graph and its feature-distance edge weights.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::Result;
use crate::features::{chi_square, Features};
use crate::geodesic::Adjacency;
use crate::slic::SuperpixelMap;
use crate::trees::Tree;

/// `(1 − (1 − χ²_color)(1 − χ²_texture))²` without normalization checks.
pub fn feature_distance(a: &Features, b: &Features) -> f64 {
    let dc = chi_square(&a.color, &b.color);
    let dt = chi_square(&a.texture, &b.texture);
    combine_distances(dc, dt)
}

/// Combines color and texture chi-square distances into one weight in [0, 1]; zero only
/// when both are zero.
pub fn combine_distances(chi_color: f64, chi_texture: f64) -> f64 {
    let inner = 1.0 - (1.0 - chi_color) * (1.0 - chi_texture);
    (inner * inner).clamp(0.0, 1.0)
}

/// Edge weight between two vertices. Both feature sets must be normalized histograms.
pub fn edge_weight(a: &Features, b: &Features) -> Result<f64> {
    a.check_normalized()?;
    b.check_normalized()?;
    Ok(feature_distance(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Superpixel,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Spatially adjacent superpixels.
    Adjacent,
    /// Spatially adjacent trees.
    TreeAdjacent,
    /// A superpixel and the tree containing it.
    Membership,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// Vertices `0..n_superpixels` are superpixels; tree `t` is vertex `n_superpixels + t`.
#[derive(Debug, Clone)]
pub struct TwoLayerGraph {
    n_superpixels: usize,
    n_trees: usize,
    areas: Vec<usize>,
    edges: Vec<Edge>,
    adjacency: Adjacency,
}

impl TwoLayerGraph {
    /// Assembles a graph from explicit edges. `areas` holds one pixel count per vertex.
    pub fn from_edges(n_superpixels: usize, n_trees: usize, areas: Vec<usize>, edges: Vec<Edge>) -> Self {
        let n = n_superpixels + n_trees;
        assert_eq!(areas.len(), n, "one area per vertex");
        let adjacency = Adjacency::from_edges(n, edges.iter().map(|e| (e.a, e.b, e.weight)));
        Self { n_superpixels, n_trees, areas, edges, adjacency }
    }

    pub fn n_superpixels(&self) -> usize {
        self.n_superpixels
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn n_vertices(&self) -> usize {
        self.n_superpixels + self.n_trees
    }

    pub fn tree_vertex(&self, tree: usize) -> usize {
        self.n_superpixels + tree
    }

    pub fn kind(&self, v: usize) -> VertexKind {
        if v < self.n_superpixels {
            VertexKind::Superpixel
        } else {
            VertexKind::Tree
        }
    }

    pub fn area(&self, v: usize) -> usize {
        self.areas[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    /// Weight of the edge between `a` and `b`, if any.
    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency.neighbours(a).iter().find(|(v, _)| *v == b).map(|&(_, w)| w)
    }

    /// Line-oriented dump: `V <id> <sp|tree> <area>` then `E <a> <b> <weight>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in 0..self.n_vertices() {
            let kind = match self.kind(v) {
                VertexKind::Superpixel => "sp",
                VertexKind::Tree => "tree",
            };
            let _ = writeln!(out, "V {v} {kind} {}", self.areas[v]);
        }
        for e in &self.edges {
            let _ = writeln!(out, "E {} {} {:.6}", e.a, e.b, e.weight);
        }
        out
    }
}

/// Spatially adjacent tree pairs: trees touch iff any of their members touch.
pub fn tree_adjacency(superpixel_adjacency: &[(usize, usize)], tree_of: &[usize]) -> Vec<(usize, usize)> {
    let pairs: BTreeSet<(usize, usize)> = superpixel_adjacency
        .iter()
        .filter_map(|&(a, b)| {
            let (ta, tb) = (tree_of[a], tree_of[b]);
            (ta != tb).then(|| (ta.min(tb), ta.max(tb)))
        })
        .collect();
    pairs.into_iter().collect()
}

/// Builds the two-layer graph from an over-segmentation and its trees.
pub fn build_graph(map: &SuperpixelMap, trees: &[Tree]) -> TwoLayerGraph {
    let sps = &map.superpixels;
    let n_sp = sps.len();
    let mut tree_of = vec![usize::MAX; n_sp];
    for t in trees {
        for &m in &t.members {
            tree_of[m] = t.id;
        }
    }
    assert!(tree_of.iter().all(|&t| t != usize::MAX), "trees must cover all superpixels");

    let sp_adj = map.adjacency();
    let mut edges = Vec::with_capacity(sp_adj.len() + 2 * n_sp);
    for &(a, b) in &sp_adj {
        edges.push(Edge {
            a,
            b,
            weight: feature_distance(&sps[a].features, &sps[b].features),
            kind: EdgeKind::Adjacent,
        });
    }
    for (ta, tb) in tree_adjacency(&sp_adj, &tree_of) {
        edges.push(Edge {
            a: n_sp + ta,
            b: n_sp + tb,
            weight: feature_distance(&trees[ta].features, &trees[tb].features),
            kind: EdgeKind::TreeAdjacent,
        });
    }
    for (s, sp) in sps.iter().enumerate() {
        let t = tree_of[s];
        edges.push(Edge {
            a: s,
            b: n_sp + t,
            weight: feature_distance(&sp.features, &trees[t].features),
            kind: EdgeKind::Membership,
        });
    }

    let areas = sps.iter().map(|s| s.area()).chain(trees.iter().map(|t| t.size_px)).collect();
    TwoLayerGraph::from_edges(n_sp, trees.len(), areas, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{COLOR_BINS, TEXTURE_BINS};
    use crate::lab::LabImage;
    use crate::trees::build_trees;

    fn onehot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    /// p = (1, 0, ..), q = (1 - x, x, ..) gives χ² = x / (2 - x); solve for x.
    fn at_distance(n: usize, d: f64) -> Vec<f64> {
        let x = 2.0 * d / (1.0 + d);
        let mut v = vec![0.0; n];
        v[0] = 1.0 - x;
        v[1] = x;
        v
    }

    #[test]
    fn weight_identities() {
        let a = Features::new(onehot(COLOR_BINS, 0), onehot(TEXTURE_BINS, 0));
        let b = Features::new(onehot(COLOR_BINS, 1), onehot(TEXTURE_BINS, 1));
        assert_eq!(edge_weight(&a, &a).unwrap(), 0.0);
        assert_eq!(edge_weight(&a, &b).unwrap(), 1.0);

        let half = Features::new(at_distance(COLOR_BINS, 0.5), at_distance(TEXTURE_BINS, 0.5));
        assert!((chi_square(&a.color, &half.color) - 0.5).abs() < 1e-12);
        let w = edge_weight(&a, &half).unwrap();
        assert!((w - 0.5625).abs() < 1e-9, "{w}");
        assert_eq!(combine_distances(0.5, 0.5), 0.5625);
    }

    #[test]
    fn weight_rejects_unnormalized() {
        let a = Features::new(onehot(COLOR_BINS, 0), onehot(TEXTURE_BINS, 0));
        let bad = Features::new(vec![0.0; COLOR_BINS], onehot(TEXTURE_BINS, 0));
        assert!(edge_weight(&a, &bad).is_err());
    }

    fn strip_map(labels: Vec<usize>, w: u32, h: u32) -> SuperpixelMap {
        let img = LabImage::uniform(w, h, [50.0, 0.0, 0.0]).unwrap();
        SuperpixelMap::from_labels(&img, labels).unwrap()
    }

    #[test]
    fn two_superpixels_one_tree() {
        let map = strip_map(vec![0, 0, 1, 1, 0, 0, 1, 1], 4, 2);
        let trees = build_trees(&map.superpixels, &map.adjacency(), 3000.0, 1);
        assert_eq!(trees.len(), 1);
        let g = build_graph(&map, &trees);
        let mut pairs: Vec<_> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert!(g.edges().iter().all(|e| e.weight == 0.0));
    }

    fn two_tree_graph(labels: Vec<usize>, w: u32, h: u32) -> TwoLayerGraph {
        let map = strip_map(labels, w, h);
        let sps = &map.superpixels;
        let trees: Vec<Tree> = [[0usize, 1], [2, 3]]
            .iter()
            .enumerate()
            .map(|(id, m)| Tree {
                id,
                members: m.to_vec(),
                size_px: m.iter().map(|&s| sps[s].area()).sum(),
                features: Features::weighted_mean(m.iter().map(|&s| (&sps[s].features, 1.0))),
                mean_position: [0.0, 0.0],
            })
            .collect();
        build_graph(&map, &trees)
    }

    #[test]
    fn four_superpixels_two_trees_in_a_row() {
        // 1×4 layout: 3 adjacency + 1 tree–tree + 4 membership edges.
        let g = two_tree_graph(vec![0, 0, 1, 1, 2, 2, 3, 3], 8, 1);
        let count = |k| g.edges().iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EdgeKind::Adjacent), 3);
        assert_eq!(count(EdgeKind::TreeAdjacent), 1);
        assert_eq!(count(EdgeKind::Membership), 4);
        assert_eq!(g.edges().len(), 8);
    }

    #[test]
    fn four_superpixels_two_trees_on_a_grid() {
        // 2×2 grid of 2×2 blocks, 4-connectivity: 4 adjacency edges (no diagonals).
        #[rustfmt::skip]
        let labels = vec![
            0, 0, 1, 1,
            0, 0, 1, 1,
            2, 2, 3, 3,
            2, 2, 3, 3,
        ];
        let g = two_tree_graph(labels, 4, 4);
        assert_eq!(g.edges().iter().filter(|e| e.kind == EdgeKind::Adjacent).count(), 4);
        assert_eq!(g.edges().len(), 9);
    }

    #[test]
    fn dump_format() {
        let map = strip_map(vec![0, 0, 1, 1, 0, 0, 1, 1], 4, 2);
        let trees = build_trees(&map.superpixels, &map.adjacency(), 3000.0, 1);
        let g = build_graph(&map, &trees);
        let expected = "\
V 0 sp 4
V 1 sp 4
V 2 tree 8
E 0 1 0.000000
E 0 2 0.000000
E 1 2 0.000000
";
        assert_eq!(g.dump(), expected);
    }
}
