//! Grouping superpixels into minimum-spanning trees (Felzenszwalb–Huttenlocher on the
//! superpixel adjacency graph) plus a min-size clean-up pass.

use std::collections::BTreeSet;

use crate::features::Features;
use crate::graph::feature_distance;
use crate::slic::Superpixel;

/// Tree-size dependent merge tolerance `θ_t / |t|`, with `|t|` in pixels.
pub fn fh_threshold(tree_size_px: usize, theta_t: f64) -> f64 {
    assert!(tree_size_px >= 1, "tree size must be at least one pixel");
    theta_t / tree_size_px as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub id: usize,
    /// Member superpixel ids, ascending.
    pub members: Vec<usize>,
    pub size_px: usize,
    /// Area-weighted mean of the member histograms.
    pub features: Features,
    /// Area-weighted mean position of the member pixels.
    pub mean_position: [f64; 2],
}

struct DisjointSet {
    parent: Vec<usize>,
    size_px: Vec<usize>,
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(areas: impl Iterator<Item = usize>) -> Self {
        let size_px: Vec<usize> = areas.collect();
        Self { parent: (0..size_px.len()).collect(), internal: vec![0.0; size_px.len()], size_px }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, weight: f64) {
        let (keep, gone) = if a < b { (a, b) } else { (b, a) };
        self.parent[gone] = keep;
        self.size_px[keep] += self.size_px[gone];
        self.internal[keep] = self.internal[keep].max(self.internal[gone]).max(weight);
    }
}

fn make_tree(id: usize, members: Vec<usize>, superpixels: &[Superpixel]) -> Tree {
    let size_px = members.iter().map(|&m| superpixels[m].area()).sum::<usize>();
    let features =
        Features::weighted_mean(members.iter().map(|&m| (&superpixels[m].features, superpixels[m].area() as f64)));
    let (mx, my) = members.iter().fold((0.0, 0.0), |(x, y), &m| {
        let a = superpixels[m].area() as f64;
        (x + a * superpixels[m].mean_position[0], y + a * superpixels[m].mean_position[1])
    });
    Tree { id, members, size_px, features, mean_position: [mx / size_px as f64, my / size_px as f64] }
}

/// Partitions superpixels into trees.
///
/// `adjacency` lists spatially adjacent superpixel pairs. Trees with fewer than
/// `min_tree_superpixels` members are merged into the adjacent tree with the smallest
/// feature distance (lower id on ties) until none remain or no neighbour exists.
/// Tree ids are ordered by smallest member id.
pub fn build_trees(
    superpixels: &[Superpixel],
    adjacency: &[(usize, usize)],
    theta_t: f64,
    min_tree_superpixels: usize,
) -> Vec<Tree> {
    let n = superpixels.len();
    let mut edges: Vec<(f64, usize, usize)> = adjacency
        .iter()
        .map(|&(a, b)| (feature_distance(&superpixels[a].features, &superpixels[b].features), a.min(b), a.max(b)))
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut ds = DisjointSet::new(superpixels.iter().map(Superpixel::area));
    for &(w, a, b) in &edges {
        let (ra, rb) = (ds.find(a), ds.find(b));
        if ra == rb {
            continue;
        }
        let tol_a = ds.internal[ra] + fh_threshold(ds.size_px[ra], theta_t);
        let tol_b = ds.internal[rb] + fh_threshold(ds.size_px[rb], theta_t);
        if w <= tol_a.min(tol_b) {
            ds.union(ra, rb, w);
        }
    }

    // Group members by root; roots are the smallest member thanks to `union`.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = vec![usize::MAX; n];
    for s in 0..n {
        let r = ds.find(s);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of_root[r]].push(s);
    }
    let mut trees: Vec<Tree> =
        groups.into_iter().enumerate().map(|(id, m)| make_tree(id, m, superpixels)).collect();

    let mut owner = vec![0usize; n];
    loop {
        for t in &trees {
            for &m in &t.members {
                owner[m] = t.id;
            }
        }
        let neighbours = |t: usize| -> BTreeSet<usize> {
            adjacency
                .iter()
                .filter_map(|&(a, b)| {
                    let (ta, tb) = (owner[a], owner[b]);
                    if ta == t && tb != t {
                        Some(tb)
                    } else if tb == t && ta != t {
                        Some(ta)
                    } else {
                        None
                    }
                })
                .collect()
        };
        let small = trees.iter().map(|t| t.id).find(|&t| {
            trees[t].members.len() < min_tree_superpixels && !neighbours(t).is_empty()
        });
        let Some(small) = small else { break };
        let target = neighbours(small)
            .into_iter()
            .map(|nb| (feature_distance(&trees[small].features, &trees[nb].features), nb))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, nb)| nb)
            .unwrap();

        let mut merged: Vec<usize> = trees[small].members.iter().chain(&trees[target].members).copied().collect();
        merged.sort_unstable();
        let mut groups: Vec<Vec<usize>> = trees
            .iter()
            .filter(|t| t.id != small && t.id != target)
            .map(|t| t.members.clone())
            .collect();
        groups.push(merged);
        groups.sort_by_key(|g| g[0]);
        trees = groups.into_iter().enumerate().map(|(id, m)| make_tree(id, m, superpixels)).collect();
    }
    trees
}
