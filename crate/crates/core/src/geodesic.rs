//! Multi-source shortest-path distances over non-negative edge weights.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};

/// Compressed undirected adjacency lists.
#[derive(Debug, Clone, Default)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbours: Vec<(usize, f64)>,
}

impl Adjacency {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut degree = vec![0usize; n + 1];
        for &(a, b, w) in &edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range");
            assert!(w >= 0.0, "negative edge weight");
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for v in 0..n {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut neighbours = vec![(0, 0.0); offsets[n]];
        for &(a, b, w) in &edges {
            neighbours[fill[a]] = (b, w);
            fill[a] += 1;
            neighbours[fill[b]] = (a, w);
            fill[b] += 1;
        }
        Self { offsets, neighbours }
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64)] {
        &self.neighbours[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Distance of every vertex to its nearest source.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub distance: Vec<f64>,
    /// Source attaining `distance`; `None` where unreachable.
    pub nearest_source: Vec<Option<usize>>,
    pub sources: Vec<usize>,
}

impl DistanceField {
    pub fn is_reachable(&self, v: usize) -> bool {
        self.nearest_source[v].is_some()
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    source: usize,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, source, vertex)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.source.cmp(&self.source))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distance from every vertex to the closest member of `sources`.
///
/// Equidistant sources resolve to the smaller source id. Unreachable vertices get
/// `f64::INFINITY` and no nearest source.
pub fn geodesic_from_set(graph: &Adjacency, sources: &[usize]) -> Result<DistanceField> {
    if sources.is_empty() {
        return Err(Error::EmptySources);
    }
    let n = graph.len();
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidVertex(bad));
    }
    let mut distance = vec![f64::INFINITY; n];
    let mut nearest: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::with_capacity(n);
    for &s in sources {
        if nearest[s].is_none_or(|cur| s < cur) {
            distance[s] = 0.0;
            nearest[s] = Some(s);
            heap.push(Entry { dist: 0.0, source: s, vertex: s });
        }
    }
    while let Some(Entry { dist, source, vertex }) = heap.pop() {
        if done[vertex] || nearest[vertex] != Some(source) || dist != distance[vertex] {
            continue;
        }
        done[vertex] = true;
        for &(next, w) in graph.neighbours(vertex) {
            if done[next] {
                continue;
            }
            let nd = dist + w;
            let better = match nearest[next] {
                None => true,
                Some(cur) => nd < distance[next] || (nd == distance[next] && source < cur),
            };
            if better {
                distance[next] = nd;
                nearest[next] = Some(source);
                heap.push(Entry { dist: nd, source, vertex: next });
            }
        }
    }
    let mut sources = sources.to_vec();
    sources.sort_unstable();
    sources.dedup();
    Ok(DistanceField { distance, nearest_source: nearest, sources })
}

/// Label of the nearest source of `v`; unreachable vertices default to background (0).
pub fn nearest_label(field: &DistanceField, labels: &BTreeMap<usize, u8>, v: usize) -> u8 {
    field.nearest_source[v].and_then(|s| labels.get(&s).copied()).unwrap_or(0)
}
