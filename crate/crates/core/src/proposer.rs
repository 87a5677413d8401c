//! Seed assessment (confidence + influence) and spatial diversification of query seeds.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geodesic::geodesic_from_set;
use crate::params::Params;
use crate::scene::Scene;
use crate::trees::Tree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedCandidate {
    pub superpixel: usize,
    /// Display centroid in image pixels.
    pub centroid: [f64; 2],
    pub score: f64,
    /// Geodesic distance to the nearest labeled vertex (0 when nothing is labeled).
    pub confidence: f64,
    /// Pixel share of the containing tree.
    pub influence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryProposal {
    pub round: usize,
    pub seeds: Vec<SeedCandidate>,
}

impl QueryProposal {
    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }
}

/// Largest pixel size among trees containing `superpixel`, over the image area.
pub fn influence(superpixel: usize, trees: &[Tree], image_area_px: usize) -> f64 {
    let size = trees
        .iter()
        .filter(|t| t.members.binary_search(&superpixel).is_ok())
        .map(|t| t.size_px)
        .max()
        .expect("superpixel is not in any tree");
    size as f64 / image_area_px as f64
}

fn influences(scene: &Scene) -> Vec<f64> {
    let mut out = vec![0.0f64; scene.n_superpixels()];
    let area = scene.area_px() as f64;
    for t in &scene.trees {
        let psi = t.size_px as f64 / area;
        for &m in &t.members {
            out[m] = out[m].max(psi);
        }
    }
    out
}

/// `Φ + θ_s Ψ`.
pub fn seed_score(confidence: f64, influence: f64, theta_s: f64) -> f64 {
    confidence + theta_s * influence
}

/// Scores every superpixel outside `excluded`, measuring confidence from `distance_sources`.
fn assess(
    scene: &Scene,
    distance_sources: &[usize],
    excluded: &BTreeSet<usize>,
    theta_s: f64,
) -> Vec<SeedCandidate> {
    let field = (!distance_sources.is_empty()).then(|| {
        geodesic_from_set(scene.graph.adjacency(), distance_sources).expect("sources are valid vertices")
    });
    let psi = influences(scene);
    scene
        .superpixels
        .superpixels
        .iter()
        .filter(|sp| !excluded.contains(&sp.id))
        .map(|sp| {
            let confidence = field.as_ref().map_or(0.0, |f| {
                let d = f.distance[sp.id];
                // unreachable vertices are maximally informative but must stay finite
                if d.is_finite() { d } else { scene.graph.n_vertices() as f64 }
            });
            let influence = psi[sp.id];
            SeedCandidate {
                superpixel: sp.id,
                centroid: sp.centroid,
                score: seed_score(confidence, influence, theta_s),
                confidence,
                influence,
            }
        })
        .collect()
}

/// Score `Φ + θ_s Ψ` for every unlabeled superpixel vertex. Tree vertices are never candidates.
pub fn assess_all(scene: &Scene, labeled: &BTreeSet<usize>, theta_s: f64) -> Vec<SeedCandidate> {
    let sources: Vec<usize> = labeled.iter().copied().collect();
    assess(scene, &sources, labeled, theta_s)
}

/// Orders candidates by descending score, smaller superpixel id first on ties.
pub fn sort_candidates(candidates: &mut [SeedCandidate]) {
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.superpixel.cmp(&b.superpixel)));
}

fn far_enough(c: &SeedCandidate, accepted: &[SeedCandidate], theta_d: f64) -> bool {
    accepted.iter().all(|s| {
        let dx = s.centroid[0] - c.centroid[0];
        let dy = s.centroid[1] - c.centroid[1];
        (dx * dx + dy * dy).sqrt() >= theta_d
    })
}

/// Greedy non-maximum suppression over sorted candidates: accept a candidate iff it lies at
/// least `theta_d` from every accepted one, stopping at `theta_k`.
pub fn diversify(sorted: &[SeedCandidate], theta_d: f64, theta_k: usize) -> Vec<SeedCandidate> {
    let mut accepted: Vec<SeedCandidate> = Vec::with_capacity(theta_k);
    for c in sorted {
        if accepted.len() == theta_k {
            break;
        }
        if far_enough(c, &accepted, theta_d) {
            accepted.push(c.clone());
        }
    }
    accepted
}

/// The member of the largest tree (lowest id on ties) whose display centroid is nearest the
/// tree's area-weighted centroid.
pub fn largest_tree_centroid(scene: &Scene) -> usize {
    let tree = scene
        .trees
        .iter()
        .max_by(|a, b| a.size_px.cmp(&b.size_px).then(b.id.cmp(&a.id)))
        .expect("scene has at least one tree");
    let sps = &scene.superpixels.superpixels;
    *tree
        .members
        .iter()
        .min_by(|&&a, &&b| {
            let d = |s: usize| {
                let c = sps[s].centroid;
                (c[0] - tree.mean_position[0]).powi(2) + (c[1] - tree.mean_position[1]).powi(2)
            };
            d(a).total_cmp(&d(b)).then(a.cmp(&b))
        })
        .unwrap()
}

/// Proposes the next query set for a session that has labeled `labeled` so far.
///
/// With nothing labeled, the first seed is the centroid superpixel of the largest tree;
/// remaining slots are filled one at a time, scoring confidence from the seeds already
/// chosen this round. Otherwise all unlabeled superpixels are assessed against the labeled
/// set and diversified. An empty proposal means nothing is left to ask.
pub fn propose_round(scene: &Scene, labeled: &BTreeSet<usize>, round: usize, params: &Params) -> QueryProposal {
    if labeled.len() >= scene.n_superpixels() {
        return QueryProposal { round, seeds: Vec::new() };
    }
    if !labeled.is_empty() {
        let mut candidates = assess_all(scene, labeled, params.theta_s);
        sort_candidates(&mut candidates);
        let seeds = diversify(&candidates, params.theta_d_px, params.theta_k);
        return QueryProposal { round, seeds };
    }

    let first = largest_tree_centroid(scene);
    let mut excluded = BTreeSet::from([first]);
    let mut seeds = assess(scene, &[], &BTreeSet::new(), params.theta_s)
        .into_iter()
        .filter(|c| c.superpixel == first)
        .collect::<Vec<_>>();
    while seeds.len() < params.theta_k {
        let chosen: Vec<usize> = seeds.iter().map(|s| s.superpixel).collect();
        let mut candidates = assess(scene, &chosen, &excluded, params.theta_s);
        sort_candidates(&mut candidates);
        let Some(next) = candidates.into_iter().find(|c| far_enough(c, &seeds, params.theta_d_px)) else {
            break;
        };
        excluded.insert(next.superpixel);
        seeds.push(next);
    }
    QueryProposal { round, seeds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::LabImage;
    use proptest::prelude::*;

    fn cand(id: usize, x: f64, y: f64, score: f64) -> SeedCandidate {
        SeedCandidate { superpixel: id, centroid: [x, y], score, confidence: score, influence: 0.0 }
    }

    #[test]
    fn influence_examples() {
        let tree = |id, members: Vec<usize>, size_px| Tree {
            id,
            members,
            size_px,
            features: crate::features::Features::new(vec![], vec![]),
            mean_position: [0.0, 0.0],
        };
        let whole = vec![tree(0, vec![0, 1, 2], 10_000)];
        assert_eq!(influence(1, &whole, 10_000), 1.0);
        let split = vec![tree(0, vec![0, 1], 2500), tree(1, vec![2, 3], 7500)];
        assert_eq!(influence(0, &split, 10_000), 0.25);
        let tiny = vec![tree(0, vec![0, 1, 2], 42), tree(1, vec![3], 9958)];
        assert!((influence(2, &tiny, 10_000) - 0.0042).abs() < 1e-9);
    }

    #[test]
    fn score_examples() {
        assert!((seed_score(0.3, 0.5, 0.7) - 0.65).abs() < 1e-9);
        assert_eq!(seed_score(0.0, 0.4, 0.7), 0.7 * 0.4);
    }

    #[test]
    fn zero_weight_neighbours_score_influence_only() {
        let img = LabImage::uniform(80, 60, [50.0, 0.0, 0.0]).unwrap();
        let scene = Scene::build(&img, &Params { n_superpixels: 20, ..Params::default() }).unwrap();
        let labeled = BTreeSet::from([0]);
        let cs = assess_all(&scene, &labeled, 0.7);
        assert_eq!(cs.len(), scene.n_superpixels() - 1);
        for c in &cs {
            assert_eq!(c.confidence, 0.0);
            assert_eq!(c.influence, 1.0);
            assert_eq!(c.score, 0.7);
        }
    }

    #[test]
    fn diversify_inactive_constraint() {
        let cs: Vec<_> = (0..5).map(|i| cand(i, 100.0 * i as f64, 0.0, 10.0 - i as f64)).collect();
        let out = diversify(&cs, 57.0, 5);
        assert_eq!(out.iter().map(|c| c.superpixel).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn diversify_suppresses_neighbours_of_top() {
        // Brute-force trace: 1, 2, 3 sit within 57 px of 0 and are skipped; 4..7 are far
        // from 0 and from each other.
        let mut cs = vec![
            cand(0, 0.0, 0.0, 10.0),
            cand(1, 10.0, 0.0, 9.0),
            cand(2, 0.0, 30.0, 8.0),
            cand(3, 40.0, 40.0, 7.0),
        ];
        for i in 0..4 {
            cs.push(cand(4 + i, 200.0 + 100.0 * i as f64, 200.0, 6.0 - i as f64));
        }
        let out = diversify(&cs, 57.0, 5);
        assert_eq!(out.iter().map(|c| c.superpixel).collect::<Vec<_>>(), vec![0, 4, 5, 6, 7]);
    }

    #[test]
    fn diversify_short_supply() {
        let cs = vec![cand(0, 0.0, 0.0, 1.0), cand(1, 100.0, 0.0, 0.5)];
        assert_eq!(diversify(&cs, 57.0, 5).len(), 2);
    }

    #[test]
    fn sort_breaks_ties_by_id() {
        let mut cs = vec![cand(3, 0.0, 0.0, 1.0), cand(1, 0.0, 0.0, 1.0), cand(2, 0.0, 0.0, 2.0)];
        sort_candidates(&mut cs);
        assert_eq!(cs.iter().map(|c| c.superpixel).collect::<Vec<_>>(), vec![2, 1, 3]);
    }

    fn two_tone_scene() -> Scene {
        // left 70% dark, right 30% bright: two trees of very different size
        let (w, h) = (200u32, 100u32);
        let pixels = (0..w * h)
            .map(|i| if i % w < 140 { [20.0, 10.0, 10.0] } else { [85.0, -30.0, 40.0] })
            .collect();
        let img = LabImage::new(w, h, pixels).unwrap();
        Scene::build(&img, &Params { n_superpixels: 50, ..Params::default() }).unwrap()
    }

    #[test]
    fn first_seed_is_centroid_of_largest_tree() {
        let scene = two_tone_scene();
        assert_eq!(scene.trees.len(), 2);
        let params = Params { theta_k: 1, ..Params::default() };
        let p = propose_round(&scene, &BTreeSet::new(), 0, &params);
        assert_eq!(p.len(), 1);
        let seed = &p.seeds[0];
        let big = scene.trees.iter().max_by_key(|t| t.size_px).unwrap();
        assert!(big.members.contains(&seed.superpixel));
        assert!(seed.centroid[0] < 140.0);
        assert!((seed.centroid[0] - 70.0).abs() < 15.0 && (seed.centroid[1] - 50.0).abs() < 15.0);
    }

    #[test]
    fn later_rounds_exclude_labeled_and_respect_spacing() {
        let scene = two_tone_scene();
        let params = Params { theta_d_px: 40.0, ..Params::default() };
        let p0 = propose_round(&scene, &BTreeSet::new(), 0, &params);
        assert_eq!(p0.len(), 5);
        let labeled: BTreeSet<usize> = [p0.seeds[0].superpixel].into();
        let p1 = propose_round(&scene, &labeled, 1, &params);
        assert!(!p1.seeds.iter().any(|s| labeled.contains(&s.superpixel)));
        for (i, a) in p1.seeds.iter().enumerate() {
            for b in &p1.seeds[i + 1..] {
                let d = ((a.centroid[0] - b.centroid[0]).powi(2) + (a.centroid[1] - b.centroid[1]).powi(2)).sqrt();
                assert!(d >= 40.0);
            }
        }
        // the bright region is far in feature space from the labeled dark seed
        assert!(p1.seeds[0].centroid[0] >= 140.0);
    }

    #[test]
    fn nothing_left_gives_empty_proposal() {
        let scene = two_tone_scene();
        let all: BTreeSet<usize> = (0..scene.n_superpixels()).collect();
        assert!(propose_round(&scene, &all, 3, &Params::default()).is_empty());
    }

    proptest! {
        #[test]
        fn scaling_scores_keeps_selection(
            pts in proptest::collection::vec((0.0f64..300.0, 0.0f64..300.0, 0.0f64..5.0), 1..40),
            scale in 0.01f64..100.0,
            theta_d in 1.0f64..100.0,
            k in 1usize..8,
        ) {
            let mut cs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y, s))| cand(i, x, y, s)).collect();
            let mut scaled: Vec<_> = cs.iter().map(|c| SeedCandidate { score: c.score * scale, ..c.clone() }).collect();
            sort_candidates(&mut cs);
            sort_candidates(&mut scaled);
            let a: Vec<_> = diversify(&cs, theta_d, k).into_iter().map(|c| c.superpixel).collect();
            let b: Vec<_> = diversify(&scaled, theta_d, k).into_iter().map(|c| c.superpixel).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn diversify_respects_spacing_and_budget(
            pts in proptest::collection::vec((0.0f64..300.0, 0.0f64..300.0, 0.0f64..5.0), 0..40),
            theta_d in 1.0f64..100.0,
            k in 1usize..8,
        ) {
            let mut cs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y, s))| cand(i, x, y, s)).collect();
            sort_candidates(&mut cs);
            let out = diversify(&cs, theta_d, k);
            prop_assert!(out.len() <= k.min(cs.len()));
            for (i, a) in out.iter().enumerate() {
                for b in &out[i + 1..] {
                    let d = ((a.centroid[0] - b.centroid[0]).powi(2) + (a.centroid[1] - b.centroid[1]).powi(2)).sqrt();
                    prop_assert!(d >= theta_d);
                }
            }
            // maximality: every rejected candidate conflicts with an accepted one, unless full
            if out.len() < k {
                for c in &cs {
                    let taken = out.iter().any(|o| o.superpixel == c.superpixel);
                    prop_assert!(taken || !far_enough(c, &out, theta_d));
                }
            }
        }
    }
}
