//! Unattended evaluation: a ground-truth oracle answers every proposal.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::propagate::{dice, rasterize, SegmentationMask};
use crate::proposer::SeedCandidate;
use crate::scene::Scene;
use crate::session::{image_hash, SessionState};

/// How the simulated user answers a query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OracleMode {
    /// Ground truth at the displayed centroid pixel.
    #[default]
    Centroid,
    /// Majority ground-truth label over the seed's superpixel.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub round: usize,
    pub dice: f64,
    pub proposal_ms: f64,
    pub propagation_ms: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub image_id: String,
    pub records: Vec<EvalRecord>,
    /// Dice of the ground-truth-majority labeling of every superpixel.
    pub upper_bound: f64,
    pub preprocessing_ms: f64,
    /// Final segmentation.
    pub mask: Option<SegmentationMask>,
}

pub fn oracle_label(seed: &SeedCandidate, gt: &SegmentationMask) -> u8 {
    gt.get(seed.centroid[0] as u32, seed.centroid[1] as u32)
}

/// Superpixel labels by ground-truth majority (ROI iff more than half the pixels are ROI).
pub fn majority_labels(scene: &Scene, gt: &SegmentationMask) -> Vec<u8> {
    scene
        .superpixels
        .superpixels
        .iter()
        .map(|sp| {
            let roi = sp.pixels.iter().filter(|&&p| gt.data[p] == 1).count();
            (2 * roi > sp.area()) as u8
        })
        .collect()
}

/// Best Dice reachable by labeling whole superpixels with their majority label.
pub fn upper_bound(scene: &Scene, gt: &SegmentationMask) -> Result<f64> {
    dice(&rasterize(&majority_labels(scene, gt), &scene.superpixels)?, gt)
}

fn check_dims(scene: &Scene, gt: &SegmentationMask) -> Result<()> {
    if scene.width() != gt.width || scene.height() != gt.height {
        return Err(Error::DimensionMismatch(scene.width(), scene.height(), gt.width, gt.height));
    }
    Ok(())
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs a full oracle session on a prebuilt scene.
pub fn run_on_scene(
    image_id: &str,
    scene: Arc<Scene>,
    hash: String,
    gt: &SegmentationMask,
    params: &Params,
    mode: OracleMode,
) -> Result<SessionReport> {
    check_dims(&scene, gt)?;
    let majority = matches!(mode, OracleMode::Majority).then(|| majority_labels(&scene, gt));
    let bound = upper_bound(&scene, gt)?;
    let mut state = SessionState::with_scene(scene, params.clone(), hash)?;
    let mut records = Vec::new();
    while let Some(pending) = state.pending.clone() {
        let proposal_ms = ms(state.timing.proposal);
        let labels: Vec<u8> = pending
            .seeds
            .iter()
            .map(|s| match &majority {
                Some(m) => m[s.superpixel],
                None => oracle_label(s, gt),
            })
            .collect();
        state.apply_labels(&labels)?;
        let mask = state.current_mask()?;
        records.push(EvalRecord {
            image_id: image_id.to_string(),
            round: state.round,
            dice: dice(&mask, gt)?,
            proposal_ms,
            propagation_ms: ms(state.timing.propagation),
            n_seeds: pending.len(),
        });
    }
    Ok(SessionReport {
        image_id: image_id.to_string(),
        records,
        upper_bound: bound,
        preprocessing_ms: 0.0,
        mask: state.current_mask().ok(),
    })
}

/// Builds the graph for `image` and runs `params.rounds` oracle rounds against `gt`.
pub fn run_session(
    image_id: &str,
    image: &RgbImage,
    gt: &SegmentationMask,
    params: &Params,
    mode: OracleMode,
) -> Result<SessionReport> {
    if image.width() != gt.width || image.height() != gt.height {
        return Err(Error::DimensionMismatch(image.width(), image.height(), gt.width, gt.height));
    }
    let start = Instant::now();
    let scene = Arc::new(Scene::from_rgb(image, params)?);
    let preprocessing_ms = ms(start.elapsed());
    let mut report = run_on_scene(image_id, scene, image_hash(image), gt, params, mode)?;
    report.preprocessing_ms = preprocessing_ms;
    Ok(report)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Nearest-rank percentile, `q` in [0, 1].
pub fn percentile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}

/// Median Dice per round across reports; rounds an image never reached are left out.
pub fn median_curve(reports: &[SessionReport]) -> Vec<(usize, f64)> {
    let max_round = reports.iter().flat_map(|r| r.records.iter().map(|e| e.round)).max().unwrap_or(0);
    (1..=max_round)
        .filter_map(|round| {
            let mut v: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.records.iter().find(|e| e.round == round).map(|e| e.dice))
                .collect();
            median(&mut v).map(|m| (round, m))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub round_ms_mean: f64,
    pub round_ms_p50: f64,
    pub round_ms_p90: f64,
    pub round_ms_p99: f64,
    pub preprocessing_ms_p50: f64,
    pub preprocessing_ms_max: f64,
}

pub fn timing_summary(reports: &[SessionReport]) -> TimingSummary {
    let mut rounds: Vec<f64> =
        reports.iter().flat_map(|r| r.records.iter().map(|e| e.proposal_ms + e.propagation_ms)).collect();
    let mut pre: Vec<f64> = reports.iter().map(|r| r.preprocessing_ms).collect();
    let mean = if rounds.is_empty() { 0.0 } else { rounds.iter().sum::<f64>() / rounds.len() as f64 };
    TimingSummary {
        round_ms_mean: mean,
        round_ms_p50: percentile(&mut rounds, 0.5).unwrap_or(0.0),
        round_ms_p90: percentile(&mut rounds, 0.9).unwrap_or(0.0),
        round_ms_p99: percentile(&mut rounds, 0.99).unwrap_or(0.0),
        preprocessing_ms_p50: percentile(&mut pre, 0.5).unwrap_or(0.0),
        preprocessing_ms_max: pre.iter().copied().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub reports: Vec<SessionReport>,
    /// `(stem, reason)` for every pair that could not be evaluated.
    pub skipped: Vec<(String, String)>,
    pub curve: Vec<(usize, f64)>,
    pub timing: TimingSummary,
}

impl BatchSummary {
    pub fn records(&self) -> impl Iterator<Item = &EvalRecord> {
        self.reports.iter().flat_map(|r| &r.records)
    }

    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_records_csv(path, self.records())
    }

    /// `round,median_dice`.
    pub fn write_curve_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["round", "median_dice"])?;
        for (round, m) in &self.curve {
            w.write_record([round.to_string(), format!("{m:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV with columns `image_id,round,dice,proposal_ms,propagation_ms,n_seeds`.
pub fn write_records_csv<'a>(path: impl AsRef<Path>, records: impl IntoIterator<Item = &'a EvalRecord>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(stem, image, ground truth)` for every `<stem>.png` with a `<stem>_gt.png` sibling.
pub fn find_pairs(dir: impl AsRef<Path>) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let dir = dir.as_ref();
    let mut pairs = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_suffix("_gt.png") else { continue };
        pairs.push((stem.to_string(), dir.join(format!("{stem}.png")), path.clone()));
    }
    pairs.sort();
    Ok(pairs)
}

fn load_pair(image: &Path, gt: &Path) -> Result<(RgbImage, SegmentationMask)> {
    let img = image::open(image)?.to_rgb8();
    let gt = SegmentationMask::load(gt)?;
    Ok((img, gt))
}

/// Evaluates every pair in `dir`; unreadable or mismatched pairs are skipped and reported.
pub fn run_batch(dir: impl AsRef<Path>, params: &Params, mode: OracleMode) -> Result<BatchSummary> {
    params.validate()?;
    let pairs = find_pairs(dir)?;
    let outcomes: Vec<(String, Result<SessionReport>)> = pairs
        .par_iter()
        .map(|(stem, img, gt)| {
            let out = load_pair(img, gt).and_then(|(img, gt)| run_session(stem, &img, &gt, params, mode));
            (stem.clone(), out)
        })
        .collect();

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (stem, out) in outcomes {
        match out {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::warn!("skipping {stem}: {e}");
                skipped.push((stem, e.to_string()));
            }
        }
    }
    let curve = median_curve(&reports);
    let timing = timing_summary(&reports);
    Ok(BatchSummary { reports, skipped, curve, timing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn seed_at(x: f64, y: f64) -> SeedCandidate {
        SeedCandidate { superpixel: 0, centroid: [x, y], score: 0.0, confidence: 0.0, influence: 0.0 }
    }

    #[test]
    fn oracle_reads_centroid_pixel() {
        // 1-px wide ROI column at x = 4
        let gt = SegmentationMask::new(9, 3, (0..27).map(|i| (i % 9 == 4) as u8).collect()).unwrap();
        assert_eq!(oracle_label(&seed_at(4.0, 1.0), &gt), 1);
        assert_eq!(oracle_label(&seed_at(3.0, 1.0), &gt), 0);
        assert_eq!(oracle_label(&seed_at(5.0, 2.0), &gt), 0);
    }

    #[test]
    fn median_and_percentiles() {
        assert_eq!(median(&mut [0.9, 0.2, 0.5]), Some(0.5));
        assert_eq!(median(&mut [1.0, 3.0]), Some(2.0));
        assert_eq!(median(&mut []), None);
        assert_eq!(percentile(&mut [5.0, 1.0, 3.0, 2.0, 4.0], 0.9), Some(5.0));
        assert_eq!(percentile(&mut [5.0, 1.0, 3.0, 2.0, 4.0], 0.5), Some(3.0));
    }

    fn report(id: &str, dices: &[f64]) -> SessionReport {
        SessionReport {
            image_id: id.into(),
            records: dices
                .iter()
                .enumerate()
                .map(|(i, &d)| EvalRecord {
                    image_id: id.into(),
                    round: i + 1,
                    dice: d,
                    proposal_ms: 0.0,
                    propagation_ms: 0.0,
                    n_seeds: 5,
                })
                .collect(),
            upper_bound: 1.0,
            preprocessing_ms: 0.0,
            mask: None,
        }
    }

    #[test]
    fn curve_medians() {
        let one = [report("a", &[0.1, 0.4, 0.8])];
        assert_eq!(median_curve(&one), vec![(1, 0.1), (2, 0.4), (3, 0.8)]);
        let three = [report("a", &[0.0, 0.0, 0.0, 0.0, 0.2]), report("b", &[0.0, 0.0, 0.0, 0.0, 0.9]), report("c", &[0.0, 0.0, 0.0, 0.0, 0.5])];
        assert_eq!(median_curve(&three)[4], (5, 0.5));
    }

    #[test]
    fn all_roi_ground_truth_is_solved_in_one_round() {
        let img = RgbImage::from_fn(120, 90, |x, y| Rgb([(x * 2) as u8, (y * 2) as u8, 128]));
        let gt = SegmentationMask::filled(120, 90, 1);
        let params = Params { n_superpixels: 60, rounds: 3, ..Params::default() };
        let r = run_session("ramp", &img, &gt, &params, OracleMode::Centroid).unwrap();
        assert_eq!(r.records[0].dice, 1.0);
        assert_eq!(r.records.len(), 3);
        assert!(r.records.iter().map(|e| e.n_seeds).sum::<usize>() <= 15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let img = RgbImage::new(20, 20);
        let gt = SegmentationMask::filled(10, 20, 0);
        assert!(matches!(
            run_session("x", &img, &gt, &Params::default(), OracleMode::Centroid),
            Err(Error::DimensionMismatch(..))
        ));
    }

    #[test]
    fn exhaustive_labeling_reaches_upper_bound() {
        let img = RgbImage::from_fn(100, 80, |x, y| {
            if (x as i32 - 60).pow(2) + (y as i32 - 40).pow(2) < 500 { Rgb([250, 30, 30]) } else { Rgb([20, 90, 40]) }
        });
        let scene = Arc::new(Scene::from_rgb(&img, &Params { n_superpixels: 40, ..Params::default() }).unwrap());
        // ground truth is an exact union of superpixels: the majority mask itself
        let ml = majority_labels(&scene, &SegmentationMask::new(100, 80, (0..8000).map(|i| {
            let (x, y) = (i % 100, i / 100);
            ((x - 60i32).pow(2) + (y - 40i32).pow(2) < 500) as u8
        }).collect()).unwrap());
        let gt = rasterize(&ml, &scene.superpixels).unwrap();
        let params = Params { theta_k: 5, theta_d_px: 1.0, rounds: 1000, ..Params::default() };
        let r = run_on_scene("disc", scene.clone(), "h".into(), &gt, &params, OracleMode::Centroid).unwrap();
        let last = r.records.last().unwrap();
        assert_eq!(r.upper_bound, 1.0);
        assert_eq!(last.dice, r.upper_bound);
    }

    #[test]
    fn batch_skips_bad_pairs() {
        let dir = tempfile::tempdir().unwrap();
        crate::synthetic::write_suite(dir.path(), 2, 96, 72).unwrap();
        std::fs::write(dir.path().join("broken_gt.png"), b"not a png").unwrap();
        std::fs::write(dir.path().join("broken.png"), b"nope").unwrap();
        let params = Params { n_superpixels: 60, rounds: 4, theta_d_px: 20.0, hit_radius_px: 10.0, ..Params::default() };
        let s = run_batch(dir.path(), &params, OracleMode::Centroid).unwrap();
        assert_eq!(s.reports.len(), 2);
        assert_eq!(s.skipped.len(), 1);
        assert_eq!(s.skipped[0].0, "broken");
        assert_eq!(s.curve.len(), 4);

        let csv_path = dir.path().join("records.csv");
        s.write_records_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("image_id,round,dice,proposal_ms,propagation_ms,n_seeds\n"));
        assert_eq!(text.lines().count(), 1 + 8);
    }
}
