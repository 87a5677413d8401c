use swipecut_core::harness::{run_batch, upper_bound, OracleMode};
use swipecut_core::{start_session, synthetic, Checkpoint, Params, Scene, SegmentationMask, SessionState, SwipeStroke};

const CURVE_SLACK: f64 = 0.02;

fn params() -> Params {
    Params { n_superpixels: 300, theta_d_px: 30.0, rounds: 12, ..Params::default() }
}

#[test]
fn batch_curve_rises_towards_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    synthetic::write_suite(dir.path(), 6, 160, 120).unwrap();
    let summary = run_batch(dir.path(), &params(), OracleMode::Centroid).unwrap();
    assert_eq!(summary.reports.len(), 6);
    assert!(summary.skipped.is_empty());
    assert_eq!(summary.curve.len(), 12);

    let best_bound = (0..6)
        .map(|i| {
            let (img, gt) = synthetic::generate(i, 160, 120);
            upper_bound(&Scene::from_rgb(&img, &params()).unwrap(), &gt).unwrap()
        })
        .fold(0.0, f64::max);
    for w in summary.curve.windows(2) {
        assert!(w[1].1 >= w[0].1 - CURVE_SLACK, "curve drops from {:?} to {:?}", w[0], w[1]);
    }
    assert!(summary.curve.iter().all(|&(_, m)| m <= best_bound + 1e-12));
    assert!(summary.curve.last().unwrap().1 > summary.curve[0].1);

    let again = run_batch(dir.path(), &params(), OracleMode::Centroid).unwrap();
    let key = |s: &swipecut_core::harness::BatchSummary| {
        s.records().map(|r| (r.image_id.clone(), r.round, r.dice, r.n_seeds)).collect::<Vec<_>>()
    };
    assert_eq!(key(&summary), key(&again));

    let majority = run_batch(dir.path(), &params(), OracleMode::Majority).unwrap();
    assert_eq!(majority.reports.len(), 6);
}

fn strokes() -> Vec<SwipeStroke> {
    [vec![[0.0, 0.0], [160.0, 120.0]], vec![[80.0, 0.0], [80.0, 120.0]], vec![], vec![[20.0, 100.0], [140.0, 20.0]]]
        .into_iter()
        .map(|p| SwipeStroke::new(p).unwrap())
        .collect()
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let (img, _) = synthetic::generate(2, 160, 120);
    let (mut straight, _) = start_session(&img, params()).unwrap();
    let mut masks: Vec<SegmentationMask> = Vec::new();
    for s in strokes() {
        straight.apply_swipe(&s).unwrap();
        masks.push(straight.current_mask().unwrap());
    }

    let (mut first, _) = start_session(&img, params()).unwrap();
    for s in &strokes()[..2] {
        first.apply_swipe(s).unwrap();
    }
    let json = serde_json::to_string(&first.checkpoint()).unwrap();
    let cp: Checkpoint = serde_json::from_str(&json).unwrap();
    let mut resumed = SessionState::restore(&cp, &img).unwrap();
    assert_eq!(resumed.current_mask().unwrap(), masks[1]);
    assert_eq!(resumed.pending, first.pending);
    for (s, want) in strokes()[2..].iter().zip(&masks[2..]) {
        resumed.apply_swipe(s).unwrap();
        assert_eq!(&resumed.current_mask().unwrap(), want);
    }
    assert_eq!(resumed.labeled(), straight.labeled());
}
