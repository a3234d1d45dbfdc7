mod common;

use clicksel::backend::{synth_scene, ReferenceModel};
use clicksel::dataset::{LabeledScene, Split};
use clicksel::encoding::{ClickSet, Polarity};
use clicksel::graphcut::EnergyParams;
use clicksel::simulator::{evaluate_dataset, next_click, run_sequence, EvalConfig, EvalReport, OracleSegmenter, Pipeline, Segmenter};
use clicksel::{BinaryMask, Image, Result};
use common::oracles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let (cr, cc) = (rng.random_range(0..h) as i64, rng.random_range(0..w) as i64);
    let (a, b) = (rng.random_range(2..10) as i64, rng.random_range(2..10) as i64);
    BinaryMask::from_fn(h, w, |r, c| {
        let (dr, dc) = (r as i64 - cr, c as i64 - cc);
        dr * dr * b * b + dc * dc * a * a <= a * a * b * b
    })
}

#[test]
fn next_click_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let gt = blob(&mut rng, 24, 24);
        let mut current = blob(&mut rng, 24, 24);
        if rng.random_bool(0.3) {
            current = BinaryMask::from_fn(24, 24, |r, c| current.get(r, c) ^ rng.random_bool(0.05));
        }
        match oracles::next_click(&gt, &current) {
            Some(expected) => assert_eq!(next_click(&gt, &current).unwrap(), expected),
            None => assert!(next_click(&gt, &current).is_err()),
        }
    }
}

/// Thresholds a fixed noisy version of the ground truth, growing toward the
/// truth around positive clicks.
struct Noisy {
    gt: BinaryMask,
}

impl Segmenter for Noisy {
    fn segment(&self, _: &Image, clicks: &ClickSet) -> Result<BinaryMask> {
        let (h, w) = self.gt.dims();
        Ok(BinaryMask::from_fn(h, w, |r, c| {
            let near = clicks.iter().any(|k| oracles::d2((r, c), (k.row, k.col)) <= 16);
            if near { self.gt.get(r, c) } else { self.gt.get(r, c) && (r + c) % 3 != 0 }
        }))
    }
}

#[test]
fn every_click_lands_on_an_error_of_matching_type() {
    for seed in 0..50u64 {
        let scene = synth_scene(seed);
        let gt = &scene.instances[0];
        let seg = Noisy { gt: gt.clone() };
        let curve = run_sequence(&seg, &scene.image, gt, 20).unwrap();
        let mut clicks = ClickSet::new();
        let (h, w) = gt.dims();
        let mut current = BinaryMask::new(h, w);
        for click in &curve.clicks {
            assert_ne!(gt.get(click.row, click.col), current.get(click.row, click.col));
            assert_eq!(click.polarity == Polarity::Positive, gt.get(click.row, click.col));
            if !clicks.contains(click) {
                clicks.push(*click).unwrap();
            }
            current = seg.segment(&scene.image, &clicks).unwrap();
        }
        assert!(curve.ious.len() <= 20);
    }
}

#[test]
fn first_click_is_deepest_object_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let gt = blob(&mut rng, 30, 30);
        let empty = BinaryMask::new(30, 30);
        let click = next_click(&gt, &empty).unwrap();
        let score = |r: usize, c: usize| {
            let frame = [r + 1, 30 - r, c + 1, 30 - c].into_iter().map(|v| (v * v) as f64).fold(f64::INFINITY, f64::min).sqrt();
            oracles::distance_to(&gt, false, clicksel::Pixel::new(r, c)).min(frame)
        };
        let best = (0..900).filter(|&i| gt.as_slice()[i]).map(|i| score(i / 30, i % 30)).fold(0.0, f64::max);
        assert_eq!(score(click.row, click.col), best);
    }
}

fn small_dataset(n: u64) -> Vec<LabeledScene> {
    (0..n).map(|s| LabeledScene { id: format!("s{s}"), split: Split::Test, scene: synth_scene(100 + s) }).collect()
}

#[test]
fn report_is_consistent_and_deterministic() {
    let data = small_dataset(4);
    let model = ReferenceModel::<f32>::reference(0);
    let seg = Pipeline::new(&model, EnergyParams::default());
    let config = EvalConfig { thresholds: vec![0.5, 0.85, 0.9], max_clicks: 6 };
    let a = evaluate_dataset(&seg, &data, &config).unwrap();
    let b = evaluate_dataset(&seg, &data, &config).unwrap();
    assert_eq!(a.to_json(), b.to_json());

    let reread: EvalReport = serde_json::from_str(&a.to_json()).unwrap();
    let n = reread.rows.len() as f64;
    for k in 0..config.max_clicks {
        let mean = reread.rows.iter().map(|r| *r.ious.get(k).unwrap_or(r.ious.last().unwrap())).sum::<f64>() / n;
        assert!((mean - reread.mean_curve[k]).abs() < 1e-12);
    }
    for (t, s) in reread.mean_clicks.iter().enumerate() {
        let mean = reread.rows.iter().map(|r| r.clicks_to_threshold[t] as f64).sum::<f64>() / n;
        assert!((mean - s.mean_clicks).abs() < 1e-12);
    }
    assert!(reread.rows.iter().all(|r| r.ious.len() <= 6));
}

#[test]
fn oracle_segmenter_needs_one_click() {
    let data = small_dataset(5);
    let seg = OracleSegmenter::new(data.iter().map(|s| (s.scene.image.clone(), s.scene.instances.clone())));
    let report = evaluate_dataset(&seg, &data, &EvalConfig::default()).unwrap();
    assert!(report.mean_clicks.iter().all(|s| s.mean_clicks == 1.0));
    assert!(report.mean_curve.iter().all(|&v| v == 1.0));
}

#[test]
fn single_object_report_equals_its_curve() {
    let mut data = small_dataset(1);
    data[0].scene.instances.truncate(1);
    let model = ReferenceModel::<f32>::reference(1);
    let seg = Pipeline::new(&model, EnergyParams::default());
    let config = EvalConfig { thresholds: vec![0.9], max_clicks: 5 };
    let report = evaluate_dataset(&seg, &data, &config).unwrap();
    let curve = run_sequence(&seg, &data[0].scene.image, &data[0].scene.instances[0], 5).unwrap();
    assert_eq!(report.mean_curve, curve.padded());
}
