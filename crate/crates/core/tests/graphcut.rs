mod common;

use clicksel::encoding::{Click, ClickSet};
use clicksel::graphcut::{build_energy, energy_of, min_cut, refine, Connectivity, EnergyParams};
use clicksel::{Image, ProbabilityMap};
use common::oracles::{self, OracleEnergy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    image: Image,
    q: Vec<f64>,
    clicks: Vec<Click>,
    params: EnergyParams,
}

impl Instance {
    fn random(rng: &mut ChaCha8Rng, max_side: usize, with_clicks: bool) -> Self {
        let h = rng.random_range(1..=max_side);
        let w = rng.random_range(1..=max_side);
        let image = Image::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let q = (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut clicks = Vec::new();
        if with_clicks {
            for _ in 0..rng.random_range(1..=2) {
                let c = Click { row: rng.random_range(0..h), col: rng.random_range(0..w), polarity: clicksel::encoding::Polarity::from_label(rng.random()) };
                if !clicks.contains(&c) {
                    clicks.push(c);
                }
            }
        }
        let params = EnergyParams {
            lambda: [0.5, 1.0, 2.0][rng.random_range(0..3)],
            connectivity: if rng.random() { Connectivity::Four } else { Connectivity::Eight },
            hard_radius: rng.random_range(0..=1),
            ..Default::default()
        };
        Self { image, q, clicks, params }
    }

    fn oracle(&self) -> OracleEnergy {
        OracleEnergy {
            lambda: self.params.lambda,
            eight: self.params.connectivity == Connectivity::Eight,
            radius: self.params.hard_radius,
            clamp: self.params.prob_clamp,
        }
    }

    fn inputs(&self) -> (ProbabilityMap, ClickSet) {
        let (h, w) = self.image.dims();
        (ProbabilityMap::from_vec(h, w, self.q.clone()).unwrap(), ClickSet::from_clicks(self.clicks.clone()).unwrap())
    }
}

#[test]
fn solver_reaches_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..200 {
        let inst = Instance::random(&mut rng, 4, k % 2 == 1);
        let (q, clicks) = inst.inputs();
        let graph = build_energy(&inst.image, &q, &clicks, &inst.params).unwrap();
        let cut = min_cut(&graph);
        let truth = oracles::enumerate_min(&inst.image, &inst.q, &inst.clicks, inst.oracle());
        assert!((cut.energy - truth.min).abs() <= 1e-9 * truth.min.abs().max(1.0), "instance {k}: {} vs {}", cut.energy, truth.min);
        assert!((cut.flow - cut.energy).abs() <= 1e-9 * cut.energy.abs().max(1.0));
        assert_eq!(energy_of(&graph, &cut.labeling).unwrap(), cut.energy);
    }
}

#[test]
fn unary_only_equals_thresholding() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let inst = Instance::random(&mut rng, 12, false);
        let (q, clicks) = inst.inputs();
        let mut graph = build_energy(&inst.image, &q, &clicks, &inst.params).unwrap();
        graph.zero_pairwise();
        assert_eq!(min_cut(&graph).labeling, q.threshold());
    }
}

#[test]
fn click_disks_keep_their_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let (h, w) = (rng.random_range(12..40), rng.random_range(12..40));
        let image = Image::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let q = ProbabilityMap::from_vec(h, w, (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mut clicks = ClickSet::new();
        for _ in 0..rng.random_range(1..5) {
            let c = Click { row: rng.random_range(0..h), col: rng.random_range(0..w), polarity: clicksel::encoding::Polarity::from_label(rng.random()) };
            let _ = clicks.push(c);
        }
        let out = refine(&image, &q, &clicks, &EnergyParams::default()).unwrap();
        let expected = oracles::disk_labels(h, w, clicks.as_slice(), 5);
        for (i, e) in expected.iter().enumerate() {
            if let Some(label) = e {
                assert_eq!(out.as_slice()[i], *label);
            }
        }
    }
}

#[test]
fn boundary_cost_does_not_grow_as_lambda_shrinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let inst = Instance::random(&mut rng, 10, false);
        let (q, clicks) = inst.inputs();
        let mut last = f64::INFINITY;
        for lambda in [8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.1, 0.01] {
            let params = EnergyParams { lambda, ..inst.params };
            let graph = build_energy(&inst.image, &q, &clicks, &params).unwrap();
            let cut = min_cut(&graph);
            let l = cut.labeling.as_slice();
            let boundary: f64 = graph.edges().iter().filter(|e| l[e.p] != l[e.q]).map(|e| e.weight).sum();
            assert!(boundary <= last + 1e-9, "lambda {lambda}: {boundary} > {last}");
            last = boundary;
        }
    }
}

#[test]
fn swapping_labels_complements_the_cut() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checked = 0;
    while checked < 40 {
        let eight = rng.random();
        let inst = Instance::random(&mut rng, 4, eight);
        let truth = oracles::enumerate_min(&inst.image, &inst.q, &inst.clicks, inst.oracle());
        if truth.runner_up - truth.min < 1e-6 {
            continue;
        }
        let (q, clicks) = inst.inputs();
        let (h, w) = inst.image.dims();
        let flipped_q = ProbabilityMap::from_vec(h, w, inst.q.iter().map(|v| 1.0 - v).collect()).unwrap();
        let flipped_clicks = ClickSet::from_clicks(inst.clicks.iter().map(|c| Click {
            polarity: clicksel::encoding::Polarity::from_label(!c.polarity.is_positive()),
            ..*c
        }))
        .unwrap();
        let a = refine(&inst.image, &q, &clicks, &inst.params).unwrap();
        let b = refine(&inst.image, &flipped_q, &flipped_clicks, &inst.params).unwrap();
        assert_eq!(a.complement(), b);
        assert_eq!(a.as_slice(), truth.argmin.as_slice());
        checked += 1;
    }
}

#[test]
fn smoothing_removes_speckle() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut fewer = 0;
    for _ in 0..100 {
        let (h, w) = (48, 48);
        let (cr, cc, rad) = (rng.random_range(16..32) as i64, rng.random_range(16..32) as i64, rng.random_range(6..14) as i64);
        let inside = |r: usize, c: usize| (r as i64 - cr).pow(2) + (c as i64 - cc).pow(2) <= rad * rad;
        let image = Image::from_fn(h, w, |r, c| if inside(r, c) { [200, 60, 50] } else { [40, 70, 90] }).unwrap();
        let mut q: Vec<f64> = (0..h * w).map(|i| if inside(i / w, i % w) { 0.99 } else { 0.01 }).collect();
        for v in q.iter_mut() {
            if rng.random_bool(0.01) {
                *v = 1.0 - *v;
            }
        }
        let q = ProbabilityMap::from_vec(h, w, q).unwrap();
        let refined = refine(&image, &q, &ClickSet::new(), &EnergyParams::default()).unwrap();
        if oracles::components(&refined) < oracles::components(&q.threshold()) {
            fewer += 1;
        }
    }
    assert!(fewer >= 95, "{fewer}/100");
}

#[test]
fn negative_click_clears_false_positive() {
    let image = Image::from_fn(30, 30, |_, _| [100, 100, 100]).unwrap();
    let q = ProbabilityMap::from_vec(30, 30, (0..900usize).map(|i| if (i / 30).abs_diff(15) < 5 && (i % 30).abs_diff(15) < 5 { 0.9 } else { 0.1 }).collect()).unwrap();
    let clicks = ClickSet::from_clicks([Click::negative(15, 15)]).unwrap();
    let out = refine(&image, &q, &clicks, &EnergyParams::default()).unwrap();
    for r in 0..30 {
        for c in 0..30 {
            if oracles::d2((r, c), (15, 15)) <= 25 {
                assert!(!out.get(r, c));
            }
        }
    }
}
