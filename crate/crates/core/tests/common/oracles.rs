//! Brute-force reference computations. Each one works from raw inputs with
//! the most direct algorithm available and shares no code with the library.

#![allow(dead_code)]

use clicksel::encoding::{Click, Polarity};
use clicksel::{BinaryMask, Image, Pixel};

pub fn d2(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dr = a.0 as i64 - b.0 as i64;
    let dc = a.1 as i64 - b.1 as i64;
    (dr * dr + dc * dc) as u64
}

/// Distance to the nearest point, truncated at 255; 255 everywhere when empty.
pub fn truncated_distance(points: &[Pixel], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let best = points.iter().map(|p| d2((r, c), (p.row, p.col))).min();
            out.push(match best {
                Some(s) => (s as f64).sqrt().min(255.0),
                None => 255.0,
            });
        }
    }
    out
}

/// Energy parameters restated for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleEnergy {
    pub lambda: f64,
    pub eight: bool,
    pub radius: u32,
    pub clamp: f64,
}

/// Per-pixel hard label from click disks, later clicks winning.
pub fn disk_labels(h: usize, w: usize, clicks: &[Click], radius: u32) -> Vec<Option<bool>> {
    let mut out = vec![None; h * w];
    for k in clicks {
        for r in 0..h {
            for c in 0..w {
                if d2((r, c), (k.row, k.col)) <= (radius as u64).pow(2) {
                    out[r * w + c] = Some(k.polarity == Polarity::Positive);
                }
            }
        }
    }
    out
}

pub fn neighbours(h: usize, w: usize, eight: bool) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for p in 0..h * w {
        for q in p + 1..h * w {
            let (pr, pc) = (p / w, p % w);
            let (qr, qc) = (q / w, q % w);
            let dr = pr.abs_diff(qr);
            let dc = pc.abs_diff(qc);
            if dr + dc == 1 {
                out.push((p, q, 1.0));
            } else if eight && dr == 1 && dc == 1 {
                out.push((p, q, 2f64.sqrt()));
            }
        }
    }
    out
}

fn contrast(image: &Image, p: usize, q: usize) -> f64 {
    let w = image.width();
    let a = image.pixel(p / w, p % w);
    let b = image.pixel(q / w, q % w);
    (0..3).map(|c| (a[c] as f64 - b[c] as f64).powi(2)).sum::<f64>() / 3.0
}

/// Pairwise weights with the automatic sigma.
pub fn pair_weights(image: &Image, eight: bool) -> Vec<(usize, usize, f64)> {
    let pairs = neighbours(image.height(), image.width(), eight);
    let mean = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|&(p, q, _)| contrast(image, p, q)).sum::<f64>() / pairs.len() as f64
    };
    let sigma_sq = if mean > 0.0 { mean } else { 1.0 };
    pairs
        .into_iter()
        .map(|(p, q, dist)| (p, q, (-contrast(image, p, q) / (2.0 * sigma_sq)).exp() / dist))
        .collect()
}

/// Energy of a labeling; `None` if it breaks a hard constraint. Hard pixels
/// carry no region cost.
pub fn energy(
    q: &[f64],
    weights: &[(usize, usize, f64)],
    hard: &[Option<bool>],
    params: OracleEnergy,
    labels: &[bool],
) -> Option<f64> {
    let mut e = 0.0;
    for i in 0..q.len() {
        match hard[i] {
            Some(h) if h != labels[i] => return None,
            Some(_) => {}
            None => {
                let p = q[i].max(params.clamp).min(1.0 - params.clamp);
                e += params.lambda * if labels[i] { -p.ln() } else { -(1.0 - p).ln() };
            }
        }
    }
    for &(a, b, wgt) in weights {
        if labels[a] != labels[b] {
            e += wgt;
        }
    }
    Some(e)
}

pub struct Enumerated {
    pub min: f64,
    pub argmin: Vec<bool>,
    /// Smallest energy among labelings that differ from `argmin`.
    pub runner_up: f64,
}

pub fn enumerate_min(
    image: &Image,
    q: &[f64],
    clicks: &[Click],
    params: OracleEnergy,
) -> Enumerated {
    let (h, w) = image.dims();
    let n = h * w;
    assert!(n <= 20);
    let weights = pair_weights(image, params.eight);
    let hard = disk_labels(h, w, clicks, params.radius);
    let mut best = (f64::INFINITY, 0u32);
    let mut second = f64::INFINITY;
    for m in 0..(1u32 << n) {
        let labels: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
        if let Some(e) = energy(q, &weights, &hard, params, &labels) {
            if e < best.0 {
                second = best.0;
                best = (e, m);
            } else if e < second {
                second = e;
            }
        }
    }
    Enumerated {
        min: best.0,
        argmin: (0..n).map(|i| best.1 >> i & 1 == 1).collect(),
        runner_up: second,
    }
}

/// The simulated clicker by exhaustive search: among mislabeled pixels, the one
/// farthest from every correct pixel and from the outside of the image.
pub fn next_click(gt: &BinaryMask, current: &BinaryMask) -> Option<Click> {
    let (h, w) = gt.dims();
    let wrong = |r: usize, c: usize| gt.get(r, c) != current.get(r, c);
    let mut best: Option<(u64, usize, usize)> = None;
    for r in 0..h {
        for c in 0..w {
            if !wrong(r, c) {
                continue;
            }
            // nearest pixel of the ring at rows -1, h and columns -1, w
            let frame = [(r + 1) as u64, (h - r) as u64, (c + 1) as u64, (w - c) as u64]
                .into_iter()
                .map(|v| v * v)
                .min()
                .unwrap();
            let mut score = frame;
            for rr in 0..h {
                for cc in 0..w {
                    if !wrong(rr, cc) {
                        score = score.min(d2((r, c), (rr, cc)));
                    }
                }
            }
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, r, c));
            }
        }
    }
    best.map(|(_, r, c)| Click {
        row: r,
        col: c,
        polarity: if gt.get(r, c) { Polarity::Positive } else { Polarity::Negative },
    })
}

/// Farthest-point coverage, quadratic: after `first`, repeatedly take the band
/// pixel maximizing the distance to the clicks so far and to `fixed`, smallest
/// (row, col) on ties.
pub fn greedy_coverage(band: &BinaryMask, fixed: &BinaryMask, first: Pixel, count: usize) -> Vec<Pixel> {
    let (h, w) = band.dims();
    let fixed_pts: Vec<(usize, usize)> =
        (0..h * w).filter(|&i| fixed.as_slice()[i]).map(|i| (i / w, i % w)).collect();
    let mut chosen = vec![first];
    while chosen.len() < count {
        let mut best: Option<(u64, Pixel)> = None;
        for r in 0..h {
            for c in 0..w {
                if !band.get(r, c) {
                    continue;
                }
                let f = fixed_pts
                    .iter()
                    .copied()
                    .chain(chosen.iter().map(|p| (p.row, p.col)))
                    .map(|s| d2((r, c), s))
                    .min()
                    .unwrap_or(u64::MAX);
                if best.is_none_or(|(b, _)| f > b) {
                    best = Some((f, Pixel::new(r, c)));
                }
            }
        }
        chosen.push(best.expect("band not empty").1);
    }
    chosen
}

/// Minimum distance from `p` to any pixel where `mask` equals `value`;
/// infinite when there is none.
pub fn distance_to(mask: &BinaryMask, value: bool, p: Pixel) -> f64 {
    let (h, w) = mask.dims();
    let mut best = u64::MAX;
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == value {
                best = best.min(d2((r, c), (p.row, p.col)));
            }
        }
    }
    if best == u64::MAX {
        f64::INFINITY
    } else {
        (best as f64).sqrt()
    }
}

/// 4-connected components of the object pixels.
pub fn components(mask: &BinaryMask) -> usize {
    let (h, w) = mask.dims();
    let mut seen = vec![false; h * w];
    let mut count = 0;
    for start in 0..h * w {
        if !mask.as_slice()[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            let mut push = |j: usize| {
                if mask.as_slice()[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - w);
            }
            if r + 1 < h {
                push(i + w);
            }
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < w {
                push(i + 1);
            }
        }
    }
    count
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (mut i, mut u) = (0, 0);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        i += (*x && *y) as usize;
        u += (*x || *y) as usize;
    }
    if u == 0 {
        1.0
    } else {
        i as f64 / u as f64
    }
}

use clicksel::sampling::{InstanceScene, SamplingParams, Strategy, TrainingPair};

fn spaced(points: &[Pixel], step: u32, what: &str) -> Result<(), String> {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if d2((a.row, a.col), (b.row, b.col)) < (step as u64).pow(2) {
                return Err(format!("{what}: {a:?} and {b:?} closer than {step}"));
            }
        }
    }
    Ok(())
}

/// Restates the sampler's contract pixel by pixel.
pub fn check_pair(scene: &InstanceScene, target: usize, pair: &TrainingPair, params: &SamplingParams) -> Result<(), String> {
    let object = &scene.instances[target];
    let (h, w) = object.dims();
    let margin = params.d_margin as f64;
    let pos: Vec<Pixel> = pair.clicks.iter().filter(|c| c.polarity == Polarity::Positive).map(|c| c.pixel()).collect();
    let neg: Vec<Pixel> = pair.clicks.iter().filter(|c| c.polarity == Polarity::Negative).map(|c| c.pixel()).collect();

    if pos.is_empty() || pos.len() > params.n_pos {
        return Err(format!("{} positives", pos.len()));
    }
    for p in &pos {
        if !object.get(p.row, p.col) {
            return Err(format!("positive {p:?} off the object"));
        }
    }
    let interior_exists = (0..h * w)
        .filter(|&i| object.as_slice()[i])
        .any(|i| distance_to(object, false, Pixel::new(i / w, i % w)) >= margin);
    if interior_exists {
        if let Some(p) = pos.iter().find(|p| distance_to(object, false, **p) < margin) {
            return Err(format!("positive {p:?} inside the margin"));
        }
    }
    spaced(&pos, params.d_step, "positives")?;

    for p in &neg {
        if object.get(p.row, p.col) {
            return Err(format!("negative {p:?} on the object"));
        }
    }
    let in_band = |p: &Pixel| {
        let d = distance_to(object, true, *p);
        d > 0.0 && d < params.d as f64
    };
    match pair.strategy_used {
        Strategy::Band => {
            if neg.len() > params.n_neg1 {
                return Err("too many band negatives".into());
            }
            for p in &neg {
                if !in_band(p) {
                    return Err(format!("band negative {p:?} outside the band"));
                }
                if distance_to(object, true, *p) < margin {
                    return Err(format!("band negative {p:?} inside the margin"));
                }
            }
            spaced(&neg, params.d_step, "band negatives")?;
        }
        Strategy::OtherObjects => {
            for p in &neg {
                if !scene.instances.iter().enumerate().any(|(i, m)| i != target && m.get(p.row, p.col)) {
                    return Err(format!("negative {p:?} not on another object"));
                }
            }
            for (i, other) in scene.instances.iter().enumerate() {
                if i == target {
                    continue;
                }
                let on: Vec<Pixel> = neg.iter().copied().filter(|p| other.get(p.row, p.col)).collect();
                if on.len() > params.n_neg2 {
                    return Err(format!("too many negatives on object {i}"));
                }
                if let Some(p) = on.iter().find(|p| distance_to(other, false, **p) < margin) {
                    return Err(format!("negative {p:?} inside the margin of object {i}"));
                }
                spaced(&on, params.d_step, "object negatives")?;
            }
        }
        Strategy::Coverage => {
            let band_size = (0..h * w).filter(|&i| in_band(&Pixel::new(i / w, i % w))).count();
            if neg.len() != params.n_neg3.min(band_size) {
                return Err(format!("{} coverage negatives, band has {band_size}", neg.len()));
            }
            if let Some(p) = neg.iter().find(|p| !in_band(p)) {
                return Err(format!("coverage negative {p:?} outside the band"));
            }
        }
    }
    Ok(())
}
