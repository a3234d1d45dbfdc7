//! Synthesis of (image, user interaction) training pairs: a positive sampler
//! and three negative-click strategies mixed with equal probability.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::edt::squared_edt_mask;
use crate::encoding::{Click, ClickSet, DistanceChannel, Polarity};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image, Pixel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Width of the background band negatives are drawn from.
    pub d: u32,
    pub n_pos: usize,
    pub n_neg1: usize,
    pub n_neg2: usize,
    pub n_neg3: usize,
    pub n_pairs: usize,
    /// Minimum spacing between two sampled clicks.
    pub d_step: u32,
    /// Minimum distance from a sampled click to the object boundary.
    pub d_margin: u32,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { d: 40, n_pos: 5, n_neg1: 10, n_neg2: 5, n_neg3: 10, n_pairs: 15, d_step: 10, d_margin: 5, seed: 0 }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.d == 0 {
            return fail("d must be positive");
        }
        if self.n_pos == 0 {
            return fail("n_pos must be at least 1");
        }
        if self.d_step == 0 {
            return fail("d_step must be at least 1");
        }
        Ok(())
    }
}

/// An image with pairwise-disjoint, nonempty object masks.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScene {
    pub image: Image,
    pub instances: Vec<BinaryMask>,
}

impl InstanceScene {
    pub fn new(image: Image, instances: Vec<BinaryMask>) -> Result<Self> {
        Self::named("<unnamed>", image, instances)
    }

    /// Like [`InstanceScene::new`] but validation errors carry `name`.
    pub fn named(name: &str, image: Image, instances: Vec<BinaryMask>) -> Result<Self> {
        for (i, m) in instances.iter().enumerate() {
            m.ensure_dims(image.dims())?;
            if m.is_empty() {
                return Err(Error::EmptyInstance { scene: name.to_string(), index: i });
            }
        }
        for i in 0..instances.len() {
            for j in i + 1..instances.len() {
                if instances[i].intersects(&instances[j]) {
                    return Err(Error::OverlappingInstances { scene: name.to_string(), first: i, second: j });
                }
            }
        }
        Ok(Self { image, instances })
    }

    pub fn flip_horizontal(&self) -> InstanceScene {
        InstanceScene {
            image: self.image.flip_horizontal(),
            instances: self.instances.iter().map(BinaryMask::flip_horizontal).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Strategy {
    /// Random clicks in the background band.
    Band = 1,
    /// Random clicks on the other instances.
    OtherObjects = 2,
    /// Greedy farthest-point coverage of the band.
    Coverage = 3,
}

impl From<Strategy> for u8 {
    fn from(s: Strategy) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for Strategy {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Strategy::Band),
            2 => Ok(Strategy::OtherObjects),
            3 => Ok(Strategy::Coverage),
            other => Err(format!("unknown strategy {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub clicks: ClickSet,
    pub target: BinaryMask,
    pub strategy_used: Strategy,
    pub source_id: String,
}

/// `inside_or_far` holds the object plus every pixel at distance `>= d` from it;
/// `band` is the rest: background pixels closer than `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginSets {
    pub inside_or_far: BinaryMask,
    pub band: BinaryMask,
}

pub fn margin_sets(object: &BinaryMask, d: u32) -> Result<MarginSets> {
    if object.is_empty() {
        return Err(Error::EmptyObject);
    }
    let d_sq = d as u64 * d as u64;
    let dist = squared_edt_mask(object);
    let (h, w) = object.dims();
    let band = BinaryMask::from_vec(h, w, dist.iter().map(|&s| s > 0 && s < d_sq).collect())?;
    Ok(MarginSets { inside_or_far: band.complement(), band })
}

/// Greedy thinning in a random scan order: a pixel is kept when it is at least
/// `d_margin` from the boundary and at least `d_step` from every pixel already kept.
pub fn filter_candidates<R: Rng + ?Sized>(
    region: &BinaryMask,
    boundary_dist: &DistanceChannel,
    d_step: u32,
    d_margin: u32,
    rng: &mut R,
) -> Vec<Pixel> {
    let mut order: Vec<Pixel> = region.pixels().collect();
    order.shuffle(rng);
    let step_sq = d_step as u64 * d_step as u64;
    let margin = d_margin as f64;
    let mut kept: Vec<Pixel> = Vec::new();
    for p in order {
        if boundary_dist.at(p) < margin {
            continue;
        }
        if kept.iter().all(|k| k.dist_sq(p) >= step_sq) {
            kept.push(p);
        }
    }
    kept
}

fn take_clicks(pixels: Vec<Pixel>, n: usize, polarity: Polarity) -> Vec<Click> {
    pixels.into_iter().take(n).map(|p| Click { row: p.row, col: p.col, polarity }).collect()
}

/// Between 1 and `n_pos` positive clicks inside the object.
pub fn sample_positive<R: Rng + ?Sized>(object: &BinaryMask, params: &SamplingParams, rng: &mut R) -> Result<Vec<Click>> {
    if object.is_empty() {
        return Err(Error::EmptyObject);
    }
    let n = rng.random_range(1..=params.n_pos.max(1));
    let boundary = DistanceChannel::to_mask(&object.complement());
    let mut candidates = filter_candidates(object, &boundary, params.d_step, params.d_margin, rng);
    if candidates.is_empty() {
        candidates = filter_candidates(object, &boundary, params.d_step, 0, rng);
    }
    if candidates.is_empty() {
        candidates = filter_candidates(object, &boundary, 1, 0, rng);
    }
    Ok(take_clicks(candidates, n, Polarity::Positive))
}

/// Strategy 1: up to `n_neg1` filtered clicks in the band.
pub fn sample_negative_strategy1<R: Rng + ?Sized>(
    band: &BinaryMask,
    object: &BinaryMask,
    params: &SamplingParams,
    rng: &mut R,
) -> Vec<Click> {
    let n = rng.random_range(0..=params.n_neg1);
    if n == 0 || band.is_empty() {
        return Vec::new();
    }
    let to_object = DistanceChannel::to_mask(object);
    take_clicks(filter_candidates(band, &to_object, params.d_step, params.d_margin, rng), n, Polarity::Negative)
}

/// Strategy 2: up to `n_neg2` filtered clicks on each non-target instance.
pub fn sample_negative_strategy2<R: Rng + ?Sized>(
    scene: &InstanceScene,
    target_index: usize,
    params: &SamplingParams,
    rng: &mut R,
) -> Vec<Click> {
    let mut clicks = Vec::new();
    for (i, other) in scene.instances.iter().enumerate() {
        if i == target_index {
            continue;
        }
        let n = rng.random_range(0..=params.n_neg2);
        if n == 0 {
            continue;
        }
        let boundary = DistanceChannel::to_mask(&other.complement());
        let picked = filter_candidates(other, &boundary, params.d_step, params.d_margin, rng);
        clicks.extend(take_clicks(picked, n, Polarity::Negative));
    }
    clicks
}

/// Strategy 3: a random first click in the band, then each next click is the
/// band pixel farthest from the clicks so far and from `inside_or_far`.
/// Ties go to the smallest `(row, col)`.
pub fn sample_negative_strategy3<R: Rng + ?Sized>(
    band: &BinaryMask,
    inside_or_far: &BinaryMask,
    params: &SamplingParams,
    rng: &mut R,
) -> Vec<Click> {
    let pixels: Vec<Pixel> = band.pixels().collect();
    let count = params.n_neg3.min(pixels.len());
    if count == 0 {
        return Vec::new();
    }
    let width = band.width();
    let base = squared_edt_mask(inside_or_far);
    let mut nearest: Vec<u64> = pixels.iter().map(|p| base[p.row * width + p.col]).collect();

    let mut chosen = Vec::with_capacity(count);
    let mut next = pixels[rng.random_range(0..pixels.len())];
    loop {
        chosen.push(Click { row: next.row, col: next.col, polarity: Polarity::Negative });
        if chosen.len() == count {
            break;
        }
        let mut best = 0usize;
        for (k, p) in pixels.iter().enumerate() {
            nearest[k] = nearest[k].min(p.dist_sq(next));
            if nearest[k] > nearest[best] {
                best = k;
            }
        }
        next = pixels[best];
    }
    chosen
}

/// Deterministic RNG stream for one object, derived from the run seed and the
/// object's source id.
pub fn pair_rng(seed: u64, source_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(source_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// `n_pairs` training pairs for one target instance, each with a fresh positive
/// sample and one negative strategy chosen uniformly.
pub fn generate_pairs<R: Rng + ?Sized>(
    scene: &InstanceScene,
    target_index: usize,
    params: &SamplingParams,
    source_id: &str,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    params.validate()?;
    let target = scene
        .instances
        .get(target_index)
        .ok_or_else(|| Error::InvalidParameter(format!("no instance {target_index} in scene")))?;
    let sets = margin_sets(target, params.d)?;
    let mut pairs = Vec::with_capacity(params.n_pairs);
    for _ in 0..params.n_pairs {
        let strategy = match rng.random_range(0..3) {
            0 => Strategy::Band,
            1 => Strategy::OtherObjects,
            _ => Strategy::Coverage,
        };
        let mut clicks = sample_positive(target, params, rng)?;
        clicks.extend(match strategy {
            Strategy::Band => sample_negative_strategy1(&sets.band, target, params, rng),
            Strategy::OtherObjects => sample_negative_strategy2(scene, target_index, params, rng),
            Strategy::Coverage => sample_negative_strategy3(&sets.band, &sets.inside_or_far, params, rng),
        });
        pairs.push(TrainingPair {
            clicks: ClickSet::from_clicks(clicks)?,
            target: target.clone(),
            strategy_used: strategy,
            source_id: source_id.to_string(),
        });
    }
    Ok(pairs)
}

/// Checks a pair against the sampler's contract: polarity, membership, spacing
/// and margin. Returns a description of the first violation.
pub fn validate_pair(
    scene: &InstanceScene,
    target_index: usize,
    pair: &TrainingPair,
    params: &SamplingParams,
) -> std::result::Result<(), String> {
    let target = &scene.instances[target_index];
    if &pair.target != target {
        return Err("target mask differs from the scene instance".into());
    }
    let step_sq = params.d_step as u64 * params.d_step as u64;
    let margin = params.d_margin as f64;
    let spaced = |pts: &[Pixel], what: &str| -> std::result::Result<(), String> {
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if a.dist_sq(*b) < step_sq {
                    return Err(format!("{what} clicks {a:?} and {b:?} closer than d_step"));
                }
            }
        }
        Ok(())
    };

    let pos: Vec<Pixel> = pair.clicks.positives().collect();
    let neg: Vec<Pixel> = pair.clicks.negatives().collect();
    if pos.is_empty() || pos.len() > params.n_pos {
        return Err(format!("{} positive clicks", pos.len()));
    }
    if let Some(p) = pos.iter().find(|p| !target.at(**p)) {
        return Err(format!("positive click {p:?} outside the target"));
    }
    if let Some(p) = neg.iter().find(|p| target.at(**p)) {
        return Err(format!("negative click {p:?} inside the target"));
    }
    let inner = DistanceChannel::to_mask(&target.complement());
    let margin_feasible = target.pixels().any(|p| inner.at(p) >= margin);
    if margin_feasible {
        if let Some(p) = pos.iter().find(|p| inner.at(**p) < margin) {
            return Err(format!("positive click {p:?} within d_margin of the boundary"));
        }
    }
    spaced(&pos, "positive")?;

    let sets = margin_sets(target, params.d).map_err(|e| e.to_string())?;
    match pair.strategy_used {
        Strategy::Band => {
            if neg.len() > params.n_neg1 {
                return Err("too many strategy-1 clicks".into());
            }
            let to_object = DistanceChannel::to_mask(target);
            for p in &neg {
                if !sets.band.at(*p) {
                    return Err(format!("strategy-1 click {p:?} outside the band"));
                }
                if to_object.at(*p) < margin {
                    return Err(format!("strategy-1 click {p:?} within d_margin of the object"));
                }
            }
            spaced(&neg, "strategy-1")?;
        }
        Strategy::OtherObjects => {
            for (i, other) in scene.instances.iter().enumerate() {
                if i == target_index {
                    continue;
                }
                let on: Vec<Pixel> = neg.iter().copied().filter(|p| other.at(*p)).collect();
                if on.len() > params.n_neg2 {
                    return Err(format!("too many strategy-2 clicks on instance {i}"));
                }
                let inner = DistanceChannel::to_mask(&other.complement());
                if let Some(p) = on.iter().find(|p| inner.at(**p) < margin) {
                    return Err(format!("strategy-2 click {p:?} within d_margin of instance {i}"));
                }
                spaced(&on, "strategy-2")?;
            }
            let covered = |p: &Pixel| {
                scene.instances.iter().enumerate().any(|(i, m)| i != target_index && m.at(*p))
            };
            if let Some(p) = neg.iter().find(|p| !covered(p)) {
                return Err(format!("strategy-2 click {p:?} not on another instance"));
            }
        }
        Strategy::Coverage => {
            if neg.len() != params.n_neg3.min(sets.band.count()) {
                return Err(format!("strategy-3 produced {} clicks", neg.len()));
            }
            if let Some(p) = neg.iter().find(|p| !sets.band.at(**p)) {
                return Err(format!("strategy-3 click {p:?} outside the band"));
            }
        }
    }
    Ok(())
}
