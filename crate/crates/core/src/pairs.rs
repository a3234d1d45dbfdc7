//! On-disk layout for sampled training pairs.
//!
//! ```text
//! root/pairs.json
//! root/images/<scene>.png
//! root/targets/<scene>/<k>.png
//! root/clicks/<scene>/<k>/<n>.json    {"positives": [...], "negatives": [...]}
//! ```
//!
//! `<scene>/<k>` is the pair's source id. Each image and target is stored
//! once and shared by every pair drawn from it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_id, check_relative};
use crate::encoding::ClickSet;
use crate::error::{Error, Result};
use crate::raster::{load_image, load_mask, save_image, save_mask, BinaryMask, Image};
use crate::sampling::{SamplingParams, Strategy, TrainingPair};

pub const PAIRS_FILE: &str = "pairs.json";
pub const PAIRS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub image: String,
    pub target: String,
    pub clicks: String,
    pub strategy_used: Strategy,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub version: u32,
    /// The sampler settings the pairs were drawn with, for auditing.
    pub params: Option<SamplingParams>,
    pub entries: Vec<PairEntry>,
}

impl PairManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != PAIRS_VERSION {
            return Err(Error::Manifest(format!("unsupported pair manifest version {}", self.version)));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate pair id {:?}", e.id)));
            }
            for path in [&e.image, &e.target, &e.clicks] {
                check_relative(path)?;
            }
        }
        Ok(())
    }

    pub fn read(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join(PAIRS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: PairManifest = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn strategy_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(u8::from(e.strategy_used)).or_default() += 1;
        }
        counts
    }
}

/// Pairs with their images, which are shared rather than copied per pair.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    pub images: Vec<Image>,
    /// `(index into images, pair)`.
    pub pairs: Vec<(usize, TrainingPair)>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn refs(&self) -> Vec<(&Image, &TrainingPair)> {
        self.pairs.iter().map(|(i, p)| (&self.images[*i], p)).collect()
    }
}

fn split_source(source_id: &str) -> Result<(&str, &str)> {
    let parsed = source_id.split_once('/').filter(|(scene, k)| {
        check_id(scene).is_ok() && !k.is_empty() && k.chars().all(|c| c.is_ascii_digit())
    });
    parsed.ok_or_else(|| Error::Manifest(format!("source id {source_id:?} is not <scene>/<instance>")))
}

/// Writes `set` in the pair layout. Every source id must have the form
/// `<scene>/<k>` where `<scene>` names the pair's image.
pub fn write_pairs(root: impl AsRef<Path>, set: &PairSet, params: Option<&SamplingParams>) -> Result<PairManifest> {
    let root = root.as_ref();
    let mut image_paths: HashMap<usize, String> = HashMap::new();
    let mut written_targets: HashSet<String> = HashSet::new();
    let mut per_source: HashMap<&str, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(set.pairs.len());

    for (image_index, pair) in &set.pairs {
        let (scene, k) = split_source(&pair.source_id)?;
        let image = set
            .images
            .get(*image_index)
            .ok_or_else(|| Error::InvalidParameter(format!("pair refers to missing image {image_index}")))?;
        let image_rel = format!("images/{scene}.png");
        match image_paths.get(image_index) {
            Some(existing) if existing != &image_rel => {
                return Err(Error::Manifest(format!("image {image_index} is used by scenes {existing} and {image_rel}")));
            }
            Some(_) => {}
            None => {
                let path = root.join(&image_rel);
                create_parent(&path)?;
                save_image(image, &path)?;
                image_paths.insert(*image_index, image_rel.clone());
            }
        }

        let target_rel = format!("targets/{scene}/{k}.png");
        if written_targets.insert(target_rel.clone()) {
            let path = root.join(&target_rel);
            create_parent(&path)?;
            save_mask(&pair.target, &path)?;
        }

        let n = per_source.entry(pair.source_id.as_str()).or_default();
        let clicks_rel = format!("clicks/{scene}/{k}/{n}.json");
        *n += 1;
        let path = root.join(&clicks_rel);
        create_parent(&path)?;
        let mut text = serde_json::to_string(&pair.clicks.to_polarity_json()).expect("clicks serialize");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

        entries.push(PairEntry {
            id: clicks_rel.trim_start_matches("clicks/").trim_end_matches(".json").to_string(),
            image: image_rel,
            target: target_rel,
            clicks: clicks_rel,
            strategy_used: pair.strategy_used,
            source_id: pair.source_id.clone(),
        });
    }

    let manifest = PairManifest { version: PAIRS_VERSION, params: params.cloned(), entries };
    manifest.validate()?;
    let path = root.join(PAIRS_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("pair manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn create_parent(path: &Path) -> Result<()> {
    let dir = path.parent().expect("layout paths have a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Loads every pair listed in the manifest, decoding each distinct image and
/// target once.
pub fn load_pairs(root: impl AsRef<Path>) -> Result<PairSet> {
    let root = root.as_ref();
    let manifest = PairManifest::read(root)?;
    let mut set = PairSet::default();
    let mut image_index: HashMap<&str, usize> = HashMap::new();
    let mut targets: HashMap<&str, BinaryMask> = HashMap::new();

    for e in &manifest.entries {
        let idx = match image_index.get(e.image.as_str()) {
            Some(&i) => i,
            None => {
                set.images.push(load_image(root.join(&e.image))?);
                image_index.insert(&e.image, set.images.len() - 1);
                set.images.len() - 1
            }
        };
        if !targets.contains_key(e.target.as_str()) {
            targets.insert(&e.target, load_mask(root.join(&e.target))?);
        }
        let target = targets[e.target.as_str()].clone();
        let dims = set.images[idx].dims();
        if target.dims() != dims {
            return Err(Error::SceneDimensions {
                scene: e.source_id.clone(),
                path: root.join(&e.target),
                expected: dims,
                actual: target.dims(),
            });
        }

        let path = root.join(&e.clicks);
        let text = std::fs::read_to_string(&path).map_err(|err| Error::io(&path, err))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
        let clicks = ClickSet::from_json(&value)?;
        clicks.check_bounds(dims.0, dims.1)?;
        set.pairs.push((
            idx,
            TrainingPair { clicks, target, strategy_used: e.strategy_used, source_id: e.source_id.clone() },
        ));
    }
    Ok(set)
}
