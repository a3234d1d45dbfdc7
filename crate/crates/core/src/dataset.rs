//! On-disk scene layout.
//!
//! ```text
//! root/manifest.json
//! root/images/<id>.png
//! root/masks/<id>/<k>.png     one binary mask per instance
//! ```

use std::collections::HashSet;
use std::path::{Component, Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_image, load_mask, save_image, save_mask};
use crate::sampling::InstanceScene;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the dataset root.
    pub image: String,
    pub masks: Vec<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self { version: MANIFEST_VERSION, entries: Vec::new() }
    }
}

pub(crate) fn check_relative(path: &str) -> Result<()> {
    let p = Path::new(path);
    if path.is_empty() || p.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(Error::Manifest(format!("path {path:?} must be relative and stay inside the dataset root")));
    }
    Ok(())
}

pub(crate) fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Manifest(format!("invalid scene id {id:?}")));
    }
    Ok(())
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported version {}, expected {MANIFEST_VERSION}",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            check_id(&e.id)?;
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate scene id {:?}", e.id)));
            }
            check_relative(&e.image)?;
            for m in &e.masks {
                check_relative(m)?;
            }
        }
        Ok(())
    }

    pub fn read(root: impl AsRef<Path>) -> Result<Self> {
        let path = root.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, root: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = root.as_ref().join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn count(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub id: String,
    pub split: Split,
    pub scene: InstanceScene,
}

/// Decodes every scene in manifest order, checking that masks exist, match
/// the image size, are nonempty and do not overlap.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Vec<LabeledScene>> {
    let root = root.as_ref();
    let manifest = Manifest::read(root)?;
    manifest.entries.iter().map(|e| load_entry(root, e)).collect()
}

pub fn load_entry(root: &Path, entry: &ManifestEntry) -> Result<LabeledScene> {
    let image = load_image(root.join(&entry.image))?;
    let mut masks = Vec::with_capacity(entry.masks.len());
    for m in &entry.masks {
        let path: PathBuf = root.join(m);
        let mask = load_mask(&path)?;
        if mask.dims() != image.dims() {
            return Err(Error::SceneDimensions {
                scene: entry.id.clone(),
                path,
                expected: image.dims(),
                actual: mask.dims(),
            });
        }
        masks.push(mask);
    }
    let scene = InstanceScene::named(&entry.id, image, masks)?;
    Ok(LabeledScene { id: entry.id.clone(), split: entry.split, scene })
}

/// Writes scenes in the standard layout and returns the manifest written.
pub fn write_dataset(root: impl AsRef<Path>, scenes: &[LabeledScene]) -> Result<Manifest> {
    let root = root.as_ref();
    let mut manifest = Manifest::default();
    for s in scenes {
        check_id(&s.id)?;
        manifest.entries.push(ManifestEntry {
            id: s.id.clone(),
            image: format!("images/{}.png", s.id),
            masks: (0..s.scene.instances.len()).map(|k| format!("masks/{}/{k}.png", s.id)).collect(),
            split: s.split,
        });
    }
    manifest.validate()?;

    let images = root.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    for (s, e) in scenes.iter().zip(&manifest.entries) {
        save_image(&s.scene.image, root.join(&e.image))?;
        let dir = root.join("masks").join(&s.id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (mask, path) in s.scene.instances.iter().zip(&e.masks) {
            save_mask(mask, root.join(path))?;
        }
    }
    manifest.write(root)?;
    Ok(manifest)
}

/// Moves a seeded uniform sample of `val_count` train entries to the
/// validation split. Order of entries is unchanged.
pub fn split(manifest: &Manifest, val_count: usize, seed: u64) -> Result<Manifest> {
    let train: Vec<usize> = (0..manifest.entries.len())
        .filter(|&i| manifest.entries[i].split == Split::Train)
        .collect();
    if val_count == 0 {
        return Ok(manifest.clone());
    }
    if val_count >= train.len() {
        return Err(Error::ValCountTooLarge { requested: val_count, available: train.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = manifest.clone();
    for k in rand::seq::index::sample(&mut rng, train.len(), val_count) {
        out.entries[train[k]].split = Split::Val;
    }
    Ok(out)
}

/// Horizontal mirror of the image and every instance mask.
pub fn flip_augment(scene: &InstanceScene) -> InstanceScene {
    scene.flip_horizontal()
}
