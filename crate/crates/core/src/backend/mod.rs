//! Probability-map producers.
//!
//! Anything that maps an [`InteractionTensor`] to a same-sized
//! [`ProbabilityMap`] can drive the refinement and evaluation stages. The
//! crate ships one such producer, a small dilated convolutional network that
//! trains from scratch on sampled pairs, plus a generator of synthetic scenes
//! to train it on.

mod gemm;
mod model;
mod synth;
mod train;

use std::collections::BTreeMap;

pub use gemm::Real;
pub use model::{LayerSpec, ReferenceModel, REFERENCE_ARCHITECTURE};
pub use synth::{synth_scene, synth_scene_with, SynthConfig};
pub use train::{train, train_with_progress, TrainConfig};

use crate::encoding::InteractionTensor;
use crate::error::Result;
use crate::raster::ProbabilityMap;

/// Probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-7;

pub trait ProbabilityBackend: Send + Sync {
    fn name(&self) -> &str;

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    /// Must return a map with the input's height and width, values in `[0, 1]`,
    /// and be deterministic for fixed parameters.
    fn predict(&self, input: &InteractionTensor) -> Result<ProbabilityMap>;
}

impl<B: ProbabilityBackend + ?Sized> ProbabilityBackend for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        (**self).metadata()
    }

    fn predict(&self, input: &InteractionTensor) -> Result<ProbabilityMap> {
        (**self).predict(input)
    }
}

impl<B: ProbabilityBackend + ?Sized> ProbabilityBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        (**self).metadata()
    }

    fn predict(&self, input: &InteractionTensor) -> Result<ProbabilityMap> {
        (**self).predict(input)
    }
}
