use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ReferenceModel;
use crate::encoding::encode;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image};
use crate::sampling::TrainingPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle and the crop windows.
    pub seed: u64,
    /// Train on square windows of this side around the target object instead
    /// of whole images. Distance channels are still computed on the whole image.
    #[serde(default)]
    pub crop: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, momentum: 0.9, epochs: 10, batch_size: 8, seed: 0, crop: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter("momentum must be in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch_size must be at least 1".into()));
        }
        if self.crop == Some(0) {
            return Err(Error::InvalidParameter("crop must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Window {
    row: usize,
    col: usize,
    height: usize,
    width: usize,
}

/// A window centred on a uniform point of the target's bounding box, shifted
/// to lie inside the image.
fn crop_window(target: &BinaryMask, side: usize, rng: &mut impl Rng) -> Window {
    let (h, w) = target.dims();
    let (height, width) = (side.min(h), side.min(w));
    let (r0, c0, r1, c1) = target.bounding_box().unwrap_or((0, 0, h - 1, w - 1));
    let cr = rng.random_range(r0..=r1);
    let cc = rng.random_range(c0..=c1);
    Window {
        row: cr.saturating_sub(height / 2).min(h - height),
        col: cc.saturating_sub(width / 2).min(w - width),
        height,
        width,
    }
}

pub fn train(
    model: ReferenceModel<f32>,
    pairs: &[(&Image, &TrainingPair)],
    config: &TrainConfig,
) -> Result<(ReferenceModel<f32>, Vec<f64>)> {
    train_with_progress(model, pairs, config, |_, _| {})
}

/// Mini-batch gradient descent with momentum on the mean per-pixel
/// cross-entropy. Batch items are evaluated in parallel and their gradients
/// summed in batch order, so the result does not depend on the thread count.
/// `on_epoch` receives `(epoch, mean loss)` after each epoch.
pub fn train_with_progress(
    mut model: ReferenceModel<f32>,
    pairs: &[(&Image, &TrainingPair)],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(ReferenceModel<f32>, Vec<f64>)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = vec![0f32; model.param_count()];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let lr = config.learning_rate as f32;
    let momentum = config.momentum as f32;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let windows: Vec<Option<Window>> = batch
                .iter()
                .map(|&i| config.crop.map(|side| crop_window(&pairs[i].1.target, side, &mut rng)))
                .collect();
            let results: Vec<Result<(f64, Vec<f32>)>> = batch
                .par_iter()
                .zip(&windows)
                .map(|(&i, window)| {
                    let (image, pair) = pairs[i];
                    let input = encode(image, &pair.clicks)?;
                    match window {
                        None => model.loss_and_gradient(&input, &pair.target),
                        Some(w) => model.loss_and_gradient(
                            &input.crop(w.row, w.col, w.height, w.width)?,
                            &pair.target.crop(w.row, w.col, w.height, w.width)?,
                        ),
                    }
                })
                .collect();
            let inv = 1.0 / batch.len() as f32;
            let mut grad = vec![0f32; model.param_count()];
            for r in results {
                let (loss, g) = r?;
                epoch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += *v;
                }
            }
            for ((p, v), g) in model.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = momentum * *v - lr * (*g * inv);
                *p += *v;
            }
        }
        let mean = epoch_loss / pairs.len() as f64;
        history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok((model, history))
}
