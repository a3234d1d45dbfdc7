use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::gemm::Real;
use super::{ProbabilityBackend, PROB_FLOOR};
use crate::encoding::InteractionTensor;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ProbabilityMap};

const MAGIC: &[u8; 4] = b"CSRM";
const FORMAT_VERSION: u32 = 1;
const TAPS: usize = 9;

/// One 3x3 convolution, stride 1, padded by its dilation so the output keeps
/// the input's height and width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
}

impl LayerSpec {
    pub const fn new(in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        Self { in_channels, out_channels, dilation }
    }

    fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * TAPS
    }

    fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }
}

/// 5 -> 16 -> 32 (dilation 2) -> 32 (dilation 4) -> 16 -> 1.
pub const REFERENCE_ARCHITECTURE: [LayerSpec; 5] = [
    LayerSpec::new(5, 16, 1),
    LayerSpec::new(16, 32, 2),
    LayerSpec::new(32, 32, 4),
    LayerSpec::new(32, 16, 1),
    LayerSpec::new(16, 1, 1),
];

/// A stack of dilated 3x3 convolutions with rectifiers in between and a
/// logistic output. Parameters live in one flat buffer, layer by layer, each
/// layer's `out x in x 3 x 3` kernel followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel<T: Real = f32> {
    layers: Vec<LayerSpec>,
    params: Vec<T>,
}

/// Activations kept from a forward pass for backpropagation.
struct ForwardTrace<T> {
    /// Unfolded input of every layer, `(in * 9) x (h * w)`.
    cols: Vec<Vec<T>>,
    /// Input to every layer (post-rectifier for hidden layers).
    inputs: Vec<Vec<T>>,
    /// Final pre-logistic response, `h * w`.
    logits: Vec<T>,
    /// Smallest magnitude of any hidden pre-activation.
    kink_margin: f64,
}

impl<T: Real> ReferenceModel<T> {
    pub fn zeros(layers: &[LayerSpec]) -> Result<Self> {
        validate_layers(layers)?;
        let n = layers.iter().map(LayerSpec::param_count).sum();
        Ok(Self { layers: layers.to_vec(), params: vec![T::zero(); n] })
    }

    /// Kernels uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(layers: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for spec in layers {
            let bound = (6.0 / (spec.in_channels * TAPS) as f64).sqrt();
            for w in &mut model.params[offset..offset + spec.weight_count()] {
                *w = T::from_f64_lossy(rng.random_range(-bound..bound));
            }
            offset += spec.param_count();
        }
        Ok(model)
    }

    pub fn reference(seed: u64) -> Self {
        Self::init(&REFERENCE_ARCHITECTURE, seed).expect("reference architecture is valid")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Half-width of the receptive field in pixels.
    pub fn receptive_radius(&self) -> usize {
        self.layers.iter().map(|l| l.dilation).sum()
    }

    pub fn cast<U: Real>(&self) -> ReferenceModel<U> {
        ReferenceModel {
            layers: self.layers.clone(),
            params: self.params.iter().map(|p| U::from_f64_lossy(p.to_f64_lossy())).collect(),
        }
    }

    fn layer_params(&self, index: usize) -> (&[T], &[T]) {
        let offset: usize = self.layers[..index].iter().map(LayerSpec::param_count).sum();
        let spec = self.layers[index];
        let w = &self.params[offset..offset + spec.weight_count()];
        let b = &self.params[offset + spec.weight_count()..offset + spec.param_count()];
        (w, b)
    }

    fn input_values(&self, input: &InteractionTensor) -> Result<Vec<T>> {
        let expected = self.layers[0].in_channels;
        if input.planes() != expected {
            return Err(Error::PlaneCount { expected, actual: input.planes() });
        }
        Ok(input.as_slice().iter().map(|&v| T::from_f32(v).expect("finite input")).collect())
    }

    fn run(&self, input: Vec<T>, height: usize, width: usize, keep_trace: bool) -> ForwardTrace<T> {
        let hw = height * width;
        let last = self.layers.len() - 1;
        let mut trace = ForwardTrace { cols: Vec::new(), inputs: Vec::new(), logits: Vec::new(), kink_margin: f64::INFINITY };
        let mut current = input;
        for (l, spec) in self.layers.iter().enumerate() {
            let cols = im2col(&current, spec.in_channels, height, width, spec.dilation);
            let (w, b) = self.layer_params(l);
            let mut out = vec![T::zero(); spec.out_channels * hw];
            let k = spec.in_channels * TAPS;
            T::gemm(spec.out_channels, k, hw, w, (k, 1), &cols, (hw, 1), T::zero(), &mut out);
            for (o, bias) in b.iter().enumerate() {
                let row = &mut out[o * hw..(o + 1) * hw];
                for v in row.iter_mut() {
                    *v += *bias;
                    if l != last {
                        trace.kink_margin = trace.kink_margin.min(v.abs().to_f64_lossy());
                        if *v < T::zero() {
                            *v = T::zero();
                        }
                    }
                }
            }
            if keep_trace {
                trace.cols.push(cols);
                trace.inputs.push(current);
            }
            current = out;
        }
        trace.logits = current;
        trace
    }

    /// Logistic outputs as `f64`, clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    pub fn forward(&self, input: &InteractionTensor) -> Result<ProbabilityMap> {
        let values = self.input_values(input)?;
        let trace = self.run(values, input.height(), input.width(), false);
        let probs = trace.logits.iter().map(|z| clamp_prob(logistic(z.to_f64_lossy()))).collect();
        ProbabilityMap::from_vec(input.height(), input.width(), probs)
    }

    /// The loss of [`ReferenceModel::loss_and_gradient`] without the gradient.
    pub fn loss(&self, input: &InteractionTensor, target: &BinaryMask) -> Result<f64> {
        target.ensure_dims(input.dims())?;
        let values = self.input_values(input)?;
        let trace = self.run(values, input.height(), input.width(), false);
        Ok(mean_cross_entropy(&trace.logits, target))
    }

    /// Distance of the nearest hidden pre-activation from the rectifier's
    /// kink. Finite-difference checks are only meaningful when this is not tiny.
    pub fn kink_margin(&self, input: &InteractionTensor) -> Result<f64> {
        let values = self.input_values(input)?;
        Ok(self.run(values, input.height(), input.width(), false).kink_margin)
    }

    /// Mean binary cross-entropy over pixels and its exact gradient with
    /// respect to every parameter (same layout as [`ReferenceModel::params`]).
    pub fn loss_and_gradient(&self, input: &InteractionTensor, target: &BinaryMask) -> Result<(f64, Vec<T>)> {
        target.ensure_dims(input.dims())?;
        let (height, width) = input.dims();
        let hw = height * width;
        let values = self.input_values(input)?;
        let trace = self.run(values, height, width, true);

        let scale = T::one() / T::from_usize(hw).expect("pixel count");
        let floor = T::from_f64_lossy(PROB_FLOOR);
        let ceil = T::one() - floor;
        let loss = mean_cross_entropy(&trace.logits, target);
        let mut delta: Vec<T> = Vec::with_capacity(hw);
        for (z, &y) in trace.logits.iter().zip(target.as_slice()) {
            let q = T::one() / (T::one() + (-*z).exp());
            let inside = q > floor && q < ceil;
            let label = if y { T::one() } else { T::zero() };
            delta.push(if inside { (q - label) * scale } else { T::zero() });
        }

        let mut grad = vec![T::zero(); self.params.len()];
        let mut offset_end = self.params.len();
        for l in (0..self.layers.len()).rev() {
            let spec = self.layers[l];
            let k = spec.in_channels * TAPS;
            let offset = offset_end - spec.param_count();
            let (gw, gb) = grad[offset..offset_end].split_at_mut(spec.weight_count());
            let cols = &trace.cols[l];
            // dW = delta * cols^T; the operands are transposed first because
            // packing a column-major right-hand side is slow
            let cols_t = transpose(cols, k, hw);
            let delta_t = transpose(&delta, spec.out_channels, hw);
            T::gemm(spec.out_channels, hw, k, &delta_t, (1, spec.out_channels), &cols_t, (k, 1), T::zero(), gw);
            for (o, g) in gb.iter_mut().enumerate() {
                *g = delta[o * hw..(o + 1) * hw].iter().copied().sum();
            }
            if l > 0 {
                let (w, _) = self.layer_params(l);
                let mut dcols = vec![T::zero(); k * hw];
                // dcols = W^T * delta
                T::gemm(k, spec.out_channels, hw, w, (1, k), &delta, (hw, 1), T::zero(), &mut dcols);
                let mut next = col2im(&dcols, spec.in_channels, height, width, spec.dilation);
                for (d, a) in next.iter_mut().zip(&trace.inputs[l]) {
                    if *a <= T::zero() {
                        *d = T::zero();
                    }
                }
                delta = next;
            }
            offset_end = offset;
        }
        Ok((loss, grad))
    }

    /// Flat little-endian file: magic, version, layer table, then every
    /// parameter as `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.layers.len() * 16 + self.params.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            for v in [l.in_channels, l.out_channels, 3, l.dilation] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.to_f64_lossy() as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |r: &mut &[u8]| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = u32_at(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let count = u32_at(&mut r)? as usize;
        if count == 0 || count > 1024 {
            return Err(bad("implausible layer count"));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (i, o, kernel, d) = (u32_at(&mut r)?, u32_at(&mut r)?, u32_at(&mut r)?, u32_at(&mut r)?);
            if kernel != 3 {
                return Err(Error::ModelFormat(format!("unsupported kernel size {kernel}")));
            }
            layers.push(LayerSpec::new(i as usize, o as usize, d as usize));
        }
        let mut model = Self::zeros(&layers)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        if u64::from_le_bytes(b8) as usize != model.params.len() {
            return Err(bad("parameter count does not match layer table"));
        }
        if r.len() != model.params.len() * 4 {
            return Err(bad("parameter block has the wrong length"));
        }
        for (p, chunk) in model.params.iter_mut().zip(r.chunks_exact(4)) {
            *p = T::from_f32(f32::from_le_bytes(chunk.try_into().expect("4 bytes"))).expect("finite");
        }
        Ok(model)
    }

    pub fn architecture_json(&self) -> serde_json::Value {
        let last = self.layers.len() - 1;
        let layers: Vec<_> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                json!({
                    "in_channels": l.in_channels,
                    "out_channels": l.out_channels,
                    "kernel": 3,
                    "stride": 1,
                    "dilation": l.dilation,
                    "padding": l.dilation,
                    "activation": if i == last { "logistic" } else { "relu" },
                })
            })
            .collect();
        json!({
            "format": "clicksel-reference-model",
            "version": FORMAT_VERSION,
            "dtype": "f32-le",
            "input_planes": ["r", "g", "b", "positive_distance", "negative_distance"],
            "layers": layers,
            "parameter_count": self.params.len(),
        })
    }

    /// Writes the model to `path` and its architecture to `<path>.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let text = serde_json::to_string_pretty(&self.architecture_json()).expect("json");
        std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidParameter(m));
    if layers.is_empty() {
        return bad("a model needs at least one layer".into());
    }
    for (i, l) in layers.iter().enumerate() {
        if l.in_channels == 0 || l.out_channels == 0 || l.dilation == 0 {
            return bad(format!("layer {i} has a zero dimension"));
        }
        if i > 0 && layers[i - 1].out_channels != l.in_channels {
            return bad(format!("layer {i} expects {} channels, previous layer gives {}", l.in_channels, layers[i - 1].out_channels));
        }
    }
    if layers[layers.len() - 1].out_channels != 1 {
        return bad("the last layer must produce one channel".into());
    }
    Ok(())
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn clamp_prob(q: f64) -> f64 {
    q.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Unfolds `channels x h x w` into `(channels * 9) x (h * w)` for a 3x3
/// kernel with the given dilation and matching zero padding.
fn im2col<T: Real>(input: &[T], channels: usize, height: usize, width: usize, dilation: usize) -> Vec<T> {
    let hw = height * width;
    let mut cols = vec![T::zero(); channels * TAPS * hw];
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for tap in 0..TAPS {
            let dy = (tap / 3) as isize - 1;
            let dx = (tap % 3) as isize - 1;
            let (dy, dx) = (dy * dilation as isize, dx * dilation as isize);
            let row = &mut cols[(c * TAPS + tap) * hw..(c * TAPS + tap + 1) * hw];
            let (x0, x1) = valid_span(width, dx);
            for y in 0..height {
                let sy = y as isize + dy;
                if sy < 0 || sy >= height as isize || x0 >= x1 {
                    continue;
                }
                let src = sy as usize * width;
                let dst = &mut row[y * width + x0..y * width + x1];
                let sx0 = (x0 as isize + dx) as usize;
                dst.copy_from_slice(&plane[src + sx0..src + sx0 + (x1 - x0)]);
            }
        }
    }
    cols
}

fn mean_cross_entropy<T: Real>(logits: &[T], target: &BinaryMask) -> f64 {
    let floor = T::from_f64_lossy(PROB_FLOOR);
    let ceil = T::one() - floor;
    let mut loss = 0.0f64;
    for (z, &y) in logits.iter().zip(target.as_slice()) {
        let q = T::one() / (T::one() + (-*z).exp());
        let qc = q.max(floor).min(ceil).to_f64_lossy();
        loss -= if y { qc.ln() } else { (1.0 - qc).ln() };
    }
    loss / logits.len() as f64
}

fn transpose<T: Copy + Default>(src: &[T], rows: usize, cols: usize) -> Vec<T> {
    const TILE: usize = 32;
    let mut out = vec![T::default(); rows * cols];
    for r0 in (0..rows).step_by(TILE) {
        let r1 = (r0 + TILE).min(rows);
        for c0 in (0..cols).step_by(TILE) {
            let c1 = (c0 + TILE).min(cols);
            for r in r0..r1 {
                for (i, &v) in src[r * cols + c0..r * cols + c1].iter().enumerate() {
                    out[(c0 + i) * rows + r] = v;
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`].
fn col2im<T: Real>(cols: &[T], channels: usize, height: usize, width: usize, dilation: usize) -> Vec<T> {
    let hw = height * width;
    let mut out = vec![T::zero(); channels * hw];
    for c in 0..channels {
        let plane = &mut out[c * hw..(c + 1) * hw];
        for tap in 0..TAPS {
            let dy = ((tap / 3) as isize - 1) * dilation as isize;
            let dx = ((tap % 3) as isize - 1) * dilation as isize;
            let row = &cols[(c * TAPS + tap) * hw..(c * TAPS + tap + 1) * hw];
            let (x0, x1) = valid_span(width, dx);
            for y in 0..height {
                let sy = y as isize + dy;
                if sy < 0 || sy >= height as isize || x0 >= x1 {
                    continue;
                }
                let dst0 = sy as usize * width + (x0 as isize + dx) as usize;
                for (d, s) in plane[dst0..dst0 + (x1 - x0)].iter_mut().zip(&row[y * width + x0..y * width + x1]) {
                    *d += *s;
                }
            }
        }
    }
    out
}

/// Output columns `x0..x1` whose source column `x + dx` is inside the row.
fn valid_span(width: usize, dx: isize) -> (usize, usize) {
    let x0 = (-dx).max(0) as usize;
    let x1 = (width as isize - dx.max(0)).max(0) as usize;
    (x0.min(width), x1.min(width))
}

impl<T: Real> ProbabilityBackend for ReferenceModel<T> {
    fn name(&self) -> &str {
        "reference-dilated-cnn"
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("parameters".into(), self.params.len().to_string());
        m.insert("layers".into(), self.layers.len().to_string());
        m.insert("receptive_radius".into(), self.receptive_radius().to_string());
        m
    }

    fn predict(&self, input: &InteractionTensor) -> Result<ProbabilityMap> {
        self.forward(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(planes: usize, h: usize, w: usize, seed: u64) -> InteractionTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..planes * h * w).map(|_| rng.random_range(0.0f32..1.0)).collect();
        InteractionTensor::from_planes(planes, h, w, data).unwrap()
    }

    #[test]
    fn reference_parameter_count() {
        let m = ReferenceModel::<f32>::reference(0);
        assert_eq!(m.param_count(), 736 + 4640 + 9248 + 4624 + 145);
        assert_eq!(m.receptive_radius(), 9);
    }

    #[test]
    fn zero_parameters_give_one_half() {
        let m = ReferenceModel::<f32>::zeros(&REFERENCE_ARCHITECTURE).unwrap();
        let q = m.forward(&random_input(5, 7, 9, 1)).unwrap();
        assert_eq!(q.dims(), (7, 9));
        assert!(q.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn wrong_plane_count_rejected() {
        let m = ReferenceModel::<f32>::reference(0);
        assert!(matches!(m.forward(&random_input(4, 5, 5, 0)), Err(Error::PlaneCount { expected: 5, actual: 4 })));
    }

    #[test]
    fn seeded_init_and_forward_are_deterministic() {
        let a = ReferenceModel::<f32>::reference(42);
        let b = ReferenceModel::<f32>::reference(42);
        assert_eq!(a, b);
        let x = random_input(5, 16, 16, 3);
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
        assert_ne!(a, ReferenceModel::<f32>::reference(43));
    }

    #[test]
    fn output_is_translation_equivariant_in_the_interior() {
        let m = ReferenceModel::<f64>::reference(5);
        let (h, w, shift) = (40, 40, 3);
        let x = random_input(5, h, w, 9);
        let shifted: Vec<f32> = (0..5 * h * w)
            .map(|i| {
                let (p, r, c) = (i / (h * w), (i / w) % h, i % w);
                if c >= shift { x.as_slice()[p * h * w + r * w + c - shift] } else { 0.0 }
            })
            .collect();
        let xs = InteractionTensor::from_planes(5, h, w, shifted).unwrap();
        let (a, b) = (m.forward(&x).unwrap(), m.forward(&xs).unwrap());
        let band = m.receptive_radius();
        for r in band..h - band {
            for c in band..w - band - shift {
                assert!((a.get(r, c) - b.get(r, c + shift)).abs() < 1e-9, "({r}, {c})");
            }
        }
    }

    #[test]
    fn im2col_adjoint_identity() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, h, w, d) = (2, 5, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: Vec<f64> = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..c * 9 * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs: f64 = im2col(&x, c, h, w, d).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, c, h, w, d)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn loss_at_one_half_is_ln_two() {
        let m = ReferenceModel::<f64>::zeros(&REFERENCE_ARCHITECTURE).unwrap();
        let x = random_input(5, 6, 6, 0);
        let target = BinaryMask::from_fn(6, 6, |r, _| r < 3);
        let (loss, _) = m.loss_and_gradient(&x, &target).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_loss() {
        let mut m = ReferenceModel::<f64>::zeros(&[LayerSpec::new(1, 1, 1)]).unwrap();
        m.params_mut()[9] = 40.0; // bias only: q saturates to 1
        let x = InteractionTensor::from_planes(1, 4, 4, vec![0.0; 16]).unwrap();
        let (loss, grad) = m.loss_and_gradient(&x, &BinaryMask::filled(4, 4, true)).unwrap();
        assert!(loss > 0.0 && loss < 2e-7, "{loss}");
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_rejects_mismatched_target() {
        let m = ReferenceModel::<f64>::reference(0);
        let err = m.loss_and_gradient(&random_input(5, 6, 6, 0), &BinaryMask::new(6, 5)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn bytes_round_trip_and_reject_garbage() {
        let m = ReferenceModel::<f32>::reference(8);
        let back = ReferenceModel::<f32>::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(ReferenceModel::<f32>::from_bytes(b"nope").is_err());
        let mut truncated = m.to_bytes();
        truncated.pop();
        assert!(ReferenceModel::<f32>::from_bytes(&truncated).is_err());
    }
}
