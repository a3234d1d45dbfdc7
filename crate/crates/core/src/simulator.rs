//! Automatic clicker and the IU-vs-clicks evaluation protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::ProbabilityBackend;
use crate::dataset::LabeledScene;
use crate::edt::squared_edt;
use crate::encoding::{encode, Click, ClickSet, Polarity};
use crate::error::{Error, Result};
use crate::graphcut::{refine, EnergyParams};
use crate::raster::{iou, BinaryMask, Image, ProbabilityMap};

/// Default click budget per object.
pub const MAX_CLICKS: usize = 20;

/// Anything that turns an image and its clicks into a selection.
pub trait Segmenter: Send + Sync {
    fn segment(&self, image: &Image, clicks: &ClickSet) -> Result<BinaryMask>;

    /// Key/value description recorded in evaluation reports.
    fn describe(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub probability: ProbabilityMap,
    pub mask: BinaryMask,
}

/// Encode, predict, then either refine by graph cut or threshold at 0.5.
/// The backend sees single-pixel clicks; only the graph cut uses the disks.
#[derive(Debug, Clone)]
pub struct Pipeline<B> {
    backend: B,
    energy: EnergyParams,
    graphcut: bool,
}

impl<B: ProbabilityBackend> Pipeline<B> {
    pub fn new(backend: B, energy: EnergyParams) -> Self {
        Self { backend, energy, graphcut: true }
    }

    pub fn with_graphcut(mut self, enabled: bool) -> Self {
        self.graphcut = enabled;
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn energy(&self) -> &EnergyParams {
        &self.energy
    }

    pub fn uses_graphcut(&self) -> bool {
        self.graphcut
    }

    pub fn predict(&self, image: &Image, clicks: &ClickSet) -> Result<ProbabilityMap> {
        let q = self.backend.predict(&encode(image, clicks)?)?;
        if q.dims() != image.dims() {
            return Err(Error::DimensionMismatch { expected: image.dims(), actual: q.dims() });
        }
        Ok(q)
    }

    pub fn run(&self, image: &Image, clicks: &ClickSet) -> Result<Segmentation> {
        let probability = self.predict(image, clicks)?;
        let mask = if self.graphcut {
            refine(image, &probability, clicks, &self.energy)?
        } else {
            probability.threshold()
        };
        Ok(Segmentation { probability, mask })
    }
}

impl<B: ProbabilityBackend> Segmenter for Pipeline<B> {
    fn segment(&self, image: &Image, clicks: &ClickSet) -> Result<BinaryMask> {
        Ok(self.run(image, clicks)?.mask)
    }

    fn describe(&self) -> BTreeMap<String, String> {
        let mut d = BTreeMap::new();
        d.insert("backend".into(), self.backend.name().to_string());
        for (k, v) in self.backend.metadata() {
            d.insert(format!("backend.{k}"), v);
        }
        d.insert("graphcut".into(), self.graphcut.to_string());
        if self.graphcut {
            d.insert(
                "energy".into(),
                serde_json::to_string(&self.energy).expect("energy params serialize"),
            );
        }
        d
    }
}

/// Test hook: answers with the ground-truth instance under the first positive
/// click, found by matching the image against a known set of scenes.
#[derive(Debug, Clone, Default)]
pub struct OracleSegmenter {
    scenes: Vec<(Image, Vec<BinaryMask>)>,
}

impl OracleSegmenter {
    pub fn new(scenes: impl IntoIterator<Item = (Image, Vec<BinaryMask>)>) -> Self {
        Self { scenes: scenes.into_iter().collect() }
    }
}

impl Segmenter for OracleSegmenter {
    fn segment(&self, image: &Image, clicks: &ClickSet) -> Result<BinaryMask> {
        let (h, w) = image.dims();
        let Some(first) = clicks.positives().next() else {
            return Ok(BinaryMask::new(h, w));
        };
        let found = self
            .scenes
            .iter()
            .filter(|(img, _)| img == image)
            .flat_map(|(_, masks)| masks.iter())
            .find(|m| m.at(first));
        Ok(found.cloned().unwrap_or_else(|| BinaryMask::new(h, w)))
    }

    fn describe(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("backend".to_string(), "oracle".to_string())])
    }
}

/// Squared distance from each mislabeled pixel to the nearest correctly
/// labeled pixel or to the ring just outside the image, whichever is closer.
/// Correct pixels score 0.
pub fn error_distance_sq(gt: &BinaryMask, current: &BinaryMask) -> Result<Vec<u64>> {
    current.ensure_dims(gt.dims())?;
    let (h, w) = gt.dims();
    let (ph, pw) = (h + 2, w + 2);
    let mut sources = vec![true; ph * pw];
    for r in 0..h {
        for c in 0..w {
            sources[(r + 1) * pw + c + 1] = gt.get(r, c) == current.get(r, c);
        }
    }
    let padded = squared_edt(&sources, ph, pw);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        out.extend_from_slice(&padded[(r + 1) * pw + 1..(r + 1) * pw + 1 + w]);
    }
    Ok(out)
}

/// The mislabeled pixel deepest inside the error region, first in row-major
/// order on ties; positive when the ground truth there is object.
pub fn next_click(gt: &BinaryMask, current: &BinaryMask) -> Result<Click> {
    let scores = error_distance_sq(gt, current)?;
    let w = gt.width();
    let mut best: Option<(u64, usize)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0 && best.is_none_or(|(b, _)| s > b) {
            best = Some((s, i));
        }
    }
    let (_, i) = best.ok_or(Error::NoMislabeledPixels)?;
    let (row, col) = (i / w, i % w);
    Ok(Click { row, col, polarity: Polarity::from_label(gt.get(row, col)) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub object_id: String,
    pub max_clicks: usize,
    /// IU after click k is `ious[k - 1]`.
    pub ious: Vec<f64>,
    pub clicks: Vec<Click>,
    pub final_mask: BinaryMask,
}

impl EvalCurve {
    /// The curve extended to `max_clicks` entries by repeating its last value.
    pub fn padded(&self) -> Vec<f64> {
        let mut v = self.ious.clone();
        if let Some(&last) = v.last() {
            v.resize(self.max_clicks.max(v.len()), last);
        }
        v
    }
}

/// Clicks until perfect IU or until `max_clicks`. Each click goes on the
/// current worst error; a click that repeats an earlier one leaves the mask
/// unchanged and its IU is recorded again.
pub fn run_sequence<S: Segmenter + ?Sized>(seg: &S, image: &Image, gt: &BinaryMask, max_clicks: usize) -> Result<EvalCurve> {
    if max_clicks == 0 {
        return Err(Error::InvalidParameter("max_clicks must be at least 1".into()));
    }
    gt.ensure_dims(image.dims())?;
    if gt.is_empty() {
        return Err(Error::EmptyObject);
    }
    let (h, w) = image.dims();
    let mut current = BinaryMask::new(h, w);
    let mut clicks = ClickSet::new();
    let mut placed = Vec::new();
    let mut ious = Vec::new();
    while ious.len() < max_clicks {
        let click = match next_click(gt, &current) {
            Ok(c) => c,
            Err(Error::NoMislabeledPixels) => break,
            Err(e) => return Err(e),
        };
        placed.push(click);
        if !clicks.contains(&click) {
            clicks.push(click)?;
            current = seg.segment(image, &clicks)?;
            current.ensure_dims(image.dims())?;
        }
        let score = iou(&current, gt)?;
        ious.push(score);
        if score >= 1.0 {
            break;
        }
    }
    Ok(EvalCurve { object_id: String::new(), max_clicks, ious, clicks: placed, final_mask: current })
}

/// Smallest click count reaching `threshold`, or the click budget if never.
pub fn clicks_to_threshold(curve: &EvalCurve, threshold: f64) -> Result<usize> {
    if curve.ious.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    Ok(curve
        .ious
        .iter()
        .position(|&v| v >= threshold)
        .map(|k| k + 1)
        .unwrap_or(curve.max_clicks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub max_clicks: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { thresholds: vec![0.85, 0.9], max_clicks: MAX_CLICKS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRow {
    pub object_id: String,
    /// IU after each placed click, before padding.
    pub ious: Vec<f64>,
    pub clicks: Vec<Click>,
    /// One entry per configured threshold.
    pub clicks_to_threshold: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub mean_clicks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub segmenter: BTreeMap<String, String>,
    pub objects: usize,
    /// Mean IU after k clicks at index k - 1, curves padded to `max_clicks`.
    pub mean_curve: Vec<f64>,
    pub mean_clicks: Vec<ThresholdSummary>,
    pub rows: Vec<ObjectRow>,
}

impl EvalReport {
    /// Aggregates recomputed from the rows.
    pub fn from_rows(config: EvalConfig, segmenter: BTreeMap<String, String>, rows: Vec<ObjectRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = rows.len() as f64;
        let mut mean_curve = vec![0.0; config.max_clicks];
        for row in &rows {
            let last = *row.ious.last().ok_or(Error::EmptyCurve)?;
            for (k, slot) in mean_curve.iter_mut().enumerate() {
                *slot += row.ious.get(k).copied().unwrap_or(last);
            }
        }
        for v in &mut mean_curve {
            *v /= n;
        }
        let mean_clicks = config
            .thresholds
            .iter()
            .enumerate()
            .map(|(t, &threshold)| ThresholdSummary {
                threshold,
                mean_clicks: rows.iter().map(|r| r.clicks_to_threshold[t] as f64).sum::<f64>() / n,
            })
            .collect();
        Ok(Self { objects: rows.len(), config, segmenter, mean_curve, mean_clicks, rows })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Mean clicks per threshold followed by the mean curve, aligned columns.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "objects: {}   max clicks: {}", self.objects, self.config.max_clicks);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>12}", "IU target", "mean clicks");
        for s in &self.mean_clicks {
            let _ = writeln!(out, "{:<10} {:>12.2}", format!("{:.0}%", s.threshold * 100.0), s.mean_clicks);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>12}", "clicks", "mean IU");
        for (k, v) in self.mean_curve.iter().enumerate() {
            let _ = writeln!(out, "{:<10} {:>12.4}", k + 1, v);
        }
        out
    }

    pub fn to_curve_csv(&self) -> String {
        let mut out = String::from("clicks,mean_iu\n");
        for (k, v) in self.mean_curve.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k + 1, v);
        }
        out
    }
}

/// Runs one sequence per object instance, in parallel, and aggregates in
/// dataset order.
pub fn evaluate_dataset<S: Segmenter + ?Sized>(seg: &S, scenes: &[LabeledScene], config: &EvalConfig) -> Result<EvalReport> {
    for &t in &config.thresholds {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1], got {t}")));
        }
    }
    let jobs: Vec<(String, &Image, &BinaryMask)> = scenes
        .iter()
        .flat_map(|s| {
            s.scene
                .instances
                .iter()
                .enumerate()
                .map(move |(k, m)| (format!("{}/{k}", s.id), &s.scene.image, m))
        })
        .collect();
    if jobs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = jobs
        .par_iter()
        .map(|(id, image, gt)| {
            let mut curve = run_sequence(seg, image, gt, config.max_clicks)?;
            curve.object_id = id.clone();
            let clicks_to = config
                .thresholds
                .iter()
                .map(|&t| clicks_to_threshold(&curve, t))
                .collect::<Result<Vec<_>>>()?;
            Ok(ObjectRow { object_id: curve.object_id, ious: curve.ious, clicks: curve.clicks, clicks_to_threshold: clicks_to })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(config.clone(), seg.describe(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(BinaryMask);

    impl Segmenter for Constant {
        fn segment(&self, _: &Image, _: &ClickSet) -> Result<BinaryMask> {
            Ok(self.0.clone())
        }
    }

    fn disk(h: usize, w: usize, cr: usize, cc: usize, radius: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |r, c| {
            let (dr, dc) = (r.abs_diff(cr), c.abs_diff(cc));
            dr * dr + dc * dc <= radius * radius
        })
    }

    fn curve(ious: &[f64]) -> EvalCurve {
        EvalCurve {
            object_id: "x".into(),
            max_clicks: 20,
            ious: ious.to_vec(),
            clicks: vec![],
            final_mask: BinaryMask::new(1, 1),
        }
    }

    #[test]
    fn perfect_mask_has_no_next_click() {
        let gt = disk(10, 10, 5, 5, 3);
        assert!(matches!(next_click(&gt, &gt), Err(Error::NoMislabeledPixels)));
    }

    #[test]
    fn first_click_hits_disk_center() {
        let gt = disk(64, 64, 32, 32, 10);
        assert_eq!(next_click(&gt, &BinaryMask::new(64, 64)).unwrap(), Click::positive(32, 32));
    }

    #[test]
    fn false_positive_gives_negative_click() {
        let gt = BinaryMask::new(9, 9);
        let current = disk(9, 9, 4, 4, 2);
        assert_eq!(next_click(&gt, &current).unwrap(), Click::negative(4, 4));
    }

    #[test]
    fn frame_counts_as_boundary() {
        // everything wrong: deepest point is the center of the image
        let gt = BinaryMask::filled(7, 7, true);
        assert_eq!(next_click(&gt, &BinaryMask::new(7, 7)).unwrap(), Click::positive(3, 3));
    }

    #[test]
    fn ground_truth_segmenter_needs_one_click() {
        let gt = disk(20, 20, 10, 10, 4);
        let img = Image::from_fn(20, 20, |_, _| [0, 0, 0]).unwrap();
        let c = run_sequence(&Constant(gt.clone()), &img, &gt, 20).unwrap();
        assert_eq!(c.ious, vec![1.0]);
    }

    #[test]
    fn empty_segmenter_uses_whole_budget() {
        let gt = disk(20, 20, 10, 10, 4);
        let img = Image::from_fn(20, 20, |_, _| [0, 0, 0]).unwrap();
        let c = run_sequence(&Constant(BinaryMask::new(20, 20)), &img, &gt, 20).unwrap();
        assert_eq!(c.ious, vec![0.0; 20]);
        assert!(c.clicks.iter().all(|k| k.polarity == Polarity::Positive));
    }

    #[test]
    fn threshold_counts() {
        assert_eq!(clicks_to_threshold(&curve(&[0.3, 0.7, 0.92]), 0.9).unwrap(), 3);
        assert_eq!(clicks_to_threshold(&curve(&[0.5; 20]), 0.9).unwrap(), 20);
        assert_eq!(clicks_to_threshold(&curve(&[0.01, 0.2]), 0.0001).unwrap(), 1);
        assert!(matches!(clicks_to_threshold(&curve(&[]), 0.5), Err(Error::EmptyCurve)));
    }

    #[test]
    fn report_means_are_plain_averages() {
        let cfg = EvalConfig { thresholds: vec![0.85], max_clicks: 4 };
        let rows = vec![
            ObjectRow { object_id: "a/0".into(), ious: vec![0.5, 0.9], clicks: vec![], clicks_to_threshold: vec![2] },
            ObjectRow { object_id: "b/0".into(), ious: vec![0.1, 0.2, 0.3, 0.86], clicks: vec![], clicks_to_threshold: vec![6] },
        ];
        let r = EvalReport::from_rows(cfg, BTreeMap::new(), rows).unwrap();
        assert_eq!(r.mean_clicks[0].mean_clicks, 4.0);
        assert_eq!(r.mean_curve.len(), 4);
        assert!((r.mean_curve[3] - (0.9 + 0.86) / 2.0).abs() < 1e-12);
        assert!(r.to_text_table().contains("85%"));
        assert_eq!(r.to_curve_csv().lines().count(), 5);
    }
}
