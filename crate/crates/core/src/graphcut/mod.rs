//! Binary energy over the pixel grid and its exact minimization by min-cut.
//!
//! The source side of the cut is the object. Each pixel gets a source arc
//! carrying the cost of labeling it background and a sink arc carrying the
//! cost of labeling it object, so cutting a pixel away from the source pays
//! exactly the cost of the label it ends up with.

mod maxflow;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use maxflow::MaxFlow;

use crate::encoding::ClickSet;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSq {
    /// Mean squared neighbour difference of the image, or 1 on a constant image.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidParameter(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    /// Forward half of the neighbourhood as `(drow, dcol)`; the other half is
    /// implied by symmetry.
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, 1), (1, 0)],
            Connectivity::Eight => &[(0, 1), (1, 0), (1, 1), (1, -1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub lambda: f64,
    pub sigma_sq: SigmaSq,
    pub connectivity: Connectivity,
    /// Pixels within this Euclidean distance of a click are fixed to its label.
    pub hard_radius: u32,
    pub prob_clamp: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            sigma_sq: SigmaSq::Auto,
            connectivity: Connectivity::Eight,
            hard_radius: 5,
            prob_clamp: 1e-6,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let SigmaSq::Fixed(s) = self.sigma_sq {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma_sq must be > 0, got {s}")));
            }
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "prob_clamp must lie in (0, 0.5), got {}",
                self.prob_clamp
            )));
        }
        Ok(())
    }
}

/// Fixed label of a pixel, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardLabel {
    Free,
    Object,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub p: usize,
    pub q: usize,
    pub weight: f64,
}

/// The energy as a graph: terminal costs per pixel (index `row * width + col`)
/// and one symmetric weight per neighbouring pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGraph {
    height: usize,
    width: usize,
    connectivity: Connectivity,
    background_cost: Vec<f64>,
    object_cost: Vec<f64>,
    hard: Vec<HardLabel>,
    edges: Vec<Edge>,
    sentinel: f64,
}

impl PixelGraph {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    /// Cost paid when the pixel is labeled background (source arc).
    pub fn background_cost(&self) -> &[f64] {
        &self.background_cost
    }

    /// Cost paid when the pixel is labeled object (sink arc).
    pub fn object_cost(&self) -> &[f64] {
        &self.object_cost
    }

    pub fn hard(&self) -> &[HardLabel] {
        &self.hard
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    /// Drops the boundary term, leaving a purely per-pixel energy.
    pub fn zero_pairwise(&mut self) {
        for e in &mut self.edges {
            e.weight = 0.0;
        }
    }

    /// Plain-text dump: a header, one `t` line per pixel with its background
    /// and object costs, one `n` line per neighbour pair.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# pixel graph: source = object");
        let _ = writeln!(out, "size {} {}", self.height, self.width);
        let _ = writeln!(out, "connectivity {}", self.connectivity.count());
        let _ = writeln!(out, "sentinel {}", self.sentinel);
        for i in 0..self.background_cost.len() {
            let _ = writeln!(out, "t {i} {} {}", self.background_cost[i], self.object_cost[i]);
        }
        for e in &self.edges {
            let _ = writeln!(out, "n {} {} {}", e.p, e.q, e.weight);
        }
        out
    }
}

/// Contrast of a neighbour pair: mean over channels of the squared difference.
fn contrast(a: [u8; 3], b: [u8; 3]) -> f64 {
    let s: f64 = (0..3).map(|c| (a[c] as f64 - b[c] as f64).powi(2)).sum();
    s / 3.0
}

fn neighbour_pairs(height: usize, width: usize, connectivity: Connectivity) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::with_capacity(height * width * connectivity.offsets().len());
    for r in 0..height {
        for c in 0..width {
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if nr < 0 || nc < 0 || nr as usize >= height || nc as usize >= width {
                    continue;
                }
                let dist = if dr != 0 && dc != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                pairs.push((r * width + c, nr as usize * width + nc as usize, dist));
            }
        }
    }
    pairs
}

pub fn auto_sigma_sq(image: &Image, connectivity: Connectivity) -> f64 {
    let w = image.width();
    let pairs = neighbour_pairs(image.height(), w, connectivity);
    if pairs.is_empty() {
        return 1.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(p, q, _)| contrast(image.pixel(p / w, p % w), image.pixel(q / w, q % w)))
        .sum();
    let mean = total / pairs.len() as f64;
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Hard labels from click disks; later clicks overwrite earlier ones.
pub fn hard_labels(height: usize, width: usize, clicks: &ClickSet, radius: u32) -> Vec<HardLabel> {
    let mut hard = vec![HardLabel::Free; height * width];
    let r = radius as usize;
    let r_sq = (radius as u64) * (radius as u64);
    for click in clicks.iter() {
        let label = if click.polarity.is_positive() { HardLabel::Object } else { HardLabel::Background };
        let p = click.pixel();
        for row in click.row.saturating_sub(r)..(click.row + r + 1).min(height) {
            for col in click.col.saturating_sub(r)..(click.col + r + 1).min(width) {
                if p.dist_sq(crate::raster::Pixel::new(row, col)) <= r_sq {
                    hard[row * width + col] = label;
                }
            }
        }
    }
    hard
}

pub fn build_energy(image: &Image, q: &ProbabilityMap, clicks: &ClickSet, params: &EnergyParams) -> Result<PixelGraph> {
    params.validate()?;
    if q.dims() != image.dims() {
        return Err(Error::DimensionMismatch { expected: image.dims(), actual: q.dims() });
    }
    let (height, width) = image.dims();
    clicks.check_bounds(height, width)?;

    let n = height * width;
    let mut background_cost = Vec::with_capacity(n);
    let mut object_cost = Vec::with_capacity(n);
    for (i, &p) in q.as_slice().iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFiniteProbability { row: i / width, col: i % width });
        }
        let p = p.clamp(params.prob_clamp, 1.0 - params.prob_clamp);
        object_cost.push(params.lambda * -p.ln());
        background_cost.push(params.lambda * -(1.0 - p).ln());
    }

    let sigma_sq = match params.sigma_sq {
        SigmaSq::Auto => auto_sigma_sq(image, params.connectivity),
        SigmaSq::Fixed(s) => s,
    };
    let edges: Vec<Edge> = neighbour_pairs(height, width, params.connectivity)
        .into_iter()
        .map(|(p, q, dist)| {
            let d2 = contrast(image.pixel(p / width, p % width), image.pixel(q / width, q % width));
            Edge { p, q, weight: (-d2 / (2.0 * sigma_sq)).exp() / dist }
        })
        .collect();

    let finite: f64 = background_cost.iter().chain(&object_cost).sum::<f64>()
        + edges.iter().map(|e| e.weight).sum::<f64>();
    let sentinel = 1.0 + finite;

    let hard = hard_labels(height, width, clicks, params.hard_radius);
    for (i, h) in hard.iter().enumerate() {
        match h {
            HardLabel::Free => {}
            HardLabel::Object => {
                background_cost[i] = sentinel;
                object_cost[i] = 0.0;
            }
            HardLabel::Background => {
                background_cost[i] = 0.0;
                object_cost[i] = sentinel;
            }
        }
    }

    Ok(PixelGraph {
        height,
        width,
        connectivity: params.connectivity,
        background_cost,
        object_cost,
        hard,
        edges,
        sentinel,
    })
}

pub fn energy_of(graph: &PixelGraph, labeling: &BinaryMask) -> Result<f64> {
    labeling.ensure_dims(graph.dims())?;
    let l = labeling.as_slice();
    let mut e = 0.0;
    for (i, &object) in l.iter().enumerate() {
        e += if object { graph.object_cost[i] } else { graph.background_cost[i] };
    }
    for edge in &graph.edges {
        if l[edge.p] != l[edge.q] {
            e += edge.weight;
        }
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutStats {
    pub augmentations: usize,
    pub runtime: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub labeling: BinaryMask,
    /// Energy of `labeling`, recomputed term by term.
    pub energy: f64,
    /// Value of the maximum flow.
    pub flow: f64,
    pub stats: CutStats,
}

/// Exact minimizer. Among several minimum cuts the one with the smallest
/// object side is returned, so a pixel whose two labels cost the same ends up
/// background, as under `q > 0.5` thresholding.
pub fn min_cut(graph: &PixelGraph) -> CutResult {
    let start = Instant::now();
    let mut solver = MaxFlow::new(graph.background_cost.len(), graph.edges.len());
    for i in 0..graph.background_cost.len() {
        solver.add_terminal(i, graph.background_cost[i], graph.object_cost[i]);
    }
    for e in &graph.edges {
        if e.weight > 0.0 {
            solver.add_edge(e.p, e.q, e.weight, e.weight);
        }
    }
    let flow = solver.solve();
    let side = solver.source_side();
    let labeling = BinaryMask::from_vec(graph.height, graph.width, side).expect("solver preserves node count");
    let energy = energy_of(graph, &labeling).expect("labeling built from graph dims");
    CutResult {
        labeling,
        energy,
        flow,
        stats: CutStats { augmentations: solver.augmentations(), runtime: start.elapsed() },
    }
}

pub fn refine(image: &Image, q: &ProbabilityMap, clicks: &ClickSet, params: &EnergyParams) -> Result<BinaryMask> {
    Ok(min_cut(&build_energy(image, q, clicks, params)?).labeling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Click;

    fn gray(h: usize, w: usize, v: u8) -> Image {
        Image::from_fn(h, w, |_, _| [v, v, v]).unwrap()
    }

    #[test]
    fn half_probability_gives_equal_unaries() {
        let img = gray(3, 3, 40);
        let q = ProbabilityMap::filled(3, 3, 0.5).unwrap();
        let params = EnergyParams { lambda: 2.0, ..Default::default() };
        let g = build_energy(&img, &q, &ClickSet::new(), &params).unwrap();
        let expected = 2.0 * -(0.5f64).ln();
        assert!(g.background_cost().iter().all(|&c| c == expected));
        assert!(g.object_cost().iter().all(|&c| c == expected));
    }

    #[test]
    fn constant_image_gives_inverse_distance_weights() {
        let img = gray(4, 5, 90);
        let q = ProbabilityMap::filled(4, 5, 0.3).unwrap();
        let g = build_energy(&img, &q, &ClickSet::new(), &EnergyParams::default()).unwrap();
        for e in g.edges() {
            let (pr, pc) = (e.p / 5, e.p % 5);
            let (qr, qc) = (e.q / 5, e.q % 5);
            let expected = if pr != qr && pc != qc { 1.0 / std::f64::consts::SQRT_2 } else { 1.0 };
            assert_eq!(e.weight, expected);
        }
        // 4x5 grid: 15 horizontal, 16 vertical, 12 + 12 diagonal
        assert_eq!(g.edges().len(), 55);
    }

    #[test]
    fn disk_membership_matches_distance() {
        let img = gray(20, 20, 0);
        let q = ProbabilityMap::filled(20, 20, 0.1).unwrap();
        let clicks = ClickSet::from_clicks([Click::positive(9, 10)]).unwrap();
        let g = build_energy(&img, &q, &clicks, &EnergyParams::default()).unwrap();
        let mut count = 0;
        for r in 0..20i64 {
            for c in 0..20i64 {
                let inside = (r - 9).pow(2) + (c - 10).pow(2) <= 25;
                let i = (r * 20 + c) as usize;
                assert_eq!(g.hard()[i] == HardLabel::Object, inside);
                assert_eq!(g.background_cost()[i] == g.sentinel(), inside);
                count += inside as usize;
            }
        }
        assert_eq!(count, 81);
    }

    #[test]
    fn later_click_wins_overlap() {
        let clicks = ClickSet::from_clicks([Click::positive(5, 5), Click::negative(5, 8)]).unwrap();
        let hard = hard_labels(12, 12, &clicks, 5);
        assert_eq!(hard[5 * 12 + 6], HardLabel::Background);
        assert_eq!(hard[5 * 12 + 1], HardLabel::Object);
        let reversed = ClickSet::from_clicks([Click::negative(5, 8), Click::positive(5, 5)]).unwrap();
        assert_eq!(hard_labels(12, 12, &reversed, 5)[5 * 12 + 6], HardLabel::Object);
    }

    #[test]
    fn uniform_labeling_has_no_boundary_cost() {
        let img = Image::from_fn(5, 5, |r, c| [(r * 40) as u8, (c * 30) as u8, 7]).unwrap();
        let q = ProbabilityMap::from_vec(5, 5, (0..25).map(|i| i as f64 / 25.0).collect()).unwrap();
        let g = build_energy(&img, &q, &ClickSet::new(), &EnergyParams::default()).unwrap();
        let all = BinaryMask::filled(5, 5, true);
        assert_eq!(energy_of(&g, &all).unwrap(), g.object_cost().iter().sum::<f64>());
    }

    #[test]
    fn two_pixel_hand_enumeration() {
        let g = PixelGraph {
            height: 2,
            width: 1,
            connectivity: Connectivity::Four,
            background_cost: vec![0.9, 0.1],
            object_cost: vec![0.2, 0.7],
            hard: vec![HardLabel::Free; 2],
            edges: vec![Edge { p: 0, q: 1, weight: 0.3 }],
            sentinel: 3.2,
        };
        let e = |a: bool, b: bool| energy_of(&g, &BinaryMask::from_vec(2, 1, vec![a, b]).unwrap()).unwrap();
        assert!((e(true, false) - 0.6).abs() < 1e-12);
        assert!((e(true, true) - 0.9).abs() < 1e-12);
        assert!((e(false, false) - 1.0).abs() < 1e-12);
        assert!((e(false, true) - 1.9).abs() < 1e-12);
        let cut = min_cut(&g);
        assert_eq!(cut.labeling.as_slice(), &[true, false]);
        assert_eq!(cut.energy, e(true, false));
        assert!((cut.flow - cut.energy).abs() < 1e-12);
    }

    #[test]
    fn all_hard_object_ignores_q() {
        let img = gray(4, 4, 10);
        let q = ProbabilityMap::filled(4, 4, 1e-9).unwrap();
        let clicks = ClickSet::from_clicks([Click::positive(1, 1), Click::positive(2, 2)]).unwrap();
        let params = EnergyParams { hard_radius: 5, ..Default::default() };
        let out = refine(&img, &q, &clicks, &params).unwrap();
        assert_eq!(out.count(), 16);
    }

    #[test]
    fn confident_map_is_kept() {
        let img = Image::from_fn(16, 16, |r, c| if (4..12).contains(&r) && (4..12).contains(&c) { [200, 40, 40] } else { [30, 30, 30] }).unwrap();
        let q = ProbabilityMap::from_vec(16, 16, (0..256).map(|i| {
            let (r, c) = (i / 16, i % 16);
            if (4..12).contains(&r) && (4..12).contains(&c) { 0.99 } else { 0.01 }
        }).collect()).unwrap();
        let out = refine(&img, &q, &ClickSet::new(), &EnergyParams::default()).unwrap();
        assert_eq!(out, q.threshold());
    }

    #[test]
    fn rejects_mismatch_and_bad_params() {
        let img = gray(4, 4, 0);
        let q = ProbabilityMap::filled(4, 5, 0.5).unwrap();
        assert!(matches!(
            build_energy(&img, &q, &ClickSet::new(), &EnergyParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let q = ProbabilityMap::filled(4, 4, 0.5).unwrap();
        let bad = EnergyParams { prob_clamp: 0.5, ..Default::default() };
        assert!(build_energy(&img, &q, &ClickSet::new(), &bad).is_err());
    }

    #[test]
    fn edge_list_lists_every_term() {
        let img = gray(2, 2, 0);
        let q = ProbabilityMap::filled(2, 2, 0.25).unwrap();
        let g = build_energy(&img, &q, &ClickSet::new(), &EnergyParams::default()).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("n ")).count(), 6);
    }
}
