use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edt::squared_edt_mask;
use crate::raster::{BinaryMask, Image};
use crate::sampling::InstanceScene;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { size: 64, min_shapes: 1, max_shapes: 3 }
    }
}

// Nominal colour distance between a shape and the background base colour,
// and between two shapes.
const MIN_BG_CONTRAST: f64 = 90.0;
const MIN_SHAPE_CONTRAST: f64 = 60.0;
// Minimum empty gap between two shapes, in pixels.
const SHAPE_GAP: u64 = 3;
const PLACEMENT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, angle: f64 },
    Rect { cy: f64, cx: f64, hy: f64, hx: f64, angle: f64 },
    Triangle { pts: [(f64, f64); 3] },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, size: f64) -> Shape {
        let scale = size / 64.0;
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        match rng.random_range(0..3) {
            0 => {
                let (ry, rx) = (rng.random_range(8.0..16.0) * scale, rng.random_range(8.0..16.0) * scale);
                let m = ry.max(rx);
                let (cy, cx) = (rng.random_range(m..size - m), rng.random_range(m..size - m));
                Shape::Ellipse { cy, cx, ry, rx, angle }
            }
            1 => {
                let (hy, hx) = (rng.random_range(7.0..14.0) * scale, rng.random_range(7.0..14.0) * scale);
                let m = (hy * hy + hx * hx).sqrt();
                let (cy, cx) = (rng.random_range(m..size - m), rng.random_range(m..size - m));
                Shape::Rect { cy, cx, hy, hx, angle }
            }
            _ => {
                let r = rng.random_range(12.0..19.0) * scale;
                let (cy, cx) = (rng.random_range(r..size - r), rng.random_range(r..size - r));
                let mut pts = [(0.0, 0.0); 3];
                for (k, p) in pts.iter_mut().enumerate() {
                    // near-equilateral with some jitter
                    let a = angle + k as f64 * 2.0 * std::f64::consts::PI / 3.0 + rng.random_range(-0.3..0.3);
                    *p = (cy + r * a.sin(), cx + r * a.cos());
                }
                Shape::Triangle { pts }
            }
        }
    }

    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx, angle } => {
                let (dy, dx) = (y - cy, x - cx);
                let (s, c) = angle.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Rect { cy, cx, hy, hx, angle } => {
                let (dy, dx) = (y - cy, x - cx);
                let (s, c) = angle.sin_cos();
                (dx * c + dy * s).abs() <= hx && (-dx * s + dy * c).abs() <= hy
            }
            Shape::Triangle { pts } => {
                let cross = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) * (y - a.0) - (b.0 - a.0) * (x - a.1);
                let d = [cross(pts[0], pts[1]), cross(pts[1], pts[2]), cross(pts[2], pts[0])];
                d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
            }
        }
    }

    fn rasterize(&self, size: usize) -> BinaryMask {
        BinaryMask::from_fn(size, size, |r, c| self.contains(r as f64 + 0.5, c as f64 + 0.5))
    }
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn random_color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

/// Smooth value noise: a coarse grid of random offsets, bilinearly upsampled.
fn value_noise(rng: &mut ChaCha8Rng, size: usize, cells: usize, amplitude: f64) -> Vec<f64> {
    let g = cells + 1;
    let grid: Vec<f64> = (0..g * g).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    let step = (size as f64 - 1.0).max(1.0) / cells as f64;
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        let fy = r as f64 / step;
        let (y0, ty) = ((fy.floor() as usize).min(cells - 1), fy - (fy.floor()).min((cells - 1) as f64));
        for c in 0..size {
            let fx = c as f64 / step;
            let (x0, tx) = ((fx.floor() as usize).min(cells - 1), fx - (fx.floor()).min((cells - 1) as f64));
            let v00 = grid[y0 * g + x0];
            let v01 = grid[y0 * g + x0 + 1];
            let v10 = grid[(y0 + 1) * g + x0];
            let v11 = grid[(y0 + 1) * g + x0 + 1];
            let top = v00 + (v01 - v00) * tx;
            let bottom = v10 + (v11 - v10) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    out
}

pub fn synth_scene(seed: u64) -> InstanceScene {
    synth_scene_with(seed, &SynthConfig::default())
}

/// A textured background with non-overlapping filled ellipses, rectangles and
/// triangles, each in a colour well separated from the background and from
/// the other shapes. Deterministic in `seed`.
pub fn synth_scene_with(seed: u64, config: &SynthConfig) -> InstanceScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.size.max(16);
    let max_shapes = config.max_shapes.max(1);
    let want = rng.random_range(config.min_shapes.clamp(1, max_shapes)..=max_shapes);

    let base = random_color(&mut rng, 40.0, 215.0);
    let noise: Vec<Vec<f64>> = (0..3).map(|_| value_noise(&mut rng, size, 4, 22.0)).collect();

    let gap_sq = SHAPE_GAP * SHAPE_GAP;
    let mut masks: Vec<BinaryMask> = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut occupied = BinaryMask::new(size, size);
    for _ in 0..want {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let mask = Shape::random(&mut rng, size as f64).rasterize(size);
            if mask.count() < 40 {
                continue;
            }
            if !occupied.is_empty() {
                let dist = squared_edt_mask(&occupied);
                if mask.pixels().any(|p| dist[p.row * size + p.col] <= gap_sq) {
                    continue;
                }
            }
            occupied = BinaryMask::from_fn(size, size, |r, c| occupied.get(r, c) || mask.get(r, c));
            masks.push(mask);
            placed = true;
            break;
        }
        if !placed {
            break;
        }
        let color = loop {
            let c = random_color(&mut rng, 0.0, 256.0);
            if color_distance(c, base) >= MIN_BG_CONTRAST
                && colors.iter().all(|&o| color_distance(c, o) >= MIN_SHAPE_CONTRAST)
            {
                break c;
            }
        };
        colors.push(color);
    }

    let mut data = Vec::with_capacity(size * size * 3);
    for r in 0..size {
        for c in 0..size {
            let i = r * size + c;
            let owner = masks.iter().position(|m| m.get(r, c));
            for ch in 0..3 {
                let v = match owner {
                    Some(k) => colors[k][ch] + 0.35 * noise[ch][i] + rng.random_range(-6.0..6.0),
                    None => base[ch] + noise[ch][i] + rng.random_range(-6.0..6.0),
                };
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let image = Image::from_raw(size, size, data).expect("dimensions consistent");
    InstanceScene::new(image, masks).expect("shapes are disjoint and nonempty by construction")
}
