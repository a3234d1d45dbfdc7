//! Click sets and their encoding as truncated distance channels.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::edt::{squared_edt, UNREACHABLE};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image, Pixel};

/// Distances are clipped to this value; it is also the value of a channel
/// whose source set is empty.
pub const DISTANCE_CAP: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn is_positive(self) -> bool {
        self == Polarity::Positive
    }

    pub fn from_label(object: bool) -> Self {
        if object {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Click {
    pub row: usize,
    pub col: usize,
    pub polarity: Polarity,
}

impl Click {
    pub fn positive(row: usize, col: usize) -> Self {
        Self { row, col, polarity: Polarity::Positive }
    }

    pub fn negative(row: usize, col: usize) -> Self {
        Self { row, col, polarity: Polarity::Negative }
    }

    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.row, self.col)
    }
}

/// Clicks in the order they were placed. Positive and negative clicks share
/// one sequence so that recency between polarities is preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ClickSet {
    clicks: Vec<Click>,
}

impl ClickSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_clicks(clicks: impl IntoIterator<Item = Click>) -> Result<Self> {
        let mut set = Self::new();
        for c in clicks {
            set.push(c)?;
        }
        Ok(set)
    }

    /// Appends a click; an identical `(row, col, polarity)` is rejected.
    pub fn push(&mut self, click: Click) -> Result<()> {
        if self.contains(&click) {
            return Err(Error::DuplicateClick { row: click.row, col: click.col });
        }
        self.clicks.push(click);
        Ok(())
    }

    pub fn contains(&self, click: &Click) -> bool {
        self.clicks.contains(click)
    }

    pub fn pop(&mut self) -> Option<Click> {
        self.clicks.pop()
    }

    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Click> + '_ {
        self.clicks.iter()
    }

    pub fn as_slice(&self) -> &[Click] {
        &self.clicks
    }

    pub fn positives(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.clicks.iter().filter(|c| c.polarity.is_positive()).map(Click::pixel)
    }

    pub fn negatives(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.clicks.iter().filter(|c| !c.polarity.is_positive()).map(Click::pixel)
    }

    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        for c in &self.clicks {
            if c.row >= height || c.col >= width {
                return Err(Error::OutOfBounds { row: c.row, col: c.col, height, width });
            }
        }
        Ok(())
    }

    /// The stored-pair form: `{"positives": [{"row", "col"}...], "negatives": [...]}`.
    pub fn to_polarity_json(&self) -> Value {
        let list = |pts: Vec<Pixel>| -> Vec<Value> {
            pts.into_iter().map(|p| json!({"row": p.row, "col": p.col})).collect()
        };
        json!({
            "positives": list(self.positives().collect()),
            "negatives": list(self.negatives().collect()),
        })
    }

    /// The ordered form: `[{"row", "col", "polarity"}...]`.
    pub fn to_sequence_json(&self) -> Value {
        serde_json::to_value(&self.clicks).expect("clicks serialize")
    }

    /// Accepts either the ordered form or the per-polarity form, whose entries
    /// may be `[row, col]` pairs or `{"row", "col"}` objects. The per-polarity
    /// form orders all positives before all negatives.
    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("click JSON: {msg}"));
        match value {
            Value::Array(_) => {
                let clicks: Vec<Click> =
                    serde_json::from_value(value.clone()).map_err(|e| bad(&e.to_string()))?;
                Self::from_clicks(clicks)
            }
            Value::Object(map) => {
                let mut set = Self::new();
                for (key, polarity) in [("positives", Polarity::Positive), ("negatives", Polarity::Negative)] {
                    let Some(list) = map.get(key) else { continue };
                    let list = list.as_array().ok_or_else(|| bad(&format!("`{key}` must be an array")))?;
                    for entry in list {
                        let (row, col) = parse_point(entry).ok_or_else(|| bad("malformed point"))?;
                        set.push(Click { row, col, polarity })?;
                    }
                }
                if let Some(k) = map.keys().find(|k| *k != "positives" && *k != "negatives") {
                    return Err(bad(&format!("unknown key `{k}`")));
                }
                Ok(set)
            }
            _ => Err(bad("expected an object or an array")),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("click JSON: {e}")))?;
        Self::from_json(&value)
    }
}

fn parse_point(v: &Value) -> Option<(usize, usize)> {
    match v {
        Value::Array(a) if a.len() == 2 => Some((a[0].as_u64()? as usize, a[1].as_u64()? as usize)),
        Value::Object(o) if o.len() == 2 => {
            Some((o.get("row")?.as_u64()? as usize, o.get("col")?.as_u64()? as usize))
        }
        _ => None,
    }
}

/// Truncated Euclidean distance to a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceChannel {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DistanceChannel {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn at(&self, p: Pixel) -> f64 {
        self.get(p.row, p.col)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    fn from_squared(height: usize, width: usize, squared: &[u64]) -> Self {
        let values = squared
            .iter()
            .map(|&d| if d == UNREACHABLE { DISTANCE_CAP } else { (d as f64).sqrt().min(DISTANCE_CAP) })
            .collect();
        Self { height, width, values }
    }

    /// Truncated distance to the object pixels of `mask`.
    pub fn to_mask(mask: &BinaryMask) -> Self {
        let sq = squared_edt(mask.as_slice(), mask.height(), mask.width());
        Self::from_squared(mask.height(), mask.width(), &sq)
    }
}

/// Exact distance from every pixel to the nearest point, capped at 255.
pub fn distance_map(points: &[Pixel], height: usize, width: usize) -> Result<DistanceChannel> {
    let mut sources = vec![false; height * width];
    for p in points {
        if p.row >= height || p.col >= width {
            return Err(Error::OutOfBounds { row: p.row, col: p.col, height, width });
        }
        sources[p.row * width + p.col] = true;
    }
    Ok(DistanceChannel::from_squared(height, width, &squared_edt(&sources, height, width)))
}

/// Network input: `R, G, B, U1, U0`, each plane scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTensor {
    planes: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl InteractionTensor {
    pub const PLANES: usize = 5;

    /// Arbitrary plane-major data; used for model inputs that do not come from [`encode`].
    pub fn from_planes(planes: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != planes * height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {planes}x{height}x{width}, got {}",
                planes * height * width,
                data.len()
            )));
        }
        Ok(Self { planes, height, width, data })
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane(&self, k: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// The `height x width` window with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || row + height > self.height || col + width > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop {height}x{width} at ({row}, {col}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(self.planes * height * width);
        for k in 0..self.planes {
            let plane = self.plane(k);
            for r in row..row + height {
                data.extend_from_slice(&plane[r * self.width + col..r * self.width + col + width]);
            }
        }
        Ok(Self { planes: self.planes, height, width, data })
    }
}

pub fn encode(image: &Image, clicks: &ClickSet) -> Result<InteractionTensor> {
    let (h, w) = image.dims();
    let pos: Vec<Pixel> = clicks.positives().collect();
    let neg: Vec<Pixel> = clicks.negatives().collect();
    let u1 = distance_map(&pos, h, w)?;
    let u0 = distance_map(&neg, h, w)?;
    let n = h * w;
    let mut data = vec![0f32; 5 * n];
    for (i, px) in image.as_raw().chunks_exact(3).enumerate() {
        for ch in 0..3 {
            data[ch * n + i] = px[ch] as f32 / 255.0;
        }
        data[3 * n + i] = (u1.values[i] / DISTANCE_CAP) as f32;
        data[4 * n + i] = (u0.values[i] / DISTANCE_CAP) as f32;
    }
    Ok(InteractionTensor { planes: 5, height: h, width: w, data })
}
