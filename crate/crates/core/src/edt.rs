//! Exact Euclidean distance transform.
//!
//! Two separable passes: a per-row scan for the nearest source column, then a
//! per-column lower envelope of parabolas. Squared distances stay integral the
//! whole way, so `sqrt` is applied once and the result is bit-identical to a
//! brute-force minimum over sources.

use crate::raster::BinaryMask;

/// Squared distance reported for pixels when no source exists.
pub const UNREACHABLE: u64 = u64::MAX;

/// Squared distance from every pixel to the nearest `true` entry of `sources`
/// (row-major, `height * width`). Returns [`UNREACHABLE`] everywhere if there
/// are no sources.
pub fn squared_edt(sources: &[bool], height: usize, width: usize) -> Vec<u64> {
    assert_eq!(sources.len(), height * width, "source buffer does not match grid");
    let mut rows = vec![UNREACHABLE; height * width];
    for r in 0..height {
        let line = &sources[r * width..(r + 1) * width];
        let out = &mut rows[r * width..(r + 1) * width];
        let mut last: Option<usize> = None;
        for c in 0..width {
            if line[c] {
                last = Some(c);
            }
            if let Some(s) = last {
                let d = (c - s) as u64;
                out[c] = d * d;
            }
        }
        last = None;
        for c in (0..width).rev() {
            if line[c] {
                last = Some(c);
            }
            if let Some(s) = last {
                let d = (s - c) as u64;
                out[c] = out[c].min(d * d);
            }
        }
    }

    let mut column = vec![0u64; height];
    let mut result = vec![UNREACHABLE; height * width];
    let mut envelope = LowerEnvelope::with_capacity(height);
    for c in 0..width {
        for r in 0..height {
            column[r] = rows[r * width + c];
        }
        envelope.transform(&column);
        for r in 0..height {
            result[r * width + c] = envelope.out[r];
        }
    }
    result
}

/// Squared distance from every pixel to the nearest object pixel of `mask`.
pub fn squared_edt_mask(mask: &BinaryMask) -> Vec<u64> {
    squared_edt(mask.as_slice(), mask.height(), mask.width())
}

/// Left boundary of an envelope segment as the exact fraction `num / den`, `den > 0`.
#[derive(Clone, Copy)]
struct Boundary {
    num: i128,
    den: i128,
}

impl Boundary {
    fn le(self, other: Boundary) -> bool {
        self.num * other.den <= other.num * self.den
    }

    fn lt_int(self, x: i128) -> bool {
        self.num < x * self.den
    }
}

struct LowerEnvelope {
    verts: Vec<usize>,
    // bounds[i] is the left edge of verts[i]'s segment; None is -infinity.
    bounds: Vec<Option<Boundary>>,
    out: Vec<u64>,
}

impl LowerEnvelope {
    fn with_capacity(n: usize) -> Self {
        Self { verts: Vec::with_capacity(n), bounds: Vec::with_capacity(n), out: vec![0; n] }
    }

    fn intersect(f: &[u64], q: usize, v: usize) -> Boundary {
        let (qi, vi) = (q as i128, v as i128);
        Boundary {
            num: (f[q] as i128 + qi * qi) - (f[v] as i128 + vi * vi),
            den: 2 * (qi - vi),
        }
    }

    fn transform(&mut self, f: &[u64]) {
        let n = f.len();
        self.out.resize(n, 0);
        self.verts.clear();
        self.bounds.clear();
        for q in 0..n {
            if f[q] == UNREACHABLE {
                continue;
            }
            loop {
                let Some(&top) = self.verts.last() else {
                    self.verts.push(q);
                    self.bounds.push(None);
                    break;
                };
                let s = Self::intersect(f, q, top);
                match self.bounds.last().copied().flatten() {
                    Some(b) if s.le(b) => {
                        self.verts.pop();
                        self.bounds.pop();
                    }
                    _ => {
                        self.verts.push(q);
                        self.bounds.push(Some(s));
                        break;
                    }
                }
            }
        }
        if self.verts.is_empty() {
            self.out.iter_mut().for_each(|v| *v = UNREACHABLE);
            return;
        }
        let mut k = 0;
        for x in 0..n {
            while k + 1 < self.verts.len() && self.bounds[k + 1].is_some_and(|b| b.lt_int(x as i128)) {
                k += 1;
            }
            let v = self.verts[k];
            let d = x.abs_diff(v) as u64;
            self.out[x] = d * d + f[v];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(sources: &[bool], h: usize, w: usize) -> Vec<u64> {
        let pts: Vec<(usize, usize)> =
            (0..h * w).filter(|&i| sources[i]).map(|i| (i / w, i % w)).collect();
        (0..h * w)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                pts.iter()
                    .map(|&(pr, pc)| {
                        let dr = r.abs_diff(pr) as u64;
                        let dc = c.abs_diff(pc) as u64;
                        dr * dr + dc * dc
                    })
                    .min()
                    .unwrap_or(UNREACHABLE)
            })
            .collect()
    }

    #[test]
    fn empty_source_set_is_unreachable() {
        assert!(squared_edt(&[false; 12], 3, 4).iter().all(|&d| d == UNREACHABLE));
    }

    #[test]
    fn single_source_three_four_five() {
        let mut s = vec![false; 100];
        s[3 * 10 + 4] = true;
        let d = squared_edt(&s, 10, 10);
        assert_eq!(d[0], 25);
        assert_eq!(d[34], 0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(h in 1usize..24, w in 1usize..24,
                               bits in proptest::collection::vec(0u8..20, 24 * 24)) {
            // roughly 5% density, with occasional empty rows/columns
            let sources: Vec<bool> = bits[..h * w].iter().map(|&b| b == 0).collect();
            prop_assert_eq!(squared_edt(&sources, h, w), brute(&sources, h, w));
        }
    }
}
