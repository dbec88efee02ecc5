//! Axis-aligned boxes used for initial-condition sets, invariant sets and
//! internal-model supports.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed box `[lo_1, hi_1] × … × [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::InvalidArgument(format!(
                    "axis {i}: invalid interval [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_intervals(axes: &[[f64; 2]]) -> Result<Self> {
        Self::new(axes.iter().map(|a| a[0]).collect(), axes.iter().map(|a| a[1]).collect())
    }

    /// Degenerate box containing one point.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    /// Smallest box containing every point yielded.
    pub fn bounding<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = points.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::InvalidArgument("no points to bound".into()))?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in it {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn intervals(&self) -> Vec<[f64; 2]> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| [l, h]).collect()
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Grows every axis by `margin` on both sides.
    pub fn inflate(&self, margin: f64) -> Self {
        Self {
            lo: self.lo.iter().map(|l| l - margin).collect(),
            hi: self.hi.iter().map(|h| h + margin).collect(),
        }
    }

    /// Grows every axis by `fraction` of its half-width on both sides.
    pub fn scale_about_center(&self, fraction: f64) -> Self {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for i in 0..lo.len() {
            let grow = 0.5 * (hi[i] - lo[i]) * fraction;
            lo[i] -= grow;
            hi[i] += grow;
        }
        Self { lo, hi }
    }

    /// Nearest point of the box.
    pub fn clip(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// All 2ⁿ vertices, axis 0 varying fastest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if h > l { rng.gen_range(l..=h) } else { l })
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for BoxRegion {
    type Error = Error;

    fn try_from(axes: Vec<[f64; 2]>) -> Result<Self> {
        Self::from_intervals(&axes)
    }
}

impl From<BoxRegion> for Vec<[f64; 2]> {
    fn from(b: BoxRegion) -> Self {
        b.intervals()
    }
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
