//! Input point sets and the Euclidean distance kernel.

use std::fmt;

use crate::error::{Error, Result};

/// Index of a point within a [`DataMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PointId(pub u32);

impl PointId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for PointId {
    #[inline]
    fn from(i: usize) -> Self {
        debug_assert!(i <= u32::MAX as usize);
        PointId(i as u32)
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `n_points` dense rows of length `dim`, stored row-major as `f32`.
///
/// Immutable after construction; every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_points: usize,
    dim: usize,
    values: Vec<f32>,
}

impl DataMatrix {
    pub fn new(n_points: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if n_points == 0 || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be non-empty, got {n_points}x{dim}"
            )));
        }
        if n_points > u32::MAX as usize {
            return Err(Error::InvalidInput(format!(
                "{n_points} points exceeds the supported maximum"
            )));
        }
        if values.len() != n_points * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {n_points}x{dim} matrix, got {}",
                n_points * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            n_points,
            dim,
            values,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, values)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn point(&self, p: PointId) -> &[f32] {
        self.row(p.index())
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    /// Squared distance between two rows of this matrix.
    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        squared_distance_unchecked(self.row(i), self.row(j))
    }
}

/// Squared Euclidean distance `Σ (a_k − b_k)²`, accumulated in `f64`.
pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(squared_distance_unchecked(a, b))
}

/// [`squared_distance`] without the length check, for hot loops.
#[inline]
pub fn squared_distance_unchecked(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { sq_dist_avx2(a, b) };
        }
    }
    sq_dist_lanes(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn sq_dist_avx2(a: &[f32], b: &[f32]) -> f64 {
    sq_dist_lanes(a, b)
}

/// Eight independent accumulators so the loop vectorizes without
/// reassociating; the summation order is the same on every target.
#[inline(always)]
fn sq_dist_lanes(a: &[f32], b: &[f32]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [0.0f64; LANES];
    let chunks_a = a.chunks_exact(LANES);
    let chunks_b = b.chunks_exact(LANES);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for lane in 0..LANES {
            let d = f64::from(ca[lane]) - f64::from(cb[lane]);
            acc[lane] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in tail_a.iter().zip(tail_b) {
        let d = f64::from(*x) - f64::from(*y);
        tail += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}
