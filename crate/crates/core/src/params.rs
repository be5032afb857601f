//! Dense parameter and gradient vectors with layer-partition metadata.
//!
//! Every reduction (norm, dot product) sums strictly left to right so the
//! same inputs always give bit-identical outputs.

use std::ops::{Deref, DerefMut, Range};

use crate::error::{Error, Result};

macro_rules! dense_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting empty or non-finite input.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if values.is_empty() {
                    return Err(Error::Empty);
                }
                ensure_finite(&values)?;
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Result<Self> {
                Self::new(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            /// Reinterprets an already validated buffer (library-internal).
            pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
                debug_assert!(!values.is_empty());
                Self(values)
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        // Slices cannot change length, so handing out `&mut [f64]` keeps
        // the fixed-length invariant.
        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(values: Vec<f64>) -> Result<Self> {
                Self::new(values)
            }
        }
    };
}

dense_vector!(
    /// Flat trainable parameter vector `w`.
    ParamVector
);

dense_vector!(
    /// Gradient of a loss with respect to a [`ParamVector`].
    GradientVector
);

impl GradientVector {
    pub fn norm(&self) -> f64 {
        sum_squares(&self.0).sqrt()
    }
}

impl ParamVector {
    pub fn norm(&self) -> f64 {
        sum_squares(&self.0).sqrt()
    }
}

/// Contiguous, disjoint, non-empty index ranges covering `[0, len)`, one per
/// layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPartition {
    ranges: Vec<Range<usize>>,
}

impl LayerPartition {
    pub fn new(ranges: Vec<Range<usize>>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidPartition("no layers".into()));
        }
        let mut expected_start = 0;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != expected_start {
                return Err(Error::InvalidPartition(format!(
                    "layer {i} starts at {} but previous layer ended at {expected_start}",
                    r.start
                )));
            }
            if r.end <= r.start {
                return Err(Error::InvalidPartition(format!("layer {i} is empty")));
            }
            expected_start = r.end;
        }
        Ok(Self { ranges })
    }

    /// Builds consecutive ranges with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect();
        Self::new(ranges)
    }

    pub fn single(len: usize) -> Result<Self> {
        Self::new(std::iter::once(0..len).collect())
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn num_layers(&self) -> usize {
        self.ranges.len()
    }

    /// Total number of covered indices.
    pub fn len(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn check_covers(&self, len: usize) -> Result<()> {
        if self.len() != len {
            return Err(Error::LengthMismatch { expected: self.len(), found: len });
        }
        Ok(())
    }
}

pub(crate) fn ensure_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub(crate) fn ensure_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

pub(crate) fn sum_squares(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x)
}

pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> Result<f64> {
    ensure_finite(v)?;
    Ok(sum_squares(v).sqrt())
}

/// One Euclidean norm per layer, in partition order.
pub fn layer_norms(v: &[f64], part: &LayerPartition) -> Result<Vec<f64>> {
    part.check_covers(v.len())?;
    ensure_finite(v)?;
    Ok(part.ranges().iter().map(|r| sum_squares(&v[r.clone()]).sqrt()).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_same_len(a, b)?;
    Ok(dot_unchecked(a, b))
}

/// Returns `y + alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    ensure_same_len(x, y)?;
    Ok(x.iter().zip(y).map(|(xi, yi)| yi + alpha * xi).collect())
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|xi| alpha * xi).collect()
}
