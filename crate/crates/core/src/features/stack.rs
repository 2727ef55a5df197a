use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::Real;

/// Shape of a feature stack: encoder layers, frames, feature dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackDims {
    pub layers: usize,
    pub frames: usize,
    pub features: usize,
}

impl StackDims {
    pub fn new(layers: usize, frames: usize, features: usize) -> Self {
        Self { layers, frames, features }
    }

    pub fn validate(self) -> Result<Self, FeatureError> {
        if self.layers == 0 || self.frames == 0 || self.features == 0 {
            return Err(FeatureError::InvalidDims {
                layers: self.layers,
                frames: self.frames,
                features: self.features,
            });
        }
        Ok(self)
    }

    pub fn len(self) -> usize {
        self.layers * self.frames * self.features
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Per-utterance stack of encoder layer outputs, shape `[L, T, F]`.
///
/// `valid_frames` counts the leading frames that stem from unpadded audio.
/// The stack is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack<S> {
    data: Array3<S>,
    valid_frames: usize,
}

impl<S: Real> FeatureStack<S> {
    pub fn new(data: Array3<S>, valid_frames: usize) -> Result<Self, FeatureError> {
        let (l, t, f) = data.dim();
        StackDims::new(l, t, f).validate()?;
        if valid_frames > t {
            return Err(FeatureError::InvalidValidFrames { valid: valid_frames, frames: t });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Self { data, valid_frames })
    }

    /// Builds a stack from a row-major `[L, T, F]` buffer.
    pub fn from_vec(dims: StackDims, values: Vec<S>, valid_frames: usize) -> Result<Self, FeatureError> {
        dims.validate()?;
        if values.len() != dims.len() {
            return Err(FeatureError::Truncated { expected: dims.len(), found: values.len() });
        }
        let data = Array3::from_shape_vec((dims.layers, dims.frames, dims.features), values)
            .expect("length checked");
        Self::new(data, valid_frames)
    }

    pub fn dims(&self) -> StackDims {
        let (l, t, f) = self.data.dim();
        StackDims::new(l, t, f)
    }

    pub fn layer_count(&self) -> usize {
        self.data.dim().0
    }

    pub fn frame_count(&self) -> usize {
        self.data.dim().1
    }

    pub fn feature_dim(&self) -> usize {
        self.data.dim().2
    }

    pub fn valid_frames(&self) -> usize {
        self.valid_frames
    }

    pub fn data(&self) -> &Array3<S> {
        &self.data
    }

    pub fn layer(&self, index: usize) -> ArrayView2<'_, S> {
        self.data.index_axis(ndarray::Axis(0), index)
    }

    /// Row-major view of the payload.
    pub fn as_slice(&self) -> &[S] {
        self.data.as_slice().expect("standard layout")
    }

    /// Converts to another scalar type (rounding when narrowing).
    pub fn cast<U: Real>(&self) -> FeatureStack<U> {
        FeatureStack {
            data: self.data.mapv(|v| U::of(v.to_f64_lossless())),
            valid_frames: self.valid_frames,
        }
    }

    /// Copy of layer `index` as an owned `[T, F]` matrix.
    pub fn layer_owned(&self, index: usize) -> Array2<S> {
        self.layer(index).to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims_and_nonfinite() {
        assert!(matches!(
            FeatureStack::<f32>::from_vec(StackDims::new(0, 2, 2), vec![], 0),
            Err(FeatureError::InvalidDims { .. })
        ));
        let err = FeatureStack::from_vec(StackDims::new(1, 1, 2), vec![0.0f64, f64::NAN], 1).unwrap_err();
        assert!(matches!(err, FeatureError::NonFinite(1)));
        let err = FeatureStack::from_vec(StackDims::new(1, 1, 1), vec![0.0f64], 2).unwrap_err();
        assert!(matches!(err, FeatureError::InvalidValidFrames { .. }));
    }

    #[test]
    fn shape_accessors() {
        let s = FeatureStack::from_vec(StackDims::new(3, 8, 4), vec![0.5f32; 96], 5).unwrap();
        assert_eq!(s.dims(), StackDims::new(3, 8, 4));
        assert_eq!(s.layer(2).dim(), (8, 4));
        assert_eq!(s.valid_frames(), 5);
        let d: FeatureStack<f64> = s.cast();
        assert_eq!(d.as_slice()[0], 0.5);
    }
}
