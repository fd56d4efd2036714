//! Per-frame transforms shared by every expert that reads the same features.

use num_complex::Complex64;

use crate::dcf::{fft2, ifft2_real, FeatureStack, FilterModel, ResponseMap};
use crate::error::{invalid, Error, Result};

/// Forward transforms of every channel of a candidate stack.
#[derive(Debug, Clone)]
pub struct FeatureSpectra {
    rows: usize,
    cols: usize,
    channels: Vec<Vec<Complex64>>,
}

impl FeatureSpectra {
    pub fn of(stack: &FeatureStack) -> Self {
        FeatureSpectra {
            rows: stack.rows(),
            cols: stack.cols(),
            channels: (0..stack.channel_count())
                .map(|d| fft2(stack.channel(d), stack.rows(), stack.cols()))
                .collect(),
        }
    }

    /// Same result as [`FilterModel::respond`] on the original stack.
    pub fn respond(&self, model: &FilterModel) -> Result<ResponseMap> {
        if model.rows() != self.rows
            || model.cols() != self.cols
            || model.channel_count() != self.channels.len()
        {
            return invalid("candidate spectra do not match the model dimensions");
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.rows * self.cols];
        for (w, z) in model.filter_spectra().iter().zip(&self.channels) {
            for ((s, w), z) in acc.iter_mut().zip(w).zip(z) {
                *s += w * z;
            }
        }
        let grid = ifft2_real(&acc, self.rows, self.cols);
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite correlation response".into()));
        }
        ResponseMap::from_grid(self.rows, self.cols, grid)
    }
}
