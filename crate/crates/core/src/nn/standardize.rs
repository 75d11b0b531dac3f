use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::NnError;

/// Standard deviations below this are replaced by 1 so constant columns map to 0.
pub const STD_CLAMP: f64 = 1e-12;

/// Per-column affine scaling `(x − μ) / σ` with population statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &DenseMatrix) -> Result<Self, NnError> {
        if data.rows() < 2 {
            return Err(NnError::EmptyData(format!(
                "standardizer needs at least 2 rows, got {}",
                data.rows()
            )));
        }
        let n = data.rows() as f64;
        let mut mean = data.column_sums().into_vec();
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; data.cols()];
        for r in 0..data.rows() {
            for ((v, x), m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < STD_CLAMP {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn check(&self, data: &DenseMatrix) -> Result<(), NnError> {
        if data.cols() != self.dims() {
            return Err(NnError::DimensionMismatch(format!(
                "standardizer has {} columns, data has {}",
                self.dims(),
                data.cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, data: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        self.check(data)?;
        let mut out = data.clone();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    pub fn apply_in_place(&self, data: &mut DenseMatrix) {
        let cols = self.dims();
        for row in data.as_mut_slice().chunks_exact_mut(cols) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
    }

    pub fn invert(&self, data: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        self.check(data)?;
        let mut out = data.clone();
        self.invert_in_place(&mut out);
        Ok(out)
    }

    pub fn invert_in_place(&self, data: &mut DenseMatrix) {
        let cols = self.dims();
        for row in data.as_mut_slice().chunks_exact_mut(cols) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * s + m;
            }
        }
    }
}
