//! Dense data matrices and sample-covariance spectra.
//!
//! Data are stored variables-by-observations (`d x n`), so each observation
//! is a contiguous column of the underlying column-major matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SigClustError};

/// Eigenvalues below this fraction of the largest one are clamped to zero.
pub const EIG_RELATIVE_FLOOR: f64 = 1e-10;

/// A finite `d x n` matrix, `d >= 1` variables by `n >= 2` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 1 {
            return Err(SigClustError::InvalidData(
                "matrix must have at least one variable".into(),
            ));
        }
        if values.ncols() < 2 {
            return Err(SigClustError::InvalidData(format!(
                "matrix must have at least two observations, got {}",
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(SigClustError::InvalidData(format!(
                "non-finite value at variable {}, observation {}",
                row + 1,
                col + 1
            )));
        }
        Ok(DataMatrix { values })
    }

    /// Build from row vectors, one per variable.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(SigClustError::InvalidData(
                "rows have unequal lengths".into(),
            ));
        }
        Self::new(DMatrix::from_fn(d, n, |i, j| rows[i][j]))
    }

    /// Build from a slice holding the observations one after another.
    pub fn from_column_slice(d: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != d * n {
            return Err(SigClustError::InvalidData(format!(
                "expected {} values for a {d}x{n} matrix, got {}",
                d * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(d, n, data))
    }

    /// Wrap a matrix the caller already knows to be finite with `n >= 2`.
    pub(crate) fn from_trusted(values: DMatrix<f64>) -> Self {
        debug_assert!(values.ncols() >= 2 && values.nrows() >= 1);
        DataMatrix { values }
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Observation `j` as a slice of length `d`.
    pub fn observation(&self, j: usize) -> &[f64] {
        let d = self.d();
        &self.values.as_slice()[j * d..(j + 1) * d]
    }

    pub fn transpose(&self) -> Result<Self> {
        Self::new(self.values.transpose())
    }
}

/// Subtract each variable's mean across observations.
pub fn center_rows(x: &DataMatrix) -> DataMatrix {
    let mut values = x.values.clone();
    let n = x.n() as f64;
    for mut row in values.row_iter_mut() {
        let mean = row.iter().sum::<f64>() / n;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    DataMatrix { values }
}

/// Descending eigenvalues of the `1/n` sample covariance, padded with zeros to length `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub eigenvalues: Vec<f64>,
    /// `(1/n) * ||X_c||_F^2`, the trace of the sample covariance.
    pub trace: f64,
    pub d: usize,
    pub n: usize,
}

impl EigenSpectrum {
    /// Sum of the stored eigenvalues.
    pub fn eigen_sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Number of eigenvalues that are not clamped to zero.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().take_while(|&&v| v > 0.0).count()
    }

    /// The same spectrum under the `1/(n-1)` normalizer, whose trace is unbiased
    /// for the population trace.
    pub fn unbiased(&self) -> EigenSpectrum {
        let f = self.n as f64 / (self.n as f64 - 1.0);
        EigenSpectrum {
            eigenvalues: self.eigenvalues.iter().map(|v| v * f).collect(),
            trace: self.trace * f,
            d: self.d,
            n: self.n,
        }
    }
}

/// Which symmetric matrix to decompose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumPath {
    /// Gram matrix when `d > n`, covariance otherwise.
    Auto,
    /// The `n x n` matrix `(1/n) X_cᵀ X_c`.
    Gram,
    /// The `d x d` matrix `(1/n) X_c X_cᵀ`.
    Covariance,
}

pub fn sample_spectrum(x: &DataMatrix) -> EigenSpectrum {
    sample_spectrum_with(x, SpectrumPath::Auto)
}

pub fn sample_spectrum_with(x: &DataMatrix, path: SpectrumPath) -> EigenSpectrum {
    let (d, n) = (x.d(), x.n());
    let xc = center_rows(x).into_inner();
    let scale = 1.0 / n as f64;
    let use_gram = match path {
        SpectrumPath::Auto => d > n,
        SpectrumPath::Gram => true,
        SpectrumPath::Covariance => false,
    };
    let sym = if use_gram {
        xc.tr_mul(&xc) * scale
    } else {
        (&xc * xc.transpose()) * scale
    };
    let raw = symmetric_eigenvalues(sym);
    let trace = xc.iter().map(|v| v * v).sum::<f64>() * scale;
    EigenSpectrum {
        eigenvalues: clamp_and_pad(raw, d),
        trace,
        d,
        n,
    }
}

/// All eigenvalues of a symmetric matrix, unsorted.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

fn clamp_and_pad(mut raw: Vec<f64>, d: usize) -> Vec<f64> {
    raw.sort_by(|a, b| b.total_cmp(a));
    let top = raw.first().copied().unwrap_or(0.0).max(0.0);
    let floor = EIG_RELATIVE_FLOOR * top;
    for v in raw.iter_mut() {
        if *v <= floor {
            *v = 0.0;
        }
    }
    raw.resize(d, 0.0);
    raw.truncate(d);
    raw
}
