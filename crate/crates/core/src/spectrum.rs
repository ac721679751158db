//! Null-spectrum estimation.
//!
//! The background noise level comes from the median absolute deviation of all
//! `d * n` raw entries. Sample eigenvalues are then thresholded against it:
//!
//! * hard: `max(λ̃_j, σ²)`, the closed-form solution of the rank-capped
//!   likelihood problem with the rank cap set to the number of eigenvalues
//!   above the noise level;
//! * soft: `(λ̃_j - τ - σ²)₊ + σ²`, the closed-form solution of the
//!   nuclear-norm-constrained problem, with `τ ≥ 0` chosen so the estimated
//!   eigenvalues keep the sample trace.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SigClustError};
use crate::linalg::{DataMatrix, EigenSpectrum};

/// `Φ⁻¹(0.75)`, the MAD of a standard normal.
pub fn mad_std_normal() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        Normal::new(0.0, 1.0)
            .expect("standard normal parameters are valid")
            .inverse_cdf(0.75)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// Background variance `σ̂_N² = (mad_raw / Φ⁻¹(0.75))²`.
    pub sigma_n_sq: f64,
    pub mad_raw: f64,
}

impl NoiseEstimate {
    pub fn from_mad(mad_raw: f64) -> Result<Self> {
        if !(mad_raw > 0.0) || !mad_raw.is_finite() {
            return Err(SigClustError::DegenerateNoise);
        }
        let sigma = mad_raw / mad_std_normal();
        Ok(NoiseEstimate {
            sigma_n_sq: sigma * sigma,
            mad_raw,
        })
    }

    /// A noise level given directly as a variance.
    pub fn from_variance(sigma_n_sq: f64) -> Result<Self> {
        if !(sigma_n_sq > 0.0) || !sigma_n_sq.is_finite() {
            return Err(SigClustError::DegenerateNoise);
        }
        Ok(NoiseEstimate {
            sigma_n_sq,
            mad_raw: sigma_n_sq.sqrt() * mad_std_normal(),
        })
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n_sq.sqrt()
    }
}

/// Median of a slice; even lengths average the two middle values.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mid = values.len() / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if values.len() % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median absolute deviation from the median, unscaled.
pub fn mad(values: &[f64]) -> f64 {
    let mut buf = values.to_vec();
    let center = median(&mut buf);
    for (b, v) in buf.iter_mut().zip(values) {
        *b = (v - center).abs();
    }
    median(&mut buf)
}

/// MAD-based background noise over every raw entry of `x`.
pub fn estimate_noise(x: &DataMatrix) -> Result<NoiseEstimate> {
    NoiseEstimate::from_mad(mad(x.values().as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Sample,
    Hard,
    Soft,
    True,
}

/// Eigenvalues of the Gaussian null used for simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpectrum {
    pub method: SpectrumMethod,
    pub eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma_n_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    /// Rank cap `l` for which the rank-constrained solution equals the hard rule.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank_cap_l: Option<usize>,
    /// Set when the soft estimator fell back to a flat spectrum.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback: Option<String>,
}

impl NullSpectrum {
    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn sample(spec: &EigenSpectrum) -> Self {
        NullSpectrum {
            method: SpectrumMethod::Sample,
            eigenvalues: spec.eigenvalues.clone(),
            sigma_n_sq: None,
            tau: None,
            rank_cap_l: None,
            fallback: None,
        }
    }

    /// A user-supplied population spectrum.
    pub fn truth(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(SigClustError::InvalidSpectra("empty spectrum".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SigClustError::InvalidSpectra(
                "eigenvalues must be finite and non-negative".into(),
            ));
        }
        if eigenvalues.iter().all(|&v| v == 0.0) {
            return Err(SigClustError::InvalidSpectra(
                "all eigenvalues are zero".into(),
            ));
        }
        Ok(NullSpectrum {
            method: SpectrumMethod::True,
            eigenvalues,
            sigma_n_sq: None,
            tau: None,
            rank_cap_l: None,
            fallback: None,
        })
    }
}

pub fn hard_threshold(spec: &EigenSpectrum, noise: &NoiseEstimate) -> NullSpectrum {
    let floor = noise.sigma_n_sq;
    let eigenvalues = spec.eigenvalues.iter().map(|&l| l.max(floor)).collect();
    let rank_cap = spec.eigenvalues.iter().filter(|&&l| l > floor).count();
    NullSpectrum {
        method: SpectrumMethod::Hard,
        eigenvalues,
        sigma_n_sq: Some(floor),
        tau: None,
        rank_cap_l: Some(rank_cap),
        fallback: None,
    }
}

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_REL_WIDTH: f64 = 1e-14;
const TRACE_REL_TOL: f64 = 1e-10;

/// Total of the soft-thresholded eigenvalues at offset `tau`.
pub fn soft_total(eigenvalues: &[f64], sigma_sq: f64, tau: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|&l| (l - tau - sigma_sq).max(0.0) + sigma_sq)
        .sum()
}

/// Solve `soft_total(τ) = Σλ̃` for `τ ≥ 0` by bisection on `[0, λ̃₁]`.
pub fn solve_tau(eigenvalues: &[f64], sigma_sq: f64) -> Result<f64> {
    let target: f64 = eigenvalues.iter().sum();
    let d = eigenvalues.len() as f64;
    let tol = TRACE_REL_TOL * target.abs().max(f64::MIN_POSITIVE);
    if d * sigma_sq > target + tol {
        return Err(SigClustError::NoTraceSolution {
            floor_total: d * sigma_sq,
            trace: target,
        });
    }
    if soft_total(eigenvalues, sigma_sq, 0.0) - target <= tol {
        return Ok(0.0);
    }
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, top);
    let min_width = BISECTION_REL_WIDTH * top;
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= min_width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if soft_total(eigenvalues, sigma_sq, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let residual = (soft_total(eigenvalues, sigma_sq, tau) - target).abs();
    if residual > tol {
        return Err(SigClustError::NoTraceSolution {
            floor_total: d * sigma_sq,
            trace: target,
        });
    }
    Ok(tau)
}

pub fn soft_threshold(spec: &EigenSpectrum, noise: &NoiseEstimate) -> Result<NullSpectrum> {
    let floor = noise.sigma_n_sq;
    let tau = solve_tau(&spec.eigenvalues, floor)?;
    let eigenvalues = spec
        .eigenvalues
        .iter()
        .map(|&l| (l - tau - floor).max(0.0) + floor)
        .collect();
    Ok(NullSpectrum {
        method: SpectrumMethod::Soft,
        eigenvalues,
        sigma_n_sq: Some(floor),
        tau: Some(tau),
        rank_cap_l: None,
        fallback: None,
    })
}

/// Soft thresholding, falling back to a flat trace-preserving spectrum when no offset exists.
pub fn soft_threshold_or_flat(spec: &EigenSpectrum, noise: &NoiseEstimate) -> NullSpectrum {
    match soft_threshold(spec, noise) {
        Ok(s) => s,
        Err(err) => {
            let d = spec.eigenvalues.len();
            let level = spec.eigen_sum() / d as f64;
            NullSpectrum {
                method: SpectrumMethod::Soft,
                eigenvalues: vec![level; d],
                sigma_n_sq: Some(noise.sigma_n_sq),
                tau: None,
                rank_cap_l: None,
                fallback: Some(format!("{err}; using flat spectrum at trace/d = {level}")),
            }
        }
    }
}

/// Large-sample limits of the sample eigenvalues for a `w`-spike model with `d/n → ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmtPrediction {
    pub rho: f64,
    /// `v + ρv/(v-1)`, repeated for each of the `w` spikes.
    pub spikes: Vec<f64>,
    /// `(1+√ρ)²`, the limit at index `w + 1`.
    pub bulk_upper: f64,
    /// `(1-√ρ)²`, the limit at index `n`.
    pub bulk_lower: f64,
}

impl RmtPrediction {
    /// Predicted values at indices `1..=w`, `w+1` and `n`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.spikes.clone();
        out.push(self.bulk_upper);
        out.push(self.bulk_lower);
        out
    }
}

pub fn rmt_predicted_spectrum(v: f64, w: usize, n: usize, d: usize) -> Result<RmtPrediction> {
    if d <= n || w < 1 || w >= n {
        return Err(SigClustError::InvalidConfig(format!(
            "spike prediction needs d > n and 1 <= w < n (d={d}, n={n}, w={w})"
        )));
    }
    if !(v > 1.0) {
        return Err(SigClustError::InvalidConfig(format!(
            "spike height must exceed 1, got {v}"
        )));
    }
    let rho = d as f64 / n as f64;
    let root = rho.sqrt();
    let bulk_upper = (1.0 + root).powi(2);
    let bulk_lower = (1.0 - root).powi(2);
    let threshold = 1.0 + root;
    if v <= threshold {
        return Err(SigClustError::SpikeBelowBulk {
            v,
            threshold,
            upper_edge: bulk_upper,
            lower_edge: bulk_lower,
        });
    }
    let spike = v + rho * v / (v - 1.0);
    Ok(RmtPrediction {
        rho,
        spikes: vec![spike; w],
        bulk_upper,
        bulk_lower,
    })
}
