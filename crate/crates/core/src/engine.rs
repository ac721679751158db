//! The significance test: observed cluster index, null spectrum estimation,
//! Monte Carlo simulation of the null cluster-index distribution and p-values.
//!
//! Replication `r` draws its Gaussian matrix from streams keyed by
//! `(master_seed, r, row)` and seeds its two-means restarts from a stream keyed
//! by `(master_seed, r)`. Results are collected by replication index, so the
//! output does not depend on the number of worker threads.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::clustering::{cluster_index_for_labels, theoretical_ci, two_means_ci};
use crate::error::{Result, SigClustError};
use crate::linalg::{sample_spectrum, DataMatrix, EigenSpectrum};
use crate::spectrum::{
    estimate_noise, hard_threshold, soft_threshold_or_flat, NoiseEstimate, NullSpectrum,
};
use crate::streams::{self, domain};

pub const DEFAULT_N_SIM: usize = 1000;
pub const MIN_N_SIM: usize = 100;
pub const DEFAULT_RESTARTS_NULL: usize = 20;
/// Same as the null default: the observed index must come from the same
/// search as the simulated ones, or extra restarts bias it low and inflate
/// the rejection rate under the null.
pub const DEFAULT_RESTARTS_OBSERVED: usize = DEFAULT_RESTARTS_NULL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "eigenvalues", rename_all = "lowercase")]
pub enum Method {
    Sample,
    Hard,
    Soft,
    Combined,
    /// Simulate from a known population spectrum.
    #[serde(rename = "true")]
    TrueSpectrum(Vec<f64>),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sample => "sample",
            Method::Hard => "hard",
            Method::Soft => "soft",
            Method::Combined => "combined",
            Method::TrueSpectrum(_) => "true",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub method: Method,
    pub n_sim: usize,
    pub master_seed: u64,
    pub restarts_null: usize,
    pub restarts_observed: usize,
    /// Known cluster labels; when present the observed index uses them instead of two-means.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<Vec<u8>>,
    /// Worker threads for the replications. Results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl TestConfig {
    pub fn new(method: Method) -> Self {
        TestConfig {
            method,
            n_sim: DEFAULT_N_SIM,
            master_seed: 0,
            restarts_null: DEFAULT_RESTARTS_NULL,
            restarts_observed: DEFAULT_RESTARTS_OBSERVED,
            labels: None,
            workers: None,
        }
    }

    pub fn with_n_sim(mut self, n_sim: usize) -> Self {
        self.n_sim = n_sim;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_restarts(mut self, null: usize, observed: usize) -> Self {
        self.restarts_null = null;
        self.restarts_observed = observed;
        self
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sim < MIN_N_SIM {
            return Err(SigClustError::InvalidConfig(format!(
                "n_sim must be at least {MIN_N_SIM}, got {}",
                self.n_sim
            )));
        }
        if self.restarts_null == 0 || self.restarts_observed == 0 {
            return Err(SigClustError::InvalidConfig(
                "restarts must be at least 1".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(SigClustError::InvalidConfig(
                "workers must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservedMode {
    TwoMeans,
    KnownLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectrumUsed {
    Single {
        spectrum: NullSpectrum,
    },
    Combined {
        hard: NullSpectrum,
        soft: NullSpectrum,
    },
}

impl SpectrumUsed {
    pub fn spectra(&self) -> Vec<&NullSpectrum> {
        match self {
            SpectrumUsed::Single { spectrum } => vec![spectrum],
            SpectrumUsed::Combined { hard, soft } => vec![hard, soft],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: String,
    pub observed_mode: ObservedMode,
    pub ci_observed: f64,
    pub observed_cluster_sizes: (usize, usize),
    pub n_sim: usize,
    pub null_cis: Vec<f64>,
    pub p_empirical: f64,
    pub p_gaussian: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise: Option<NoiseEstimate>,
    pub spectrum_used: SpectrumUsed,
    /// Theoretical cluster index of each simulated spectrum, in `spectrum_used` order.
    pub theoretical_cis: Vec<f64>,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub restarts_null: usize,
    pub restarts_observed: usize,
    pub timing_seconds: f64,
}

/// `(1 + #{null <= observed}) / (n_sim + 1)`.
pub fn empirical_p_value(observed: f64, null_cis: &[f64]) -> f64 {
    let below = null_cis.iter().filter(|&&c| c <= observed).count();
    (1 + below) as f64 / (null_cis.len() + 1) as f64
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `Φ((observed - mean) / sd)`.
pub fn gaussian_p_value(observed: f64, mean: f64, sd: f64) -> f64 {
    if !(sd > 0.0) {
        return if observed < mean {
            0.0
        } else if observed > mean {
            1.0
        } else {
            0.5
        };
    }
    Normal::new(0.0, 1.0)
        .expect("standard normal parameters are valid")
        .cdf((observed - mean) / sd)
}

pub(crate) fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| SigClustError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Standard normal `d x n` matrix for replication `rep`.
fn standard_gaussian(d: usize, n: usize, seed: u64, rep: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(d, n);
    let mut row = vec![0.0; n];
    for j in 0..d {
        streams::fill_standard_normal(
            seed,
            &[domain::NULL_GAUSSIAN, rep as u64, j as u64],
            &mut row,
        );
        for (i, v) in row.iter().enumerate() {
            z[(j, i)] = *v;
        }
    }
    z
}

fn scale_rows(z: &DMatrix<f64>, eigenvalues: &[f64]) -> DataMatrix {
    let roots: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
    let mut x = z.clone();
    for mut col in x.column_iter_mut() {
        for (v, r) in col.iter_mut().zip(&roots) {
            *v *= r;
        }
    }
    DataMatrix::from_trusted(x)
}

fn null_kmeans_seed(seed: u64, rep: usize) -> u64 {
    streams::derive_seed(seed, &[domain::NULL_KMEANS, rep as u64])
}

fn check_null_inputs(spectrum: &NullSpectrum, n: usize) -> Result<()> {
    if spectrum.eigenvalues.is_empty() {
        return Err(SigClustError::InvalidSpectra("empty null spectrum".into()));
    }
    if spectrum
        .eigenvalues
        .iter()
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(SigClustError::InvalidSpectra(
            "null eigenvalues must be finite and non-negative".into(),
        ));
    }
    if n < 2 {
        return Err(SigClustError::InvalidConfig(format!(
            "null samples need at least two observations, got {n}"
        )));
    }
    Ok(())
}

/// Cluster indices of `config.n_sim` Gaussian samples of size `n` from `N(0, diag(spectrum))`.
pub fn simulate_null_cis(
    spectrum: &NullSpectrum,
    n: usize,
    config: &TestConfig,
) -> Result<Vec<f64>> {
    check_null_inputs(spectrum, n)?;
    let d = spectrum.d();
    let seed = config.master_seed;
    let restarts = config.restarts_null;
    with_workers(config.workers, || {
        (0..config.n_sim)
            .into_par_iter()
            .map(|r| {
                let z = standard_gaussian(d, n, seed, r);
                let x = scale_rows(&z, &spectrum.eigenvalues);
                two_means_ci(&x, restarts, null_kmeans_seed(seed, r)).map(|s| s.ci)
            })
            .collect::<Result<Vec<f64>>>()
    })?
}

/// Per replication, the smaller of the hard- and soft-spectrum cluster indices
/// computed from one shared Gaussian draw and shared two-means seeding.
pub fn simulate_null_cis_combined(
    hard: &NullSpectrum,
    soft: &NullSpectrum,
    n: usize,
    config: &TestConfig,
) -> Result<Vec<f64>> {
    if hard.d() != soft.d() {
        return Err(SigClustError::InvalidSpectra(format!(
            "hard spectrum has {} eigenvalues, soft has {}",
            hard.d(),
            soft.d()
        )));
    }
    check_null_inputs(hard, n)?;
    check_null_inputs(soft, n)?;
    let d = hard.d();
    let seed = config.master_seed;
    let restarts = config.restarts_null;
    with_workers(config.workers, || {
        (0..config.n_sim)
            .into_par_iter()
            .map(|r| {
                let z = standard_gaussian(d, n, seed, r);
                let kseed = null_kmeans_seed(seed, r);
                let ci_hard = two_means_ci(&scale_rows(&z, &hard.eigenvalues), restarts, kseed)?.ci;
                let ci_soft = two_means_ci(&scale_rows(&z, &soft.eigenvalues), restarts, kseed)?.ci;
                Ok(ci_hard.min(ci_soft))
            })
            .collect::<Result<Vec<f64>>>()
    })?
}

/// Spectrum from which the estimated nulls are built.
///
/// This is the sample spectrum rescaled to the `1/(n-1)` covariance. Soft
/// thresholding matches the estimate's trace to this spectrum's trace and
/// hands any shortfall to the leading eigenvalues, so the `1/n` trace, biased
/// low by a factor `(n-1)/n`, would shrink a strong spike noticeably.
pub fn estimation_spectrum(x: &DataMatrix) -> EigenSpectrum {
    sample_spectrum(x).unbiased()
}

/// Run the full test on `x` (variables in rows).
pub fn run_test(x: &DataMatrix, config: &TestConfig) -> Result<TestReport> {
    config.validate()?;
    let start = Instant::now();
    let mut warnings = Vec::new();

    let (observed, observed_mode) = match &config.labels {
        Some(labels) => (
            cluster_index_for_labels(x, labels)?,
            ObservedMode::KnownLabels,
        ),
        None => {
            let seed = streams::derive_seed(config.master_seed, &[domain::OBSERVED_KMEANS]);
            (
                two_means_ci(x, config.restarts_observed, seed)?,
                ObservedMode::TwoMeans,
            )
        }
    };

    let needs_noise = matches!(
        config.method,
        Method::Hard | Method::Soft | Method::Combined
    );
    let noise = if needs_noise {
        Some(estimate_noise(x)?)
    } else {
        None
    };

    let spectrum_used = match &config.method {
        Method::TrueSpectrum(eigs) => {
            if eigs.len() != x.d() {
                return Err(SigClustError::InvalidSpectra(format!(
                    "true spectrum has {} eigenvalues but the data have {} variables",
                    eigs.len(),
                    x.d()
                )));
            }
            SpectrumUsed::Single {
                spectrum: NullSpectrum::truth(eigs.clone())?,
            }
        }
        Method::Sample => SpectrumUsed::Single {
            spectrum: NullSpectrum::sample(&estimation_spectrum(x)),
        },
        Method::Hard => {
            let noise = noise.as_ref().expect("noise estimated for hard");
            SpectrumUsed::Single {
                spectrum: hard_threshold(&estimation_spectrum(x), noise),
            }
        }
        Method::Soft => {
            let noise = noise.as_ref().expect("noise estimated for soft");
            SpectrumUsed::Single {
                spectrum: soft_threshold_or_flat(&estimation_spectrum(x), noise),
            }
        }
        Method::Combined => {
            let noise = noise.as_ref().expect("noise estimated for combined");
            let spec = estimation_spectrum(x);
            SpectrumUsed::Combined {
                hard: hard_threshold(&spec, noise),
                soft: soft_threshold_or_flat(&spec, noise),
            }
        }
    };
    for s in spectrum_used.spectra() {
        if let Some(msg) = &s.fallback {
            warnings.push(format!("soft threshold fallback: {msg}"));
        }
    }

    let null_cis = match &spectrum_used {
        SpectrumUsed::Single { spectrum } => simulate_null_cis(spectrum, x.n(), config)?,
        SpectrumUsed::Combined { hard, soft } => {
            simulate_null_cis_combined(hard, soft, x.n(), config)?
        }
    };

    let theoretical_cis = spectrum_used
        .spectra()
        .iter()
        .map(|s| theoretical_ci(&s.eigenvalues))
        .collect::<Result<Vec<f64>>>()?;

    let ci_observed = observed.ci;
    let p_empirical = empirical_p_value(ci_observed, &null_cis);
    let (null_mean, null_sd) = mean_sd(&null_cis);
    if !(null_sd > 0.0) {
        warnings
            .push("null cluster indices have zero spread; Gaussian p-value is degenerate".into());
    }
    let p_gaussian = gaussian_p_value(ci_observed, null_mean, null_sd);

    Ok(TestReport {
        method: config.method.name().to_string(),
        observed_mode,
        ci_observed,
        observed_cluster_sizes: observed.cluster_sizes(),
        n_sim: config.n_sim,
        null_cis,
        p_empirical,
        p_gaussian,
        null_mean,
        null_sd,
        noise,
        spectrum_used,
        theoretical_cis,
        warnings,
        seed: config.master_seed,
        restarts_null: config.restarts_null,
        restarts_observed: config.restarts_observed,
        timing_seconds: start.elapsed().as_secs_f64(),
    })
}
