//! Statistical significance of clustering for high-dimension, low-sample-size data.
//!
//! A data set is called a single cluster when it is consistent with one
//! multivariate Gaussian. The test statistic is the two-means cluster index
//! (within-cluster over total sum of squares); its null distribution is
//! simulated from a diagonal Gaussian whose eigenvalues are estimated from the
//! data by one of several rules:
//!
//! * `sample`: the sample covariance eigenvalues;
//! * `hard`: sample eigenvalues floored at a MAD-based noise level;
//! * `soft`: large eigenvalues shrunk by a common offset chosen to keep the
//!   trace, then floored at the noise level;
//! * `combined`: per null replication, the smaller cluster index of the hard
//!   and soft nulls driven by the same Gaussian draw.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod engine;
pub mod error;
pub mod io;
pub mod linalg;
pub mod simharness;
pub mod spectrum;
pub mod streams;

pub use clustering::{
    cluster_index_for_labels, hard_bias_diagnostic, theoretical_ci, two_means_ci,
    two_means_exhaustive, ClusterSplit,
};
pub use engine::{
    estimation_spectrum, run_test, simulate_null_cis, simulate_null_cis_combined, Method,
    TestConfig, TestReport,
};
pub use error::{Result, SigClustError};
pub use linalg::{center_rows, sample_spectrum, DataMatrix, EigenSpectrum};
pub use spectrum::{
    estimate_noise, hard_threshold, rmt_predicted_spectrum, soft_threshold, NoiseEstimate,
    NullSpectrum, SpectrumMethod,
};
