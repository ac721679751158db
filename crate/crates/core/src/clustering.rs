//! Two-means clustering and the cluster index.
//!
//! The cluster index of a two-way partition is `WSS / TSS`, with the total sum
//! of squares taken about the grand mean. Lloyd iterations run either on the
//! coordinates directly or, when `d > n`, on the `n x n` Gram matrix of the
//! centered data, which gives the same point-to-centroid distances at a cost
//! independent of `d` per iteration.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SigClustError};
use crate::linalg::{center_rows, DataMatrix};
use crate::streams;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// Total sums of squares at or below this fraction of `Σx²` count as zero.
const DEGENERATE_TSS_REL: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSplit {
    /// Cluster membership per observation, each 1 or 2.
    pub labels: Vec<u8>,
    pub wss: f64,
    pub tss: f64,
    pub ci: f64,
}

impl ClusterSplit {
    pub fn cluster_sizes(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (ones, self.labels.len() - ones)
    }
}

fn validate_labels(labels: &[u8], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(SigClustError::InvalidLabels(format!(
            "expected {n} labels, got {}",
            labels.len()
        )));
    }
    if let Some(pos) = labels.iter().position(|&l| l != 1 && l != 2) {
        return Err(SigClustError::InvalidLabels(format!(
            "label {} at position {} is not 1 or 2",
            labels[pos],
            pos + 1
        )));
    }
    for k in [1u8, 2] {
        if !labels.contains(&k) {
            return Err(SigClustError::InvalidLabels(format!(
                "cluster {k} is empty"
            )));
        }
    }
    Ok(())
}

fn total_sum_of_squares(x: &DataMatrix) -> Result<f64> {
    let xc = center_rows(x);
    let tss: f64 = xc.values().iter().map(|v| v * v).sum();
    let scale: f64 = x.values().iter().map(|v| v * v).sum();
    if tss <= DEGENERATE_TSS_REL * scale || tss == 0.0 {
        return Err(SigClustError::DegenerateData(
            "all observations are identical (total sum of squares is zero)".into(),
        ));
    }
    Ok(tss)
}

pub fn cluster_index_for_labels(x: &DataMatrix, labels: &[u8]) -> Result<ClusterSplit> {
    validate_labels(labels, x.n())?;
    let tss = total_sum_of_squares(x)?;
    let d = x.d();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (j, &l) in labels.iter().enumerate() {
        let k = usize::from(l - 1);
        counts[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(x.observation(j)) {
            *s += v;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .iter()
        .zip(counts)
        .map(|(s, c)| s.iter().map(|v| v / c as f64).collect())
        .collect();
    let mut wss = 0.0;
    for (j, &l) in labels.iter().enumerate() {
        let c = &centroids[usize::from(l - 1)];
        wss += x
            .observation(j)
            .iter()
            .zip(c)
            .map(|(v, m)| (v - m) * (v - m))
            .sum::<f64>();
    }
    Ok(ClusterSplit {
        labels: labels.to_vec(),
        wss,
        tss,
        ci: wss / tss,
    })
}

/// Squared distances from every observation to the centroid of a member set.
enum Kernel {
    Coordinates(DMatrix<f64>),
    Gram(DMatrix<f64>),
}

impl Kernel {
    fn for_data(x: &DataMatrix) -> Self {
        let xc = center_rows(x).into_inner();
        if x.d() > x.n() {
            Kernel::Gram(xc.tr_mul(&xc))
        } else {
            Kernel::Coordinates(xc)
        }
    }

    fn n(&self) -> usize {
        match self {
            Kernel::Coordinates(m) => m.ncols(),
            Kernel::Gram(g) => g.ncols(),
        }
    }

    fn distances(&self, members: &[usize], out: &mut [f64]) {
        let size = members.len() as f64;
        match self {
            Kernel::Coordinates(x) => {
                let d = x.nrows();
                let data = x.as_slice();
                let mut centroid = vec![0.0; d];
                for &m in members {
                    for (c, v) in centroid.iter_mut().zip(&data[m * d..(m + 1) * d]) {
                        *c += v;
                    }
                }
                centroid.iter_mut().for_each(|c| *c /= size);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = data[i * d..(i + 1) * d]
                        .iter()
                        .zip(&centroid)
                        .map(|(v, c)| (v - c) * (v - c))
                        .sum();
                }
            }
            Kernel::Gram(g) => {
                let n = g.ncols();
                let data = g.as_slice();
                let mut cross = vec![0.0; n];
                for &m in members {
                    for (s, v) in cross.iter_mut().zip(&data[m * n..(m + 1) * n]) {
                        *s += v;
                    }
                }
                let inner: f64 = members.iter().map(|&m| cross[m]).sum::<f64>() / (size * size);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = data[i * n + i] - 2.0 * cross[i] / size + inner;
                }
            }
        }
    }
}

struct LloydState {
    labels: Vec<u8>,
    dist: [Vec<f64>; 2],
}

impl LloydState {
    fn members(&self) -> [Vec<usize>; 2] {
        let mut m = [Vec::new(), Vec::new()];
        for (i, &l) in self.labels.iter().enumerate() {
            m[usize::from(l - 1)].push(i);
        }
        m
    }

    fn own_distance(&self, i: usize) -> f64 {
        self.dist[usize::from(self.labels[i] - 1)][i]
    }

    /// Move the point farthest from its centroid into an empty cluster.
    fn repair_empty(&mut self) {
        for k in [1u8, 2] {
            if !self.labels.contains(&k) {
                let far = (0..self.labels.len())
                    .max_by(|&a, &b| self.own_distance(a).total_cmp(&self.own_distance(b)))
                    .expect("at least two observations");
                self.labels[far] = k;
            }
        }
    }

    fn wss(&self) -> f64 {
        (0..self.labels.len()).map(|i| self.own_distance(i)).sum()
    }
}

fn lloyd(kernel: &Kernel, seeds: [usize; 2]) -> (Vec<u8>, f64) {
    let n = kernel.n();
    let mut st = LloydState {
        labels: vec![1; n],
        dist: [vec![0.0; n], vec![0.0; n]],
    };
    kernel.distances(&[seeds[0]], &mut st.dist[0]);
    kernel.distances(&[seeds[1]], &mut st.dist[1]);
    for i in 0..n {
        st.labels[i] = if st.dist[0][i] <= st.dist[1][i] { 1 } else { 2 };
    }
    st.repair_empty();

    for _ in 0..MAX_LLOYD_ITERATIONS {
        let members = st.members();
        kernel.distances(&members[0], &mut st.dist[0]);
        kernel.distances(&members[1], &mut st.dist[1]);
        let mut next = st.labels.clone();
        for (i, l) in next.iter_mut().enumerate() {
            let (a, b) = (st.dist[0][i], st.dist[1][i]);
            if a < b {
                *l = 1;
            } else if b < a {
                *l = 2;
            }
        }
        if next == st.labels {
            break;
        }
        st.labels = next;
        st.repair_empty();
    }
    // Distances in `st.dist` belong to the centroids of the final labels
    // unless the iteration cap was hit; recompute in that case.
    let members = st.members();
    kernel.distances(&members[0], &mut st.dist[0]);
    kernel.distances(&members[1], &mut st.dist[1]);
    let wss = st.wss();
    (st.labels, wss)
}

/// Restarted Lloyd two-means; returns the split with the smallest cluster index.
///
/// Each restart seeds the two centroids at two distinct observations drawn
/// uniformly from the stream keyed by `seed`.
pub fn two_means_ci(x: &DataMatrix, restarts: usize, seed: u64) -> Result<ClusterSplit> {
    if restarts == 0 {
        return Err(SigClustError::InvalidConfig(
            "restarts must be at least 1".into(),
        ));
    }
    total_sum_of_squares(x)?;
    let kernel = Kernel::for_data(x);
    let mut rng = streams::stream(seed, &[]);
    let mut best: Option<(Vec<u8>, f64)> = None;
    for _ in 0..restarts {
        let pick = index::sample(&mut rng, x.n(), 2);
        let (labels, wss) = lloyd(&kernel, [pick.index(0), pick.index(1)]);
        if best.as_ref().is_none_or(|(_, w)| wss < *w) {
            best = Some((labels, wss));
        }
    }
    let (labels, _) = best.expect("restarts >= 1");
    cluster_index_for_labels(x, &labels)
}

/// Global two-means optimum by enumerating every non-trivial bipartition.
pub fn two_means_exhaustive(x: &DataMatrix) -> Result<ClusterSplit> {
    let n = x.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(SigClustError::TooLarge {
            n,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    total_sum_of_squares(x)?;
    let xc = center_rows(x);
    let d = x.d();
    let norms: Vec<f64> = (0..n)
        .map(|j| xc.observation(j).iter().map(|v| v * v).sum())
        .collect();
    let total_norm: f64 = norms.iter().sum();
    // The last observation always sits in cluster 2, so each bipartition is
    // visited once.
    let mut best_mask = 0u32;
    let mut best_wss = f64::INFINITY;
    let mut sum1 = vec![0.0; d];
    for mask in 1u32..(1u32 << (n - 1)) {
        sum1.iter_mut().for_each(|s| *s = 0.0);
        let mut norm1 = 0.0;
        let mut n1 = 0usize;
        for (j, &norm) in norms.iter().enumerate().take(n - 1) {
            if mask & (1 << j) != 0 {
                n1 += 1;
                norm1 += norm;
                for (s, v) in sum1.iter_mut().zip(xc.observation(j)) {
                    *s += v;
                }
            }
        }
        let n2 = n - n1;
        // Cluster 2's coordinate sum is minus cluster 1's, since the data are centered.
        let sq1: f64 = sum1.iter().map(|v| v * v).sum();
        let wss = norm1 - sq1 / n1 as f64 + (total_norm - norm1) - sq1 / n2 as f64;
        if wss < best_wss {
            best_wss = wss;
            best_mask = mask;
        }
    }
    let labels: Vec<u8> = (0..n)
        .map(|j| {
            if j < n - 1 && best_mask & (1 << j) != 0 {
                1
            } else {
                2
            }
        })
        .collect();
    cluster_index_for_labels(x, &labels)
}

/// Population cluster index of the optimal split of `N(0, diag(λ))`: `1 - (2/π) λ₁ / Σλ`.
///
/// Zero entries are accepted (sample spectra carry trailing zeros) as long as
/// the total is positive.
pub fn theoretical_ci(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(SigClustError::InvalidData("empty eigenvalue vector".into()));
    }
    if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(SigClustError::InvalidData(
            "eigenvalues must be finite and non-negative".into(),
        ));
    }
    let top = eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(SigClustError::InvalidData("eigenvalues sum to zero".into()));
    }
    Ok(1.0 - (2.0 / PI) * top / total)
}

/// Relative error in `λ₁ / Σλ` when `λ₁` is overestimated by `delta1` and `Σλ` by `delta_total`.
///
/// Negative values mean the estimated null cluster index is too large, i.e.
/// the test is anti-conservative.
pub fn hard_bias_diagnostic(lambda: &[f64], delta1: f64, delta_total: f64) -> Result<f64> {
    if lambda.is_empty() {
        return Err(SigClustError::InvalidData("empty eigenvalue vector".into()));
    }
    let total: f64 = lambda.iter().sum();
    if !(total + delta_total > 0.0) || !(total > 0.0) {
        return Err(SigClustError::InvalidData(format!(
            "total {total} plus bias {delta_total} must be positive"
        )));
    }
    let top = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((total * delta1 - top * delta_total) / (total * (total + delta_total)))
}
