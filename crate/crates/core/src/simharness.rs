//! Simulation studies: type-I error under spiked single-Gaussian nulls and
//! power under two-component mean mixtures.
//!
//! A scenario draws `reps` data sets of `n` observations from
//! `N(0, Λ)` with `Λ = diag(v × w, 1 × (d - w))`, optionally mixed 50/50 with a
//! shifted copy `N(μ, Λ)`, and runs the test on each with every requested
//! method. Summaries follow the one-cluster table layout: mean p-value and the
//! counts of p-values below 0.05 and 0.10.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{hard_bias_diagnostic, theoretical_ci};
use crate::engine::{
    run_test, with_workers, Method, SpectrumUsed, TestConfig, DEFAULT_RESTARTS_NULL,
    DEFAULT_RESTARTS_OBSERVED,
};
use crate::error::{Result, SigClustError};
use crate::linalg::DataMatrix;
use crate::spectrum::{rmt_predicted_spectrum, RmtPrediction};
use crate::streams::{self, domain};

/// Scenario table shipped with the crate: the 31 `(v, w)` one-cluster settings at desk scale.
pub const ONE_CLUSTER_SCENARIOS: &str = include_str!("../scenarios/one_cluster.tsv");

pub const FULL_SCALE_REPS: usize = 100;
pub const FULL_SCALE_N_SIM: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    None,
    FirstCoordinate,
    AllCoordinates,
}

impl FromStr for SignalMode {
    type Err = SigClustError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "null" => Ok(SignalMode::None),
            "first" | "first-coordinate" | "firstcoordinate" => Ok(SignalMode::FirstCoordinate),
            "all" | "all-coordinates" | "allcoordinates" => Ok(SignalMode::AllCoordinates),
            other => Err(SigClustError::InvalidConfig(format!(
                "unknown signal mode '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SignalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalMode::None => "none",
            SignalMode::FirstCoordinate => "first",
            SignalMode::AllCoordinates => "all",
        })
    }
}

/// Null-spectrum rule used for a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    True,
    Sample,
    Hard,
    Soft,
    Combined,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::True,
        MethodKind::Sample,
        MethodKind::Hard,
        MethodKind::Soft,
        MethodKind::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::True => "true",
            MethodKind::Sample => "sample",
            MethodKind::Hard => "hard",
            MethodKind::Soft => "soft",
            MethodKind::Combined => "combined",
        }
    }
}

impl FromStr for MethodKind {
    type Err = SigClustError;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SigClustError::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub d: usize,
    pub n: usize,
    /// Spike height.
    pub v: f64,
    /// Number of spikes.
    pub w: usize,
    /// Mean shift of the second mixture component.
    pub signal_a: f64,
    pub signal_mode: SignalMode,
    pub reps: usize,
    pub n_sim: usize,
    pub methods: Vec<MethodKind>,
    pub master_seed: u64,
    pub restarts_null: usize,
    pub restarts_observed: usize,
}

impl ScenarioSpec {
    /// A single-Gaussian scenario with default restarts and every method.
    pub fn null(d: usize, n: usize, v: f64, w: usize) -> Self {
        ScenarioSpec {
            d,
            n,
            v,
            w,
            signal_a: 0.0,
            signal_mode: SignalMode::None,
            reps: 20,
            n_sim: 200,
            methods: MethodKind::ALL.to_vec(),
            master_seed: 0,
            restarts_null: DEFAULT_RESTARTS_NULL,
            restarts_observed: DEFAULT_RESTARTS_OBSERVED,
        }
    }

    pub fn with_signal(mut self, mode: SignalMode, a: f64) -> Self {
        self.signal_mode = mode;
        self.signal_a = a;
        self
    }

    pub fn with_reps(mut self, reps: usize, n_sim: usize) -> Self {
        self.reps = reps;
        self.n_sim = n_sim;
        self
    }

    pub fn with_methods(mut self, methods: &[MethodKind]) -> Self {
        self.methods = methods.to_vec();
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

    pub fn full_scale(mut self) -> Self {
        self.reps = FULL_SCALE_REPS;
        self.n_sim = FULL_SCALE_N_SIM;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SigClustError::InvalidConfig(msg));
        if self.d < 1 || self.n < 2 {
            return bad(format!(
                "need d >= 1 and n >= 2, got d={} n={}",
                self.d, self.n
            ));
        }
        if self.w > self.d {
            return bad(format!("spike count w={} exceeds d={}", self.w, self.d));
        }
        if !(self.v >= 1.0) || !self.v.is_finite() {
            return bad(format!("spike height v must be >= 1, got {}", self.v));
        }
        if !(self.signal_a >= 0.0) || !self.signal_a.is_finite() {
            return bad(format!("signal a must be >= 0, got {}", self.signal_a));
        }
        if self.signal_mode == SignalMode::None && self.signal_a != 0.0 {
            return bad("signal mode 'none' requires a = 0".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        Ok(())
    }

    /// Diagonal of `Λ`.
    pub fn population_eigenvalues(&self) -> Vec<f64> {
        let mut l = vec![1.0; self.d];
        l[..self.w].iter_mut().for_each(|x| *x = self.v);
        l
    }

    /// Mean of the second mixture component.
    pub fn shift(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.d];
        match self.signal_mode {
            SignalMode::None => {}
            SignalMode::FirstCoordinate => mu[0] = self.signal_a,
            SignalMode::AllCoordinates => mu.iter_mut().for_each(|m| *m = self.signal_a),
        }
        mu
    }

    /// Descending eigenvalues of the covariance of the generating distribution,
    /// `Λ + ¼ μ μᵀ` for the 50/50 mixture.
    pub fn null_truth_spectrum(&self) -> Vec<f64> {
        let rho = 0.25 * self.signal_a * self.signal_a;
        let mut eig = self.population_eigenvalues();
        if rho == 0.0 {
            return eig;
        }
        match self.signal_mode {
            SignalMode::None => {}
            SignalMode::FirstCoordinate => eig[0] += rho,
            SignalMode::AllCoordinates => {
                eig = rank_one_block_update(self.v, self.w, self.d, rho);
            }
        }
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }
}

/// Eigenvalues of `diag(v × w, 1 × (d - w)) + rho · 11ᵀ`.
///
/// Vectors summing to zero within one block keep that block's value; the
/// remaining two eigenvalues come from the 2 x 2 restriction to the block
/// indicators.
fn rank_one_block_update(v: f64, w: usize, d: usize, rho: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d);
    if w == 0 || w == d {
        let c = if w == 0 { 1.0 } else { v };
        out.push(c + rho * d as f64);
        out.extend(std::iter::repeat_n(c, d - 1));
        return out;
    }
    let (wf, rf) = (w as f64, (d - w) as f64);
    let off = rho * (wf * rf).sqrt();
    let m = Matrix2::new(v + rho * wf, off, off, 1.0 + rho * rf);
    let pair = SymmetricEigen::new(m).eigenvalues;
    out.extend(pair.iter().copied());
    out.extend(std::iter::repeat_n(v, w - 1));
    out.extend(std::iter::repeat_n(1.0, d - w - 1));
    out
}

/// One simulated data set plus its mixture component per observation.
#[derive(Debug, Clone)]
pub struct ScenarioSample {
    pub data: DataMatrix,
    /// 1 for `N(0, Λ)`, 2 for the shifted component.
    pub components: Vec<u8>,
}

pub fn generate_scenario_sample(spec: &ScenarioSpec, rep: usize) -> Result<ScenarioSample> {
    spec.validate()?;
    let (d, n) = (spec.d, spec.n);
    let seed = spec.master_seed;
    let mut coin = streams::stream(seed, &[domain::SCENARIO_COMPONENT, rep as u64]);
    let components: Vec<u8> = (0..n)
        .map(|_| if coin.random_bool(0.5) { 2 } else { 1 })
        .collect();
    let roots: Vec<f64> = spec
        .population_eigenvalues()
        .iter()
        .map(|l| l.sqrt())
        .collect();
    let shift = spec.shift();
    let mut x = DMatrix::zeros(d, n);
    let mut row = vec![0.0; n];
    for j in 0..d {
        streams::fill_standard_normal(
            seed,
            &[domain::SCENARIO_GAUSSIAN, rep as u64, j as u64],
            &mut row,
        );
        for i in 0..n {
            let mean = if components[i] == 2 { shift[j] } else { 0.0 };
            x[(j, i)] = roots[j] * row[i] + mean;
        }
    }
    Ok(ScenarioSample {
        data: DataMatrix::new(x)?,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: MethodKind,
    pub mean_p: f64,
    /// Number of p-values below 0.05.
    pub p5_count: usize,
    /// Number of p-values below 0.10.
    pub p10_count: usize,
    /// Replications that completed.
    pub reps: usize,
    /// Empirical p-value of each completed replication, in replication order.
    pub rep_pvalues: Vec<f64>,
}

impl CellSummary {
    fn from_pvalues(method: MethodKind, rep_pvalues: Vec<f64>) -> Self {
        let reps = rep_pvalues.len();
        let mean_p = if reps == 0 {
            f64::NAN
        } else {
            rep_pvalues.iter().sum::<f64>() / reps as f64
        };
        CellSummary {
            method,
            mean_p,
            p5_count: rep_pvalues.iter().filter(|&&p| p < 0.05).count(),
            p10_count: rep_pvalues.iter().filter(|&&p| p < 0.10).count(),
            reps,
            rep_pvalues,
        }
    }

    pub fn rejection_rate(&self) -> f64 {
        self.p5_count as f64 / self.reps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDiagnostics {
    /// Theoretical cluster index of the generating distribution's covariance.
    pub tci_truth: f64,
    /// Large-sample spike limits, when the scenario is in the spiked HDLSS regime.
    pub rmt: Option<RmtPrediction>,
    /// Mean over replications of the hard-threshold bias measure against the truth.
    pub mean_hard_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub cells: Vec<CellSummary>,
    pub diagnostics: ScenarioDiagnostics,
    /// Observations drawn from the shifted component, per replication.
    pub shifted_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl ScenarioResult {
    pub fn cell(&self, method: MethodKind) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub scenarios: Vec<ScenarioResult>,
}

struct RepOutcome {
    pvalues: Vec<Option<f64>>,
    hard_bias: Option<f64>,
    shifted: usize,
    warnings: Vec<String>,
}

fn method_for(kind: MethodKind, spec: &ScenarioSpec) -> Method {
    match kind {
        MethodKind::True => Method::TrueSpectrum(spec.null_truth_spectrum()),
        MethodKind::Sample => Method::Sample,
        MethodKind::Hard => Method::Hard,
        MethodKind::Soft => Method::Soft,
        MethodKind::Combined => Method::Combined,
    }
}

fn hard_bias_of(report_spectrum: &SpectrumUsed, truth: &[f64]) -> Option<f64> {
    let hard = match report_spectrum {
        SpectrumUsed::Combined { hard, .. } => hard,
        SpectrumUsed::Single { spectrum } if spectrum.method == crate::SpectrumMethod::Hard => {
            spectrum
        }
        _ => return None,
    };
    let top_true = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top_est = hard
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let delta_total = hard.eigenvalues.iter().sum::<f64>() - truth.iter().sum::<f64>();
    hard_bias_diagnostic(truth, top_est - top_true, delta_total).ok()
}

fn run_rep(spec: &ScenarioSpec, rep: usize) -> RepOutcome {
    let mut out = RepOutcome {
        pvalues: vec![None; spec.methods.len()],
        hard_bias: None,
        shifted: 0,
        warnings: Vec::new(),
    };
    let sample = match generate_scenario_sample(spec, rep) {
        Ok(s) => s,
        Err(e) => {
            out.warnings
                .push(format!("rep {rep}: sample generation failed: {e}"));
            return out;
        }
    };
    out.shifted = sample.components.iter().filter(|&&c| c == 2).count();
    let truth = spec.population_eigenvalues();
    let seed = streams::derive_seed(spec.master_seed, &[domain::SCENARIO_TEST, rep as u64]);
    for (slot, &kind) in out.pvalues.iter_mut().zip(&spec.methods) {
        let config = TestConfig::new(method_for(kind, spec))
            .with_n_sim(spec.n_sim)
            .with_seed(seed)
            .with_restarts(spec.restarts_null, spec.restarts_observed);
        match run_test(&sample.data, &config) {
            Ok(report) => {
                *slot = Some(report.p_empirical);
                if out.hard_bias.is_none() {
                    out.hard_bias = hard_bias_of(&report.spectrum_used, &truth);
                }
                out.warnings.extend(
                    report
                        .warnings
                        .into_iter()
                        .map(|w| format!("rep {rep} {}: {w}", kind.name())),
                );
            }
            Err(e) => out.warnings.push(format!("rep {rep} {}: {e}", kind.name())),
        }
    }
    out
}

/// Run one scenario; replications run in parallel and are merged in order.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    let outcomes: Vec<RepOutcome> = (0..spec.reps)
        .into_par_iter()
        .map(|r| run_rep(spec, r))
        .collect();

    let cells = spec
        .methods
        .iter()
        .enumerate()
        .map(|(m, &kind)| {
            let ps = outcomes.iter().filter_map(|o| o.pvalues[m]).collect();
            CellSummary::from_pvalues(kind, ps)
        })
        .collect();

    let biases: Vec<f64> = outcomes.iter().filter_map(|o| o.hard_bias).collect();
    let mean_hard_bias =
        (!biases.is_empty()).then(|| biases.iter().sum::<f64>() / biases.len() as f64);
    let rmt = if spec.w >= 1 && spec.d > spec.n && spec.w < spec.n && spec.v > 1.0 {
        rmt_predicted_spectrum(spec.v, spec.w, spec.n, spec.d).ok()
    } else {
        None
    };
    let diagnostics = ScenarioDiagnostics {
        tci_truth: theoretical_ci(&spec.null_truth_spectrum())?,
        rmt,
        mean_hard_bias,
    };

    Ok(ScenarioResult {
        spec: spec.clone(),
        cells,
        diagnostics,
        shifted_counts: outcomes.iter().map(|o| o.shifted).collect(),
        warnings: outcomes.into_iter().flat_map(|o| o.warnings).collect(),
    })
}

pub fn run_grid(specs: &[ScenarioSpec]) -> Result<GridSummary> {
    run_grid_with_workers(specs, None)
}

pub fn run_grid_with_workers(
    specs: &[ScenarioSpec],
    workers: Option<usize>,
) -> Result<GridSummary> {
    for s in specs {
        s.validate()?;
    }
    let scenarios = with_workers(workers, || {
        specs.iter().map(run_scenario).collect::<Result<Vec<_>>>()
    })??;
    Ok(GridSummary { scenarios })
}

impl GridSummary {
    fn methods(&self) -> Vec<MethodKind> {
        let mut m: Vec<MethodKind> = self
            .scenarios
            .iter()
            .flat_map(|s| s.spec.methods.iter().copied())
            .collect();
        m.sort();
        m.dedup();
        m
    }

    /// Table with one row per scenario and `Mean, P5, P10` columns per method.
    pub fn to_csv(&self) -> String {
        let methods = self.methods();
        let mut header = vec!["v", "w", "d", "n", "a", "mode", "reps", "n_sim"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        for m in &methods {
            for col in ["mean", "p5", "p10"] {
                header.push(format!("{}_{col}", m.name()));
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.scenarios {
            let sp = &s.spec;
            let mut row = vec![
                sp.v.to_string(),
                sp.w.to_string(),
                sp.d.to_string(),
                sp.n.to_string(),
                sp.signal_a.to_string(),
                sp.signal_mode.to_string(),
                sp.reps.to_string(),
                sp.n_sim.to_string(),
            ];
            for m in &methods {
                match s.cell(*m) {
                    Some(c) => {
                        row.push(format!("{:.4}", c.mean_p));
                        row.push(c.p5_count.to_string());
                        row.push(c.p10_count.to_string());
                    }
                    None => row.extend(["".to_string(), "".to_string(), "".to_string()]),
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parse a scenario table.
///
/// The first non-comment line is a header naming the columns
/// `v, w, d, n, a, mode, reps, n_sim` in any order; fields are separated by
/// commas, tabs or spaces and `#` starts a comment.
pub fn parse_scenarios(text: &str, methods: &[MethodKind], seed: u64) -> Result<Vec<ScenarioSpec>> {
    const COLUMNS: [&str; 8] = ["v", "w", "d", "n", "a", "mode", "reps", "n_sim"];
    let split = |line: &str| -> Vec<String> {
        line.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| SigClustError::Parse {
        line: 1,
        column: None,
        message: "scenario file is empty".into(),
    })?;
    let header: Vec<String> = split(header)
        .into_iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let mut index = [0usize; 8];
    for (k, name) in COLUMNS.iter().enumerate() {
        index[k] = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SigClustError::Parse {
                line: header_line,
                column: None,
                message: format!("missing column '{name}'"),
            })?;
    }

    let mut specs = Vec::new();
    for (line, body) in lines {
        let fields = split(body);
        if fields.len() != header.len() {
            return Err(SigClustError::Parse {
                line,
                column: None,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let get = |k: usize| -> (&str, usize) { (fields[index[k]].as_str(), index[k] + 1) };
        fn num<T: FromStr>(raw: (&str, usize), line: usize) -> Result<T> {
            raw.0.parse().map_err(|_| SigClustError::Parse {
                line,
                column: Some(raw.1),
                message: format!("'{}' is not a valid number", raw.0),
            })
        }
        let mode = get(5)
            .0
            .parse::<SignalMode>()
            .map_err(|e| SigClustError::Parse {
                line,
                column: Some(index[5] + 1),
                message: e.to_string(),
            })?;
        let spec = ScenarioSpec {
            v: num(get(0), line)?,
            w: num(get(1), line)?,
            d: num(get(2), line)?,
            n: num(get(3), line)?,
            signal_a: num(get(4), line)?,
            signal_mode: mode,
            reps: num(get(6), line)?,
            n_sim: num(get(7), line)?,
            methods: methods.to_vec(),
            master_seed: seed,
            restarts_null: DEFAULT_RESTARTS_NULL,
            restarts_observed: DEFAULT_RESTARTS_OBSERVED,
        };
        spec.validate().map_err(|e| SigClustError::Parse {
            line,
            column: None,
            message: e.to_string(),
        })?;
        specs.push(spec);
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub a: f64,
    pub method: MethodKind,
    /// Fraction of replications with p < 0.05.
    pub rejection_rate: f64,
    /// Sorted p-values; the `i`-th (0-based) has empirical CDF `(i + 1) / len`.
    pub sorted_pvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
    pub grid: GridSummary,
}

impl PowerCurve {
    pub fn point(&self, a: f64, method: MethodKind) -> Option<&PowerPoint> {
        self.points.iter().find(|p| p.a == a && p.method == method)
    }

    /// ECDF plot data: `a, method, p_value, ecdf` rows.
    pub fn ecdf_csv(&self) -> String {
        let mut out = String::from("a,method,p_value,ecdf\n");
        for p in &self.points {
            let len = p.sorted_pvalues.len() as f64;
            for (i, v) in p.sorted_pvalues.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    p.a,
                    p.method.name(),
                    v,
                    (i + 1) as f64 / len
                ));
            }
        }
        out
    }
}

/// Rejection rates and p-value distributions as the mixture shift `a` varies.
///
/// Every value of `a` reuses the base seed, so the Gaussian noise and the
/// component assignments are shared across the curve.
pub fn power_curve(base: &ScenarioSpec, a_values: &[f64]) -> Result<PowerCurve> {
    let specs: Vec<ScenarioSpec> = a_values
        .iter()
        .map(|&a| {
            let mut s = base.clone();
            s.signal_a = a;
            s
        })
        .collect();
    let grid = run_grid(&specs)?;
    let mut points = Vec::new();
    for s in &grid.scenarios {
        for c in &s.cells {
            let mut sorted = c.rep_pvalues.clone();
            sorted.sort_by(f64::total_cmp);
            points.push(PowerPoint {
                a: s.spec.signal_a,
                method: c.method,
                rejection_rate: c.rejection_rate(),
                sorted_pvalues: sorted,
            });
        }
    }
    Ok(PowerCurve { points, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_parses() {
        let specs = parse_scenarios(ONE_CLUSTER_SCENARIOS, &MethodKind::ALL, 1).unwrap();
        assert_eq!(specs.len(), 31);
        assert!(specs
            .iter()
            .all(|s| s.d == 1000 && s.n == 100 && s.signal_a == 0.0));
        assert!(specs.iter().any(|s| s.v == 1000.0 && s.w == 1));
        assert!(specs.iter().any(|s| s.v == 10.0 && s.w == 100));
    }

    #[test]
    fn scenario_parse_errors() {
        let methods = [MethodKind::Hard];
        let err = parse_scenarios("v w d n a mode reps\n", &methods, 0).unwrap_err();
        assert!(matches!(err, SigClustError::Parse { line: 1, .. }));
        let err = parse_scenarios(
            "v w d n a mode reps n_sim\n1 1 10 5 0 none x 100\n",
            &methods,
            0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SigClustError::Parse {
                line: 2,
                column: Some(7),
                ..
            }
        ));
        let err = parse_scenarios(
            "v,w,d,n,a,mode,reps,n_sim\n1,1,10,5,2,none,3,100\n",
            &methods,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, SigClustError::Parse { line: 2, .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(ScenarioSpec::null(10, 5, 2.0, 11).validate().is_err());
        assert!(ScenarioSpec::null(10, 5, 0.5, 1).validate().is_err());
        assert!(ScenarioSpec::null(10, 5, 2.0, 1)
            .with_signal(SignalMode::None, 1.0)
            .validate()
            .is_err());
        assert!(ScenarioSpec::null(10, 5, 2.0, 1).validate().is_ok());
    }

    #[test]
    fn mixture_truth_first_coordinate() {
        let s = ScenarioSpec::null(5, 10, 10.0, 2).with_signal(SignalMode::FirstCoordinate, 4.0);
        assert_eq!(s.null_truth_spectrum(), vec![14.0, 10.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn mixture_truth_all_coordinates_matches_dense_eigensolver() {
        for (d, w, v, a) in [
            (6, 1, 100.0, 0.6),
            (7, 3, 4.0, 2.0),
            (5, 0, 1.0, 1.0),
            (4, 4, 3.0, 1.0),
        ] {
            let s = ScenarioSpec::null(d, 10, v, w).with_signal(SignalMode::AllCoordinates, a);
            let lam = s.population_eigenvalues();
            let rho = 0.25 * a * a;
            let m = DMatrix::from_fn(d, d, |i, j| rho + if i == j { lam[i] } else { 0.0 });
            let mut dense: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            dense.sort_by(|x, y| y.total_cmp(x));
            let closed = s.null_truth_spectrum();
            for (x, y) in closed.iter().zip(&dense) {
                assert!((x - y).abs() < 1e-10 * dense[0], "{closed:?} vs {dense:?}");
            }
        }
    }

    #[test]
    fn zero_shift_modes_give_identical_samples() {
        let base = ScenarioSpec::null(30, 12, 5.0, 2).with_seed(3);
        let none = generate_scenario_sample(&base, 4).unwrap();
        for mode in [SignalMode::FirstCoordinate, SignalMode::AllCoordinates] {
            let s = generate_scenario_sample(&base.clone().with_signal(mode, 0.0), 4).unwrap();
            assert_eq!(s.data, none.data);
        }
    }

    #[test]
    fn csv_has_table_shape() {
        let spec = ScenarioSpec::null(20, 10, 5.0, 1)
            .with_reps(3, 100)
            .with_methods(&[MethodKind::Sample, MethodKind::Hard]);
        let grid = run_grid(&[spec]).unwrap();
        let csv = grid.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "v,w,d,n,a,mode,reps,n_sim,sample_mean,sample_p5,sample_p10,hard_mean,hard_p5,hard_p10"
        );
        let cell = grid.scenarios[0].cell(MethodKind::Hard).unwrap();
        assert!(cell.p5_count <= cell.p10_count && cell.p10_count <= cell.reps);
        assert_eq!(cell.reps, 3);
    }
}
