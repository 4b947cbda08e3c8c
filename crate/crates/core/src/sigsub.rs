//! Significant subspaces: the smallest dimension `S(ρ, δ)` of a projector
//! capturing at least mass `δ`, plus checkers for how `S` behaves under
//! perturbation, tensor products and many copies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, linalg, DensityMatrix};
use crate::spectrum::{self, log2_sum_exp, BaseSpectrum, ClassSpectrum};

/// Mass shortfall tolerated when accumulating class spectra.
pub const CLASS_MASS_TOL: f64 = 1e-12;
/// Mass shortfall tolerated when accumulating matrix eigenvalues.
pub const MATRIX_MASS_TOL: f64 = 1e-10;
/// Relative eigenvalue threshold used for numerical ranks.
pub const RANK_TOL: f64 = 1e-9;
/// Dimensions up to `2^EXACT_LOG2_LIMIT` are also reported as integers.
pub const EXACT_LOG2_LIMIT: f64 = 40.0;

/// Constants of the reference instance of the many-copy growth statement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInstance {
    pub delta: f64,
    pub constant: f64,
    /// Threshold copy count is `n0_per_beta2 · β²`.
    pub n0_per_beta2: f64,
}

pub const REFERENCE_INSTANCE: ReferenceInstance = ReferenceInstance { delta: 0.95, constant: 0.01, n0_per_beta2: 1e7 };

/// Value of `S(ρ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigQueryResult {
    pub delta: f64,
    /// `log₂` of the dimension; `-∞` when the dimension is zero.
    pub log2_dim: f64,
    /// The dimension itself when it is at most `2^40`.
    pub exact: Option<u64>,
    pub achieved_mass: f64,
}

impl SigQueryResult {
    pub fn dimension(&self) -> f64 {
        self.exact.map(|d| d as f64).unwrap_or_else(|| self.log2_dim.exp2())
    }

    fn zero(delta: f64) -> Self {
        Self { delta, log2_dim: f64::NEG_INFINITY, exact: Some(0), achieved_mass: 0.0 }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside [0, 1]")));
    }
    Ok(())
}

/// `S(ρ^{⊗n}, δ)` from a class spectrum. A class reached partway counts
/// only as many eigenvectors as needed, rounded up.
pub fn sig_dim(spec: &ClassSpectrum, delta: f64) -> Result<SigQueryResult> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(SigQueryResult::zero(delta));
    }
    let mut cum = 0.0;
    let mut prefix_logs: Vec<f64> = Vec::new();
    let mut prefix_exact: u64 = 0;
    for class in &spec.classes {
        let mass = class.mass();
        if cum + mass >= delta - CLASS_MASS_TOL {
            let log2_need = (delta - cum).max(0.0).log2() - class.log2_eig;
            let (log2_count, count) = if log2_need < 50.0 {
                let raw = log2_need.exp2();
                let count = ((raw - 1e-9).ceil().max(1.0)).min(class.multiplicity().round().max(1.0));
                (count.log2(), Some(count))
            } else {
                (log2_need.min(class.log2_mult), None)
            };
            prefix_logs.push(log2_count);
            let log2_dim = log2_sum_exp(prefix_logs.iter().copied());
            let achieved_mass = (cum + (log2_count + class.log2_eig).exp2()).min(1.0);
            let exact = match count {
                Some(c) if log2_dim <= EXACT_LOG2_LIMIT => Some(prefix_exact + c as u64),
                _ => None,
            };
            return Ok(SigQueryResult { delta, log2_dim, exact, achieved_mass });
        }
        cum += mass;
        prefix_logs.push(class.log2_mult);
        if class.log2_mult <= EXACT_LOG2_LIMIT {
            prefix_exact = prefix_exact.saturating_add(class.multiplicity().round() as u64);
        }
    }
    Err(Error::InvalidArgument(format!("delta {delta} exceeds total mass {cum}")))
}

/// `S` for an explicit list of eigenvalues (any order).
pub fn sig_dim_values(values: &[f64], delta: f64) -> Result<SigQueryResult> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(SigQueryResult::zero(delta));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v.max(0.0);
        if cum >= delta - MATRIX_MASS_TOL {
            let d = i as u64 + 1;
            return Ok(SigQueryResult { delta, log2_dim: (d as f64).log2(), exact: Some(d), achieved_mass: cum });
        }
    }
    Err(Error::InvalidArgument(format!("delta {delta} exceeds total mass {cum}")))
}

pub fn sig_dim_matrix(rho: &DensityMatrix, delta: f64) -> Result<SigQueryResult> {
    sig_dim_values(&rho.eigenvalues(), delta)
}

fn exact_dim(r: &SigQueryResult) -> usize {
    r.exact.expect("matrix dimensions are small") as usize
}

/// Outcome of the perturbation check `rank σ ≥ S(ρ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Check {
    pub holds: bool,
    /// Numerical rank of `σ`.
    pub lhs: usize,
    /// `S(ρ, δ)`.
    pub rhs: usize,
    pub distance: f64,
}

/// Any `σ` with `D(ρ, σ) ≤ 2(1 − δ)` has rank at least `S(ρ, δ)`.
pub fn check_prop1(rho: &DensityMatrix, sigma: &DensityMatrix, delta: f64) -> Result<Prop1Check> {
    check_delta(delta)?;
    let distance = qmath::trace_distance(rho, sigma)?;
    if distance > 2.0 * (1.0 - delta) + crate::EQUALITY_TOL {
        return Err(Error::HypothesisViolated(format!(
            "distance {distance} exceeds 2(1 - delta) = {}",
            2.0 * (1.0 - delta)
        )));
    }
    let lhs = qmath::epsilon_rank(sigma.matrix(), RANK_TOL);
    let rhs = exact_dim(&sig_dim_matrix(rho, delta)?);
    Ok(Prop1Check { holds: lhs >= rhs, lhs, rhs, distance })
}

/// Outcome of the tensor-product chain
/// `S(A⊗B, δ_A+δ_B) ≥ S(A⊗B, δ_A+δ_B−δ_Aδ_B) > (S(A,δ_A)−1)(S(B,δ_B)−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop2Check {
    pub holds: bool,
    pub lhs: i64,
    pub mid: i64,
    pub rhs: i64,
}

pub fn check_prop2(a: &DensityMatrix, b: &DensityMatrix, delta_a: f64, delta_b: f64) -> Result<Prop2Check> {
    if !(delta_a > 0.0 && delta_b > 0.0 && delta_a + delta_b <= 1.0 + crate::EQUALITY_TOL) {
        return Err(Error::HypothesisViolated(format!(
            "need positive deltas with sum at most 1, got {delta_a} and {delta_b}"
        )));
    }
    let joint = linalg::eigvalsh(&linalg::kron(a.matrix(), b.matrix()));
    let outer = (delta_a + delta_b).min(1.0);
    let lhs = exact_dim(&sig_dim_values(&joint, outer)?) as i64;
    let mid = exact_dim(&sig_dim_values(&joint, delta_a + delta_b - delta_a * delta_b)?) as i64;
    let sa = exact_dim(&sig_dim_matrix(a, delta_a)?) as i64;
    let sb = exact_dim(&sig_dim_matrix(b, delta_b)?) as i64;
    let rhs = (sa - 1) * (sb - 1);
    Ok(Prop2Check { holds: lhs >= mid && mid > rhs, lhs, mid, rhs })
}

/// Many-copy growth of `log₂ S(ρ^{⊗n}, δ) − nE` against `√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub delta: f64,
    pub alpha: f64,
    pub n_grid: Vec<u64>,
    /// `log₂ S(ρ^{⊗n}, δ) − nE` per grid point.
    pub excess: Vec<f64>,
    /// `log₂(0.01) + α√n` per grid point.
    pub bound_bits: Vec<f64>,
    /// `S / 2^{nE + α√n}` per grid point.
    pub measured_c: Vec<f64>,
    /// Least-squares slope of excess against `√n`, bits per `√n`.
    pub fitted_coeff: f64,
    pub fitted_const: f64,
    pub residuals: Vec<f64>,
    /// Whether the excess reaches the reference-instance bound everywhere.
    pub bound_holds: bool,
}

impl GrowthFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,excess_bits,bound_bits,measured_C\n");
        for i in 0..self.n_grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.n_grid[i], self.excess[i], self.bound_bits[i], self.measured_c[i]
            ));
        }
        out
    }

    /// Grid points where the excess decreased from the previous point.
    pub fn monotonicity_violations(&self) -> Vec<u64> {
        self.excess.windows(2).zip(&self.n_grid[1..]).filter(|(w, _)| w[1] < w[0]).map(|(_, &n)| n).collect()
    }
}

/// Ordinary least squares `y ≈ slope·x + intercept`, with residuals.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residuals = x.iter().zip(y).map(|(a, b)| b - slope * a - intercept).collect();
    (slope, intercept, residuals)
}

pub fn growth_fit(p: &BaseSpectrum, delta: f64, n_grid: &[u64]) -> Result<GrowthFit> {
    let stats = spectrum::spectrum_stats(p);
    stats.require_nondegenerate()?;
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n grid must be nonempty and ascending".into()));
    }
    let mut excess = Vec::with_capacity(n_grid.len());
    let mut bound_bits = Vec::with_capacity(n_grid.len());
    let mut measured_c = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let spec = spectrum::tensor_power_spectrum(p, n)?;
        let s = sig_dim(&spec, delta)?;
        let nf = n as f64;
        let e = s.log2_dim - nf * stats.entropy;
        excess.push(e);
        bound_bits.push(REFERENCE_INSTANCE.constant.log2() + stats.alpha * nf.sqrt());
        measured_c.push((e - stats.alpha * nf.sqrt()).exp2());
    }
    let x: Vec<f64> = n_grid.iter().map(|&n| (n as f64).sqrt()).collect();
    let (fitted_coeff, fitted_const, residuals) = least_squares(&x, &excess);
    let bound_holds = excess.iter().zip(&bound_bits).all(|(e, b)| e >= b);
    Ok(GrowthFit {
        delta,
        alpha: stats.alpha,
        n_grid: n_grid.to_vec(),
        excess,
        bound_bits,
        measured_c,
        fitted_coeff,
        fitted_const,
        residuals,
        bound_holds,
    })
}

/// Bounds on `log₂` of the smallest Schmidt rank of a state within trace
/// distance `ε` of `n` copies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilutionBounds {
    pub n: u64,
    pub epsilon: f64,
    /// `log₂ S(ρ^{⊗n}, 1 − ε/2)`: every state that close has at least this rank.
    pub lower: f64,
    /// `log₂` of the smallest top-`k` truncation within distance `ε`.
    pub upper: f64,
    pub lower_exact: Option<u64>,
    pub upper_exact: Option<u64>,
}

/// The top-`k` truncation of a pure state keeping mass `m` is at trace
/// distance `2√(1 − m)`, so the upper bound is `S(ρ^{⊗n}, 1 − ε²/4)`.
pub fn min_dilution_dimension(p: &BaseSpectrum, n: u64, epsilon: f64) -> Result<DilutionBounds> {
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 2)")));
    }
    let spec = spectrum::tensor_power_spectrum(p, n)?;
    dilution_bounds_on(&spec, epsilon)
}

pub fn dilution_bounds_on(spec: &ClassSpectrum, epsilon: f64) -> Result<DilutionBounds> {
    let lower = sig_dim(spec, 1.0 - epsilon / 2.0)?;
    let upper = sig_dim(spec, 1.0 - epsilon * epsilon / 4.0)?;
    Ok(DilutionBounds {
        n: spec.n,
        epsilon,
        lower: lower.log2_dim,
        upper: upper.log2_dim,
        lower_exact: lower.exact,
        upper_exact: upper.exact,
    })
}
