//! Numerical certificate for the communication lower bound: every link of
//! the significant-subspace argument evaluated on one concrete outcome.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, linalg, CMat};
use crate::sigsub::{sig_dim, sig_dim_values, RANK_TOL};
use crate::spectrum::{spectrum_stats, tensor_power_spectrum, BaseSpectrum, ClassSpectrum, MERGE_TOL_BITS};

use super::dilution::log2_biguint;
use super::run::{expand_spectrum, OutcomeState, ProtocolRunReport, ReducedState};

/// Parameter instance of the argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub delta_rho: f64,
    pub delta_gamma: f64,
    pub eps0: f64,
}

impl Default for CertificateParams {
    fn default() -> Self {
        Self { delta_rho: 0.95, delta_gamma: 0.04, eps0: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = ">")]
    Greater,
}

impl Relation {
    fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::AtMost => lhs <= rhs + crate::EQUALITY_TOL * rhs.abs().max(1.0),
            Relation::AtLeast => lhs >= rhs - crate::EQUALITY_TOL * rhs.abs().max(1.0),
            Relation::Greater => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    /// False when the hypotheses of this step are not met by the run.
    pub applicable: bool,
    pub holds: bool,
}

/// Measured quantities; `log2_*` fields are in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantities {
    pub n: u64,
    pub c: u32,
    pub s: f64,
    pub epsilon: f64,
    pub outcome_prob: f64,
    pub log2_d: f64,
    pub n_entropy: f64,
    pub alpha_sqrt_n: f64,
    pub beta: f64,
    pub log2_tr_p1: f64,
    pub p1_mass: f64,
    pub gamma_dim: usize,
    pub tr_p2: usize,
    pub p2_mass: f64,
    pub log2_norm_x: f64,
    pub log2_rank_x: f64,
    pub distance_x: f64,
    pub log2_sig_rho: f64,
    pub log2_sig_joint: f64,
    /// Measured constant `S(ρⁿ, δ_ρ) / 2^{nE + α√n}` in bits.
    pub log2_c_measured: f64,
    pub overlap_x: f64,
    pub overlap_target: f64,
    /// Upper bound on `Tr (P₁⊗P₂) X` obtained from the chain, in bits.
    pub log2_chain_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub params: CertificateParams,
    pub quantities: Quantities,
    pub inequalities: Vec<Inequality>,
    /// `ε ≤ ε₀`, the regime the lower bound is stated for.
    pub within_eps0: bool,
    /// Whether the steps from the rank bound onward apply to this run.
    pub chain_applicable: bool,
    /// `c + s` lower bound implied by the exact chain (`−∞` when vacuous).
    pub implied_bound: f64,
    /// Same bound in the `α√n + log₂(δ_Γ/4 − ε) − log₂ C` form with the
    /// `±1` terms dropped.
    pub implied_bound_asymptotic: f64,
}

impl Certificate {
    /// Every applicable inequality holds.
    pub fn all_hold(&self) -> bool {
        self.inequalities.iter().all(|i| !i.applicable || i.holds)
    }

    /// Recorded flags agree with the recorded numbers, every applicable
    /// inequality holds, and `c + s` meets the implied bound.
    pub fn is_consistent(&self) -> bool {
        let flags = self.inequalities.iter().all(|i| i.holds == i.relation.eval(i.lhs, i.rhs));
        let q = &self.quantities;
        let bound = !self.chain_applicable || q.c as f64 + q.s >= self.implied_bound - crate::EQUALITY_TOL;
        flags && self.all_hold() && bound
    }

    pub fn get(&self, name: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|i| i.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// The good outcome of largest probability; it satisfies
/// `prob ≥ 2^{−(c+s)}` by pigeonhole over at most `2^c` good outcomes.
pub fn most_probable_good(outcomes: &[OutcomeState]) -> Option<&OutcomeState> {
    outcomes.iter().filter(|o| o.good).max_by(|a, b| a.log2_prob.total_cmp(&b.log2_prob))
}

fn ineq(name: &str, lhs: f64, relation: Relation, rhs: f64, applicable: bool) -> Inequality {
    Inequality { name: name.into(), lhs, relation, rhs, applicable, holds: relation.eval(lhs, rhs) }
}

/// `log₂(2^a − 2^b)` for `a ≥ b`.
fn log2_diff_exp(a: f64, b: f64) -> f64 {
    a + (-(-(a - b) * std::f64::consts::LN_2).exp_m1()).log2()
}

/// Parts of the evaluation that depend on how `X` is stored.
struct Evaluated {
    gamma_eigs: Vec<f64>,
    log2_norm_x: f64,
    log2_rank_x: f64,
    distance_x: f64,
    log2_sig_joint: f64,
    overlap_x: f64,
}

fn evaluate_aligned(
    profile: &super::dilution::AlignedProfile,
    spec: &ClassSpectrum,
    params: &CertificateParams,
    p1_log2: f64,
) -> Result<Evaluated> {
    let joint = (params.delta_rho + params.delta_gamma).min(1.0);
    Ok(Evaluated {
        gamma_eigs: vec![1.0],
        log2_norm_x: profile.log2_max_approx(),
        log2_rank_x: log2_biguint(&profile.approx_support()),
        distance_x: profile.diagonal_distance(),
        log2_sig_joint: sig_dim(spec, joint)?.log2_dim,
        overlap_x: profile.approx_mass_where_target_at_least(p1_log2),
    })
}

fn evaluate_dense(
    x: &CMat,
    kept_dim: usize,
    junk_dim: usize,
    gamma: &CMat,
    spec: &ClassSpectrum,
    params: &CertificateParams,
    p1_log2: f64,
) -> Result<Evaluated> {
    let q = expand_spectrum(spec)?;
    if q.len() > kept_dim || gamma.nrows() != junk_dim {
        return Err(Error::DimensionMismatch { expected: q.len(), got: kept_dim });
    }
    let mut padded = q.clone();
    padded.resize(kept_dim, 0.0);
    let (gamma_eigs, gamma_vecs) = linalg::eigh(gamma);
    let sigma = linalg::kron(&linalg::real_diag(&padded), gamma);
    let distance_x = qmath::hermitian_trace_norm(&(x - &sigma));

    let products: Vec<f64> = q.iter().flat_map(|a| gamma_eigs.iter().map(move |g| a * g.max(0.0))).collect();
    let joint = (params.delta_rho + params.delta_gamma).min(1.0);
    let log2_sig_joint = sig_dim_values(&products, joint)?.log2_dim;

    let keep = sig_dim_values(&gamma_eigs, params.delta_gamma)?.exact.expect("small") as usize;
    let p2_basis = gamma_vecs.columns(0, keep).into_owned();
    let p2 = &p2_basis * p2_basis.adjoint();
    let threshold = p1_log2.exp2() * (1.0 - MERGE_TOL_BITS);
    let p1: Vec<f64> = padded.iter().map(|&v| if v > 0.0 && v >= threshold { 1.0 } else { 0.0 }).collect();
    let proj = linalg::kron(&linalg::real_diag(&p1), &p2);
    let overlap_x = (proj * x).trace().re;

    Ok(Evaluated {
        gamma_eigs,
        log2_norm_x: qmath::operator_norm(x)?.log2(),
        log2_rank_x: (qmath::epsilon_rank(x, RANK_TOL) as f64).log2(),
        distance_x,
        log2_sig_joint,
        overlap_x,
    })
}

/// Evaluates the chain of inequalities on `outcome` of a run that
/// approximates `ψ^{⊗n}` with single-copy spectrum `p`.
pub fn verify_theorem_chain(
    outcome: &OutcomeState,
    p: &BaseSpectrum,
    n: u64,
    report: &ProtocolRunReport,
    params: CertificateParams,
) -> Result<Certificate> {
    if !outcome.good {
        return Err(Error::InvalidArgument(format!("outcome {} is not good (error {})", outcome.label, outcome.error)));
    }
    if n == 0 || report.n != n {
        return Err(Error::InvalidArgument(format!("report is for n = {}, certificate asked for n = {n}", report.n)));
    }
    let stats = spectrum_stats(p);
    stats.require_nondegenerate()?;
    let spec = tensor_power_spectrum(p, n)?;
    let root_n = (n as f64).sqrt();
    let n_entropy = n as f64 * stats.entropy;
    let alpha_sqrt_n = stats.alpha * root_n;

    // P₁: eigenvalues of ρⁿ at least 2^{−nE}
    let p1_log2 = -n_entropy;
    let p1_classes: Vec<_> = spec.classes.iter().filter(|c| c.log2_eig >= p1_log2 - MERGE_TOL_BITS).collect();
    let log2_tr_p1 = crate::spectrum::log2_sum_exp(p1_classes.iter().map(|c| c.log2_mult));
    let p1_mass: f64 = p1_classes.iter().map(|c| c.mass()).sum();

    let ev = match &outcome.x {
        ReducedState::Aligned(profile) => evaluate_aligned(profile, &spec, &params, p1_log2)?,
        ReducedState::Dense { matrix, kept_dim, junk_dim } => {
            evaluate_dense(matrix, *kept_dim, *junk_dim, &outcome.gamma, &spec, &params, p1_log2)?
        }
    };
    let sig_gamma = sig_dim_values(&ev.gamma_eigs, params.delta_gamma)?;
    let tr_p2 = sig_gamma.exact.expect("small") as usize;
    let p2_mass = sig_gamma.achieved_mass.min(1.0);
    let log2_sig_rho = sig_dim(&spec, params.delta_rho)?.log2_dim;
    let log2_c_measured = log2_sig_rho - n_entropy - alpha_sqrt_n;
    let overlap_target = p1_mass * p2_mass;
    let cs = report.c as f64 + report.s;
    let epsilon = outcome.error;

    // rank step needs D(X, ρⁿ⊗Γ) ≤ 2(1 − δ_ρ − δ_Γ)
    let joint_delta = params.delta_rho + params.delta_gamma;
    let chain_applicable = ev.distance_x <= 2.0 * (1.0 - joint_delta) + crate::EQUALITY_TOL && log2_sig_rho > 0.0;
    // S(Γ, δ_Γ) ≤ S_joint / (S_ρ − 1) + 1, and S_joint ≤ d
    let log2_sig_rho_m1 = log2_diff_exp(log2_sig_rho, 0.0);
    let prop2_rhs = ((ev.log2_sig_joint - log2_sig_rho_m1).exp2() + 1.0).log2();
    let log2_p2_bound = ((report.log2_d - log2_sig_rho_m1).exp2() + 1.0).log2();
    let log2_chain_bound = n_entropy + log2_p2_bound + cs - report.log2_d;
    let chain_bound = log2_chain_bound.exp2();
    let target = params.delta_gamma / 4.0;

    let implied_bound = if chain_applicable && target > epsilon {
        (target - epsilon).log2() - n_entropy - log2_p2_bound + report.log2_d
    } else {
        f64::NEG_INFINITY
    };
    let implied_bound_asymptotic =
        if target > epsilon { alpha_sqrt_n + (target - epsilon).log2() - log2_c_measured } else { f64::NEG_INFINITY };

    let quarter_regime = n as f64 > 1e4 * stats.beta * stats.beta;
    let inequalities = vec![
        ineq("log2 Tr P1 <= nE", log2_tr_p1, Relation::AtMost, n_entropy, true),
        ineq(
            "Tr P1 rho^n >= 1/2 - 25 beta/sqrt(n)",
            p1_mass,
            Relation::AtLeast,
            0.5 - 25.0 * stats.beta / root_n,
            true,
        ),
        ineq("Tr P1 rho^n > 1/4", p1_mass, Relation::Greater, 0.25, quarter_regime),
        ineq(
            "log2 ||X|| <= -log2(d prob)",
            ev.log2_norm_x,
            Relation::AtMost,
            -(report.log2_d + outcome.log2_prob),
            true,
        ),
        ineq("log2 ||X|| <= c + s - log2 d", ev.log2_norm_x, Relation::AtMost, cs - report.log2_d, true),
        ineq("log2 rank X <= log2 d", ev.log2_rank_x, Relation::AtMost, report.log2_d, true),
        ineq("D(X, rho^n x Gamma) <= 2 eps", ev.distance_x, Relation::AtMost, 2.0 * epsilon, true),
        ineq(
            "log2 S(rho^n x Gamma, d_rho + d_Gamma) <= log2 rank X",
            ev.log2_sig_joint,
            Relation::AtMost,
            ev.log2_rank_x,
            chain_applicable,
        ),
        ineq(
            "log2 S(Gamma, d_Gamma) <= log2(S_joint/(S_rho - 1) + 1)",
            (tr_p2 as f64).log2(),
            Relation::AtMost,
            prop2_rhs,
            chain_applicable,
        ),
        ineq(
            "Tr(P1 x P2) X <= Tr P1 Tr P2 ||X||",
            ev.overlap_x,
            Relation::AtMost,
            (log2_tr_p1 + (tr_p2 as f64).log2() + ev.log2_norm_x).exp2(),
            true,
        ),
        ineq("Tr(P1 x P2) X <= chain bound", ev.overlap_x, Relation::AtMost, chain_bound, chain_applicable),
        ineq("Tr(P1 x P2)(rho^n x Gamma) >= d_Gamma/4", overlap_target, Relation::AtLeast, target, quarter_regime),
        ineq(
            "D(X, rho^n x Gamma) >= 2 Tr(P1 x P2)(rho^n x Gamma - X)",
            ev.distance_x,
            Relation::AtLeast,
            2.0 * (overlap_target - ev.overlap_x),
            true,
        ),
        ineq(
            "2 eps >= 2 (d_Gamma/4 - chain bound)",
            2.0 * epsilon,
            Relation::AtLeast,
            2.0 * (target - chain_bound),
            chain_applicable && quarter_regime,
        ),
    ];

    Ok(Certificate {
        params,
        quantities: Quantities {
            n,
            c: report.c,
            s: report.s,
            epsilon,
            outcome_prob: outcome.prob,
            log2_d: report.log2_d,
            n_entropy,
            alpha_sqrt_n,
            beta: stats.beta,
            log2_tr_p1,
            p1_mass,
            gamma_dim: ev.gamma_eigs.len(),
            tr_p2,
            p2_mass,
            log2_norm_x: ev.log2_norm_x,
            log2_rank_x: ev.log2_rank_x,
            distance_x: ev.distance_x,
            log2_sig_rho,
            log2_sig_joint: ev.log2_sig_joint,
            log2_c_measured,
            overlap_x: ev.overlap_x,
            overlap_target,
            log2_chain_bound,
        },
        inequalities,
        within_eps0: epsilon <= params.eps0,
        chain_applicable,
        implied_bound,
        implied_bound_asymptotic,
    })
}

/// Outcome whose `X` is exactly `ρⁿ ⊗ Γ`; useful as a reference point.
pub fn product_outcome(p: &BaseSpectrum, n: u64, gamma: &CMat) -> Result<OutcomeState> {
    let spec = tensor_power_spectrum(p, n)?;
    let q = expand_spectrum(&spec)?;
    let x = linalg::kron(&linalg::real_diag(&q), gamma);
    Ok(OutcomeState {
        label: "product".into(),
        outcome: None,
        log2_multiplicity: 0.0,
        prob: 1.0,
        log2_prob: 0.0,
        error: 0.0,
        good: true,
        x: ReducedState::Dense { matrix: x, kept_dim: q.len(), junk_dim: gamma.nrows() },
        gamma: gamma.clone(),
        state: None,
        y: None,
    })
}
