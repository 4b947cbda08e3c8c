//! Running standard-form protocols from a maximally entangled input and
//! scoring each outcome against the target state.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{self, c, linalg, CMat, CVec, PureBipartiteState};
use crate::spectrum::{log2_sum_exp, BaseSpectrum, ClassSpectrum};

use super::dilution::{log2_biguint, AlignedProfile, DiagonalKraus};
use super::standard::{AliceMeasurement, StandardFormProtocol};

/// Target spectra are expanded to explicit vectors up to this length.
pub const EXPLICIT_TARGET_LIMIT: usize = 1 << 16;

/// Alice's reduced output operator `X` for one outcome.
#[derive(Debug, Clone)]
pub enum ReducedState {
    /// Matrix on Alice's kept registers followed by her discarded ones.
    Dense { matrix: CMat, kept_dim: usize, junk_dim: usize },
    /// Diagonal in the target's Schmidt basis; Alice keeps no junk.
    Aligned(AlignedProfile),
}

/// One outcome, or a class of outcomes with identical statistics.
#[derive(Debug, Clone)]
pub struct OutcomeState {
    pub label: String,
    pub outcome: Option<usize>,
    /// `log₂` of the number of outcomes this entry stands for.
    pub log2_multiplicity: f64,
    /// Probability of a single outcome.
    pub prob: f64,
    pub log2_prob: f64,
    /// Trace distance between the kept output and the target.
    pub error: f64,
    pub good: bool,
    pub x: ReducedState,
    /// Alice's share `Γ` of the junk left next to the target.
    pub gamma: CMat,
    /// Full output vector on all registers (dense runs only).
    pub state: Option<CVec>,
    /// Output on the kept registers, when small enough to store.
    pub y: Option<CMat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub label: String,
    pub log2_multiplicity: f64,
    pub prob: f64,
    pub log2_prob: f64,
    pub error: f64,
    pub good: bool,
}

/// Resource accounting of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRunReport {
    pub n: u64,
    /// Input dimension in decimal.
    pub d: String,
    pub log2_d: f64,
    pub c: u32,
    /// `−log₂` of the total probability of good outcomes.
    pub s: f64,
    /// Largest error among good outcomes.
    pub epsilon: f64,
    pub per_outcome: Vec<OutcomeSummary>,
}

impl ProtocolRunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub outcomes: Vec<OutcomeState>,
    pub report: ProtocolRunReport,
}

/// Target coefficients sorted descending, one entry per eigenvector.
pub fn expand_spectrum(spec: &ClassSpectrum) -> Result<Vec<f64>> {
    let counts = spec.exact_multiplicities()?;
    let total: BigUint = counts.iter().sum();
    if total > BigUint::from(EXPLICIT_TARGET_LIMIT) {
        return Err(Error::CapExceeded { count: log2_biguint(&total).exp2(), cap: EXPLICIT_TARGET_LIMIT as f64 });
    }
    let mut out = Vec::new();
    for (class, n) in spec.classes.iter().zip(&counts) {
        let n = n.to_usize().expect("bounded above");
        out.extend(std::iter::repeat_n(class.eigenvalue(), n));
    }
    Ok(out)
}

/// Runs `proto` on `|Φ_d>` and scores outcomes against `ψ^{⊗n}` given by
/// `target`. Outcomes with error at most `good_threshold` are good.
pub fn run_protocol(proto: &StandardFormProtocol, target: &ClassSpectrum, good_threshold: f64) -> Result<ProtocolRun> {
    let completeness = proto.completeness_error();
    if completeness > crate::VALIDITY_TOL {
        return Err(Error::IncompleteKraus(completeness));
    }
    let (outcomes, d) = match &proto.alice {
        AliceMeasurement::Diagonal(DiagonalKraus::Block(fam)) => {
            if fam.n != target.n || fam.base_probs != target.base_probs {
                return Err(Error::InvalidArgument("block family was built for a different target".into()));
            }
            let error = fam.profile.pure_distance();
            let c = fam.c as f64;
            let outcome = OutcomeState {
                label: format!("block shift (2^{} outcomes)", fam.c),
                outcome: None,
                log2_multiplicity: c,
                prob: (-c).exp2(),
                log2_prob: -c,
                error,
                good: error <= good_threshold,
                x: ReducedState::Aligned(fam.profile.clone()),
                gamma: CMat::identity(1, 1),
                state: None,
                y: None,
            };
            (vec![outcome], fam.dim.clone())
        }
        AliceMeasurement::Diagonal(DiagonalKraus::Explicit(fam)) => {
            let q = expand_spectrum(target)?;
            if q.len() > fam.dim {
                return Err(Error::DimensionMismatch { expected: q.len(), got: fam.dim });
            }
            let outcomes = (0..fam.weights.len())
                .map(|k| {
                    let (prob, coeffs) = fam.outcome(k);
                    let profile = AlignedProfile::from_vectors(&coeffs, &q);
                    let error = if prob > 0.0 { profile.pure_distance() } else { 2.0 };
                    OutcomeState {
                        label: format!("k={k}"),
                        outcome: Some(k),
                        log2_multiplicity: 0.0,
                        prob,
                        log2_prob: prob.log2(),
                        error,
                        good: prob > 0.0 && error <= good_threshold,
                        x: ReducedState::Aligned(profile),
                        gamma: CMat::identity(1, 1),
                        state: None,
                        y: None,
                    }
                })
                .collect();
            (outcomes, BigUint::from(fam.dim))
        }
        AliceMeasurement::Dense(_) => (run_dense(proto, target, good_threshold)?, BigUint::from(proto.dim_a)),
    };
    let report = summarize(&outcomes, target.n, &d, proto.message_bits)?;
    Ok(ProtocolRun { outcomes, report })
}

fn summarize(outcomes: &[OutcomeState], n: u64, d: &BigUint, c: u32) -> Result<ProtocolRunReport> {
    let good: Vec<&OutcomeState> = outcomes.iter().filter(|o| o.good).collect();
    if good.is_empty() {
        let best = outcomes.iter().map(|o| o.error).fold(f64::INFINITY, f64::min);
        return Err(Error::NotEpsilonGood { error: best, threshold: f64::NAN });
    }
    let log2_success = log2_sum_exp(good.iter().map(|o| o.log2_multiplicity + o.log2_prob));
    // success probabilities within rounding of 1 count as certain
    let s = if log2_success >= -crate::ORACLE_TOL { 0.0 } else { -log2_success };
    let epsilon = good.iter().map(|o| o.error).fold(0.0, f64::max);
    Ok(ProtocolRunReport {
        n,
        d: d.to_string(),
        log2_d: log2_biguint(d),
        c,
        s,
        epsilon,
        per_outcome: outcomes
            .iter()
            .map(|o| OutcomeSummary {
                label: o.label.clone(),
                log2_multiplicity: o.log2_multiplicity,
                prob: o.prob,
                log2_prob: o.log2_prob,
                error: o.error,
                good: o.good,
            })
            .collect(),
    })
}

/// `‖W W† − t t†‖₁` through the triangular factor of `[W, t]`, which has
/// the same nonzero spectrum without forming square roots.
fn low_rank_distance(w: &CMat, t: &CVec) -> f64 {
    let cols = w.ncols() + 1;
    let mut stacked = CMat::zeros(w.nrows(), cols);
    stacked.view_mut((0, 0), (w.nrows(), w.ncols())).copy_from(w);
    stacked.set_column(cols - 1, t);
    let r = stacked.qr().r();
    let mut signs = vec![1.0; cols];
    signs[cols - 1] = -1.0;
    let h = &r * linalg::real_diag(&signs) * r.adjoint();
    qmath::hermitian_trace_norm(&h).min(2.0)
}

fn run_dense(proto: &StandardFormProtocol, target: &ClassSpectrum, good_threshold: f64) -> Result<Vec<OutcomeState>> {
    if proto.dim_a != proto.dim_b {
        return Err(Error::InvalidArgument("input must be maximally entangled (equal local dimensions)".into()));
    }
    let d = proto.dim_a;
    let (ks, us) = proto.dense_parts()?;
    let q = expand_spectrum(target)?;

    let alice: Vec<usize> = (0..proto.alice_registers.len()).collect();
    let na = alice.len();
    let mut dims: Vec<usize> = proto.alice_registers.iter().map(|r| r.dim).collect();
    dims.extend(proto.bob_registers.iter().map(|r| r.dim));
    let regs: Vec<_> = proto.alice_registers.iter().chain(&proto.bob_registers).collect();
    let kept_a: Vec<usize> = (0..na).filter(|&i| !regs[i].discard).collect();
    let junk_a: Vec<usize> = (0..na).filter(|&i| regs[i].discard).collect();
    let kept_b: Vec<usize> = (na..regs.len()).filter(|&i| !regs[i].discard).collect();
    let junk_b: Vec<usize> = (na..regs.len()).filter(|&i| regs[i].discard).collect();
    let prod = |ix: &[usize]| ix.iter().map(|&i| dims[i]).product::<usize>();
    let (da, db) = (prod(&kept_a), prod(&kept_b));
    let (ja, jb) = (prod(&junk_a), prod(&junk_b));
    if q.len() > da || q.len() > db {
        return Err(Error::DimensionMismatch { expected: q.len(), got: da.min(db) });
    }
    let mut t = CVec::zeros(da * db);
    for (i, qi) in q.iter().enumerate() {
        t[i * db + i] = c(qi.sqrt(), 0.0);
    }
    let mut order = kept_a.clone();
    order.extend(&kept_b);
    order.extend(&junk_a);
    order.extend(&junk_b);
    let mut alice_order = kept_a.clone();
    alice_order.extend(&junk_a);

    let psi = CMat::identity(d, d) * c(1.0 / (d as f64).sqrt(), 0.0);
    let embed_b = linalg::kron(
        &CMat::identity(d, d),
        &CMat::from_column_slice(proto.bob_ancilla.len(), 1, proto.bob_ancilla.as_slice()),
    );
    let mut out = Vec::with_capacity(ks.len());
    for (k, (m, u)) in ks.iter().zip(&us).enumerate() {
        let phi = m * &psi * (u * &embed_b).transpose();
        let prob = phi.norm_squared();
        let label = format!("k={k}");
        if prob <= 1e-15 {
            out.push(OutcomeState {
                label,
                outcome: Some(k),
                log2_multiplicity: 0.0,
                prob,
                log2_prob: prob.log2(),
                error: 2.0,
                good: false,
                x: ReducedState::Dense { matrix: CMat::zeros(da * ja, da * ja), kept_dim: da, junk_dim: ja },
                gamma: CMat::identity(ja, ja) * c(1.0 / ja as f64, 0.0),
                state: None,
                y: None,
            });
            continue;
        }
        let state = CVec::from_iterator(phi.len(), phi.transpose().iter().copied()) / c(prob.sqrt(), 0.0);
        let arranged = linalg::permute_registers(&state, &dims, &order);
        let junk = ja * jb;
        // rows: kept AB, columns: junk
        let w = CMat::from_fn(da * db, junk, |i, j| arranged[i * junk + j]);
        let error = if junk == 1 {
            let col = w.column(0).into_owned();
            qmath::pure_trace_distance(&t, &col)?
        } else {
            low_rank_distance(&w, &t)
        };
        let x = linalg::reduce_pure(&state, &dims, &alice_order);
        let (gamma, extension_ok) = if junk == 1 {
            (CMat::identity(1, 1), true)
        } else {
            let split = PureBipartiteState::normalized(da * db, junk, arranged.clone())?;
            match qmath::nearest_product_extension(&split, &t) {
                Ok(ext) => (linalg::reduce_pure(&ext.gamma, &[ja, jb], &[0]), true),
                Err(Error::ZeroOverlap) | Err(Error::HypothesisViolated(_)) => {
                    (CMat::identity(ja, ja) * c(1.0 / ja as f64, 0.0), false)
                }
                Err(e) => return Err(e),
            }
        };
        let y = (da * db <= 256).then(|| &w * w.adjoint());
        out.push(OutcomeState {
            label,
            outcome: Some(k),
            log2_multiplicity: 0.0,
            prob,
            log2_prob: prob.log2(),
            error,
            good: extension_ok && error <= good_threshold,
            x: ReducedState::Dense { matrix: x, kept_dim: da, junk_dim: ja },
            gamma,
            state: Some(state),
            y,
        });
    }
    Ok(out)
}

/// Convenience wrapper: target `Σ √q_i |ii>` for an arbitrary profile.
pub fn run_protocol_on_profile(
    proto: &StandardFormProtocol,
    q: &qmath::SchmidtProfile,
    good_threshold: f64,
) -> Result<ProtocolRun> {
    let base = BaseSpectrum::new(q.probs())?;
    let spec = crate::spectrum::tensor_power_spectrum(&base, 1)?;
    run_protocol(proto, &spec, good_threshold)
}

/// Repetition of a probabilistic protocol until success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedReport {
    pub report: ProtocolRunReport,
    pub repetitions: f64,
    pub extra_bits: u32,
    /// Upper bound on the probability that every repetition fails.
    pub failure_bound: f64,
    /// Factor by which the consumed entanglement grows.
    pub entanglement_multiplier: f64,
}

/// Repeats Alice's measurement `R = ⌈2^s ln(1/eps_fail)⌉` times (once when
/// `s = 0`); the message grows by `⌈log₂ R⌉` bits to name the successful
/// round and `s` becomes `−log₂` of the new success probability.
pub fn lift_success_probability(report: &ProtocolRunReport, eps_fail: f64) -> Result<LiftedReport> {
    if !(eps_fail > 0.0 && eps_fail < 1.0) {
        return Err(Error::InvalidArgument(format!("failure probability {eps_fail} outside (0, 1)")));
    }
    if report.s.is_nan() || report.s < 0.0 {
        return Err(Error::InvalidArgument("report has negative s".into()));
    }
    let repetitions = if report.s == 0.0 { 1.0 } else { (report.s.exp2() * (1.0 / eps_fail).ln()).ceil().max(1.0) };
    let extra_bits = repetitions.log2().ceil() as u32;
    let per_round_failure = -(-report.s).exp2();
    // (1 − 2^{−s})^R via log1p for precision
    let failure_bound = if report.s == 0.0 { 0.0 } else { (repetitions * per_round_failure.ln_1p()).exp() };
    let mut lifted = report.clone();
    lifted.c = report.c + extra_bits;
    lifted.s = -(-failure_bound).ln_1p() / std::f64::consts::LN_2;
    Ok(LiftedReport { report: lifted, repetitions, extra_bits, failure_bound, entanglement_multiplier: repetitions })
}
