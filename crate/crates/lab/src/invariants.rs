//! Seeded randomized suites shared by `selftest` and the acceptance tests.
//! Each suite draws its instances from a single seed and counts violations.

use entlab_core::locc::dense::{compare_marginals, simulate_dense};
use entlab_core::locc::dilution::build_shift_dilution;
use entlab_core::locc::run::run_protocol_on_profile;
use entlab_core::locc::standard::{simulate_standard_dense, standardize};
use entlab_core::locc::toy::{random_toy, ToyShape};
use entlab_core::qmath::{self, c, linalg, CMat, DensityMatrix};
use entlab_core::random;
use entlab_core::sigsub::{check_prop1, check_prop2};
use entlab_core::{Result, EQUALITY_TOL};
use rand::Rng;
use serde::Serialize;

/// Outcome of one randomized suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest value of the suite's figure of merit (meaning depends on the
    /// suite: a tolerance-scaled defect or a distance).
    pub worst: f64,
    /// Description of the first violation, if any.
    pub first_violation: Option<String>,
}

impl SuiteReport {
    pub(crate) fn new(name: &str) -> Self {
        Self { name: name.to_string(), instances: 0, violations: 0, worst: 0.0, first_violation: None }
    }

    pub(crate) fn record(&mut self, ok: bool, merit: f64, describe: impl FnOnce() -> String) {
        self.instances += 1;
        self.worst = self.worst.max(merit);
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

/// Nearby state of rank at most `k + 1`: keep the top `k` eigenvectors of
/// `rho`, renormalize, then mix in a little of a random pure state.
fn nearby_low_rank(rng: &mut impl Rng, rho: &DensityMatrix, k: usize) -> DensityMatrix {
    let d = rho.dim();
    let (vals, vecs) = linalg::eigh(rho.matrix());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut m = CMat::zeros(d, d);
    let mut kept = 0.0;
    for &i in order.iter().take(k) {
        let v = vecs.column(i);
        m += v * v.adjoint() * c(vals[i].max(0.0), 0.0);
        kept += vals[i].max(0.0);
    }
    let t: f64 = rng.random_range(0.0..0.05);
    let v = random::unit_vector(rng, d);
    let m = m * c((1.0 - t) / kept, 0.0) + &v * v.adjoint() * c(t, 0.0);
    DensityMatrix::new(linalg::symmetrize(&m)).expect("mixture of states is a state")
}

/// `rank σ ≥ S(ρ, δ)` whenever `D(ρ, σ) ≤ 2(1 − δ)`, with `δ` pushed to the
/// largest admissible value on half the instances.
pub fn prop1_suite(seed: u64, count: usize, max_dim: usize) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let mut report = SuiteReport::new("rank perturbation");
    for i in 0..count {
        let d = rng.random_range(1..=max_dim);
        let rho = random::density_matrix_any_rank(&mut rng, d);
        let sigma = match rng.random_range(0..3) {
            0 => rho.clone(),
            1 => random::density_matrix_any_rank(&mut rng, d),
            _ => {
                let k = rng.random_range(1..=d);
                nearby_low_rank(&mut rng, &rho, k)
            }
        };
        let dist = qmath::trace_distance(&rho, &sigma)?;
        let top = (1.0 - dist / 2.0).clamp(0.0, 1.0);
        let delta = if rng.random_bool(0.5) { top } else { top * rng.random_range(0.0..1.0) };
        let check = check_prop1(&rho, &sigma, delta)?;
        report.record(check.holds, 0.0, || {
            format!("instance {i}: d = {d}, delta = {delta}, rank {} < S = {}", check.lhs, check.rhs)
        });
    }
    Ok(report)
}

/// `S(A⊗B, δ_A+δ_B) ≥ S(A⊗B, δ_A+δ_B−δ_Aδ_B) > (S(A,δ_A)−1)(S(B,δ_B)−1)`.
pub fn prop2_suite(seed: u64, count: usize, max_dim: usize) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let mut report = SuiteReport::new("tensor significance");
    for i in 0..count {
        let da = rng.random_range(1..=max_dim);
        let db = rng.random_range(1..=max_dim);
        let a = random::density_matrix_any_rank(&mut rng, da);
        let b = random::density_matrix_any_rank(&mut rng, db);
        let delta_a: f64 = rng.random_range(0.01..0.99);
        let delta_b = rng.random_range(0.005..=(1.0 - delta_a));
        let check = check_prop2(&a, &b, delta_a, delta_b)?;
        report.record(check.holds, 0.0, || {
            format!(
                "instance {i}: dims {da}x{db}, deltas ({delta_a}, {delta_b}): {} >= {} > {}",
                check.lhs, check.mid, check.rhs
            )
        });
    }
    Ok(report)
}

/// `1 − F ≤ D/2` on random pairs of mixed states of any rank.
pub fn fuchs_van_de_graaf_suite(seed: u64, count: usize, max_dim: usize) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let mut report = SuiteReport::new("fidelity vs trace distance");
    for i in 0..count {
        let d = rng.random_range(2..=max_dim);
        let a = random::density_matrix_any_rank(&mut rng, d);
        let b = if rng.random_bool(0.2) {
            nearby_low_rank(&mut rng, &a, d)
        } else {
            random::density_matrix_any_rank(&mut rng, d)
        };
        let f = qmath::fidelity(&a, &b)?;
        let dist = qmath::trace_distance(&a, &b)?;
        let gap = (1.0 - f) - dist / 2.0;
        report.record(gap <= EQUALITY_TOL, gap.max(0.0), || {
            format!("instance {i}: d = {d}, 1 - F = {}, D/2 = {}", 1.0 - f, dist / 2.0)
        });
    }
    Ok(report)
}

/// Product extension of a nearly product pure state. `linear` selects the
/// bound `D(ψ, φ⊗γ) < 2ε`; otherwise the square-root bound is checked.
pub fn product_extension_suite(seed: u64, count: usize, linear: bool) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let name = if linear { "product extension (linear bound)" } else { "product extension (square-root bound)" };
    let mut report = SuiteReport::new(name);
    let mut done = 0;
    while done < count {
        let da = rng.random_range(2..=4);
        let db = rng.random_range(2..=4);
        let phi = random::unit_vector(&mut rng, da);
        let gamma = random::unit_vector(&mut rng, db);
        let noise = random::pure_bipartite(&mut rng, da, db);
        let weight: f64 = 10f64.powf(rng.random_range(-4.0..-0.5));
        let amps = linalg::kron_vec(&phi, &gamma) + noise.amplitudes() * c(weight, 0.0);
        let psi = qmath::PureBipartiteState::normalized(da, db, amps)?;
        let ext = match qmath::nearest_product_extension(&psi, &phi) {
            Ok(e) => e,
            Err(entlab_core::Error::ZeroOverlap | entlab_core::Error::HypothesisViolated(_)) => continue,
            Err(e) => return Err(e),
        };
        done += 1;
        let (ok, bound) = if linear { (ext.holds_linear, ext.bound_linear) } else { (ext.holds_sqrt, ext.bound_sqrt) };
        report.record(ok, ext.distance / bound.max(f64::MIN_POSITIVE), || {
            format!("eps_in = {:.3e}: distance {:.3e} vs bound {:.3e}", ext.eps_in, ext.distance, bound)
        });
    }
    Ok(report)
}

/// Random programs reduce to one-way standard form with the same output
/// ensemble and message length. `worst` is the largest of total variation
/// and branch trace distance.
pub fn standardize_suite(first_seed: u64, count: usize, tol: f64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("standard form reduction");
    for seed in first_seed..first_seed + count as u64 {
        let (ir, psi) = random_toy(seed, ToyShape::default());
        let proto = standardize(&ir, &psi)?;
        let labels: Vec<String> = proto.outcome_labels.iter().map(|l| l.name.clone()).collect();
        let reference = simulate_dense(&ir, &psi)?.marginal(&labels);
        let got = simulate_standard_dense(&proto, &psi)?;
        let (tv, dist) = compare_marginals(&reference, &got);
        let bits_ok = proto.message_bits == ir.message_bits()? && proto.fits_message();
        let complete = proto.completeness_error() <= entlab_core::VALIDITY_TOL;
        report.record(tv <= tol && dist <= tol && bits_ok && complete, tv.max(dist), || {
            format!("seed {seed}: tv {tv:.3e}, distance {dist:.3e}, bits ok {bits_ok}, complete {complete}")
        });
    }
    Ok(report)
}

/// Shift dilution of random profiles with `d ≤ max_dim` is exact, uses
/// `⌈log₂ d⌉` bits and always succeeds.
pub fn shift_suite(seed: u64, count: usize, max_dim: usize) -> Result<SuiteReport> {
    let mut rng = random::rng(seed);
    let mut report = SuiteReport::new("exact shift dilution");
    for _ in 0..count {
        let d = rng.random_range(1..=max_dim);
        let q = random::profile(&mut rng, d);
        let proto = build_shift_dilution(&q)?;
        let complete = proto.completeness_error();
        let run = run_protocol_on_profile(&proto, &q, 1e-12)?;
        let r = &run.report;
        let bits = (d as f64).log2().ceil() as u32;
        let ok = r.epsilon <= 1e-12 && r.s == 0.0 && r.c == bits && complete <= 1e-10;
        report.record(ok, r.epsilon.max(complete), || {
            format!(
                "d = {d}: epsilon {:.3e}, s {}, c {} (want {bits}), completeness {complete:.3e}",
                r.epsilon, r.s, r.c
            )
        });
    }
    Ok(report)
}
