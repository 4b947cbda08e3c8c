//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use entlab::commands::{berry_esseen_grid, communication_point, concentration_row, inefficiency_row};
use entlab::invariants::{self, SuiteReport};
use entlab_core::locc::dilution::{keep_mass_for_target, BlockDilutionBuilder};
use entlab_core::sigsub::growth_fit;
use entlab_core::spectrum::{berry_esseen_on, gaussian_quantile, spectrum_stats, tensor_power_spectrum, BaseSpectrum};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn qubit(p: f64) -> BaseSpectrum {
    BaseSpectrum::qubit(p).expect("valid qubit spectrum")
}

fn suite_detail(r: &SuiteReport) -> String {
    match &r.first_violation {
        None => format!("{}: {} instances, 0 violations, worst {:.3e}", r.name, r.instances, r.worst),
        Some(v) => format!("{}: {} of {} violated (first: {v})", r.name, r.violations, r.instances),
    }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (elapsed <= limit, format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

/// Class masses against a direct sum over all `2^n` words, in the log
/// domain, for `p = (3/4, 1/4)` and `n ≤ 14`.
fn spectrum_enumeration() -> Verdict {
    let start = Instant::now();
    let p1: f64 = 0.75;
    let mut worst = 0.0f64;
    let mut missing = 0;
    for n in 1..=14u32 {
        let spec = tensor_power_spectrum(&qubit(p1), n as u64).unwrap();
        let mut by_ones = vec![0.0f64; n as usize + 1];
        let mut count = vec![0u64; n as usize + 1];
        for word in 0u64..(1 << n) {
            let mut prod = 1.0;
            for bit in 0..n {
                prod *= if word >> bit & 1 == 1 { 1.0 - p1 } else { p1 };
            }
            let k = word.count_ones() as usize;
            by_ones[k] += prod;
            count[k] += 1;
        }
        if spec.classes.len() != n as usize + 1 {
            missing += 1;
        }
        for k in 0..=n as usize {
            let eig = (n as f64 - k as f64) * p1.log2() + k as f64 * (1.0 - p1).log2();
            match spec.classes.iter().find(|c| (c.log2_eig - eig).abs() < 1e-9) {
                Some(c) => {
                    worst = worst.max((c.log2_mass - by_ones[k].log2()).abs());
                    worst = worst.max((c.log2_mult - (count[k] as f64).log2()).abs());
                }
                None => missing += 1,
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(10), start.elapsed());
    verdict(
        worst <= 1e-12 && missing == 0 && fast,
        format!("n <= 14, worst log2 mass/multiplicity gap {worst:.3e}, {missing} unmatched classes, {time}"),
    )
}

/// Residual `|μ − Gaussian|` below `25β/√n` on the 50×50 grid.
fn berry_esseen() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut failing = 0;
    for p1 in [0.6, 0.75, 0.9] {
        let p = qubit(p1);
        let stats = spectrum_stats(&p);
        let mut bad = 0;
        let mut cells = 0;
        let mut worst_ratio = 0.0f64;
        for n in [100, 400, 1600, 6400] {
            let spec = tensor_power_spectrum(&p, n).unwrap();
            for (a, b) in berry_esseen_grid(&stats, n) {
                let r = berry_esseen_on(&spec, &stats, a, b).unwrap();
                cells += 1;
                worst_ratio = worst_ratio.max(r.residual / r.bound);
                if !r.pass {
                    bad += 1;
                }
            }
        }
        failing += bad;
        parts.push(format!("p1={p1}: {bad}/{cells} over, worst residual/bound {worst_ratio:.3}"));
    }
    let (fast, time) = within(Duration::from_secs(60), start.elapsed());
    verdict(failing == 0 && fast, format!("{}; {time}", parts.join("; ")))
}

fn prop_suites() -> Verdict {
    let start = Instant::now();
    let a = invariants::prop1_suite(101, 1000, 12).unwrap();
    let b = invariants::prop2_suite(102, 1000, 8).unwrap();
    let (fast, time) = within(Duration::from_secs(60), start.elapsed());
    verdict(a.passed() && b.passed() && fast, format!("{}; {}; {time}", suite_detail(&a), suite_detail(&b)))
}

/// Fitted `√n` coefficient of `log₂ S(ρⁿ, 0.95) − nE` within 10% of
/// `Φ⁻¹(0.95) α`.
fn growth_scaling() -> Verdict {
    let start = Instant::now();
    let mut grid: Vec<u64> = (0..21).map(|i| (100.0 * 100f64.powf(i as f64 / 20.0)).round() as u64).collect();
    grid.dedup();
    let p = qubit(0.75);
    let fit = growth_fit(&p, 0.95, &grid).unwrap();
    let target = gaussian_quantile(0.95).unwrap() * fit.alpha;
    let rel = (fit.fitted_coeff - target).abs() / target;
    let c_min = fit.measured_c.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = fit.measured_c.iter().cloned().fold(0.0, f64::max);
    let (fast, time) = within(Duration::from_secs(300), start.elapsed());
    verdict(
        rel <= 0.10 && fast,
        format!(
            "coefficient {:.4} vs {target:.4} ({:.1}% off), alpha {:.4}, measured C in [{c_min:.3}, {c_max:.3}], {time}",
            fit.fitted_coeff,
            100.0 * rel,
            fit.alpha
        ),
    )
}

fn standard_form() -> Verdict {
    let start = Instant::now();
    let r = invariants::standardize_suite(0, 200, 1e-9).unwrap();
    let (fast, time) = within(Duration::from_secs(120), start.elapsed());
    verdict(r.passed() && fast, format!("{}; {time}", suite_detail(&r)))
}

fn shift_dilution() -> Verdict {
    let r = invariants::shift_suite(106, 200, 64).unwrap();
    verdict(r.passed(), suite_detail(&r))
}

/// Minimal budget ratios `c*(4n)/c*(n)` in `[1.6, 2.4]`, consistent
/// certificates, and minimality of each `c*`.
fn communication_scaling() -> Verdict {
    let start = Instant::now();
    let p = qubit(0.75);
    let eps = 0.1;
    let grid = [64u64, 256, 1024, 4096];
    let mut c_star = Vec::new();
    let mut consistent = true;
    let mut minimal = true;
    for &n in &grid {
        let r = communication_point(&p, n, eps, &[]).unwrap();
        consistent &= r.row.certificate_consistent && r.certificate.is_some();
        if r.row.c_star > 0 {
            let spec = tensor_power_spectrum(&p, n).unwrap();
            let below =
                BlockDilutionBuilder::new(&spec).unwrap().build(r.row.c_star - 1, keep_mass_for_target(eps)).unwrap();
            minimal &= below.target_error > eps;
        }
        c_star.push(r.row.c_star);
    }
    let ratios: Vec<f64> = c_star.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let in_band = ratios.iter().all(|r| (1.6..=2.4).contains(r));
    let (fast, time) = within(Duration::from_secs(600), start.elapsed());
    verdict(
        in_band && consistent && minimal && fast,
        format!(
            "c* = {c_star:?}, ratios {:?}, certificates consistent {consistent}, minimal {minimal}, {time}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

/// `(lower − nE)/√n` positive and nondecreasing within 5%; upper ≥ lower.
fn inefficiency() -> Verdict {
    let p = qubit(0.75);
    let rows: Vec<_> =
        [256u64, 512, 1024, 2048, 4096].iter().map(|&n| inefficiency_row(&p, n, 0.01).unwrap()).collect();
    let scaled: Vec<f64> = rows.iter().map(|r| r.excess_over_ne / (r.n as f64).sqrt()).collect();
    let positive = scaled.iter().all(|&v| v > 0.0);
    let monotone = scaled.windows(2).all(|w| w[1] >= 0.95 * w[0]);
    let ordered = rows.iter().all(|r| r.upper_bits >= r.lower_bits);
    verdict(
        positive && monotone && ordered,
        format!(
            "excess/sqrt(n) = {:?}, upper >= lower {ordered}",
            scaled.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    )
}

/// `(nE − yield)/√n` within `[0.2, 0.6] α`.
fn concentration() -> Verdict {
    let p = qubit(0.75);
    let alpha = spectrum_stats(&p).alpha;
    let ratios: Vec<f64> = [256u64, 512, 1024, 2048, 4096]
        .iter()
        .map(|&n| concentration_row(&p, n).unwrap().deficit_over_sqrt_n / alpha)
        .collect();
    let ok = ratios.iter().all(|r| (0.2..=0.6).contains(r));
    verdict(
        ok,
        format!(
            "deficit/(alpha sqrt n) = {:?} for n = 256..4096",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn extension_and_fidelity() -> Verdict {
    let a = invariants::product_extension_suite(110, 1000, true).unwrap();
    let b = invariants::fuchs_van_de_graaf_suite(111, 1000, 8).unwrap();
    verdict(a.passed() && b.passed(), format!("{}; {}", suite_detail(&a), suite_detail(&b)))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("spectrum vs enumeration", spectrum_enumeration),
        ("gaussian comparison bound", berry_esseen),
        ("rank perturbation and tensor significance", prop_suites),
        ("significant-dimension growth", growth_scaling),
        ("standard form reduction", standard_form),
        ("exact shift dilution", shift_dilution),
        ("communication scaling", communication_scaling),
        ("dilution inefficiency", inefficiency),
        ("concentration deficit", concentration),
        ("product extension and fidelity", extension_and_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {:>2} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
