//! Quick invariant suite behind the `selftest` subcommand.

use std::fmt;

use entlab_core::locc::concentration::concentrate;
use entlab_core::spectrum::{gaussian_cdf, mu, spectrum_stats, tensor_power_spectrum, BaseSpectrum};
use entlab_core::ORACLE_TOL;

use crate::commands::{berry_esseen_rows, communication_point};
use crate::error::Result;
use crate::invariants::{self, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for reference; does not affect the exit status.
    Info,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub status: Status,
    pub name: String,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(ok: bool, name: &str, detail: String) -> Check {
    Check { status: if ok { Status::Pass } else { Status::Fail }, name: name.into(), detail }
}

fn suite(r: SuiteReport) -> Check {
    let detail = match &r.first_violation {
        None => format!("{} instances, worst {:.3e}", r.instances, r.worst),
        Some(v) => format!("{} of {} violated; first: {v}", r.violations, r.instances),
    };
    check(r.passed(), &r.name, detail)
}

/// Largest log-domain gap between class masses and a direct sum over all
/// `2^n` eigenvalues of `n` qubit copies.
fn enumeration_gap(p1: f64, n: u32) -> Result<f64> {
    let p = BaseSpectrum::qubit(p1)?;
    let spec = tensor_power_spectrum(&p, n as u64)?;
    let mut by_ones = vec![0.0f64; n as usize + 1];
    for word in 0u64..(1 << n) {
        let k = word.count_ones() as i32;
        by_ones[k as usize] += p1.powi(n as i32 - k) * (1.0 - p1).powi(k);
    }
    let mut worst = 0.0f64;
    for (k, mass) in by_ones.iter().enumerate() {
        let eig = (n as f64 - k as f64) * p1.log2() + k as f64 * (1.0 - p1).log2();
        let class = spec
            .classes
            .iter()
            .find(|c| (c.log2_eig - eig).abs() < 1e-9)
            .ok_or_else(|| entlab_core::Error::Numerical(format!("no class at {eig}")))?;
        worst = worst.max((class.log2_mass - mass.log2()).abs());
    }
    Ok(worst)
}

pub fn run_selftest(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let qubit = BaseSpectrum::qubit(0.75)?;

    let mut gap = 0.0f64;
    for n in 1..=10 {
        gap = gap.max(enumeration_gap(0.75, n)?);
    }
    out.push(check(gap <= ORACLE_TOL, "class spectrum vs enumeration", format!("n <= 10, worst log2 gap {gap:.3e}")));

    let two = tensor_power_spectrum(&qubit, 2)?;
    let m = mu(&two, -3.0, -1.0)?;
    out.push(check((m - 0.375).abs() <= ORACLE_TOL, "interval mass, two copies", format!("mu(-3, -1) = {m}")));

    let mut failed = 0;
    let mut cells = 0;
    for n in [64, 256, 1024] {
        let rows = berry_esseen_rows(&qubit, n, &[])?;
        cells += rows.len();
        failed += rows.iter().filter(|r| !r.pass).count();
    }
    out.push(check(failed == 0, "gaussian comparison", format!("{failed} of {cells} cells over bound")));

    out.push(suite(invariants::prop1_suite(seed, 200, 12)?));
    out.push(suite(invariants::prop2_suite(seed, 200, 8)?));
    out.push(suite(invariants::fuchs_van_de_graaf_suite(seed, 200, 8)?));
    out.push(suite(invariants::product_extension_suite(seed, 200, false)?));
    let linear = invariants::product_extension_suite(seed, 200, true)?;
    out.push(Check {
        status: Status::Info,
        name: linear.name.clone(),
        detail: format!(
            "{} of {} instances exceed 2 eps_in (expected: the exact distance scales as the square root)",
            linear.violations, linear.instances
        ),
    });
    out.push(suite(invariants::standardize_suite(seed, 20, 1e-9)?));
    out.push(suite(invariants::shift_suite(seed, 20, 64)?));

    let conc = concentrate(&qubit, 2)?;
    out.push(check(
        (conc.expected_yield - 0.375).abs() <= ORACLE_TOL,
        "concentration, two copies",
        format!("expected yield {}", conc.expected_yield),
    ));

    let comm = communication_point(&qubit, 64, 0.1, &[])?;
    out.push(check(
        comm.row.certificate_consistent && comm.row.target_error <= 0.1,
        "block dilution certificate",
        format!("n = 64: c* = {}, error {:.4}", comm.row.c_star, comm.row.target_error),
    ));

    let stats = spectrum_stats(&qubit);
    out.push(Check {
        status: Status::Info,
        name: "single-copy statistics".into(),
        detail: format!("E = {:.6}, alpha = {:.6}, beta = {:.6}", stats.entropy, stats.alpha, stats.beta),
    });
    let tail = gaussian_cdf(-1.1, f64::INFINITY)?;
    out.push(Check {
        status: Status::Info,
        name: "N(-1.1, inf)".into(),
        detail: format!("{tail:.6} under the standard normal; the reference value 0.94 does not match"),
    });
    Ok(out)
}
