//! Re-derives rows of written CSV files from the underlying library calls.

use std::path::Path;

use entlab_core::spectrum::{berry_esseen_on, spectrum_stats, tensor_power_spectrum, BaseSpectrum};

use crate::commands::{
    communication_point, concentration_row, inefficiency_row, read_csv, BerryEsseenRow, CommunicationRow,
    ConcentrationRow, InefficiencyRow,
};
use crate::error::Result;
use crate::invariants::SuiteReport;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Checks every row of each CSV present in `dir` against a fresh
/// computation for base spectrum `p`. Files that are absent are skipped.
pub fn spot_check(dir: &Path, p: &BaseSpectrum) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("csv spot check");

    let path = dir.join("berry_esseen.csv");
    if path.exists() {
        let rows: Vec<BerryEsseenRow> = read_csv(&path)?;
        let stats = spectrum_stats(p);
        let mut cached: Option<(u64, entlab_core::spectrum::ClassSpectrum)> = None;
        for row in rows {
            if cached.as_ref().is_none_or(|(n, _)| *n != row.n) {
                cached = Some((row.n, tensor_power_spectrum(p, row.n)?));
            }
            let spec = &cached.as_ref().expect("just filled").1;
            let r = berry_esseen_on(spec, &stats, row.a, row.b)?;
            let ok = close(r.residual, row.residual) && close(r.bound, row.bound) && r.pass == row.pass;
            report.record(ok, 0.0, || format!("berry_esseen n={} a={} b={}", row.n, row.a, row.b));
        }
    }

    let path = dir.join("inefficiency.csv");
    if path.exists() {
        for row in read_csv::<InefficiencyRow>(&path)? {
            let fresh = inefficiency_row(p, row.n, row.epsilon)?;
            let ok = close(fresh.lower_bits, row.lower_bits) && close(fresh.upper_bits, row.upper_bits);
            report.record(ok, 0.0, || format!("inefficiency n={} eps={}", row.n, row.epsilon));
        }
    }

    let path = dir.join("communication.csv");
    if path.exists() {
        for row in read_csv::<CommunicationRow>(&path)? {
            let fresh = communication_point(p, row.n, row.epsilon, &[])?.row;
            let ok = fresh.c_star == row.c_star && close(fresh.target_error, row.target_error);
            report.record(ok, 0.0, || format!("communication n={} eps={}", row.n, row.epsilon));
        }
    }

    let path = dir.join("concentration.csv");
    if path.exists() {
        for row in read_csv::<ConcentrationRow>(&path)? {
            let fresh = concentration_row(p, row.n)?;
            let ok = close(fresh.expected_yield, row.expected_yield) && close(fresh.deficit, row.deficit);
            report.record(ok, 0.0, || format!("concentration n={}", row.n));
        }
    }
    Ok(report)
}
