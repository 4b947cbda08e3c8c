//! The four experiment sweeps. Each computes its rows on a worker pool,
//! sorts them, and writes CSV/JSON into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use entlab_core::locc::certificate::{most_probable_good, verify_theorem_chain, Certificate, CertificateParams};
use entlab_core::locc::concentration::concentrate;
use entlab_core::locc::dilution::{keep_mass_for_target, BlockDilutionBuilder};
use entlab_core::locc::run::run_protocol;
use entlab_core::sigsub::{growth_fit, min_dilution_dimension, GrowthFit};
use entlab_core::spectrum::{berry_esseen_on, spectrum_stats, tensor_power_spectrum, BaseSpectrum, SpectrumStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};

/// Points per axis of the Berry–Esseen grid.
pub const GRID_POINTS: usize = 50;
/// Standardized half-width of the Berry–Esseen grid.
pub const GRID_HALF_WIDTH: f64 = 4.0;

pub const DEFAULT_INEFFICIENCY_EPSILON: f64 = 0.01;
pub const DEFAULT_COMMUNICATION_EPSILON: f64 = 0.1;

/// Intervals `[a, b]` (log₂-eigenvalue bounds) of the Berry–Esseen grid for
/// `n` copies: both endpoints range over `−nE + z α√n` with `z` in
/// `[−4, 4]`, keeping `a ≤ b`.
pub fn berry_esseen_grid(stats: &SpectrumStats, n: u64) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let z: Vec<f64> = (0..GRID_POINTS)
        .map(|i| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let at = |z: f64| -nf * stats.entropy + z * stats.alpha * nf.sqrt();
    let mut out = Vec::with_capacity(GRID_POINTS * (GRID_POINTS + 1) / 2);
    for (i, &za) in z.iter().enumerate() {
        for &zb in &z[i..] {
            out.push((at(za), at(zb)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenRow {
    pub n: u64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
    pub mu: f64,
    pub gaussian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InefficiencyRow {
    pub n: u64,
    pub epsilon: f64,
    #[serde(rename = "nE")]
    pub n_entropy: f64,
    pub lower_bits: f64,
    pub upper_bits: f64,
    #[serde(rename = "excess_over_nE")]
    pub excess_over_ne: f64,
    pub alpha_sqrt_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunicationRow {
    pub n: u64,
    pub epsilon: f64,
    pub c_star: u32,
    pub alpha_sqrt_n: f64,
    /// `c_star / (α√n)`.
    pub ratio: f64,
    /// Exact output error at `c_star`.
    pub target_error: f64,
    /// `⌈log₂ rank⌉`: with no truncation this budget gives an exact shift.
    pub full_rank_bits: u32,
    pub full_rank_error: f64,
    pub certificate_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub n: u64,
    pub epsilon: f64,
    pub budget: u32,
    /// Budget after clamping to `⌈log₂ d′⌉`.
    pub c: u32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n: u64,
    #[serde(rename = "nE")]
    pub n_entropy: f64,
    pub expected_yield: f64,
    pub deficit: f64,
    pub deficit_over_sqrt_n: f64,
}

fn base(config: &ExperimentConfig) -> Result<BaseSpectrum> {
    Ok(BaseSpectrum::new(&config.base_probs)?)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))
}

/// Evaluates `f` on every grid point in the configured pool, keeping input
/// order, and stops at the first error.
fn sweep<T: Send, I: Sync>(
    config: &ExperimentConfig,
    items: &[I],
    f: impl Fn(&I) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    pool(config.threads)?.install(|| items.par_iter().map(&f).collect())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(LabError::io(dir))
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(LabError::io(&path))?;
    Ok(path)
}

pub fn write_csv<T: Serialize>(path: PathBuf, rows: &[T]) -> Result<PathBuf> {
    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| LabError::Csv { path: p, source }
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(LabError::io(&path))?;
    Ok(path)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let err = |source| LabError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(err)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

pub fn berry_esseen_rows(p: &BaseSpectrum, n: u64, extra: &[(f64, f64)]) -> Result<Vec<BerryEsseenRow>> {
    let stats = spectrum_stats(p);
    stats.require_nondegenerate()?;
    let spec = tensor_power_spectrum(p, n)?;
    let mut cells = berry_esseen_grid(&stats, n);
    cells.extend_from_slice(extra);
    cells
        .into_iter()
        .map(|(a, b)| {
            let r = berry_esseen_on(&spec, &stats, a, b)?;
            Ok(BerryEsseenRow {
                n,
                a,
                b,
                residual: r.residual,
                bound: r.bound,
                pass: r.pass,
                mu: r.mu,
                gaussian: r.gaussian,
            })
        })
        .collect()
}

/// Writes `spectrum_n{n}.json` per grid point and `berry_esseen.csv`.
pub fn cmd_spectrum(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let p = base(config)?;
    spectrum_stats(&p).require_nondegenerate()?;
    ensure_dir(&config.out_dir)?;
    let per_n = sweep(config, &config.n_grid, |&n| {
        let spec = tensor_power_spectrum(&p, n)?;
        let rows = berry_esseen_rows(&p, n, &config.intervals)?;
        Ok((spec.to_json(), rows))
    })?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (&n, (spec_json, r)) in config.n_grid.iter().zip(per_n) {
        files.push(write_text(config.out_dir.join(format!("spectrum_n{n}.json")), &spec_json)?);
        rows.extend(r);
    }
    rows.sort_by(|x, y| (x.n, x.a, x.b).partial_cmp(&(y.n, y.a, y.b)).expect("finite grid"));
    files.push(write_csv(config.out_dir.join("berry_esseen.csv"), &rows)?);
    Ok(files)
}

pub fn inefficiency_row(p: &BaseSpectrum, n: u64, epsilon: f64) -> Result<InefficiencyRow> {
    let stats = spectrum_stats(p);
    let b = min_dilution_dimension(p, n, epsilon)?;
    let n_entropy = n as f64 * stats.entropy;
    Ok(InefficiencyRow {
        n,
        epsilon,
        n_entropy,
        lower_bits: b.lower,
        upper_bits: b.upper,
        excess_over_ne: b.lower - n_entropy,
        alpha_sqrt_n: stats.alpha * (n as f64).sqrt(),
    })
}

/// Writes `inefficiency.csv` and, per δ, the growth fit as
/// `growth_fit.json` (all δ) and `growth_fit_delta{δ}.csv`.
pub fn cmd_inefficiency(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let p = base(config)?;
    spectrum_stats(&p).require_nondegenerate()?;
    ensure_dir(&config.out_dir)?;
    let eps = config.epsilons_or(DEFAULT_INEFFICIENCY_EPSILON);
    let points: Vec<(u64, f64)> = config.n_grid.iter().flat_map(|&n| eps.iter().map(move |&e| (n, e))).collect();
    let mut rows = sweep(config, &points, |&(n, e)| inefficiency_row(&p, n, e))?;
    rows.sort_by(|x, y| (x.epsilon, x.n).partial_cmp(&(y.epsilon, y.n)).expect("finite"));
    let mut files = vec![write_csv(config.out_dir.join("inefficiency.csv"), &rows)?];
    let fits: Vec<GrowthFit> = sweep(config, &config.deltas, |&d| Ok(growth_fit(&p, d, &config.n_grid)?))?;
    for fit in &fits {
        files.push(write_text(config.out_dir.join(format!("growth_fit_delta{}.csv", fit.delta)), &fit.to_csv())?);
    }
    files.push(write_text(config.out_dir.join("growth_fit.json"), &json(&fits))?);
    Ok(files)
}

/// Minimal block-dilution budget for `n` copies reaching error `epsilon`,
/// with the run report and certificate at that budget.
#[derive(Debug, Clone)]
pub struct CommunicationResult {
    pub row: CommunicationRow,
    pub certificate: Option<Certificate>,
    pub budget_rows: Vec<BudgetRow>,
}

/// Smallest budget whose block dilution (keeping mass for `epsilon`)
/// reaches error `epsilon`, with that error.
pub fn minimal_budget(builder: &BlockDilutionBuilder, epsilon: f64) -> Result<(u32, f64)> {
    let keep = keep_mass_for_target(epsilon);
    let full = builder.build(u32::MAX, keep)?;
    let full_budget = full.family().c;
    if full.target_error > epsilon {
        return Err(LabError::Config(format!(
            "epsilon {epsilon} is unreachable: full-budget error is {}",
            full.target_error
        )));
    }
    // bisection assumes the error is nonincreasing in the budget
    let (mut lo, mut hi) = (0u32, full_budget);
    let mut err_hi = full.target_error;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let e = builder.build(mid, keep)?.target_error;
        if e <= epsilon {
            hi = mid;
            err_hi = e;
        } else {
            lo = mid + 1;
        }
    }
    Ok((hi, err_hi))
}

pub fn communication_point(p: &BaseSpectrum, n: u64, epsilon: f64, budgets: &[u32]) -> Result<CommunicationResult> {
    let stats = spectrum_stats(p);
    let spec = tensor_power_spectrum(p, n)?;
    let builder = BlockDilutionBuilder::new(&spec)?;
    let (c_star, target_error) = minimal_budget(&builder, epsilon)?;
    let exact = builder.build(u32::MAX, 1.0)?;
    let keep = keep_mass_for_target(epsilon);
    let built = builder.build(c_star, keep)?;
    let run = run_protocol(&built.protocol, &spec, epsilon)?;
    let certificate = match most_probable_good(&run.outcomes) {
        Some(outcome) => Some(verify_theorem_chain(outcome, p, n, &run.report, CertificateParams::default())?),
        None => None,
    };
    let alpha_sqrt_n = stats.alpha * (n as f64).sqrt();
    let row = CommunicationRow {
        n,
        epsilon,
        c_star,
        alpha_sqrt_n,
        ratio: c_star as f64 / alpha_sqrt_n,
        target_error,
        full_rank_bits: exact.family().c,
        full_rank_error: exact.target_error,
        certificate_consistent: certificate.as_ref().is_some_and(Certificate::is_consistent),
    };
    let budget_rows = budgets
        .iter()
        .map(|&budget| {
            let b = builder.build(budget, keep)?;
            Ok(BudgetRow { n, epsilon, budget, c: b.family().c, error: b.target_error })
        })
        .collect::<Result<_>>()?;
    Ok(CommunicationResult { row, certificate, budget_rows })
}

/// Writes `communication.csv`, `certificate_n{n}[_eps{ε}].json` per point
/// and, when budgets are configured, `communication_budgets.csv`.
pub fn cmd_communication(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let p = base(config)?;
    spectrum_stats(&p).require_nondegenerate()?;
    ensure_dir(&config.out_dir)?;
    let eps = config.epsilons_or(DEFAULT_COMMUNICATION_EPSILON);
    let points: Vec<(u64, f64)> = eps.iter().flat_map(|&e| config.n_grid.iter().map(move |&n| (n, e))).collect();
    let results = sweep(config, &points, |&(n, e)| communication_point(&p, n, e, &config.budgets))?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut budget_rows = Vec::new();
    for r in results {
        if let Some(cert) = &r.certificate {
            let name = if eps.len() == 1 {
                format!("certificate_n{}.json", r.row.n)
            } else {
                format!("certificate_n{}_eps{}.json", r.row.n, r.row.epsilon)
            };
            files.push(write_text(config.out_dir.join(name), &cert.to_json())?);
        }
        rows.push(r.row);
        budget_rows.extend(r.budget_rows);
    }
    rows.sort_by(|x, y| (x.epsilon, x.n).partial_cmp(&(y.epsilon, y.n)).expect("finite"));
    files.push(write_csv(config.out_dir.join("communication.csv"), &rows)?);
    if !budget_rows.is_empty() {
        budget_rows
            .sort_by(|x, y| (x.epsilon, x.n, x.budget).partial_cmp(&(y.epsilon, y.n, y.budget)).expect("finite"));
        files.push(write_csv(config.out_dir.join("communication_budgets.csv"), &budget_rows)?);
    }
    Ok(files)
}

pub fn concentration_row(p: &BaseSpectrum, n: u64) -> Result<ConcentrationRow> {
    let r = concentrate(p, n)?;
    Ok(ConcentrationRow {
        n,
        n_entropy: r.n_entropy,
        expected_yield: r.expected_yield,
        deficit: r.deficit,
        deficit_over_sqrt_n: r.deficit / (n as f64).sqrt(),
    })
}

/// Writes `concentration.csv`. Uniform spectra are allowed here: they give
/// zero deficit.
pub fn cmd_concentration(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let p = base(config)?;
    ensure_dir(&config.out_dir)?;
    let mut rows = sweep(config, &config.n_grid, |&n| concentration_row(&p, n))?;
    rows.sort_by_key(|r| r.n);
    Ok(vec![write_csv(config.out_dir.join("concentration.csv"), &rows)?])
}
