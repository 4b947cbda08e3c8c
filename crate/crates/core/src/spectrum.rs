//! Spectra of tensor powers `ρ^{⊗n}` grouped into equal-eigenvalue classes,
//! with the moment statistics and Gaussian comparison used for typicality
//! estimates.
//!
//! Everything is kept in the base-2 log domain: at a few thousand copies the
//! individual eigenvalues are far below the smallest positive `f64`.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classes whose log₂-eigenvalues differ by at most this many bits merge.
pub const MERGE_TOL_BITS: f64 = 1e-12;

/// Default ceiling on the number of compositions enumerated.
pub const DEFAULT_CLASS_CAP: f64 = 5e7;

/// Positive single-copy eigenvalues, sorted nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpectrum {
    probs: Vec<f64>,
}

impl BaseSpectrum {
    /// Drops zero entries, checks the sum, sorts descending.
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::InvalidProbabilities("entries must lie in [0, 1]".into()));
        }
        let mut kept: Vec<f64> = probs.iter().copied().filter(|&p| p > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::InvalidProbabilities("no positive entries".into()));
        }
        let total: f64 = kept.iter().sum();
        if (total - 1.0).abs() > crate::ORACLE_TOL {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        kept.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { probs: kept })
    }

    /// Two-level spectrum `(p, 1 − p)`.
    pub fn qubit(p: f64) -> Result<Self> {
        Self::new(&[p, 1.0 - p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Distinct values with their multiplicities, descending.
    fn distinct(&self) -> Vec<(f64, u64)> {
        let mut out: Vec<(f64, u64)> = Vec::new();
        for &p in &self.probs {
            match out.last_mut() {
                Some((v, g)) if (*v - p).abs() <= 1e-15 * v.abs() => *g += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }
}

/// Entropy and central moments of `−log₂ p` under `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    /// Entropy in bits.
    pub entropy: f64,
    /// Standard deviation of `−log₂ p`.
    pub alpha: f64,
    /// Third absolute central moment of `−log₂ p`.
    pub beta: f64,
    /// Set when `alpha` vanishes (uniform or pure spectrum).
    pub degenerate: bool,
}

impl SpectrumStats {
    pub fn require_nondegenerate(&self) -> Result<()> {
        if self.degenerate {
            Err(Error::DegenerateSpectrum)
        } else {
            Ok(())
        }
    }
}

pub fn spectrum_stats(p: &BaseSpectrum) -> SpectrumStats {
    let entropy: f64 = p.probs.iter().map(|&x| -x * x.log2()).sum();
    let dev = |x: f64| x.log2() + entropy;
    let var: f64 = p.probs.iter().map(|&x| x * dev(x).powi(2)).sum();
    let beta: f64 = p.probs.iter().map(|&x| x * dev(x).abs().powi(3)).sum();
    let alpha = var.max(0.0).sqrt();
    SpectrumStats { entropy, alpha, beta, degenerate: alpha < 1e-12 }
}

/// One group of equal eigenvalues of `ρ^{⊗n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumClass {
    pub log2_eig: f64,
    pub log2_mult: f64,
    pub log2_mass: f64,
}

impl SpectrumClass {
    pub fn mass(&self) -> f64 {
        self.log2_mass.exp2()
    }

    pub fn eigenvalue(&self) -> f64 {
        self.log2_eig.exp2()
    }

    pub fn multiplicity(&self) -> f64 {
        self.log2_mult.exp2()
    }
}

/// Spectrum of `ρ^{⊗n}` as classes sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub n: u64,
    pub base_probs: Vec<f64>,
    pub classes: Vec<SpectrumClass>,
}

/// `log₂ Σ 2^{x_i}`; `-∞` for an empty input.
pub fn log2_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|x| (x - max).exp2()).sum();
    max + sum.log2()
}

fn log2_factorial(k: u64) -> f64 {
    libm::lgamma(k as f64 + 1.0) / std::f64::consts::LN_2
}

/// Number of compositions of `n` into `parts` nonnegative parts, as `f64`.
fn composition_count(n: u64, parts: usize) -> f64 {
    if parts <= 1 {
        return 1.0;
    }
    let k = parts as u64 - 1;
    (log2_factorial(n + k) - log2_factorial(n) - log2_factorial(k)).exp2()
}

struct RawClass {
    log2_eig: f64,
    log2_mult: f64,
    exact: Option<BigUint>,
}

/// Enumerates compositions over the distinct base values. The multiplicity of
/// a composition `t` is `n!/Π t_i! · Π g_i^{t_i}` for value multiplicities `g`.
fn enumerate(base: &BaseSpectrum, n: u64, cap: f64, exact: bool) -> Result<Vec<RawClass>> {
    let distinct = base.distinct();
    let count = composition_count(n, distinct.len());
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let logs: Vec<f64> = distinct.iter().map(|(v, _)| v.log2()).collect();
    let log_g: Vec<f64> = distinct.iter().map(|(_, g)| (*g as f64).log2()).collect();
    let mut out = Vec::with_capacity(count as usize);
    let ln_n = log2_factorial(n);

    struct Walk<'a> {
        logs: &'a [f64],
        log_g: &'a [f64],
        g: Vec<u64>,
        exact: bool,
        ln_n: f64,
    }

    fn rec(
        w: &Walk,
        depth: usize,
        remaining: u64,
        log_eig: f64,
        log_mult: f64,
        exact_mult: Option<&BigUint>,
        out: &mut Vec<RawClass>,
    ) {
        let last = depth + 1 == w.logs.len();
        if last {
            let t = remaining;
            let exact = exact_mult.map(|m| m * BigUint::from(w.g[depth]).pow(t as u32));
            out.push(RawClass {
                log2_eig: log_eig + t as f64 * w.logs[depth],
                log2_mult: w.ln_n + log_mult - log2_factorial(t) + t as f64 * w.log_g[depth],
                exact,
            });
            return;
        }
        // binomial C(remaining, t) tracked incrementally for the exact path
        let mut binom = BigUint::from(1u32);
        for t in 0..=remaining {
            if t > 0 && w.exact {
                binom = binom * BigUint::from(remaining - t + 1) / BigUint::from(t);
            }
            let child_exact = exact_mult.map(|m| m * &binom * BigUint::from(w.g[depth]).pow(t as u32));
            rec(
                w,
                depth + 1,
                remaining - t,
                log_eig + t as f64 * w.logs[depth],
                log_mult - log2_factorial(t) + t as f64 * w.log_g[depth],
                child_exact.as_ref(),
                out,
            );
        }
    }

    let walk = Walk { logs: &logs, log_g: &log_g, g: distinct.iter().map(|(_, g)| *g).collect(), exact, ln_n };
    let one = BigUint::from(1u32);
    rec(&walk, 0, n, 0.0, 0.0, exact.then_some(&one), &mut out);
    Ok(out)
}

/// Sorts descending and merges runs of eigenvalues within the merge tolerance.
fn merge(mut raw: Vec<RawClass>) -> Vec<(SpectrumClass, Option<BigUint>)> {
    raw.sort_by(|a, b| b.log2_eig.total_cmp(&a.log2_eig));
    let mut out: Vec<(SpectrumClass, Option<BigUint>)> = Vec::new();
    let mut run: Vec<RawClass> = Vec::new();
    let flush = |run: &mut Vec<RawClass>, out: &mut Vec<(SpectrumClass, Option<BigUint>)>| {
        if run.is_empty() {
            return;
        }
        let log2_eig = run[0].log2_eig;
        let log2_mult = log2_sum_exp(run.iter().map(|r| r.log2_mult));
        let exact = if run.iter().all(|r| r.exact.is_some()) {
            Some(run.iter().map(|r| r.exact.clone().unwrap_or_default()).sum())
        } else {
            None
        };
        let log2_mass = log2_sum_exp(run.iter().map(|r| r.log2_mult + r.log2_eig));
        out.push((SpectrumClass { log2_eig, log2_mult, log2_mass }, exact));
        run.clear();
    };
    for r in raw {
        if let Some(first) = run.first() {
            if first.log2_eig - r.log2_eig > MERGE_TOL_BITS {
                flush(&mut run, &mut out);
            }
        }
        run.push(r);
    }
    flush(&mut run, &mut out);
    out
}

pub fn tensor_power_spectrum(p: &BaseSpectrum, n: u64) -> Result<ClassSpectrum> {
    tensor_power_spectrum_with_cap(p, n, DEFAULT_CLASS_CAP)
}

pub fn tensor_power_spectrum_with_cap(p: &BaseSpectrum, n: u64, cap: f64) -> Result<ClassSpectrum> {
    if n == 0 {
        return Err(Error::InvalidArgument("copy count must be at least 1".into()));
    }
    let classes = merge(enumerate(p, n, cap, false)?).into_iter().map(|(c, _)| c).collect();
    Ok(ClassSpectrum { n, base_probs: p.probs.clone(), classes })
}

impl ClassSpectrum {
    pub fn base(&self) -> Result<BaseSpectrum> {
        BaseSpectrum::new(&self.base_probs)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// `log₂` of the total mass; zero for a valid spectrum.
    pub fn log2_total_mass(&self) -> f64 {
        log2_sum_exp(self.classes.iter().map(|c| c.log2_mass))
    }

    /// `log₂` of the total multiplicity, `n log₂ d` for a valid spectrum.
    pub fn log2_total_mult(&self) -> f64 {
        log2_sum_exp(self.classes.iter().map(|c| c.log2_mult))
    }

    /// Exact integer multiplicity of every class, in class order.
    pub fn exact_multiplicities(&self) -> Result<Vec<BigUint>> {
        let base = self.base()?;
        let merged = merge(enumerate(&base, self.n, f64::INFINITY, true)?);
        if merged.len() != self.classes.len() {
            return Err(Error::Numerical("class structure changed on exact recount".into()));
        }
        Ok(merged.into_iter().map(|(_, m)| m.unwrap_or_default()).collect())
    }

    /// Checks the normalization and per-class consistency invariants.
    pub fn validate(&self) -> Result<()> {
        let base = self.base()?;
        let total = self.log2_total_mass();
        if total.is_nan() || total.abs() > 1e-10 / std::f64::consts::LN_2 {
            return Err(Error::Numerical(format!("log2 total mass {total}")));
        }
        let expect = self.n as f64 * (base.dim() as f64).log2();
        let got = self.log2_total_mult();
        if (got - expect).abs() > 1e-6 * expect.max(1.0) {
            return Err(Error::Numerical(format!("log2 multiplicity {got}, expected {expect}")));
        }
        for w in self.classes.windows(2) {
            if w[0].log2_eig <= w[1].log2_eig {
                return Err(Error::Numerical("classes are not strictly descending".into()));
            }
        }
        for c in &self.classes {
            if (c.log2_mass - c.log2_mult - c.log2_eig).abs() > 1e-10 * c.log2_mass.abs().max(1.0) {
                return Err(Error::Numerical("class mass inconsistent with eigenvalue".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Total mass of classes with eigenvalue in `[2^a, 2^b]`, ends inclusive.
pub fn mu(spec: &ClassSpectrum, a: f64, b: f64) -> Result<f64> {
    if a > b || a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    let inside = spec
        .classes
        .iter()
        .filter(|c| c.log2_eig >= a - MERGE_TOL_BITS && c.log2_eig <= b + MERGE_TOL_BITS)
        .map(|c| c.log2_mass);
    Ok(log2_sum_exp(inside).exp2().min(1.0))
}

/// Upper tail `P(Z > x)` of the standard normal.
fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal mass of `[x1, x2]`; infinite endpoints are allowed.
pub fn gaussian_cdf(x1: f64, x2: f64) -> Result<f64> {
    if x1 > x2 || x1.is_nan() || x2.is_nan() {
        return Err(Error::InvalidArgument(format!("empty interval [{x1}, {x2}]")));
    }
    // subtract the two tails on whichever side keeps both terms small
    let value = if x1 >= 0.0 {
        upper_tail(x1) - upper_tail(x2)
    } else if x2 <= 0.0 {
        upper_tail(-x2) - upper_tail(-x1)
    } else {
        1.0 - upper_tail(-x1) - upper_tail(x2)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    upper_tail(-x)
}

/// Inverse of [`normal_cdf`] by Newton iteration, for `0 < p < 1`.
pub fn gaussian_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level {p} outside (0, 1)")));
    }
    if p > 0.5 {
        return gaussian_quantile(1.0 - p).map(|x| -x);
    }
    // Work with the lower tail so precision survives p near 0.
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut x = -(-2.0 * p.ln()).sqrt();
    for _ in 0..100 {
        let step = (normal_cdf(x) - p) / density(x).max(f64::MIN_POSITIVE);
        x -= step.clamp(-1.0, 1.0);
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Comparison of `μ(a, b)` with its Gaussian approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseen {
    pub mu: f64,
    pub gaussian: f64,
    pub residual: f64,
    /// `25 β / √n`.
    pub bound: f64,
    pub pass: bool,
}

pub fn berry_esseen_residual(p: &BaseSpectrum, n: u64, a: f64, b: f64) -> Result<BerryEsseen> {
    let stats = spectrum_stats(p);
    stats.require_nondegenerate()?;
    let spec = tensor_power_spectrum(p, n)?;
    berry_esseen_on(&spec, &stats, a, b)
}

/// Same as [`berry_esseen_residual`] with the spectrum and statistics
/// already computed.
pub fn berry_esseen_on(spec: &ClassSpectrum, stats: &SpectrumStats, a: f64, b: f64) -> Result<BerryEsseen> {
    stats.require_nondegenerate()?;
    let n = spec.n as f64;
    let mass = mu(spec, a, b)?;
    let scale = n.sqrt() * stats.alpha;
    let ne = n * stats.entropy;
    let gaussian = gaussian_cdf((a + ne) / scale, (b + ne) / scale)?;
    let residual = (mass - gaussian).abs();
    let bound = 25.0 * stats.beta / n.sqrt();
    Ok(BerryEsseen { mu: mass, gaussian, residual, bound, pass: residual < bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qubit(p: f64) -> BaseSpectrum {
        BaseSpectrum::qubit(p).unwrap()
    }

    #[test]
    fn base_spectrum_strips_and_sorts() {
        let b = BaseSpectrum::new(&[0.25, 0.0, 0.75]).unwrap();
        assert_eq!(b.probs(), &[0.75, 0.25]);
        assert!(BaseSpectrum::new(&[0.5, 0.4]).is_err());
        assert!(BaseSpectrum::new(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = spectrum_stats(&qubit(0.5));
        assert_abs_diff_eq!(s.entropy, 1.0, epsilon = 1e-15);
        assert!(s.degenerate);
        let s = spectrum_stats(&BaseSpectrum::new(&[1.0]).unwrap());
        assert_eq!((s.entropy, s.alpha, s.beta, s.degenerate), (0.0, 0.0, 0.0, true));
        // 40-digit reference values
        let s = spectrum_stats(&qubit(0.75));
        assert_abs_diff_eq!(s.entropy, 0.811_278_124_459_132_9, epsilon = 1e-14);
        assert_abs_diff_eq!(s.alpha, 0.686_308_894_835_116_5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.beta, 0.466_593_048_258_870_5, epsilon = 1e-14);
        assert!(!s.degenerate);
    }

    #[test]
    fn two_copy_classes() {
        let spec = tensor_power_spectrum(&qubit(0.75), 2).unwrap();
        let eig: Vec<f64> = spec.classes.iter().map(|c| c.eigenvalue()).collect();
        let mult: Vec<f64> = spec.classes.iter().map(|c| c.multiplicity()).collect();
        for (got, want) in eig.iter().zip([9.0 / 16.0, 3.0 / 16.0, 1.0 / 16.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in mult.iter().zip([1.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        spec.validate().unwrap();
        let exact = spec.exact_multiplicities().unwrap();
        assert_eq!(exact, vec![1u32.into(), 2u32.into(), 1u32.into()]);
    }

    #[test]
    fn uniform_collapses_to_one_class() {
        let spec = tensor_power_spectrum(&qubit(0.5), 5).unwrap();
        assert_eq!(spec.len(), 1);
        assert_abs_diff_eq!(spec.classes[0].log2_eig, -5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.classes[0].log2_mult, 5.0, epsilon = 1e-12);
        assert_eq!(spec.exact_multiplicities().unwrap(), vec![BigUint::from(32u32)]);
    }

    #[test]
    fn three_level_matches_product_enumeration() {
        let p = [0.6, 0.3, 0.1];
        let spec = tensor_power_spectrum(&BaseSpectrum::new(&p).unwrap(), 3).unwrap();
        assert_eq!(spec.len(), 10);
        let mut brute: Vec<f64> = Vec::new();
        for i in 0..27usize {
            brute.push(p[i % 3] * p[(i / 3) % 3] * p[i / 9]);
        }
        for class in &spec.classes {
            let count = brute.iter().filter(|&&x| (x.log2() - class.log2_eig).abs() < 1e-9).count();
            assert_abs_diff_eq!(class.multiplicity(), count as f64, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(spec.log2_total_mass(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn symmetric_values_merge() {
        // 0.4·0.1 and 0.2·0.2 coincide
        let spec = tensor_power_spectrum(&BaseSpectrum::new(&[0.4, 0.2, 0.2, 0.1, 0.1]).unwrap(), 2).unwrap();
        spec.validate().unwrap();
        let exact = spec.exact_multiplicities().unwrap();
        let total: BigUint = exact.iter().sum();
        assert_eq!(total, BigUint::from(25u32));
        let at_004 = spec.classes.iter().position(|c| (c.eigenvalue() - 0.04).abs() < 1e-15).unwrap();
        assert_eq!(exact[at_004], BigUint::from(8u32));
    }

    #[test]
    fn cap_is_enforced() {
        let b = BaseSpectrum::new(&[0.5, 0.3, 0.2]).unwrap();
        assert!(matches!(tensor_power_spectrum_with_cap(&b, 100, 1000.0), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn mu_examples() {
        let spec = tensor_power_spectrum(&qubit(0.75), 2).unwrap();
        assert_abs_diff_eq!(mu(&spec, f64::NEG_INFINITY, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mu(&spec, -3.0, -1.0).unwrap(), 3.0 / 8.0, epsilon = 1e-15);
        assert_eq!(mu(&spec, -100.0, -10.0).unwrap(), 0.0);
        // closed ends count boundary atoms
        let at = (3.0f64 / 16.0).log2();
        assert_abs_diff_eq!(mu(&spec, at, at).unwrap(), 3.0 / 8.0, epsilon = 1e-15);
        assert!(mu(&spec, 0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_cdf_reference_values() {
        assert_eq!(gaussian_cdf(f64::NEG_INFINITY, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(gaussian_cdf(0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_cdf(-1.0, 1.0).unwrap(), 0.682_689_492_137_085_9, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_cdf(-1.1, f64::INFINITY).unwrap(), 0.864_333_939_053_617_3, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_cdf(2.0, 3.0).unwrap(), 0.021_400_233_916_549_11, epsilon = 1e-16);
        assert_abs_diff_eq!(gaussian_cdf(f64::NEG_INFINITY, -8.0).unwrap(), 6.220_960_574_271_784e-16, epsilon = 1e-27);
        assert!(gaussian_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        assert_abs_diff_eq!(gaussian_quantile(0.95).unwrap(), 1.644_853_626_951_472_7, epsilon = 1e-13);
        assert_abs_diff_eq!(gaussian_quantile(0.995).unwrap(), 2.575_829_303_548_901, epsilon = 1e-13);
        assert_abs_diff_eq!(gaussian_quantile(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(gaussian_quantile(1.0).is_err());
    }

    #[test]
    fn berry_esseen_examples() {
        let p = qubit(0.75);
        let s = spectrum_stats(&p);
        let n = 1024.0f64;
        let (a, b) = (-n * s.entropy - s.alpha * n.sqrt(), -n * s.entropy + s.alpha * n.sqrt());
        assert!(berry_esseen_residual(&p, 1024, a, b).unwrap().pass);
        let full = berry_esseen_residual(&p, 64, f64::NEG_INFINITY, 0.0).unwrap();
        assert_abs_diff_eq!(full.residual, 0.0, epsilon = 1e-12);
        assert!(matches!(berry_esseen_residual(&qubit(0.5), 100, -1.0, 0.0), Err(Error::DegenerateSpectrum)));
    }

    #[test]
    fn json_round_trip() {
        let spec = tensor_power_spectrum(&qubit(0.75), 3).unwrap();
        let text = spec.to_json();
        assert!(text.contains("\"log2_eig\""));
        assert_eq!(ClassSpectrum::from_json(&text).unwrap(), spec);
    }
}
