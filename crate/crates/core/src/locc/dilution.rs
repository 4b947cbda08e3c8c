//! Dilution protocols whose Kraus operators are diagonal in the Schmidt
//! basis of the shared maximally entangled state, up to a relabeling that
//! both parties apply.
//!
//! The budgeted construction works on the sorted Schmidt coefficients of
//! `ψ^{⊗n}`: keep the top `d′` of them, cut the index range into `K = 2^c`
//! equal blocks, flatten each block to its average, and let outcome `k`
//! rotate the blocks by `k` positions. The dimensions involved are far too
//! large to list, so both the flattened and the original coefficient
//! vectors are stored as runs of equal values ([`AlignedProfile`]).

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::qmath::{linalg, CMat, SchmidtProfile};
use crate::spectrum::{log2_sum_exp, ClassSpectrum};

use super::ir::bits_for;
use super::standard::{AliceMeasurement, BobCorrections, StandardFormProtocol};

/// Largest dimension for which block families are expanded to explicit form.
pub const EXPLICIT_DIM_LIMIT: usize = 1 << 12;

/// `log₂ x` for an arbitrarily large integer; `-∞` for zero.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().expect("64-bit mantissa").log2() + shift as f64
}

/// Nearest integer to `2^l` (53 significant bits).
pub fn biguint_from_log2(l: f64) -> BigUint {
    if l < 0.0 {
        return if l > -1.0 { BigUint::one() } else { BigUint::zero() };
    }
    if l < 1000.0 {
        return BigUint::from(l.exp2().round() as u128);
    }
    let whole = l.floor();
    let mantissa = (l - whole + 52.0).exp2().round() as u64;
    BigUint::from(mantissa) << (whole as u64 - 52)
}

fn ceil_log2(x: &BigUint) -> u32 {
    if x <= &BigUint::one() {
        0
    } else {
        (x - 1u32).bits() as u32
    }
}

/// A run of indices on which both coefficient vectors are constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub count: BigUint,
    pub log2_count: f64,
    /// `log₂` of the produced coefficient; `-∞` when zero.
    pub log2_approx: f64,
    /// `log₂` of the target coefficient; `-∞` when zero.
    pub log2_target: f64,
}

/// A produced Schmidt-coefficient vector aligned index by index with the
/// target one, compressed into runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignedProfile {
    pub segments: Vec<Segment>,
}

fn log2_abs_diff(la: f64, lb: f64) -> f64 {
    let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (-((lo - hi) * std::f64::consts::LN_2).exp_m1()).log2()
}

impl AlignedProfile {
    /// One segment per index from two explicit vectors (zero padded).
    pub fn from_vectors(approx: &[f64], target: &[f64]) -> Self {
        let len = approx.len().max(target.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0).max(0.0).log2();
        let segments = (0..len)
            .map(|i| Segment {
                count: BigUint::one(),
                log2_count: 0.0,
                log2_approx: get(approx, i),
                log2_target: get(target, i),
            })
            .collect();
        Self { segments }
    }

    pub fn log2_approx_mass(&self) -> f64 {
        log2_sum_exp(self.segments.iter().map(|s| s.log2_count + s.log2_approx))
    }

    pub fn log2_target_mass(&self) -> f64 {
        log2_sum_exp(self.segments.iter().map(|s| s.log2_count + s.log2_target))
    }

    /// `1 − Σ √(a_i b_i)` after normalizing both vectors, evaluated as half
    /// the Hellinger sum so that nearly equal vectors keep full precision.
    pub fn infidelity(&self) -> f64 {
        let (na, nb) = (self.log2_approx_mass(), self.log2_target_mass());
        let terms = self.segments.iter().map(|s| {
            let (la, lb) = (s.log2_approx - na, s.log2_target - nb);
            let pair = if la == f64::NEG_INFINITY {
                lb
            } else if lb == f64::NEG_INFINITY {
                la
            } else {
                let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
                let gap = -((0.5 * (lo - hi)) * std::f64::consts::LN_2).exp_m1();
                hi + 2.0 * gap.log2()
            };
            s.log2_count + pair
        });
        (0.5 * log2_sum_exp(terms).exp2()).clamp(0.0, 1.0)
    }

    pub fn fidelity(&self) -> f64 {
        1.0 - self.infidelity()
    }

    /// Trace distance `2√(1 − F²)` between the two pure states.
    pub fn pure_distance(&self) -> f64 {
        let inf = self.infidelity();
        2.0 * (inf * (2.0 - inf)).max(0.0).sqrt()
    }

    /// `Σ |a_i − b_i|`: trace distance of the two diagonal states.
    pub fn diagonal_distance(&self) -> f64 {
        log2_sum_exp(self.segments.iter().map(|s| s.log2_count + log2_abs_diff(s.log2_approx, s.log2_target)))
            .exp2()
            .min(2.0)
    }

    /// `log₂ max_i a_i`.
    pub fn log2_max_approx(&self) -> f64 {
        self.segments.iter().map(|s| s.log2_approx).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ a_i` over indices whose target coefficient is at least `2^threshold`.
    pub fn approx_mass_where_target_at_least(&self, threshold: f64) -> f64 {
        log2_sum_exp(
            self.segments
                .iter()
                .filter(|s| s.log2_target >= threshold - crate::spectrum::MERGE_TOL_BITS)
                .map(|s| s.log2_count + s.log2_approx),
        )
        .exp2()
    }

    /// Number of indices with a nonzero produced coefficient.
    pub fn approx_support(&self) -> BigUint {
        self.segments.iter().filter(|s| s.log2_approx > f64::NEG_INFINITY).map(|s| s.count.clone()).sum()
    }
}

/// Family `M_k = P_{σ_k} diag(√w_k)` given by explicit weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitFamily {
    pub dim: usize,
    /// `weights[k][j]`, with `Σ_k weights[k][j] = 1` for each `j`.
    pub weights: Vec<Vec<f64>>,
    /// `relabel[k][j] = σ_k(j)`.
    pub relabel: Vec<Vec<usize>>,
}

impl ExplicitFamily {
    pub fn new(weights: Vec<Vec<f64>>, relabel: Vec<Vec<usize>>) -> Result<Self> {
        let dim = weights.first().map_or(0, |w| w.len());
        if dim == 0 || weights.len() != relabel.len() {
            return Err(Error::InvalidArgument("family needs matching nonempty weights and relabelings".into()));
        }
        for (w, s) in weights.iter().zip(&relabel) {
            if w.len() != dim || s.len() != dim || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidArgument("weights must be nonnegative vectors of equal length".into()));
            }
            let mut seen = vec![false; dim];
            for &t in s {
                if t >= dim || seen[t] {
                    return Err(Error::InvalidArgument("relabeling is not a permutation".into()));
                }
                seen[t] = true;
            }
        }
        let fam = Self { dim, weights, relabel };
        let err = fam.completeness_error();
        if err > 1e-12 {
            return Err(Error::IncompleteKraus(err));
        }
        Ok(fam)
    }

    pub fn completeness_error(&self) -> f64 {
        (0..self.dim).map(|j| (self.weights.iter().map(|w| w[j]).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Schmidt coefficients produced by outcome `k` from `|Φ_d>`, indexed by
    /// the relabeled basis, with the outcome probability.
    pub fn outcome(&self, k: usize) -> (f64, Vec<f64>) {
        let d = self.dim as f64;
        let prob: f64 = self.weights[k].iter().sum::<f64>() / d;
        let mut coeffs = vec![0.0; self.dim];
        if prob > 0.0 {
            for (j, &w) in self.weights[k].iter().enumerate() {
                coeffs[self.relabel[k][j]] = w / d / prob;
            }
        }
        (prob, coeffs)
    }
}

/// Budgeted block-shift family, stored through its aligned profile.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFamily {
    pub n: u64,
    pub base_probs: Vec<f64>,
    /// Message bits actually used; `K = 2^c` outcomes.
    pub c: u32,
    pub block_size: BigUint,
    /// Truncated support `d′`.
    pub truncated: BigUint,
    /// Input dimension `d = K m`.
    pub dim: BigUint,
    /// Mass of the kept coefficients before renormalization.
    pub kept_mass: f64,
    pub profile: AlignedProfile,
}

impl BlockFamily {
    /// Flattened coefficient vector of length `d` when it is small.
    pub fn flattened(&self) -> Option<Vec<f64>> {
        let d = self.dim.to_usize().filter(|&d| d <= EXPLICIT_DIM_LIMIT)?;
        let mut out = Vec::with_capacity(d);
        for s in &self.profile.segments {
            let count = s.count.to_usize()?;
            for _ in 0..count {
                if out.len() < d {
                    out.push(s.log2_approx.exp2());
                }
            }
        }
        out.resize(d, 0.0);
        Some(out)
    }

    /// Equivalent explicit family, when the dimension is small.
    pub fn to_explicit(&self) -> Option<ExplicitFamily> {
        let flat = self.flattened()?;
        let d = flat.len();
        let m = self.block_size.to_usize()?;
        let k_count = d / m;
        let mut weights = Vec::with_capacity(k_count);
        let mut relabel = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let sigma: Vec<usize> = (0..d).map(|j| (j + k * m) % d).collect();
            weights.push(sigma.iter().map(|&t| m as f64 * flat[t]).collect());
            relabel.push(sigma);
        }
        Some(ExplicitFamily { dim: d, weights, relabel })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagonalKraus {
    Explicit(ExplicitFamily),
    Block(BlockFamily),
}

impl DiagonalKraus {
    pub fn num_outcomes(&self) -> Option<usize> {
        match self {
            DiagonalKraus::Explicit(f) => Some(f.weights.len()),
            DiagonalKraus::Block(b) => 1usize.checked_shl(b.c).filter(|_| b.c < usize::BITS),
        }
    }

    pub fn log2_outcomes(&self) -> f64 {
        match self {
            DiagonalKraus::Explicit(f) => (f.weights.len() as f64).log2(),
            DiagonalKraus::Block(b) => b.c as f64,
        }
    }

    pub fn completeness_error(&self) -> f64 {
        match self {
            DiagonalKraus::Explicit(f) => f.completeness_error(),
            // every index sees each block average once, weighted by m
            DiagonalKraus::Block(b) => (b.profile.log2_approx_mass() * std::f64::consts::LN_2).exp_m1().abs(),
        }
    }

    pub fn explicit(&self) -> Option<ExplicitFamily> {
        match self {
            DiagonalKraus::Explicit(f) => Some(f.clone()),
            DiagonalKraus::Block(b) => b.to_explicit(),
        }
    }

    /// Kraus matrices `P_σ diag(√w)` and Bob's matching permutations.
    pub fn dense_parts(&self) -> Result<(Vec<CMat>, Vec<CMat>)> {
        let f = self
            .explicit()
            .ok_or_else(|| Error::InvalidArgument("diagonal family too large for explicit matrices".into()))?;
        let mut ks = Vec::with_capacity(f.weights.len());
        let mut us = Vec::with_capacity(f.weights.len());
        for (w, s) in f.weights.iter().zip(&f.relabel) {
            let p = linalg::permutation_matrix(s);
            let roots: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            ks.push(&p * linalg::real_diag(&roots));
            us.push(p);
        }
        Ok((ks, us))
    }
}

fn diagonal_protocol(dim: usize, message_bits: u32, family: DiagonalKraus) -> StandardFormProtocol {
    StandardFormProtocol::bare(dim, message_bits, AliceMeasurement::Diagonal(family), BobCorrections::Relabel)
}

/// Exact dilution of `|Φ_d>` into `Σ √q_i |ii>` with `d = len(q)` outcomes:
/// outcome `k` weights index `j` by `q_{(j+k) mod d}` and both parties
/// relabel `j -> j + k`.
pub fn build_shift_dilution(q: &SchmidtProfile) -> Result<StandardFormProtocol> {
    let d = q.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty profile".into()));
    }
    let probs = q.probs();
    let uniform = probs.iter().all(|&p| (p - probs[0]).abs() <= 1e-15);
    let mut weights = Vec::with_capacity(d);
    let mut relabel = Vec::with_capacity(d);
    for k in 0..d {
        weights.push((0..d).map(|j| probs[(j + k) % d]).collect());
        relabel.push((0..d).map(|j| if uniform { j } else { (j + k) % d }).collect());
    }
    let family = ExplicitFamily::new(weights, relabel)?;
    Ok(diagonal_protocol(d, bits_for(d), DiagonalKraus::Explicit(family)))
}

/// Keep-mass for a block dilution aimed at trace distance `epsilon`:
/// truncation alone then contributes at most `epsilon / 2`.
pub fn keep_mass_for_target(epsilon: f64) -> f64 {
    1.0 - (epsilon / 4.0).powi(2)
}

/// Block dilution together with its exact output error.
#[derive(Debug, Clone)]
pub struct BlockDilution {
    pub protocol: StandardFormProtocol,
    pub target_error: f64,
}

impl BlockDilution {
    pub fn family(&self) -> &BlockFamily {
        match &self.protocol.alice {
            AliceMeasurement::Diagonal(DiagonalKraus::Block(b)) => b,
            _ => unreachable!("block dilution always carries a block family"),
        }
    }
}

/// Precomputed class boundaries of `ψ^{⊗n}` for repeated block builds.
#[derive(Debug, Clone)]
pub struct BlockDilutionBuilder {
    spec: ClassSpectrum,
    counts: Vec<BigUint>,
    /// `starts[i]` is the first index of class `i`; the last entry is the rank.
    starts: Vec<BigUint>,
}

impl BlockDilutionBuilder {
    pub fn new(spec: &ClassSpectrum) -> Result<Self> {
        let counts = spec.exact_multiplicities()?;
        let mut starts = Vec::with_capacity(counts.len() + 1);
        let mut acc = BigUint::zero();
        for cnt in &counts {
            starts.push(acc.clone());
            acc += cnt;
        }
        starts.push(acc);
        Ok(Self { spec: spec.clone(), counts, starts })
    }

    pub fn spectrum(&self) -> &ClassSpectrum {
        &self.spec
    }

    pub fn rank(&self) -> &BigUint {
        self.starts.last().expect("nonempty")
    }

    fn class_at(&self, x: &BigUint) -> Option<usize> {
        if x >= self.rank() {
            return None;
        }
        Some(self.starts.partition_point(|s| s <= x) - 1)
    }

    /// Smallest `d′` whose top coefficients hold at least `keep_mass`, and
    /// the mass they hold.
    fn truncate(&self, keep_mass: f64) -> (BigUint, f64) {
        if keep_mass >= 1.0 {
            return (self.rank().clone(), 1.0);
        }
        let mut cum = 0.0;
        for (i, class) in self.spec.classes.iter().enumerate() {
            let mass = class.mass();
            if cum + mass >= keep_mass - crate::sigsub::CLASS_MASS_TOL {
                let log2_need = (keep_mass - cum).max(0.0).log2() - class.log2_eig;
                let mut count = if log2_need < 60.0 {
                    BigUint::from(((log2_need.exp2() - 1e-9).ceil().max(1.0)) as u64)
                } else {
                    biguint_from_log2(log2_need)
                };
                if count > self.counts[i] {
                    count = self.counts[i].clone();
                }
                let kept = cum + (log2_biguint(&count) + class.log2_eig).exp2();
                return (&self.starts[i] + count, kept.min(1.0));
            }
            cum += mass;
        }
        (self.rank().clone(), cum.min(1.0))
    }

    /// Block dilution with budget `budget_c` bits keeping `keep_mass` of the
    /// target before flattening. Budgets beyond `⌈log₂ d′⌉` are clamped.
    pub fn build(&self, budget_c: u32, keep_mass: f64) -> Result<BlockDilution> {
        if !(keep_mass > 0.0 && keep_mass <= 1.0) {
            return Err(Error::InvalidArgument(format!("keep mass {keep_mass} outside (0, 1]")));
        }
        let (truncated, kept_mass) = self.truncate(keep_mass);
        let log2_kept = kept_mass.log2();
        let c = budget_c.min(ceil_log2(&truncated));
        let blocks = BigUint::one() << c;
        let m = (&truncated + &blocks - 1u32) / &blocks;
        let dim = &blocks * &m;

        let mut breakpoints: BTreeSet<BigUint> = self.starts.iter().cloned().collect();
        breakpoints.insert(truncated.clone());
        breakpoints.insert(dim.clone());
        let mut events = breakpoints.clone();
        let mut mixed: BTreeMap<BigUint, f64> = BTreeMap::new();
        for x in &breakpoints {
            if x < &dim && !(x % &m).is_zero() {
                let b = x / &m;
                mixed.entry(b.clone()).or_insert(0.0);
                events.insert(&b * &m);
                events.insert((&b + 1u32) * &m);
            }
        }
        let log2_m = log2_biguint(&m);
        let mixed_keys: Vec<BigUint> = mixed.keys().cloned().collect();
        for b in mixed_keys {
            let lo = &b * &m;
            let hi = std::cmp::min(&lo + &m, truncated.clone());
            let mut pieces = Vec::new();
            if lo < hi {
                let mut i = self.class_at(&lo).expect("inside support");
                while i < self.counts.len() && self.starts[i] < hi {
                    let a = std::cmp::max(&self.starts[i], &lo).clone();
                    let z = std::cmp::min(&self.starts[i + 1], &hi).clone();
                    pieces.push(log2_biguint(&(z - a)) + self.spec.classes[i].log2_eig);
                    i += 1;
                }
            }
            mixed.insert(b, log2_sum_exp(pieces) - log2_m - log2_kept);
        }

        let events: Vec<BigUint> = events.into_iter().collect();
        let mut segments = Vec::with_capacity(events.len());
        for w in events.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            let class = self.class_at(lo);
            let log2_target = class.map_or(f64::NEG_INFINITY, |i| self.spec.classes[i].log2_eig);
            let log2_approx = if lo >= &dim {
                f64::NEG_INFINITY
            } else if let Some(avg) = mixed.get(&(lo / &m)) {
                *avg
            } else if lo < &truncated {
                log2_target - log2_kept
            } else {
                f64::NEG_INFINITY
            };
            let count = hi - lo;
            segments.push(Segment { log2_count: log2_biguint(&count), count, log2_approx, log2_target });
        }
        let family = BlockFamily {
            n: self.spec.n,
            base_probs: self.spec.base_probs.clone(),
            c,
            block_size: m,
            truncated,
            dim: dim.clone(),
            kept_mass,
            profile: AlignedProfile { segments },
        };
        let target_error = family.profile.pure_distance();
        // dimensions beyond usize are recorded as usize::MAX; the family
        // carries the exact value
        let protocol = diagonal_protocol(dim.to_usize().unwrap_or(usize::MAX), c, DiagonalKraus::Block(family));
        Ok(BlockDilution { protocol, target_error })
    }
}

/// One-shot form of [`BlockDilutionBuilder::build`].
pub fn build_block_dilution(spec: &ClassSpectrum, budget_c: u32, keep_mass: f64) -> Result<BlockDilution> {
    BlockDilutionBuilder::new(spec)?.build(budget_c, keep_mass)
}

/// Dense Kraus completeness `Σ_k M_k† M_k` from explicit parts; helper for
/// cross-checks.
pub fn kraus_sum(ks: &[CMat]) -> CMat {
    let n = ks.first().map_or(0, |k| k.ncols());
    ks.iter().fold(CMat::zeros(n, n), |acc, k| acc + k.adjoint() * k)
}
