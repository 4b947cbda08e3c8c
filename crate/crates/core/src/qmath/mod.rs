//! Dense state calculus: density matrices, pure bipartite states, distances,
//! fidelity, Schmidt decomposition and partial traces.

mod json;
pub mod linalg;

pub use json::MatrixJson;
pub use linalg::{c, CMat, CVec, C64};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::VALIDITY_TOL;

/// Eigenvalues at or below this are treated as zero when building witness
/// projectors and Schmidt supports.
const SUPPORT_TOL: f64 = 1e-12;

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    /// Validates `matrix` against the Hermitian/PSD/unit-trace invariants.
    pub fn new(matrix: CMat) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        linalg::ensure_finite(&matrix)?;
        let defect = linalg::hermitian_defect(&matrix);
        if defect > VALIDITY_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > VALIDITY_TOL || trace.im.abs() > VALIDITY_TOL {
            return Err(Error::InvalidTrace(trace.re));
        }
        let matrix = linalg::symmetrize(&matrix);
        let min = linalg::eigvalsh(&matrix).last().copied().unwrap_or(0.0);
        if min < -VALIDITY_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { matrix })
    }

    /// `|v><v|` for a unit vector.
    pub fn pure(v: &CVec) -> Result<Self> {
        check_unit(v)?;
        Ok(Self { matrix: v * v.adjoint() })
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(linalg::real_diag(probs))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: CMat::identity(dim, dim) * c(1.0 / dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.eigenvalues())
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self { matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

fn check_unit(v: &CVec) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n2 = v.norm_squared();
    if (n2 - 1.0).abs() > VALIDITY_TOL {
        return Err(Error::NotNormalized(n2));
    }
    Ok(())
}

/// Shannon entropy in bits; nonpositive entries contribute nothing.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Pure state on `A ⊗ B`, stored as amplitudes indexed `a * dim_b + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureBipartiteState {
    dim_a: usize,
    dim_b: usize,
    amps: CVec,
}

impl PureBipartiteState {
    pub fn new(dim_a: usize, dim_b: usize, amps: CVec) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(Error::InvalidArgument("local dimensions must be positive".into()));
        }
        if amps.len() != dim_a * dim_b {
            return Err(Error::BadFactorization { total: amps.len(), left: dim_a, right: dim_b });
        }
        check_unit(&amps)?;
        Ok(Self { dim_a, dim_b, amps })
    }

    /// Normalizes `amps` before validating.
    pub fn normalized(dim_a: usize, dim_b: usize, amps: CVec) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(dim_a, dim_b, amps / c(norm, 0.0))
    }

    /// `Σ √q_i |i>|i>` on `dim x dim` with `dim = profile.len()`.
    pub fn from_profile(profile: &SchmidtProfile) -> Self {
        let d = profile.len();
        let mut amps = CVec::zeros(d * d);
        for (i, q) in profile.probs().iter().enumerate() {
            amps[i * d + i] = c(q.sqrt(), 0.0);
        }
        Self { dim_a: d, dim_b: d, amps }
    }

    pub fn product(a: &CVec, b: &CVec) -> Result<Self> {
        check_unit(a)?;
        check_unit(b)?;
        Ok(Self { dim_a: a.len(), dim_b: b.len(), amps: linalg::kron_vec(a, b) })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    /// Amplitudes reshaped to a `dim_a x dim_b` matrix.
    pub fn amplitude_matrix(&self) -> CMat {
        CMat::from_fn(self.dim_a, self.dim_b, |a, b| self.amps[a * self.dim_b + b])
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { matrix: &self.amps * self.amps.adjoint() }
    }

    /// Reduced state on the subsystem that is kept after tracing `traced`.
    pub fn reduced(&self, traced: Subsystem) -> DensityMatrix {
        let m = self.amplitude_matrix();
        let matrix = match traced {
            Subsystem::B => &m * m.adjoint(),
            Subsystem::A => (m.adjoint() * &m).transpose(),
        };
        DensityMatrix { matrix: linalg::symmetrize(&matrix) }
    }
}

/// Nonincreasing vector of squared Schmidt coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtProfile {
    probs: Vec<f64>,
}

impl SchmidtProfile {
    /// Requires a sorted, nonnegative vector summing to one within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("empty profile".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidProbabilities("entries must be finite and nonnegative".into()));
        }
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidProbabilities("profile must be nonincreasing".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > crate::ORACLE_TOL {
            return Err(Error::InvalidProbabilities(format!("profile sums to {total}")));
        }
        Ok(Self { probs })
    }

    /// Sorts descending, then validates.
    pub fn from_unsorted(mut probs: Vec<f64>) -> Result<Self> {
        probs.sort_by(|a, b| b.total_cmp(a));
        Self::new(probs)
    }

    /// Uniform profile of a maximally entangled state of local dimension `d`.
    pub fn uniform(d: usize) -> Self {
        Self { probs: vec![1.0 / d as f64; d] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Entanglement entropy in bits.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.probs)
    }

    /// Number of strictly positive coefficients.
    pub fn schmidt_rank(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

fn check_dims(a: &CMat, b: &CMat) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
    }
    Ok(())
}

/// Trace norm of the Hermitian part of `m`.
pub fn hermitian_trace_norm(m: &CMat) -> f64 {
    linalg::eigvalsh(m).iter().map(|x| x.abs()).sum()
}

/// `Tr|ρ − σ|`, in `[0, 2]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(&rho.matrix, &sigma.matrix)?;
    Ok(hermitian_trace_norm(&(&rho.matrix - &sigma.matrix)).min(2.0))
}

/// Trace distance between pure states, `2 √(1 − |<u|v>|²)`.
///
/// The infidelity is evaluated as the squared norm of the component of `v`
/// orthogonal to `u`, which keeps precision for nearly equal states.
pub fn pure_trace_distance(u: &CVec, v: &CVec) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    check_unit(u)?;
    check_unit(v)?;
    let overlap = u.dotc(v);
    let perp = v - u * overlap;
    Ok(2.0 * perp.norm_squared().clamp(0.0, 1.0).sqrt())
}

/// The maximizing projector for the trace distance.
#[derive(Debug, Clone)]
pub struct Witness {
    pub value: f64,
    pub projector: CMat,
}

/// Projector onto the positive eigenspace of `ρ − σ` and `2 Tr P(ρ − σ)`.
pub fn trace_distance_witness(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Witness> {
    check_dims(&rho.matrix, &sigma.matrix)?;
    let diff = &rho.matrix - &sigma.matrix;
    let (vals, vecs) = linalg::eigh(&diff);
    let n = vals.len();
    let mut projector = CMat::zeros(n, n);
    for (j, &v) in vals.iter().enumerate() {
        if v > SUPPORT_TOL {
            let col = vecs.column(j);
            projector += col * col.adjoint();
        }
    }
    let value = 2.0 * (&projector * &diff).trace().re;
    Ok(Witness { value, projector })
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> Result<f64> {
    linalg::ensure_finite(m)?;
    Ok(linalg::singular_values(m).first().copied().unwrap_or(0.0))
}

/// Which tensor factor is traced out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on `dims.0 x dims.1`.
pub fn partial_trace(rho: &CMat, dims: (usize, usize), traced: Subsystem) -> Result<DensityMatrix> {
    let (da, db) = dims;
    linalg::ensure_square(rho)?;
    if da * db != rho.nrows() || da == 0 || db == 0 {
        return Err(Error::BadFactorization { total: rho.nrows(), left: da, right: db });
    }
    let keep = match traced {
        Subsystem::A => 1,
        Subsystem::B => 0,
    };
    DensityMatrix::new(linalg::reduce_mixed(rho, &[da, db], &[keep]))
}

/// Schmidt decomposition `ψ = Σ √q_i |a_i>|b_i>`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub profile: SchmidtProfile,
    /// Columns are the `A`-side Schmidt vectors.
    pub basis_a: CMat,
    /// Columns are the `B`-side Schmidt vectors.
    pub basis_b: CMat,
    dims: (usize, usize),
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> CVec {
        let (da, db) = self.dims;
        let mut amps = CVec::zeros(da * db);
        for (i, q) in self.profile.probs().iter().enumerate() {
            let term = linalg::kron_vec(&self.basis_a.column(i).into_owned(), &self.basis_b.column(i).into_owned());
            amps += term * c(q.sqrt(), 0.0);
        }
        amps
    }

    pub fn rank(&self) -> usize {
        self.profile.len()
    }
}

/// Singular value decomposition of the amplitude matrix. Coefficients below
/// 1e-12 (squared) are dropped; the remaining profile is renormalized.
pub fn schmidt_decompose(psi: &PureBipartiteState) -> Result<SchmidtDecomposition> {
    check_unit(&psi.amps)?;
    let m = psi.amplitude_matrix();
    let (u, s, v) = linalg::svd_full(&m);
    let keep = s.iter().filter(|&&x| x * x > SUPPORT_TOL).count().max(1);
    let mut probs: Vec<f64> = s[..keep].iter().map(|x| x * x).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let basis_a = u.columns(0, keep).into_owned();
    // m = U S V†, so ψ = Σ s_i u_i ⊗ conj(v_i)
    let basis_b = v.columns(0, keep).map(|z| z.conj());
    Ok(SchmidtDecomposition { profile: SchmidtProfile::new(probs)?, basis_a, basis_b, dims: (psi.dim_a, psi.dim_b) })
}

/// `Tr √(√ρ₀ ρ₁ √ρ₀)`, clamped to `[0, 1]`.
pub fn fidelity(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    check_dims(&rho0.matrix, &rho1.matrix)?;
    // eigenvalues within rounding of zero would otherwise contribute their
    // square roots, about 1e-8 each
    let floor = |m: &CMat| m.nrows() as f64 * f64::EPSILON * m.norm().max(1.0);
    let f0 = floor(&rho0.matrix);
    let root = linalg::hermitian_map(&rho0.matrix, |x| if x > f0 { x.sqrt() } else { 0.0 });
    let inner = &root * &rho1.matrix * &root;
    let fi = floor(&inner);
    let f: f64 = linalg::eigvalsh(&inner).iter().map(|&x| if x > fi { x.sqrt() } else { 0.0 }).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Number of eigenvalues exceeding `tol` times the largest eigenvalue.
pub fn epsilon_rank(m: &CMat, tol: f64) -> usize {
    let vals = linalg::eigvalsh(m);
    let max = vals.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v > tol * max).count()
}

/// Number of nonzero diagonal entries. For a PSD operator this bounds the
/// rank from above using only exact zero structure.
pub fn structural_rank(m: &CMat) -> usize {
    (0..m.nrows()).filter(|&i| m[(i, i)] != c(0.0, 0.0)).count()
}

/// Result of extending a nearly pure marginal to a product state.
#[derive(Debug, Clone)]
pub struct ProductExtension {
    /// Normalized partial inner product `<φ|ψ>` on `B`.
    pub gamma: CVec,
    /// `D(Tr_B ψψ†, φφ†)`.
    pub eps_in: f64,
    /// `D(ψ, φ ⊗ γ)`.
    pub distance: f64,
    /// `|<ψ|φ ⊗ γ>|`.
    pub overlap: f64,
    /// Linear bound `2 ε_in`.
    pub bound_linear: f64,
    pub holds_linear: bool,
    /// Square-root bound `2 √(ε_in − ε_in²/4)`, which the pure-state
    /// geometry always satisfies.
    pub bound_sqrt: f64,
    pub holds_sqrt: bool,
}

/// Best product approximation `φ ⊗ γ` of `ψ` for a fixed `φ` on `A`.
pub fn nearest_product_extension(psi: &PureBipartiteState, phi: &CVec) -> Result<ProductExtension> {
    if phi.len() != psi.dim_a {
        return Err(Error::DimensionMismatch { expected: psi.dim_a, got: phi.len() });
    }
    check_unit(phi)?;
    let marginal = psi.reduced(Subsystem::B);
    let target = DensityMatrix::pure(phi)?;
    let eps_in = trace_distance(&marginal, &target)?;
    if eps_in >= 2.0 - crate::EQUALITY_TOL {
        return Err(Error::HypothesisViolated(format!("marginal distance {eps_in} is not below 2")));
    }
    let m = psi.amplitude_matrix();
    // γ_b = Σ_a conj(φ_a) Ψ_ab
    let partial = (phi.adjoint() * &m).transpose();
    let overlap = partial.norm();
    if overlap < SUPPORT_TOL {
        return Err(Error::ZeroOverlap);
    }
    let gamma = &partial / c(overlap, 0.0);
    let residual = &m - phi * partial.transpose();
    let infidelity = residual.norm_squared().clamp(0.0, 1.0);
    let distance = 2.0 * infidelity.sqrt();
    let bound_linear = 2.0 * eps_in;
    let bound_sqrt = 2.0 * (eps_in - eps_in * eps_in / 4.0).max(0.0).sqrt();
    Ok(ProductExtension {
        gamma,
        eps_in,
        distance,
        overlap,
        bound_linear,
        holds_linear: distance < bound_linear + crate::EQUALITY_TOL,
        bound_sqrt,
        holds_sqrt: distance <= bound_sqrt + crate::EQUALITY_TOL,
    })
}
