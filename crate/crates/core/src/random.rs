//! Seeded samplers for states, spectra and unitaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qmath::{c, linalg, CMat, CVec, DensityMatrix, PureBipartiteState, SchmidtProfile};

/// Deterministic generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_c(rng: &mut impl Rng) -> crate::qmath::C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian_c(rng))
}

/// Unit vector drawn uniformly from the sphere.
pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> CVec {
    let v = CVec::from_fn(dim, |_, _| gaussian_c(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

pub fn pure_bipartite(rng: &mut impl Rng, dim_a: usize, dim_b: usize) -> PureBipartiteState {
    PureBipartiteState::normalized(dim_a, dim_b, unit_vector(rng, dim_a * dim_b)).expect("gaussian vector is nonzero")
}

/// `G G† / Tr(G G†)` with `G` a `dim x rank` Ginibre matrix.
pub fn density_matrix(rng: &mut impl Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = gaussian_matrix(rng, dim, rank.max(1));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / c(tr, 0.0)).expect("Ginibre matrix is a valid state")
}

/// Density matrix of random dimension-limited rank.
pub fn density_matrix_any_rank(rng: &mut impl Rng, dim: usize) -> DensityMatrix {
    let rank = rng.random_range(1..=dim);
    density_matrix(rng, dim, rank)
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn unitary(rng: &mut impl Rng, dim: usize) -> CMat {
    let g = gaussian_matrix(rng, dim, dim);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random probability vector with `len` entries, sorted nonincreasing.
pub fn profile(rng: &mut impl Rng, len: usize) -> SchmidtProfile {
    let raw: Vec<f64> = (0..len)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            x * x + y * y
        })
        .collect();
    let total: f64 = raw.iter().sum();
    SchmidtProfile::from_unsorted(raw.iter().map(|x| x / total).collect()).expect("normalized")
}

/// A uniformly random diagonal spectrum as a density matrix, rotated by a
/// random unitary.
pub fn density_with_spectrum(rng: &mut impl Rng, probs: &[f64]) -> DensityMatrix {
    let u = unitary(rng, probs.len());
    let m = &u * linalg::real_diag(probs) * u.adjoint();
    DensityMatrix::new(m).expect("unitary conjugation preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samplers_are_deterministic_and_valid() {
        let mut a = rng(7);
        let mut b = rng(7);
        assert_eq!(unit_vector(&mut a, 4), unit_vector(&mut b, 4));
        let u = unitary(&mut a, 5);
        assert!(linalg::is_unitary(&u, 1e-12));
        let rho = density_matrix(&mut a, 6, 2);
        assert_eq!(crate::qmath::epsilon_rank(rho.matrix(), 1e-9), 2);
        let p = profile(&mut a, 5);
        assert!(p.probs().windows(2).all(|w| w[0] >= w[1]));
    }
}
