//! Entanglement concentration by measuring the eigenvalue class of `ψ^{⊗n}`.
//! Each outcome leaves a maximally entangled state of the class dimension;
//! no message is sent.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectrum::{spectrum_stats, tensor_power_spectrum, BaseSpectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationOutcome {
    pub log2_eig: f64,
    /// `log₂` of the class dimension: ebits obtained on this outcome.
    pub ebits: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub n: u64,
    pub outcomes: Vec<ConcentrationOutcome>,
    pub expected_yield: f64,
    /// `n S(ρ)` in bits.
    pub n_entropy: f64,
    /// `nE` minus the expected yield.
    pub deficit: f64,
    pub message_bits: u32,
}

pub fn concentrate(p: &BaseSpectrum, n: u64) -> Result<Concentration> {
    let spec = tensor_power_spectrum(p, n)?;
    let outcomes: Vec<ConcentrationOutcome> = spec
        .classes
        .iter()
        .map(|c| ConcentrationOutcome { log2_eig: c.log2_eig, ebits: c.log2_mult, prob: c.mass() })
        .collect();
    let expected_yield = outcomes.iter().map(|o| o.prob * o.ebits).sum();
    let n_entropy = n as f64 * spectrum_stats(p).entropy;
    Ok(Concentration { n, outcomes, expected_yield, n_entropy, deficit: n_entropy - expected_yield, message_bits: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_copies_by_hand() {
        let r = concentrate(&BaseSpectrum::qubit(0.75).unwrap(), 2).unwrap();
        let mut got: Vec<(f64, f64)> = r.outcomes.iter().map(|o| (o.ebits.exp2(), o.prob)).collect();
        got.sort_by(|a, b| b.1.total_cmp(&a.1));
        let want = [(1.0, 9.0 / 16.0), (2.0, 6.0 / 16.0), (1.0, 1.0 / 16.0)];
        for (g, w) in got.iter().zip(&want) {
            assert_abs_diff_eq!(g.0, w.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g.1, w.1, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.expected_yield, 6.0 / 16.0, epsilon = 1e-12);
        assert_eq!(r.message_bits, 0);
    }

    #[test]
    fn uniform_has_no_deficit() {
        let r = concentrate(&BaseSpectrum::new(&[1.0 / 3.0; 3]).unwrap(), 7).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert_abs_diff_eq!(r.expected_yield, 7.0 * 3f64.log2(), epsilon = 1e-9);
        assert!(r.deficit.abs() < 1e-9);
    }

    #[test]
    fn deficit_grows() {
        let p = BaseSpectrum::qubit(0.75).unwrap();
        let a = concentrate(&p, 256).unwrap().deficit;
        let b = concentrate(&p, 1024).unwrap().deficit;
        assert!(a > 0.0 && b > a);
    }
}
