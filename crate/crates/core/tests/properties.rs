//! Property tests over seeded random instances.

use entlab_core::locc::dilution::build_block_dilution;
use entlab_core::qmath::{self, linalg, DensityMatrix, PureBipartiteState, Subsystem};
use entlab_core::random;
use entlab_core::sigsub::{sig_dim, sig_dim_matrix, sig_dim_values};
use entlab_core::spectrum::{mu, tensor_power_spectrum, BaseSpectrum};
use proptest::prelude::*;

fn base(raw: &[f64]) -> BaseSpectrum {
    let total: f64 = raw.iter().sum();
    BaseSpectrum::new(&raw.iter().map(|x| x / total).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fuchs_van_de_graaf(seed in any::<u64>(), dim in 2usize..6) {
        let mut rng = random::rng(seed);
        let a = random::density_matrix_any_rank(&mut rng, dim);
        let b = random::density_matrix_any_rank(&mut rng, dim);
        let d = qmath::trace_distance(&a, &b).unwrap();
        let f = qmath::fidelity(&a, &b).unwrap();
        prop_assert!(1.0 - f <= d / 2.0 + 1e-9);
        prop_assert!(d / 2.0 <= (1.0 - f * f).max(0.0).sqrt() + 1e-9, "d={} f={} a={:?} b={:?}", d, f, a.eigenvalues(), b.eigenvalues());
        prop_assert!((qmath::trace_distance(&b, &a).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_triangle(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = random::rng(seed);
        let xs: Vec<DensityMatrix> = (0..3).map(|_| random::density_matrix_any_rank(&mut rng, dim)).collect();
        let d = |i: usize, j: usize| qmath::trace_distance(&xs[i], &xs[j]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d(0, 1)));
    }

    #[test]
    fn schmidt_round_trip(seed in any::<u64>(), da in 1usize..5, db in 1usize..5) {
        let mut rng = random::rng(seed);
        let psi = random::pure_bipartite(&mut rng, da, db);
        let dec = qmath::schmidt_decompose(&psi).unwrap();
        prop_assert!((dec.reconstruct() - psi.amplitudes()).norm() < 1e-10);
        let ra = psi.reduced(Subsystem::B).eigenvalues();
        for (x, y) in ra.iter().zip(dec.profile.probs()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        // both marginals share their spectrum
        let rb = psi.reduced(Subsystem::A).eigenvalues();
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_trace_keeps_trace(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = random::rng(seed);
        let rho = random::density_matrix_any_rank(&mut rng, da * db);
        for side in [Subsystem::A, Subsystem::B] {
            let r = qmath::partial_trace(rho.matrix(), (da, db), side).unwrap();
            prop_assert!((r.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_extension_sqrt_bound(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
        let mut rng = random::rng(seed);
        let phi = random::unit_vector(&mut rng, da);
        let gamma = random::unit_vector(&mut rng, db);
        let noise = random::unit_vector(&mut rng, da * db);
        let mix = 0.2 * rand::Rng::random::<f64>(&mut rng);
        let amps = linalg::kron_vec(&phi, &gamma) + noise * qmath::c(mix, 0.0);
        let psi = PureBipartiteState::normalized(da, db, amps).unwrap();
        let ext = qmath::nearest_product_extension(&psi, &phi).unwrap();
        prop_assert!(ext.holds_sqrt);
        prop_assert!(ext.distance <= 2.0 + 1e-12);
    }

    #[test]
    fn class_masses_sum_to_one(raw in prop::collection::vec(0.05f64..1.0, 1..5), n in 1u64..40) {
        let spec = tensor_power_spectrum(&base(&raw), n).unwrap();
        prop_assert!(spec.log2_total_mass().abs() < 1e-12);
        spec.validate().unwrap();
        let total_dim = raw.len() as f64 * n as f64;
        prop_assert!((spec.log2_total_mult() - (raw.len() as f64).log2() * n as f64).abs() < 1e-9 * total_dim.max(1.0));
    }

    #[test]
    fn mu_is_additive(raw in prop::collection::vec(0.05f64..1.0, 2..4), n in 1u64..30, cut in 0.0f64..1.0) {
        let spec = tensor_power_spectrum(&base(&raw), n).unwrap();
        let lo = spec.classes.iter().map(|c| c.log2_eig).fold(f64::INFINITY, f64::min) - 1.0;
        let hi = 0.5;
        let mid = lo + cut * (hi - lo);
        let whole = mu(&spec, lo, hi).unwrap();
        let parts = mu(&spec, lo, mid).unwrap() + mu(&spec, mid, hi).unwrap();
        prop_assert!((whole - 1.0).abs() < 1e-12);
        // a class sitting exactly on the cut may be counted on both sides
        prop_assert!(parts >= whole - 1e-12);
    }

    #[test]
    fn sig_dim_is_monotone(raw in prop::collection::vec(0.05f64..1.0, 2..4), n in 1u64..25, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let spec = tensor_power_spectrum(&base(&raw), n).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sig_dim(&spec, lo).unwrap().log2_dim <= sig_dim(&spec, hi).unwrap().log2_dim + 1e-12);
    }

    #[test]
    fn sig_dim_matrix_matches_values(seed in any::<u64>(), dim in 1usize..8, delta in 0.01f64..0.999) {
        let mut rng = random::rng(seed);
        let rho = random::density_matrix_any_rank(&mut rng, dim);
        let from_matrix = sig_dim_matrix(&rho, delta).unwrap();
        let from_values = sig_dim_values(&rho.eigenvalues(), delta).unwrap();
        prop_assert_eq!(from_matrix.exact, from_values.exact);
    }

    #[test]
    fn block_families_are_complete(p in 0.55f64..0.95, n in 1u64..9, budget in 0u32..5, keep in 0.5f64..1.0) {
        let spec = tensor_power_spectrum(&BaseSpectrum::qubit(p).unwrap(), n).unwrap();
        let built = build_block_dilution(&spec, budget, keep).unwrap();
        let fam = built.family();
        prop_assert!(fam.to_explicit().unwrap().completeness_error() <= 1e-12);
        prop_assert!((0.0..=2.0).contains(&built.target_error));
    }
}
