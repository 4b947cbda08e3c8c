//! Dilution protocols: diagonal fast path against dense simulation, closed
//! forms, and repetition arithmetic.

use entlab_core::locc::dilution::{build_block_dilution, build_shift_dilution, kraus_sum};
use entlab_core::locc::run::{
    expand_spectrum, lift_success_probability, run_protocol, ProtocolRunReport, ReducedState,
};
use entlab_core::qmath::{self, CMat, SchmidtProfile};
use entlab_core::random;
use entlab_core::spectrum::{tensor_power_spectrum, BaseSpectrum, ClassSpectrum};
use rand::Rng;

fn qubit_spec(p: f64, n: u64) -> ClassSpectrum {
    tensor_power_spectrum(&BaseSpectrum::qubit(p).unwrap(), n).unwrap()
}

#[test]
fn shift_completeness_for_random_profiles() {
    let mut rng = random::rng(17);
    for _ in 0..40 {
        let d = rng.random_range(1..=64);
        let q = random::profile(&mut rng, d);
        let proto = build_shift_dilution(&q).unwrap();
        let dense = proto.to_dense().unwrap();
        let (ks, _) = dense.dense_parts().unwrap();
        let defect = (kraus_sum(&ks) - CMat::identity(d, d)).norm();
        assert!(defect <= 1e-10, "d = {d}: {defect}");
    }
}

#[test]
fn fast_path_matches_dense_path() {
    for (p, n, budget) in [(0.75, 2, 1), (0.75, 3, 1), (0.75, 4, 2), (0.6, 5, 2), (0.9, 6, 3), (0.75, 6, 0)] {
        let spec = qubit_spec(p, n);
        let built = build_block_dilution(&spec, budget, 1.0).unwrap();
        let fast = run_protocol(&built.protocol, &spec, 2.0).unwrap();
        let dense = run_protocol(&built.protocol.to_dense().unwrap(), &spec, 2.0).unwrap();
        let k = 1usize << fast.report.c;
        assert_eq!(dense.outcomes.len(), k);
        let total: f64 = dense.outcomes.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for o in &dense.outcomes {
            assert!((o.prob - 1.0 / k as f64).abs() < 1e-12);
            assert!((o.error - fast.outcomes[0].error).abs() < 1e-9, "n={n} c={budget}");
        }
        assert!((fast.outcomes[0].error - built.target_error).abs() < 1e-12);
    }
}

#[test]
fn flat_single_block_closed_form() {
    for n in 1..=6 {
        let spec = qubit_spec(0.75, n);
        let q = expand_spectrum(&spec).unwrap();
        let d = q.len() as f64;
        let overlap: f64 = q.iter().map(|x| (x / d).sqrt()).sum();
        let closed = 2.0 * (1.0 - overlap * overlap).max(0.0).sqrt();
        let built = build_block_dilution(&spec, 0, 1.0).unwrap();
        assert!((built.target_error - closed).abs() < 1e-12);
        let dense = run_protocol(&built.protocol.to_dense().unwrap(), &spec, 2.0).unwrap();
        assert!((dense.outcomes[0].error - closed).abs() < 1e-9);
    }
}

#[test]
fn two_copy_block_example() {
    let spec = qubit_spec(0.75, 2);
    let built = build_block_dilution(&spec, 1, 1.0).unwrap();
    let overlap = (54f64.sqrt() + 18f64.sqrt() + 6f64.sqrt() + 2f64.sqrt()) / 16.0;
    let expect = 2.0 * (1.0 - overlap * overlap).sqrt();
    assert!((built.target_error - expect).abs() < 1e-12);
    assert!((built.target_error - 0.5176).abs() < 1e-4);
}

#[test]
fn schmidt_number_never_increases() {
    let mut rng = random::rng(23);
    for _ in 0..20 {
        let d = rng.random_range(2..=16);
        let q = random::profile(&mut rng, d);
        let dense = build_shift_dilution(&q).unwrap().to_dense().unwrap();
        let run = entlab_core::locc::run::run_protocol_on_profile(&dense, &q, 1e-6).unwrap();
        for o in &run.outcomes {
            let ReducedState::Dense { matrix, .. } = &o.x else { panic!("dense run") };
            assert!(qmath::epsilon_rank(matrix, 1e-9) <= d);
            assert!(qmath::structural_rank(matrix) <= d);
        }
    }
}

#[test]
fn dense_x_is_normalized_kraus_product() {
    let q = SchmidtProfile::new(vec![0.5, 0.3, 0.2]).unwrap();
    let dense = build_shift_dilution(&q).unwrap().to_dense().unwrap();
    let (ks, _) = dense.dense_parts().unwrap();
    let run = entlab_core::locc::run::run_protocol_on_profile(&dense, &q, 1e-9).unwrap();
    for (o, m) in run.outcomes.iter().zip(&ks) {
        let mm = m * m.adjoint();
        let expect = &mm / mm.trace();
        let ReducedState::Dense { matrix, .. } = &o.x else { panic!("dense run") };
        assert!((matrix - expect).norm() < 1e-9);
        assert!((o.prob - mm.trace().re / 3.0).abs() < 1e-12);
    }
}

#[test]
fn lift_failure_bound_over_grid() {
    let mut rng = random::rng(29);
    for _ in 0..200 {
        let s: f64 = rng.random_range(0.0..8.0);
        let eps: f64 = rng.random_range(1e-6..0.5);
        let report = ProtocolRunReport { n: 1, d: "2".into(), log2_d: 1.0, c: 3, s, epsilon: 0.0, per_outcome: vec![] };
        let lifted = lift_success_probability(&report, eps).unwrap();
        let direct = (1.0 - (-s).exp2()).powf(lifted.repetitions);
        assert!(direct <= eps * (1.0 + 1e-12), "s={s} eps={eps}");
        assert!((lifted.failure_bound - direct).abs() <= 1e-12);
        assert_eq!(lifted.report.c, 3 + lifted.repetitions.log2().ceil() as u32);
    }
}
