//! Standard-form reduction of random programs, checked against the
//! branching simulator.

use entlab_core::locc::dense::{compare_marginals, simulate_dense};
use entlab_core::locc::standard::{simulate_standard_dense, standardize};
use entlab_core::locc::toy::{random_toy, ToyShape};

#[test]
fn random_programs_reduce_faithfully() {
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..200 {
        let (ir, psi) = random_toy(seed, ToyShape::default());
        let proto = standardize(&ir, &psi).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(proto.message_bits, ir.message_bits().unwrap(), "seed {seed}");
        assert!(proto.fits_message(), "seed {seed}");
        assert!(proto.completeness_error() <= 1e-10, "seed {seed}");
        let labels: Vec<String> = proto.outcome_labels.iter().map(|l| l.name.clone()).collect();
        let reference = simulate_dense(&ir, &psi).unwrap().marginal(&labels);
        let got = simulate_standard_dense(&proto, &psi).unwrap();
        let (tv, dist) = compare_marginals(&reference, &got);
        assert!(tv <= 1e-9 && dist <= 1e-9, "seed {seed}: tv {tv}, distance {dist}");
        worst = (worst.0.max(tv), worst.1.max(dist));
    }
    println!("worst tv {:.3e}, worst branch distance {:.3e}", worst.0, worst.1);
}
