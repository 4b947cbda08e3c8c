//! Two-party LOCC protocols: an instruction-level IR, a brute-force dense
//! simulator, reduction to one-way standard form, Schmidt-diagonal dilution
//! families, protocol runs and lower-bound certificates.

pub mod certificate;
pub mod concentration;
pub mod dense;
pub mod dilution;
pub mod ir;
pub mod run;
pub mod standard;
pub mod toy;

pub use certificate::{most_probable_good, verify_theorem_chain, Certificate, CertificateParams};
pub use concentration::{concentrate, Concentration};
pub use dense::{simulate_dense, Ensemble};
pub use dilution::{build_block_dilution, build_shift_dilution, BlockDilution, DiagonalKraus};
pub use ir::{Instruction, Party, ProtocolIR};
pub use run::{lift_success_probability, run_protocol, OutcomeState, ProtocolRunReport};
pub use standard::{standardize, StandardFormProtocol};
