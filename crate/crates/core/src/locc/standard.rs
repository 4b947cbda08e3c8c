//! One-way standard form: a single generalized measurement by Alice, one
//! message, and a unitary correction by Bob.
//!
//! [`standardize`] reaches this form through a sequence of program
//! rewrites, each of which can be checked against the dense simulator:
//!
//! 1. [`hoist`] moves ancilla preparation to the front and discards to the back.
//! 2. [`split_measurements`] rewrites a measurement in basis `B` as `B†`,
//!    a computational-basis measurement, then `B`.
//! 3. [`defer_unsent_measurements`] replaces every measurement whose label is
//!    never sent by a copy into a fresh record register, turning classical
//!    control on that label into a quantum-controlled unitary.
//! 4. [`merge_onto_alice`] walks the remaining program branch by branch,
//!    replaying each of Bob's measurements on Alice's side through the
//!    Schmidt decomposition of the current joint state, and collects one
//!    Kraus operator for Alice and one unitary for Bob per message.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qmath::{c, linalg, CMat, CVec, PureBipartiteState};

use super::dense::Marginal;
use super::dilution::DiagonalKraus;
use super::ir::{bits_for, state_vector, Instruction, Party, ProtocolIR};

/// A register of one party's output space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSpec {
    pub name: String,
    pub dim: usize,
    /// Traced out at the end of the protocol.
    pub discard: bool,
}

/// A classical value carried by the message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeLabel {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub enum AliceMeasurement {
    /// Kraus operators from Alice's input register to all of her registers.
    Dense(Vec<CMat>),
    /// Schmidt-diagonal family; Bob's corrections are implied relabelings.
    Diagonal(DiagonalKraus),
}

#[derive(Debug, Clone)]
pub enum BobCorrections {
    /// Unitaries on all of Bob's registers, one per outcome.
    Dense(Vec<CMat>),
    /// Bob applies the relabeling carried by the diagonal family.
    Relabel,
}

#[derive(Debug, Clone)]
pub struct StandardFormProtocol {
    pub dim_a: usize,
    pub dim_b: usize,
    pub message_bits: u32,
    pub alice: AliceMeasurement,
    pub bob: BobCorrections,
    /// Alice's registers, input first.
    pub alice_registers: Vec<RegisterSpec>,
    /// Bob's registers, input first.
    pub bob_registers: Vec<RegisterSpec>,
    /// Initial state of Bob's non-input registers.
    pub bob_ancilla: CVec,
    /// Labels making up the message; outcome `k` is their mixed-radix value.
    pub outcome_labels: Vec<OutcomeLabel>,
}

fn dims_of(regs: &[RegisterSpec]) -> Vec<usize> {
    regs.iter().map(|r| r.dim).collect()
}

impl StandardFormProtocol {
    /// A protocol with one input register per side and no ancillas.
    pub fn bare(dim: usize, message_bits: u32, alice: AliceMeasurement, bob: BobCorrections) -> Self {
        Self {
            dim_a: dim,
            dim_b: dim,
            message_bits,
            alice,
            bob,
            alice_registers: vec![RegisterSpec { name: "A".into(), dim, discard: false }],
            bob_registers: vec![RegisterSpec { name: "B".into(), dim, discard: false }],
            bob_ancilla: CVec::from_element(1, c(1.0, 0.0)),
            outcome_labels: Vec::new(),
        }
    }

    pub fn alice_dim(&self) -> usize {
        dims_of(&self.alice_registers).iter().product()
    }

    pub fn bob_dim(&self) -> usize {
        dims_of(&self.bob_registers).iter().product()
    }

    /// Number of outcomes if it fits in a `usize`.
    pub fn num_outcomes(&self) -> Option<usize> {
        match &self.alice {
            AliceMeasurement::Dense(ks) => Some(ks.len()),
            AliceMeasurement::Diagonal(d) => d.num_outcomes(),
        }
    }

    /// `log₂` of the number of outcomes.
    pub fn log2_outcomes(&self) -> f64 {
        match &self.alice {
            AliceMeasurement::Dense(ks) => (ks.len() as f64).log2(),
            AliceMeasurement::Diagonal(d) => d.log2_outcomes(),
        }
    }

    /// Outcomes never exceed what the message can distinguish.
    pub fn fits_message(&self) -> bool {
        self.log2_outcomes() <= self.message_bits as f64 + 1e-9
    }

    /// `‖Σ_k M_k† M_k − I‖` (operator norm; per-index for diagonal families).
    pub fn completeness_error(&self) -> f64 {
        match &self.alice {
            AliceMeasurement::Dense(ks) => {
                let mut sum = CMat::zeros(self.dim_a, self.dim_a);
                for k in ks {
                    sum += k.adjoint() * k;
                }
                linalg::identity_defect(&sum)
            }
            AliceMeasurement::Diagonal(d) => d.completeness_error(),
        }
    }

    /// Values of the message labels for outcome `k`.
    pub fn transcript(&self, k: usize) -> Vec<usize> {
        let mut rest = k;
        let mut out = vec![0; self.outcome_labels.len()];
        for (i, l) in self.outcome_labels.iter().enumerate().rev() {
            out[i] = rest % l.dim;
            rest /= l.dim;
        }
        out
    }

    /// Explicit Kraus operators and Bob unitaries.
    pub fn dense_parts(&self) -> Result<(Vec<CMat>, Vec<CMat>)> {
        match (&self.alice, &self.bob) {
            (AliceMeasurement::Dense(ks), BobCorrections::Dense(us)) => Ok((ks.clone(), us.clone())),
            (AliceMeasurement::Diagonal(d), BobCorrections::Relabel) => d.dense_parts(),
            _ => Err(Error::InvalidProtocol("Bob corrections do not match Alice's family".into())),
        }
    }

    /// Same protocol with explicit matrices.
    pub fn to_dense(&self) -> Result<Self> {
        let (ks, us) = self.dense_parts()?;
        let mut out = self.clone();
        out.alice = AliceMeasurement::Dense(ks);
        out.bob = BobCorrections::Dense(us);
        Ok(out)
    }
}

/// Runs a standard-form protocol on `input` and returns, per outcome
/// transcript, its probability and normalized state on the kept registers.
pub fn simulate_standard_dense(proto: &StandardFormProtocol, input: &PureBipartiteState) -> Result<Marginal> {
    if input.dim_a() != proto.dim_a || input.dim_b() != proto.dim_b {
        return Err(Error::DimensionMismatch {
            expected: proto.dim_a * proto.dim_b,
            got: input.dim_a() * input.dim_b(),
        });
    }
    let (ks, us) = proto.dense_parts()?;
    let psi = input.amplitude_matrix();
    let embed_b = linalg::kron(&CMat::identity(proto.dim_b, proto.dim_b), &column(&proto.bob_ancilla));
    let mut dims = dims_of(&proto.alice_registers);
    dims.extend(dims_of(&proto.bob_registers));
    let keep: Vec<usize> = proto
        .alice_registers
        .iter()
        .chain(&proto.bob_registers)
        .enumerate()
        .filter(|(_, r)| !r.discard)
        .map(|(i, _)| i)
        .collect();
    let mut out: Marginal = BTreeMap::new();
    for (k, (m, u)) in ks.iter().zip(&us).enumerate() {
        let phi = m * &psi * (u * &embed_b).transpose();
        let p = phi.norm_squared();
        if p <= 1e-15 {
            continue;
        }
        let vec = CVec::from_iterator(phi.len(), phi.transpose().iter().copied()) / c(p.sqrt(), 0.0);
        let rho = linalg::reduce_pure(&vec, &dims, &keep);
        out.insert(proto.transcript(k), (p, rho));
    }
    Ok(out)
}

fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// Ancillas first, discards last, everything else in order.
pub fn hoist(ir: &ProtocolIR) -> Result<ProtocolIR> {
    ir.validate()?;
    let mut front = Vec::new();
    let mut middle = Vec::new();
    let mut back = Vec::new();
    for ins in &ir.instructions {
        match ins {
            Instruction::AddAncilla { .. } => front.push(ins.clone()),
            Instruction::Discard { .. } => back.push(ins.clone()),
            _ => middle.push(ins.clone()),
        }
    }
    front.extend(middle);
    front.extend(back);
    let out = ProtocolIR { dim_a: ir.dim_a, dim_b: ir.dim_b, instructions: front };
    out.validate()?;
    Ok(out)
}

/// Every measurement becomes computational-basis, framed by basis changes.
pub fn split_measurements(ir: &ProtocolIR) -> Result<ProtocolIR> {
    ir.validate()?;
    let mut out = Vec::new();
    for ins in &ir.instructions {
        match ins {
            Instruction::Measure { party, register, basis: Some(b), label } => {
                let b = b.to_matrix()?;
                out.push(Instruction::unitary(*party, &[register], &b.adjoint()));
                out.push(Instruction::measure(*party, register, None, label));
                out.push(Instruction::unitary(*party, &[register], &b));
            }
            _ => out.push(ins.clone()),
        }
    }
    let out = ProtocolIR { dim_a: ir.dim_a, dim_b: ir.dim_b, instructions: out };
    out.validate()?;
    Ok(out)
}

/// `|v>|r> -> |v>|r + v mod dim>`.
pub fn copy_gate(dim: usize) -> CMat {
    let mut m = CMat::zeros(dim * dim, dim * dim);
    for v in 0..dim {
        for r in 0..dim {
            m[(v * dim + (r + v) % dim, v * dim + r)] = c(1.0, 0.0);
        }
    }
    m
}

/// `Σ_v |v><v| ⊗ U_v`.
pub fn block_diagonal(us: &[CMat]) -> CMat {
    let d = us.len();
    let sub = us[0].nrows();
    let mut m = CMat::zeros(d * sub, d * sub);
    for (v, u) in us.iter().enumerate() {
        m.view_mut((v * sub, v * sub), (sub, sub)).copy_from(u);
    }
    m
}

/// Replaces measurements of unsent labels with copies into record
/// registers, which are discarded at the end. Expects computational-basis
/// measurements and hoisted ancillas.
pub fn defer_unsent_measurements(ir: &ProtocolIR) -> Result<ProtocolIR> {
    let layout = ir.validate()?;
    let mut records: BTreeMap<String, (String, Party, usize)> = BTreeMap::new();
    for l in layout.labels.iter().filter(|l| !l.sent) {
        let mut name = format!("rec:{}", l.name);
        while layout.register(&name).is_some() {
            name.push('\'');
        }
        records.insert(l.name.clone(), (name, l.party, l.dim));
    }
    let mut front: Vec<Instruction> = Vec::new();
    let mut rest: Vec<Instruction> = Vec::new();
    for l in &layout.labels {
        if let Some((name, party, dim)) = records.get(&l.name) {
            front.push(Instruction::ancilla(*party, name, &linalg::basis_vector(*dim, 0)));
        }
    }
    for ins in &ir.instructions {
        match ins {
            Instruction::Measure { party, register, basis, label } if records.contains_key(label) => {
                if basis.is_some() {
                    return Err(Error::InvalidProtocol("split measurements before deferring".into()));
                }
                let (rec, _, dim) = &records[label];
                rest.push(Instruction::unitary(*party, &[register, rec], &copy_gate(*dim)));
            }
            Instruction::Unitary { party, registers, control: Some(label), matrices }
                if records.contains_key(label) =>
            {
                let (rec, _, _) = &records[label];
                let us: Vec<CMat> = matrices.iter().map(|m| m.to_matrix()).collect::<Result<_>>()?;
                let mut regs: Vec<&str> = vec![rec.as_str()];
                regs.extend(registers.iter().map(|s| s.as_str()));
                rest.push(Instruction::unitary(*party, &regs, &block_diagonal(&us)));
            }
            Instruction::AddAncilla { .. } => front.push(ins.clone()),
            _ => rest.push(ins.clone()),
        }
    }
    for (name, party, _) in records.values() {
        rest.push(Instruction::discard(*party, name));
    }
    front.extend(rest);
    let out = ProtocolIR { dim_a: ir.dim_a, dim_b: ir.dim_b, instructions: front };
    out.validate()?;
    Ok(out)
}

/// Singular values below this count as zero in the Schmidt transfer.
const TRANSFER_RANK_TOL: f64 = 1e-12;

struct Branch {
    values: BTreeMap<String, usize>,
    alice: CMat,
    bob: CMat,
}

/// `√(Y† Π Y)` for a projector `Π`, from the singular values of `Y† B`
/// where `Π = B B†`. Avoids square roots of eigenvalues that are zero up to
/// rounding.
fn compressed_root(y: &CMat, pi: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(pi);
    let r = vals.iter().filter(|&&x| x > 0.5).count();
    let g = y.adjoint() * vecs.columns(0, r);
    let (p, s, _) = linalg::svd_full(&g);
    let k = s.len().min(p.ncols());
    let pk = p.columns(0, k);
    pk * linalg::real_diag(&s[..k]) * pk.adjoint()
}

/// Alice's Kraus operator `T` and the unitaries `U` (Alice) and `W` (Bob)
/// with `U · T · Φ · Wᵀ = Φ · Π` for Bob's projector `Π`.
fn transfer(phi: &CMat, projectors: &[CMat]) -> Vec<(CMat, CMat, CMat)> {
    let (na, nb) = (phi.nrows(), phi.ncols());
    let (u, s, v) = linalg::svd_full(phi);
    let rank = s.iter().filter(|&&x| x > TRANSFER_RANK_TOL).count();
    let x = u.columns(0, rank).into_owned();
    // Bob-side Schmidt vectors: Φ = X S Yᵀ with Y = conj(V)
    let y = v.columns(0, rank).map(|z| z.conj());
    let complement = CMat::identity(na, na) - &x * x.adjoint();
    projectors
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            let root = compressed_root(&y, pi).map(|z| z.conj());
            let mut t = &x * root * x.adjoint();
            if i == 0 {
                t += &complement;
            }
            let left = &t * phi;
            let right = phi * pi;
            let (pl, _, ql) = linalg::svd_full(&left);
            let (pr, _, qr) = linalg::svd_full(&right);
            let alice_u = &pr * pl.adjoint();
            let bob_w = qr.map(|z| z.conj()) * ql.transpose();
            debug_assert_eq!(bob_w.nrows(), nb);
            (t, alice_u, bob_w)
        })
        .collect()
}

/// Collapses a program whose only measurements are sent, computational
/// and whose ancillas come first into Alice-measures, Bob-corrects form for
/// the given input.
pub fn merge_onto_alice(ir: &ProtocolIR, input: &PureBipartiteState) -> Result<StandardFormProtocol> {
    let layout = ir.validate()?;
    if input.dim_a() != ir.dim_a || input.dim_b() != ir.dim_b {
        return Err(Error::DimensionMismatch { expected: ir.dim_a * ir.dim_b, got: input.dim_a() * input.dim_b() });
    }
    let mut seen_other = false;
    for ins in &ir.instructions {
        match ins {
            Instruction::AddAncilla { .. } if seen_other => {
                return Err(Error::InvalidProtocol("ancillas must be hoisted before merging".into()))
            }
            Instruction::AddAncilla { .. } => {}
            Instruction::Measure { basis: Some(_), .. } => {
                return Err(Error::InvalidProtocol("measurements must be split before merging".into()))
            }
            _ => seen_other = true,
        }
    }
    if layout.labels.iter().any(|l| !l.sent) {
        return Err(Error::InvalidProtocol("unsent measurements must be deferred before merging".into()));
    }

    let side = |party: Party| -> Vec<RegisterSpec> {
        layout
            .party_registers(party)
            .iter()
            .map(|r| RegisterSpec { name: r.name.clone(), dim: r.dim, discard: r.discarded })
            .collect()
    };
    let alice_regs = side(Party::Alice);
    let bob_regs = side(Party::Bob);
    let alice_dims = dims_of(&alice_regs);
    let bob_dims = dims_of(&bob_regs);
    let index = |regs: &[RegisterSpec], name: &str| regs.iter().position(|r| r.name == name).expect("validated");

    let ancilla_state = |party: Party| -> CVec {
        let mut v = CVec::from_element(1, c(1.0, 0.0));
        for ins in &ir.instructions {
            if let Instruction::AddAncilla { party: p, state, .. } = ins {
                if *p == party {
                    v = linalg::kron_vec(&v, &state_vector(state));
                }
            }
        }
        v
    };
    let alice_anc = ancilla_state(Party::Alice);
    let bob_anc = ancilla_state(Party::Bob);
    let embed_a = linalg::kron(&CMat::identity(ir.dim_a, ir.dim_a), &column(&alice_anc));
    let embed_b = linalg::kron(&CMat::identity(ir.dim_b, ir.dim_b), &column(&bob_anc));
    let psi = input.amplitude_matrix();

    let mut branches = vec![Branch { values: BTreeMap::new(), alice: embed_a, bob: embed_b.clone() }];
    for ins in &ir.instructions {
        match ins {
            Instruction::Unitary { party, registers, control, matrices } => {
                for b in &mut branches {
                    let which = control.as_ref().map_or(0, |l| b.values[l]);
                    let u = matrices[which].to_matrix()?;
                    match party {
                        Party::Alice => {
                            let targets: Vec<usize> = registers.iter().map(|r| index(&alice_regs, r)).collect();
                            b.alice = linalg::embed_operator(&alice_dims, &targets, &u) * &b.alice;
                        }
                        Party::Bob => {
                            let targets: Vec<usize> = registers.iter().map(|r| index(&bob_regs, r)).collect();
                            b.bob = linalg::embed_operator(&bob_dims, &targets, &u) * &b.bob;
                        }
                    }
                }
            }
            Instruction::Measure { party, register, label, .. } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for b in branches {
                    match party {
                        Party::Alice => {
                            let r = index(&alice_regs, register);
                            for v in 0..alice_dims[r] {
                                let proj = linalg::embed_operator(&alice_dims, &[r], &unit_projector(alice_dims[r], v));
                                let mut values = b.values.clone();
                                values.insert(label.clone(), v);
                                next.push(Branch { values, alice: proj * &b.alice, bob: b.bob.clone() });
                            }
                        }
                        Party::Bob => {
                            let r = index(&bob_regs, register);
                            let projectors: Vec<CMat> = (0..bob_dims[r])
                                .map(|v| linalg::embed_operator(&bob_dims, &[r], &unit_projector(bob_dims[r], v)))
                                .collect();
                            let phi = &b.alice * &psi * b.bob.transpose();
                            for (v, (t, u, w)) in transfer(&phi, &projectors).into_iter().enumerate() {
                                let mut values = b.values.clone();
                                values.insert(label.clone(), v);
                                next.push(Branch { values, alice: u * t * &b.alice, bob: w * &b.bob });
                            }
                        }
                    }
                }
                branches = next;
            }
            Instruction::AddAncilla { .. } | Instruction::Send { .. } | Instruction::Discard { .. } => {}
        }
    }

    let outcome_labels: Vec<OutcomeLabel> =
        layout.sent_labels().iter().map(|l| OutcomeLabel { name: l.name.clone(), dim: l.dim }).collect();
    let key = |values: &BTreeMap<String, usize>| -> usize {
        outcome_labels.iter().fold(0, |acc, l| acc * l.dim + values[&l.name])
    };
    branches.sort_by_key(|b| key(&b.values));
    let kraus: Vec<CMat> = branches.iter().map(|b| b.alice.clone()).collect();
    let bob: Vec<CMat> = branches.iter().map(|b| linalg::extend_isometry(&b.bob, &embed_b)).collect();
    let message_bits = layout.sent_labels().iter().map(|l| bits_for(l.dim)).sum();
    Ok(StandardFormProtocol {
        dim_a: ir.dim_a,
        dim_b: ir.dim_b,
        message_bits,
        alice: AliceMeasurement::Dense(kraus),
        bob: BobCorrections::Dense(bob),
        alice_registers: alice_regs,
        bob_registers: bob_regs,
        bob_ancilla: bob_anc,
        outcome_labels,
    })
}

fn unit_projector(dim: usize, v: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(v, v)] = c(1.0, 0.0);
    m
}

/// Full rewrite pipeline for a program run on `input`.
///
/// The Bob-to-Alice step uses the Schmidt basis of the joint state, so the
/// resulting Kraus operators are specific to this input.
pub fn standardize(ir: &ProtocolIR, input: &PureBipartiteState) -> Result<StandardFormProtocol> {
    let staged = defer_unsent_measurements(&split_measurements(&hoist(ir)?)?)?;
    merge_onto_alice(&staged, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc::dense::{compare_marginals, simulate_dense};
    use crate::locc::ir::{INPUT_A, INPUT_B};
    use crate::qmath::SchmidtProfile;
    use crate::random;

    fn bell() -> PureBipartiteState {
        PureBipartiteState::from_profile(&SchmidtProfile::uniform(2))
    }

    fn sent_names(proto: &StandardFormProtocol) -> Vec<String> {
        proto.outcome_labels.iter().map(|l| l.name.clone()).collect()
    }

    fn check_equivalent(ir: &ProtocolIR, input: &PureBipartiteState) -> StandardFormProtocol {
        let proto = standardize(ir, input).unwrap();
        assert!(proto.completeness_error() < 1e-10);
        assert_eq!(proto.message_bits, ir.message_bits().unwrap());
        assert!(proto.fits_message());
        let reference = simulate_dense(ir, input).unwrap().marginal(&sent_names(&proto));
        let got = simulate_standard_dense(&proto, input).unwrap();
        let (tv, worst) = compare_marginals(&reference, &got);
        assert!(tv < 1e-9 && worst < 1e-9, "tv {tv} worst {worst}");
        proto
    }

    #[test]
    fn bob_measurement_moves_to_alice() {
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::measure(Party::Bob, INPUT_B, None, "m")).push(Instruction::send(Party::Bob, "m"));
        let proto = check_equivalent(&ir, &bell());
        assert_eq!(proto.message_bits, 1);
        assert_eq!(proto.num_outcomes(), Some(2));
    }

    #[test]
    fn standard_form_program_is_kept() {
        let mut rng = random::rng(3);
        let basis = random::unitary(&mut rng, 2);
        let fix = random::unitary(&mut rng, 2);
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::measure(Party::Alice, INPUT_A, Some(&basis), "k"))
            .push(Instruction::send(Party::Alice, "k"))
            .push(Instruction::controlled(Party::Bob, &[INPUT_B], "k", &[CMat::identity(2, 2), fix]));
        let psi = random::pure_bipartite(&mut rng, 2, 2);
        let proto = check_equivalent(&ir, &psi);
        let AliceMeasurement::Dense(ks) = &proto.alice else { panic!() };
        for (k, m) in ks.iter().enumerate() {
            let col = basis.column(k).into_owned();
            let expect = &col * col.adjoint();
            assert!((m - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn unsent_measurement_with_local_control() {
        let mut rng = random::rng(5);
        let mut ir = ProtocolIR::new(3, 2);
        let u0 = random::unitary(&mut rng, 3);
        let u1 = random::unitary(&mut rng, 3);
        ir.push(Instruction::ancilla(Party::Bob, "b1", &random::unit_vector(&mut rng, 2)))
            .push(Instruction::measure(Party::Bob, "b1", None, "hidden"))
            .push(Instruction::measure(Party::Alice, INPUT_A, Some(&random::unitary(&mut rng, 3)), "a"))
            .push(Instruction::controlled(
                Party::Bob,
                &[INPUT_B],
                "hidden",
                &[random::unitary(&mut rng, 2), CMat::identity(2, 2)],
            ))
            .push(Instruction::send(Party::Alice, "a"))
            .push(Instruction::controlled(
                Party::Bob,
                &["b1"],
                "a",
                &[linalg::shift_matrix(2, 1), CMat::identity(2, 2), linalg::shift_matrix(2, 1)],
            ))
            .push(Instruction::measure(Party::Bob, INPUT_B, None, "back"))
            .push(Instruction::send(Party::Bob, "back"))
            .push(Instruction::controlled(Party::Alice, &[INPUT_A], "back", &[u0, u1]))
            .push(Instruction::discard(Party::Bob, "b1"));
        let psi = random::pure_bipartite(&mut rng, 3, 2);
        let proto = check_equivalent(&ir, &psi);
        assert_eq!(proto.message_bits, 3);
        assert_eq!(proto.num_outcomes(), Some(6));
    }

    #[test]
    fn each_stage_preserves_the_ensemble() {
        let mut rng = random::rng(11);
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::measure(Party::Alice, INPUT_A, Some(&random::unitary(&mut rng, 2)), "x"))
            .push(Instruction::ancilla(Party::Alice, "a1", &random::unit_vector(&mut rng, 2)))
            .push(Instruction::controlled(
                Party::Alice,
                &["a1"],
                "x",
                &[random::unitary(&mut rng, 2), random::unitary(&mut rng, 2)],
            ))
            .push(Instruction::measure(Party::Bob, INPUT_B, None, "y"))
            .push(Instruction::send(Party::Bob, "y"))
            .push(Instruction::discard(Party::Alice, "a1"));
        let psi = random::pure_bipartite(&mut rng, 2, 2);
        let labels = vec!["y".to_string()];
        let reference = simulate_dense(&ir, &psi).unwrap().marginal(&labels);
        let h = hoist(&ir).unwrap();
        let s = split_measurements(&h).unwrap();
        let d = defer_unsent_measurements(&s).unwrap();
        for stage in [&h, &s, &d] {
            let got = simulate_dense(stage, &psi).unwrap().marginal(&labels);
            let (tv, worst) = compare_marginals(&reference, &got);
            assert!(tv < 1e-12 && worst < 1e-12);
        }
        assert!(d.validate().unwrap().labels.iter().all(|l| l.sent));
    }

    #[test]
    fn copy_gate_is_a_permutation() {
        let g = copy_gate(3);
        assert!(linalg::is_unitary(&g, 1e-15));
        // |2>|1> -> |2>|0>
        assert_eq!(g[(2 * 3, 2 * 3 + 1)], c(1.0, 0.0));
    }
}
