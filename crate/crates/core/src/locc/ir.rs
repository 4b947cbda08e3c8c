//! Two-party protocol instruction lists.
//!
//! A program starts from a pure state on Alice's register `"A"` and Bob's
//! register `"B"`. Measurement outcomes are stored under labels; a label
//! may be sent to the other party at most once and may then control that
//! party's unitaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{c, linalg, CMat, CVec, MatrixJson};

pub const INPUT_A: &str = "A";
pub const INPUT_B: &str = "B";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Instruction {
    /// New register prepared in the given unit vector (`[re, im]` pairs).
    AddAncilla {
        party: Party,
        register: String,
        dim: usize,
        state: Vec<[f64; 2]>,
    },
    /// Unitary on the listed registers (first register most significant).
    /// Without a control there is exactly one matrix; with a control label
    /// there is one matrix per possible label value.
    Unitary {
        party: Party,
        registers: Vec<String>,
        control: Option<String>,
        matrices: Vec<MatrixJson>,
    },
    /// Projective measurement of one register. `basis` columns are the
    /// measurement vectors; absent means the computational basis.
    Measure {
        party: Party,
        register: String,
        basis: Option<MatrixJson>,
        label: String,
    },
    Send {
        from: Party,
        label: String,
    },
    Discard {
        party: Party,
        register: String,
    },
}

/// A protocol acting on an input of shape `dim_a x dim_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolIR {
    pub dim_a: usize,
    pub dim_b: usize,
    pub instructions: Vec<Instruction>,
}

/// Register metadata gathered while validating.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterInfo {
    pub name: String,
    pub party: Party,
    pub dim: usize,
    pub discarded: bool,
}

/// Label metadata gathered while validating.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInfo {
    pub name: String,
    pub party: Party,
    pub dim: usize,
    pub register: String,
    pub sent: bool,
}

/// Result of validating a program: registers in creation order, labels in
/// measurement order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub registers: Vec<RegisterInfo>,
    pub labels: Vec<LabelInfo>,
}

impl Layout {
    pub fn register(&self, name: &str) -> Option<&RegisterInfo> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn label(&self, name: &str) -> Option<&LabelInfo> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn party_registers(&self, party: Party) -> Vec<&RegisterInfo> {
        self.registers.iter().filter(|r| r.party == party).collect()
    }

    pub fn sent_labels(&self) -> Vec<&LabelInfo> {
        self.labels.iter().filter(|l| l.sent).collect()
    }
}

pub(crate) fn state_vector(state: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(state.len(), state.iter().map(|[re, im]| c(*re, *im)))
}

pub(crate) fn state_json(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidProtocol(msg.into())
}

impl ProtocolIR {
    pub fn new(dim_a: usize, dim_b: usize) -> Self {
        Self { dim_a, dim_b, instructions: Vec::new() }
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.instructions.push(instruction);
        self
    }

    /// Total classical communication: `⌈log₂ dim⌉` bits per sent label.
    pub fn message_bits(&self) -> Result<u32> {
        let layout = self.validate()?;
        Ok(layout.sent_labels().iter().map(|l| bits_for(l.dim)).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("protocol serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ir: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        ir.validate()?;
        Ok(ir)
    }

    /// Checks register ownership, label scoping and matrix shapes.
    pub fn validate(&self) -> Result<Layout> {
        if self.dim_a == 0 || self.dim_b == 0 {
            return Err(invalid("input dimensions must be positive"));
        }
        let mut registers = vec![
            RegisterInfo { name: INPUT_A.into(), party: Party::Alice, dim: self.dim_a, discarded: false },
            RegisterInfo { name: INPUT_B.into(), party: Party::Bob, dim: self.dim_b, discarded: false },
        ];
        let mut labels: Vec<LabelInfo> = Vec::new();
        // labels each party may read, mapped to their dimension
        let mut known: BTreeMap<Party, BTreeSet<String>> = BTreeMap::new();

        let live = |registers: &Vec<RegisterInfo>, party: Party, name: &str| -> Result<usize> {
            let r =
                registers.iter().find(|r| r.name == name).ok_or_else(|| invalid(format!("unknown register {name}")))?;
            if r.party != party {
                return Err(invalid(format!("register {name} is not held by {party:?}")));
            }
            if r.discarded {
                return Err(invalid(format!("register {name} used after discard")));
            }
            Ok(r.dim)
        };

        for (pos, ins) in self.instructions.iter().enumerate() {
            let at = |msg: String| invalid(format!("instruction {pos}: {msg}"));
            match ins {
                Instruction::AddAncilla { party, register, dim, state } => {
                    if registers.iter().any(|r| &r.name == register) {
                        return Err(at(format!("register {register} already exists")));
                    }
                    if *dim == 0 || state.len() != *dim {
                        return Err(at(format!("ancilla {register} state has wrong length")));
                    }
                    let n2 = state_vector(state).norm_squared();
                    if (n2 - 1.0).abs() > crate::VALIDITY_TOL {
                        return Err(at(format!("ancilla {register} state is not normalized")));
                    }
                    registers.push(RegisterInfo { name: register.clone(), party: *party, dim: *dim, discarded: false });
                }
                Instruction::Unitary { party, registers: regs, control, matrices } => {
                    if regs.is_empty() {
                        return Err(at("unitary acts on no registers".into()));
                    }
                    let distinct: BTreeSet<&String> = regs.iter().collect();
                    if distinct.len() != regs.len() {
                        return Err(at("unitary lists a register twice".into()));
                    }
                    let mut sub = 1;
                    for r in regs {
                        sub *= live(&registers, *party, r).map_err(|e| at(e.to_string()))?;
                    }
                    let expected = match control {
                        None => 1,
                        Some(label) => {
                            if !known.get(party).is_some_and(|s| s.contains(label)) {
                                return Err(at(format!("control label {label} is not available to {party:?}")));
                            }
                            let info = labels.iter().find(|l| &l.name == label).expect("known label");
                            if regs.contains(&info.register) {
                                return Err(Error::UnsupportedProtocol(format!(
                                    "instruction {pos}: classical control writes to measured register {}",
                                    info.register
                                )));
                            }
                            info.dim
                        }
                    };
                    if matrices.len() != expected {
                        return Err(at(format!("expected {expected} matrices, got {}", matrices.len())));
                    }
                    for m in matrices {
                        let u = m.to_matrix()?;
                        if u.nrows() != sub || u.ncols() != sub {
                            return Err(at(format!("matrix is {}x{}, registers need {sub}", u.nrows(), u.ncols())));
                        }
                        if !linalg::is_unitary(&u, crate::VALIDITY_TOL) {
                            return Err(at("matrix is not unitary".into()));
                        }
                    }
                }
                Instruction::Measure { party, register, basis, label } => {
                    let dim = live(&registers, *party, register).map_err(|e| at(e.to_string()))?;
                    if labels.iter().any(|l| &l.name == label) {
                        return Err(at(format!("label {label} recorded twice")));
                    }
                    if let Some(b) = basis {
                        let b = b.to_matrix()?;
                        if b.nrows() != dim || b.ncols() != dim || !linalg::is_unitary(&b, crate::VALIDITY_TOL) {
                            return Err(at("measurement basis is not an orthonormal basis of the register".into()));
                        }
                    }
                    labels.push(LabelInfo {
                        name: label.clone(),
                        party: *party,
                        dim,
                        register: register.clone(),
                        sent: false,
                    });
                    known.entry(*party).or_default().insert(label.clone());
                }
                Instruction::Send { from, label } => {
                    let info = labels
                        .iter_mut()
                        .find(|l| &l.name == label)
                        .ok_or_else(|| at(format!("label {label} sent before it was recorded")))?;
                    if info.party != *from {
                        return Err(at(format!("label {label} was not recorded by {from:?}")));
                    }
                    if info.sent {
                        return Err(at(format!("label {label} sent twice")));
                    }
                    info.sent = true;
                    known.entry(from.other()).or_default().insert(label.clone());
                }
                Instruction::Discard { party, register } => {
                    live(&registers, *party, register).map_err(|e| at(e.to_string()))?;
                    let r = registers.iter_mut().find(|r| &r.name == register).expect("checked");
                    r.discarded = true;
                }
            }
        }
        Ok(Layout { registers, labels })
    }
}

/// Bits needed to transmit one of `dim` values.
pub fn bits_for(dim: usize) -> u32 {
    if dim <= 1 {
        0
    } else {
        usize::BITS - (dim - 1).leading_zeros()
    }
}

/// Builder helpers used by generators and tests.
impl Instruction {
    pub fn ancilla(party: Party, register: &str, state: &CVec) -> Self {
        Instruction::AddAncilla { party, register: register.into(), dim: state.len(), state: state_json(state) }
    }

    pub fn unitary(party: Party, registers: &[&str], u: &CMat) -> Self {
        Instruction::Unitary {
            party,
            registers: registers.iter().map(|s| s.to_string()).collect(),
            control: None,
            matrices: vec![MatrixJson::from_matrix(u)],
        }
    }

    pub fn controlled(party: Party, registers: &[&str], label: &str, us: &[CMat]) -> Self {
        Instruction::Unitary {
            party,
            registers: registers.iter().map(|s| s.to_string()).collect(),
            control: Some(label.into()),
            matrices: us.iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    pub fn measure(party: Party, register: &str, basis: Option<&CMat>, label: &str) -> Self {
        Instruction::Measure {
            party,
            register: register.into(),
            basis: basis.map(MatrixJson::from_matrix),
            label: label.into(),
        }
    }

    pub fn send(from: Party, label: &str) -> Self {
        Instruction::Send { from, label: label.into() }
    }

    pub fn discard(party: Party, register: &str) -> Self {
        Instruction::Discard { party, register: register.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> CMat {
        linalg::shift_matrix(2, 1)
    }

    #[test]
    fn bits_for_dims() {
        assert_eq!([1, 2, 3, 4, 5, 8, 9].map(bits_for), [0, 1, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn valid_program_and_message_bits() {
        let mut ir = ProtocolIR::new(2, 3);
        ir.push(Instruction::measure(Party::Bob, INPUT_B, None, "m"))
            .push(Instruction::send(Party::Bob, "m"))
            .push(Instruction::controlled(Party::Alice, &[INPUT_A], "m", &[x(), CMat::identity(2, 2), x()]));
        let layout = ir.validate().unwrap();
        assert_eq!(layout.labels[0].dim, 3);
        assert_eq!(ir.message_bits().unwrap(), 2);
        let back = ProtocolIR::from_json(&ir.to_json()).unwrap();
        assert_eq!(back, ir);
    }

    #[test]
    fn scoping_errors() {
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::measure(Party::Bob, INPUT_B, None, "m")).push(Instruction::controlled(
            Party::Alice,
            &[INPUT_A],
            "m",
            &[x(), x()],
        ));
        assert!(matches!(ir.validate(), Err(Error::InvalidProtocol(_))));

        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::send(Party::Alice, "nothing"));
        assert!(ir.validate().is_err());

        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::unitary(Party::Alice, &[INPUT_B], &x()));
        assert!(ir.validate().is_err());

        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::discard(Party::Alice, INPUT_A)).push(Instruction::unitary(Party::Alice, &[INPUT_A], &x()));
        assert!(ir.validate().is_err());
    }

    #[test]
    fn control_on_measured_register_is_unsupported() {
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::measure(Party::Alice, INPUT_A, None, "m")).push(Instruction::controlled(
            Party::Alice,
            &[INPUT_A],
            "m",
            &[x(), x()],
        ));
        assert!(matches!(ir.validate(), Err(Error::UnsupportedProtocol(_))));
    }

    #[test]
    fn non_unitary_is_rejected() {
        let mut ir = ProtocolIR::new(2, 2);
        ir.push(Instruction::unitary(Party::Alice, &[INPUT_A], &linalg::real_diag(&[1.0, 0.5])));
        assert!(ir.validate().is_err());
    }
}
