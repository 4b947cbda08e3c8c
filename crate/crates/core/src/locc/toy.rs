//! Seeded generator of small random LOCC programs, used to exercise the
//! standard-form reduction against the dense simulator.

use rand::Rng;

use crate::qmath::PureBipartiteState;
use crate::random;

use super::ir::{Instruction, Party, ProtocolIR, INPUT_A, INPUT_B};

/// Shape limits for generated programs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyShape {
    pub max_local_dim: usize,
    pub max_rounds: usize,
    pub send_prob: f64,
}

impl Default for ToyShape {
    fn default() -> Self {
        Self { max_local_dim: 4, max_rounds: 3, send_prob: 0.7 }
    }
}

struct Side {
    registers: Vec<(String, usize)>,
    /// Readable labels: name, measured register, number of values.
    labels: Vec<(String, String, usize)>,
    ancilla: Option<String>,
}

/// A random program together with a random pure input of matching shape.
pub fn random_toy(seed: u64, shape: ToyShape) -> (ProtocolIR, PureBipartiteState) {
    let mut rng = random::rng(seed);
    let dim_a = rng.random_range(2..=shape.max_local_dim);
    let dim_b = rng.random_range(2..=shape.max_local_dim);
    let mut ir = ProtocolIR::new(dim_a, dim_b);
    let mut sides = [
        Side { registers: vec![(INPUT_A.into(), dim_a)], labels: vec![], ancilla: None },
        Side { registers: vec![(INPUT_B.into(), dim_b)], labels: vec![], ancilla: None },
    ];
    let rounds = rng.random_range(1..=shape.max_rounds);
    let mut party = if rng.random_bool(0.5) { Party::Alice } else { Party::Bob };
    for counter in 0..rounds {
        let me = party as usize;
        let tag = if party == Party::Alice { "a" } else { "b" };
        if sides[me].ancilla.is_none() && rng.random_bool(0.4) {
            let name = format!("{tag}anc");
            ir.push(Instruction::ancilla(party, &name, &random::unit_vector(&mut rng, 2)));
            sides[me].registers.push((name.clone(), 2));
            sides[me].ancilla = Some(name);
        }

        // a local unitary, possibly controlled by a readable label
        let (target, dim) = sides[me].registers[rng.random_range(0..sides[me].registers.len())].clone();
        let control = (!sides[me].labels.is_empty() && rng.random_bool(0.6))
            .then(|| sides[me].labels[rng.random_range(0..sides[me].labels.len())].clone())
            .filter(|(_, measured, _)| *measured != target);
        match control {
            Some((label, _, label_dim)) => {
                let us: Vec<_> = (0..label_dim).map(|_| random::unitary(&mut rng, dim)).collect();
                ir.push(Instruction::controlled(party, &[&target], &label, &us));
            }
            None => {
                ir.push(Instruction::unitary(party, &[&target], &random::unitary(&mut rng, dim)));
            }
        }

        let (register, dim) = sides[me].registers[rng.random_range(0..sides[me].registers.len())].clone();
        let label = format!("{tag}{counter}");
        let basis = rng.random_bool(0.7).then(|| random::unitary(&mut rng, dim));
        ir.push(Instruction::measure(party, &register, basis.as_ref(), &label));
        sides[me].labels.push((label.clone(), register.clone(), dim));
        if rng.random_bool(shape.send_prob) {
            ir.push(Instruction::send(party, &label));
            // the receiver may react to the message
            let other = party.other() as usize;
            sides[other].labels.push((label, register, dim));
        }
        party = party.other();
    }

    // a final correction by either party on its input register
    let me = party as usize;
    let input = sides[me].registers[0].clone();
    let usable = sides[me].labels.iter().rfind(|(_, m, _)| *m != input.0).cloned();
    if let Some((label, _, label_dim)) = usable {
        let us: Vec<_> = (0..label_dim).map(|_| random::unitary(&mut rng, input.1)).collect();
        ir.push(Instruction::controlled(party, &[&input.0], &label, &us));
    }
    for (p, side) in [Party::Alice, Party::Bob].into_iter().zip(&sides) {
        if let Some(name) = &side.ancilla {
            if rng.random_bool(0.5) {
                ir.push(Instruction::discard(p, name));
            }
        }
    }
    let psi = random::pure_bipartite(&mut rng, dim_a, dim_b);
    (ir, psi)
}
