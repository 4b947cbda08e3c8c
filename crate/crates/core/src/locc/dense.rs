//! Exhaustive state-vector simulation of protocol programs, branching on
//! every measurement outcome.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qmath::{self, c, linalg, CMat, CVec, PureBipartiteState};

use super::ir::{state_vector, Instruction, Layout, Party, ProtocolIR, INPUT_A, INPUT_B};

/// Largest joint dimension the dense simulator accepts.
pub const DENSE_DIM_CAP: usize = 1 << 14;

/// Branches below this probability are dropped.
const PRUNE_PROB: f64 = 1e-15;

/// One leaf of the outcome tree.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Every recorded label with its value.
    pub transcript: BTreeMap<String, usize>,
    pub prob: f64,
    /// Normalized state on the kept registers, Alice's first.
    pub output: CMat,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    /// Kept registers `(name, dim)` in output order, Alice's first.
    pub kept: Vec<(String, usize)>,
    pub branches: Vec<Branch>,
}

/// Ensemble grouped by the values of a chosen set of labels.
pub type Marginal = BTreeMap<Vec<usize>, (f64, CMat)>;

impl Ensemble {
    pub fn total_prob(&self) -> f64 {
        self.branches.iter().map(|b| b.prob).sum()
    }

    /// Mixes branches that agree on `labels`, keyed by those label values.
    pub fn marginal(&self, labels: &[String]) -> Marginal {
        let mut out: Marginal = BTreeMap::new();
        for b in &self.branches {
            let key: Vec<usize> = labels.iter().map(|l| b.transcript[l]).collect();
            let entry = out.entry(key).or_insert_with(|| (0.0, CMat::zeros(b.output.nrows(), b.output.ncols())));
            entry.0 += b.prob;
            entry.1 += &b.output * c(b.prob, 0.0);
        }
        for (p, rho) in out.values_mut() {
            if *p > 0.0 {
                *rho /= c(*p, 0.0);
            }
        }
        out
    }
}

/// Total-variation distance between the two label distributions and the
/// largest trace distance between matching branch states with probability
/// above `1e-12` in either ensemble.
pub fn compare_marginals(a: &Marginal, b: &Marginal) -> (f64, f64) {
    let mut keys: Vec<&Vec<usize>> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut tv = 0.0;
    let mut worst: f64 = 0.0;
    for k in keys {
        let pa = a.get(k).map_or(0.0, |e| e.0);
        let pb = b.get(k).map_or(0.0, |e| e.0);
        tv += (pa - pb).abs();
        if pa > 1e-12 && pb > 1e-12 {
            let d = qmath::hermitian_trace_norm(&(&a[k].1 - &b[k].1));
            worst = worst.max(d);
        } else if pa > 1e-12 || pb > 1e-12 {
            worst = worst.max(2.0);
        }
    }
    (0.5 * tv, worst)
}

struct Walker<'a> {
    ir: &'a ProtocolIR,
    layout: &'a Layout,
    out: Vec<Branch>,
    kept: Vec<usize>,
}

impl Walker<'_> {
    fn step(
        &mut self,
        pos: usize,
        state: CVec,
        names: Vec<String>,
        dims: Vec<usize>,
        prob: f64,
        tr: BTreeMap<String, usize>,
    ) -> Result<()> {
        if pos == self.ir.instructions.len() {
            let keep: Vec<usize> = self
                .kept
                .iter()
                .map(|&k| names.iter().position(|n| *n == self.layout.registers[k].name).expect("register exists"))
                .collect();
            let output = linalg::reduce_pure(&state, &dims, &keep);
            self.out.push(Branch { transcript: tr, prob, output });
            return Ok(());
        }
        let index = |name: &str| names.iter().position(|n| n == name).expect("validated register");
        match &self.ir.instructions[pos] {
            Instruction::AddAncilla { register, state: anc, .. } => {
                let total = dims.iter().product::<usize>() * anc.len();
                if total > DENSE_DIM_CAP {
                    return Err(Error::CapExceeded { count: total as f64, cap: DENSE_DIM_CAP as f64 });
                }
                let state = linalg::kron_vec(&state, &state_vector(anc));
                let (mut names, mut dims) = (names, dims);
                names.push(register.clone());
                dims.push(anc.len());
                self.step(pos + 1, state, names, dims, prob, tr)
            }
            Instruction::Unitary { registers, control, matrices, .. } => {
                let which = match control {
                    None => 0,
                    Some(label) => tr[label],
                };
                let targets: Vec<usize> = registers.iter().map(|r| index(r)).collect();
                let u = matrices[which].to_matrix()?;
                let state = linalg::apply_on(&state, &dims, &targets, &u);
                self.step(pos + 1, state, names, dims, prob, tr)
            }
            Instruction::Measure { register, basis, label, .. } => {
                let r = index(register);
                let dim = dims[r];
                let basis = match basis {
                    Some(b) => b.to_matrix()?,
                    None => CMat::identity(dim, dim),
                };
                for v in 0..dim {
                    let col = basis.column(v).into_owned();
                    let projector = &col * col.adjoint();
                    let branch = linalg::apply_on(&state, &dims, &[r], &projector);
                    let p = branch.norm_squared();
                    if prob * p <= PRUNE_PROB {
                        continue;
                    }
                    let mut tr = tr.clone();
                    tr.insert(label.clone(), v);
                    let branch = branch / c(p.sqrt(), 0.0);
                    self.step(pos + 1, branch, names.clone(), dims.clone(), prob * p, tr)?;
                }
                Ok(())
            }
            Instruction::Send { .. } | Instruction::Discard { .. } => self.step(pos + 1, state, names, dims, prob, tr),
        }
    }
}

/// Runs `ir` on `input`, returning every branch with its full transcript.
pub fn simulate_dense(ir: &ProtocolIR, input: &PureBipartiteState) -> Result<Ensemble> {
    let layout = ir.validate()?;
    if input.dim_a() != ir.dim_a || input.dim_b() != ir.dim_b {
        return Err(Error::DimensionMismatch { expected: ir.dim_a * ir.dim_b, got: input.dim_a() * input.dim_b() });
    }
    let total: usize = layout.registers.iter().map(|r| r.dim).product();
    if total > DENSE_DIM_CAP {
        return Err(Error::CapExceeded { count: total as f64, cap: DENSE_DIM_CAP as f64 });
    }
    let kept: Vec<usize> = [Party::Alice, Party::Bob]
        .iter()
        .flat_map(|&p| {
            layout.registers.iter().enumerate().filter(move |(_, r)| r.party == p && !r.discarded).map(|(i, _)| i)
        })
        .collect();
    let kept_info = kept.iter().map(|&k| (layout.registers[k].name.clone(), layout.registers[k].dim)).collect();
    let mut walker = Walker { ir, layout: &layout, out: Vec::new(), kept };
    walker.step(
        0,
        input.amplitudes().clone(),
        vec![INPUT_A.to_string(), INPUT_B.to_string()],
        vec![ir.dim_a, ir.dim_b],
        1.0,
        BTreeMap::new(),
    )?;
    Ok(Ensemble { kept: kept_info, branches: walker.out })
}
