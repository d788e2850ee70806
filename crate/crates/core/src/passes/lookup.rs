//! Replaces the per-pattern blocks with one table-scaled block.
//!
//! Over the canonical chain each point matches exactly one pattern of
//! equalities between adjacent chain variables. Instead of branching to a
//! pattern-specific block, the nest can run the strict block's statements
//! everywhere and scale them by a weight looked up from which equalities
//! hold. The weight table is derived by matching each pattern's block
//! against the strict statements collapsed under that pattern's
//! equalities, then certified by running both forms over an exhaustive
//! rational cube; any inconsistency or mismatch leaves the kernel as it
//! was.

use super::{eq_representatives, stmt_key};
use crate::ast::{IndexVar, SymmetryPartition};
use crate::exec::run_dense;
use crate::ir::{atom, Block, CmpOp, CompiledKernel, Factor, Guard, LookupBind, Stmt};
use crate::scalar::Rat;
use crate::tensor::DenseTensor;
use std::collections::BTreeMap;

pub fn factor_table(kernel: &mut CompiledKernel) {
    if let Some(rewritten) = rewrite(kernel) {
        if certified(kernel, &rewritten) {
            *kernel = rewritten;
        }
    }
}

fn rewrite(kernel: &CompiledKernel) -> Option<CompiledKernel> {
    if !kernel.algebra.scalar_scaling || kernel.nests.len() != 1 || kernel.split.is_some() {
        return None;
    }
    let nest = &kernel.nests[0];
    let chain = &nest.chain;
    let gaps = chain.len().checked_sub(1)?;
    if gaps == 0 || !nest.workspaces.is_empty() {
        return None;
    }

    // Weight requirements per pattern, collected from every guard clause.
    let mut weights: Vec<Option<Vec<(String, Rat)>>> = vec![None; 1 << gaps];
    for block in &nest.blocks {
        if block.lookup.is_some() || block.guard.is_always() {
            return None;
        }
        let stmts = block.resolved_stmts();
        for clause in block.guard.clauses() {
            let mask = clause_mask(chain, clause)?;
            let reps = eq_representatives(kernel, &Guard::from_conj(clause.clone()));
            let mut w: Vec<(String, Rat)> = Vec::new();
            for s in &stmts {
                let key = stmt_key(kernel, s, &reps);
                let f = match &s.factor {
                    Factor::Const(r) => *r,
                    Factor::Lookup(_) => return None,
                };
                match w.iter_mut().find(|(k, _)| k == &key) {
                    Some((_, total)) => *total += f,
                    None => w.push((key, f)),
                }
            }
            if weights[mask].is_some() {
                return None;
            }
            weights[mask] = Some(w);
        }
    }

    // The strict pattern's statements, factors dropped, are the skeleton
    // every other pattern must be a collapse of.
    let strict = weights[0].clone()?;
    let strict_block_idx = nest.blocks.iter().position(|b| {
        b.guard.clauses().iter().any(|c| clause_mask(chain, c) == Some(0))
    })?;
    let skeleton: Vec<Stmt> = nest.blocks[strict_block_idx]
        .resolved_stmts()
        .iter()
        .map(|s| Stmt { factor: Factor::Lookup("w".into()), ..s.clone() })
        .collect();
    if strict.iter().any(|(_, f)| *f != strict[0].1) {
        return None;
    }

    let mut table: Vec<Rat> = Vec::with_capacity(1 << gaps);
    for mask in 0..(1usize << gaps) {
        let needed = weights[mask].take()?;
        let reps = eq_representatives(
            kernel,
            &Guard::from_conj(mask_atoms(chain, mask, CmpOp::Eq)),
        );
        let mut classes: Vec<(String, Rat)> = Vec::new();
        for s in &skeleton {
            let key = stmt_key(kernel, s, &reps);
            let one = Rat::from_integer(1);
            match classes.iter_mut().find(|(k, _)| k == &key) {
                Some((_, n)) => *n += one,
                None => classes.push((key, one)),
            }
        }
        if classes.len() != needed.len() {
            return None;
        }
        let mut alpha: Option<Rat> = None;
        for (key, size) in &classes {
            let (_, w) = needed.iter().find(|(k, _)| k == key)?;
            let a = w / size;
            match alpha {
                None => alpha = Some(a),
                Some(prev) if prev == a => {}
                Some(_) => return None,
            }
        }
        table.push(alpha?);
    }

    let mut out = kernel.clone();
    let mut block = Block::new(Guard::always(), skeleton);
    block.lookup = Some(LookupBind {
        name: "w".into(),
        atoms: mask_atoms(chain, (1 << gaps) - 1, CmpOp::Eq),
        table,
    });
    super::binds::fold_binds(&mut block);
    out.nests[0].blocks = vec![block];
    Some(out)
}

/// Which pattern a conjunction describes: bit m set when the clause pins
/// chain neighbors m and m+1 equal. Clauses with other atoms, or not
/// covering every gap, describe no single pattern.
fn clause_mask(chain: &[IndexVar], clause: &[crate::ir::Atom]) -> Option<usize> {
    let mut mask = 0usize;
    let mut covered = vec![false; chain.len().saturating_sub(1)];
    for a in clause {
        let gap = chain.windows(2).position(|w| w[0] == a.lhs && w[1] == a.rhs)?;
        if covered[gap] {
            return None;
        }
        covered[gap] = true;
        match a.op {
            CmpOp::Eq => mask |= 1 << gap,
            CmpOp::Lt => {}
            _ => return None,
        }
    }
    covered.iter().all(|&c| c).then_some(mask)
}

fn mask_atoms(chain: &[IndexVar], mask: usize, eq_only: CmpOp) -> Vec<crate::ir::Atom> {
    (0..chain.len() - 1)
        .filter(|m| mask & (1 << m) != 0)
        .map(|m| atom(&chain[m], eq_only, &chain[m + 1]))
        .collect()
}

/// Runs both forms over a small exhaustive rational cube and accepts the
/// rewrite only on exact agreement.
fn certified(original: &CompiledKernel, rewritten: &CompiledKernel) -> bool {
    let chain_len = original.nests[0].chain.len();
    let mut extents: BTreeMap<IndexVar, usize> = BTreeMap::new();
    for v in &original.assignment.loop_order {
        let on_chain = original.nests[0].chain.contains(v);
        extents.insert(v.clone(), if on_chain { chain_len + 1 } else { 2 });
    }
    let mut inputs: BTreeMap<String, DenseTensor<Rat>> = BTreeMap::new();
    for access in &original.assignment.operands {
        if inputs.contains_key(&access.tensor) {
            continue;
        }
        let dims: Vec<usize> = access.indices.iter().map(|v| extents[v]).collect();
        let partition = original
            .assignment
            .partition_of(&access.tensor)
            .cloned()
            .unwrap_or_else(|| SymmetryPartition::trivial(dims.len()));
        let name = access.tensor.clone();
        inputs.insert(
            name.clone(),
            DenseTensor::from_fn(dims, |coords| {
                let mut canon = coords.to_vec();
                for part in partition.parts() {
                    let mut vals: Vec<usize> = part.iter().map(|&ax| canon[ax]).collect();
                    vals.sort_unstable();
                    for (&ax, v) in part.iter().zip(vals) {
                        canon[ax] = v;
                    }
                }
                let mut h = name.bytes().fold(7usize, |h, b| h.wrapping_mul(31) ^ b as usize);
                for c in canon {
                    h = h.wrapping_mul(131).wrapping_add(c + 3);
                }
                Rat::from_integer((h % 11) as i64 + 1)
            }),
        );
    }
    match (run_dense(original, &inputs, None), run_dense(rewritten, &inputs, None)) {
        (Ok(a), Ok(b)) => a.output.data() == b.output.data(),
        _ => false,
    }
}
