//! Folds statements that compute the same value within a block.
//!
//! After relabeling, a block often carries several copies of one
//! statement, or statements that a guard equality makes pointwise equal.
//! Copies of an idempotent reduction collapse outright. Under a scaling
//! algebra a family of equal statements becomes one statement with an
//! integer factor. When the block's guard pins variables equal, the
//! family can instead be respelled as distinct members of the statement's
//! relabeling orbit, which keeps every factor at one and lines the block
//! up with its neighbors for later merging.

use super::{eq_classes, eq_orbit, stmt_key};
use crate::ir::{CompiledKernel, Factor, Stmt};
use crate::scalar::Rat;

pub fn fold_duplicates(kernel: &mut CompiledKernel) {
    let snapshot = kernel.clone();
    for nest in &mut kernel.nests {
        for block in &mut nest.blocks {
            if block.lookup.is_some() {
                continue;
            }
            let reps = super::eq_representatives(&snapshot, &block.guard);
            let stmts = block.resolved_stmts();

            let mut order: Vec<String> = Vec::new();
            let mut groups: Vec<Vec<Stmt>> = Vec::new();
            for s in &stmts {
                let key = stmt_key(&snapshot, s, &reps);
                match order.iter().position(|k| k == &key) {
                    Some(i) => groups[i].push(s.clone()),
                    None => {
                        order.push(key);
                        groups.push(vec![s.clone()]);
                    }
                }
            }

            let literal: Vec<String> = {
                let empty = Default::default();
                stmts.iter().map(|s| stmt_key(&snapshot, s, &empty)).collect()
            };

            let mut out: Vec<Stmt> = Vec::new();
            for group in &groups {
                out.extend(fold_group(&snapshot, block, group, &literal));
            }
            block.stmts = out;
            super::binds::fold_binds(block);
        }
    }
}

fn fold_group(
    kernel: &CompiledKernel,
    block: &crate::ir::Block,
    group: &[Stmt],
    literal_keys: &[String],
) -> Vec<Stmt> {
    if group.len() == 1 {
        return vec![group[0].clone()];
    }
    if kernel.algebra.idempotent_reduce {
        return vec![group[0].clone()];
    }

    let unit_factors = group.iter().all(|s| s.factor.is_one());
    if unit_factors {
        let classes = eq_classes(kernel, &block.guard);
        if !classes.is_empty() {
            let empty = Default::default();
            let orbit = eq_orbit(kernel, &group[0], &classes);
            let group_keys: Vec<String> =
                group.iter().map(|s| stmt_key(kernel, s, &empty)).collect();
            let chosen: Vec<Stmt> = orbit
                .into_iter()
                .filter(|m| {
                    let k = stmt_key(kernel, m, &empty);
                    group_keys.contains(&k) || !literal_keys.contains(&k)
                })
                .take(group.len())
                .collect();
            if chosen.len() == group.len() {
                return chosen;
            }
        }
    }

    if kernel.algebra.scalar_scaling {
        let total: Rat = group
            .iter()
            .map(|s| match &s.factor {
                Factor::Const(r) => *r,
                Factor::Lookup(_) => Rat::from_integer(1),
            })
            .sum();
        let mut folded = group[0].clone();
        folded.factor = Factor::Const(total);
        return vec![folded];
    }

    group.to_vec()
}
