//! Computes only the canonical entries of a symmetric output.
//!
//! When the kernel's result is itself symmetric in some output axes, the
//! lowered blocks contain statements that write mirrored coordinates with
//! equal values. This pass detects those axis groups, keeps one statement
//! per mirror family, restricts the written coordinates to the sorted
//! representative, and records a replication plan so the runner can copy
//! the canonical entries across each orbit afterwards.

use super::{canon_stmt, eq_representatives, stmt_key};
use crate::ast::{assignments_equal, IndexVar};
use crate::ir::{atom, CmpOp, CompiledKernel, ReplicationPlan, Stmt, Target};
use crate::symmetrize::substitute;
use std::collections::BTreeMap;

pub fn canonical_output(kernel: &mut CompiledKernel) {
    let groups = symmetric_output_groups(kernel);
    if groups.is_empty() {
        return;
    }

    let out = kernel.assignment.output.clone();
    kernel.replication =
        Some(ReplicationPlan { output: out.tensor.clone(), axis_groups: groups.clone() });

    let chain = kernel.nests.first().map(|n| n.chain.clone()).unwrap_or_default();
    let snapshot = kernel.clone();
    for nest in &mut kernel.nests {
        for block in &mut nest.blocks {
            let reps = eq_representatives(&snapshot, &block.guard);
            let stmts = block.resolved_stmts();
            let mut kept: Vec<Stmt> = Vec::new();
            let mut keys: Vec<String> = Vec::new();
            for s in &stmts {
                let sorted = sorted_target(&snapshot, s, &groups);
                let key = stmt_key(&snapshot, &sorted, &reps);
                match keys.iter().position(|k| k == &key) {
                    None => {
                        keys.push(key);
                        kept.push(s.clone());
                    }
                    Some(i) => {
                        // Prefer the family member that already writes the
                        // sorted coordinate.
                        if s.target == sorted.target && kept[i].target != sorted.target {
                            kept[i] = s.clone();
                        }
                    }
                }
            }
            block.stmts = kept;
            super::binds::fold_binds(block);
        }

        // Canonical coordinates the loops do not already enforce need a
        // guard. Variables on the chain are visited in sorted order by
        // construction, so only off-chain pairs get one.
        for group in &groups {
            let mut vars: Vec<IndexVar> =
                group.iter().map(|&axis| out.indices[axis].clone()).collect();
            vars.sort_by_key(|v| snapshot.assignment.loop_pos(v));
            for pair in vars.windows(2) {
                if chain.contains(&pair[0]) && chain.contains(&pair[1]) {
                    continue;
                }
                for block in &mut nest.blocks {
                    block.guard = block.guard.and_atom(&atom(&pair[0], CmpOp::Le, &pair[1]));
                }
            }
        }
    }
}

/// Output axis groups the kernel's result is symmetric under, found by
/// exchanging the two axis variables across the whole assignment and
/// checking the computation reads the same.
fn symmetric_output_groups(kernel: &CompiledKernel) -> Vec<Vec<usize>> {
    let a = &kernel.assignment;
    let n = a.output.order();
    if n < 2 {
        return Vec::new();
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut x = x;
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for q in 0..n {
        for r in q + 1..n {
            let u = &a.output.indices[q];
            let v = &a.output.indices[r];
            if u == v {
                continue;
            }
            let mut map = BTreeMap::new();
            map.insert(u.clone(), v.clone());
            map.insert(v.clone(), u.clone());
            let mut swapped = substitute(a, &map);
            swapped.output.indices.swap(q, r);
            if assignments_equal(&swapped, a) {
                let (x, y) = (root(&mut parent, q), root(&mut parent, r));
                if x != y {
                    parent[y.max(x)] = x.min(y);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for axis in 0..n {
        let r = root(&mut parent, axis);
        groups.entry(r).or_default().push(axis);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

/// The statement with its target's entries sorted by loop position within
/// each symmetric output group.
fn sorted_target(kernel: &CompiledKernel, s: &Stmt, groups: &[Vec<usize>]) -> Stmt {
    let mut out = canon_stmt(kernel, s, &BTreeMap::new());
    if let Target::Access(access) = &mut out.target {
        for group in groups {
            let mut vars: Vec<IndexVar> =
                group.iter().map(|&axis| access.indices[axis].clone()).collect();
            vars.sort_by_key(|v| kernel.assignment.loop_pos(v));
            for (&axis, v) in group.iter().zip(vars) {
                access.indices[axis] = v;
            }
        }
    }
    out
}
