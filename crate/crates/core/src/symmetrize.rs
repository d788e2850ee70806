//! Symmetric lowering: from one assignment to guarded statement blocks.
//!
//! When operand tensors are symmetric, only canonical coordinate tuples
//! (nondecreasing along the permutable index chain) need to be visited.
//! Each equality pattern of the chain gets one block: its guard states
//! which chain entries coincide, and its statements are the distinct
//! relabelings of the original assignment that restore everything the
//! restricted iteration space no longer reaches. The block set is exact,
//! not scaled: duplicate statements produced by coinciding indices are
//! left in place for the grouping pass to fold.

use crate::ast::{normalize, EinsumAssignment, IndexVar, TensorAccess};
use crate::ir::{atom, Block, CmpOp, CompiledKernel, Guard, LoopNest, Stmt, Term};
use crate::symmetry::{unique_relabelings, Composition, Perm};
use std::collections::BTreeMap;

/// Index variables that can be permuted without changing the result: the
/// union of all operand indices sitting in a declared symmetric axis
/// group, sorted by loop position. This is the chain p1 <= ... <= pn the
/// lowered nest iterates.
pub fn permutable_chain(a: &EinsumAssignment) -> Vec<IndexVar> {
    let mut vars: Vec<IndexVar> = Vec::new();
    for op in &a.operands {
        if let Some(partition) = a.symmetries.get(&op.tensor) {
            for part in partition.symmetric_parts() {
                for &axis in part {
                    let v = &op.indices[axis];
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
        }
    }
    vars.sort_by_key(|v| a.loop_pos(v));
    vars
}

/// Renames index variables throughout the assignment's accesses. Loop
/// order is untouched: relabeled statements still run inside the original
/// nest.
pub fn substitute(a: &EinsumAssignment, map: &BTreeMap<IndexVar, IndexVar>) -> EinsumAssignment {
    let rename = |acc: &TensorAccess| TensorAccess {
        tensor: acc.tensor.clone(),
        indices: acc.indices.iter().map(|v| map.get(v).unwrap_or(v).clone()).collect(),
    };
    EinsumAssignment {
        output: rename(&a.output),
        operands: a.operands.iter().map(rename).collect(),
        ..a.clone()
    }
}

/// Applies the relabeling sigma to the assignment: chain entry m is
/// renamed to chain entry sigma(m).
pub fn relabel(a: &EinsumAssignment, chain: &[IndexVar], sigma: &Perm) -> EinsumAssignment {
    let map: BTreeMap<IndexVar, IndexVar> = chain
        .iter()
        .enumerate()
        .map(|(m, v)| (v.clone(), chain[sigma.apply(m)].clone()))
        .collect();
    substitute(a, &map)
}

/// Guard for one equality pattern: consecutive chain entries within a run
/// compare equal, entries across a run boundary compare strictly.
pub fn pattern_guard(chain: &[IndexVar], classes: &Composition) -> Guard {
    let mut atoms = Vec::new();
    for m in 0..chain.len().saturating_sub(1) {
        let op = if classes.run_of(m) == classes.run_of(m + 1) { CmpOp::Eq } else { CmpOp::Lt };
        atoms.push(atom(&chain[m], op, &chain[m + 1]));
    }
    Guard::from_conj(atoms)
}

fn statement_for(relabeled: &EinsumAssignment) -> Stmt {
    Stmt::new(
        relabeled.output.clone(),
        relabeled.operands.iter().cloned().map(Term::Access).collect(),
    )
}

/// Operand that drives sparse iteration: the highest-order symmetric
/// operand when one exists, otherwise the highest-order operand, ties
/// broken by normalized operand order. Scalar operands never drive.
pub fn select_driver(a: &EinsumAssignment) -> Option<String> {
    let symmetric = |t: &TensorAccess| {
        a.symmetries.get(&t.tensor).map(|p| p.symmetric_parts().count() > 0).unwrap_or(false)
    };
    let candidates: Vec<&TensorAccess> = if a.operands.iter().any(|t| symmetric(t)) {
        a.operands.iter().filter(|t| symmetric(t)).collect()
    } else {
        a.operands.iter().filter(|t| t.order() > 0).collect()
    };
    candidates.iter().max_by_key(|t| t.order()).map(|t| t.tensor.clone())
}

/// Lowers an assignment to its symmetric block structure with the chain
/// restricted to canonical tuples. With no declared symmetry this is a
/// single unguarded block holding the assignment itself.
pub fn symmetrize(a: &EinsumAssignment) -> CompiledKernel {
    let chain = permutable_chain(&normalize(a));
    symmetrize_with_chain(a, chain)
}

/// Lowers with an explicit chain. An empty chain keeps the full iteration
/// space: the single resulting block runs the assignment as written.
pub fn symmetrize_with_chain(a: &EinsumAssignment, chain: Vec<IndexVar>) -> CompiledKernel {
    let a = normalize(a);
    let blocks: Vec<Block> = Composition::enumerate(chain.len())
        .iter()
        .map(|classes| {
            let stmts = unique_relabelings(classes)
                .iter()
                .map(|sigma| statement_for(&normalize(&relabel(&a, &chain, sigma))))
                .collect();
            Block::new(pattern_guard(&chain, classes), stmts)
        })
        .collect();
    CompiledKernel {
        algebra: a.algebra.clone(),
        driver: select_driver(&a),
        nests: vec![LoopNest {
            loops: a.loop_order.clone(),
            chain,
            blocks,
            workspaces: Vec::new(),
        }],
        transposes: Vec::new(),
        split: None,
        replication: None,
        assignment: a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Target;
    use crate::parse::parse;
    use crate::symmetry::Composition;

    fn target_names(block: &Block) -> Vec<String> {
        block
            .stmts
            .iter()
            .map(|s| match &s.target {
                Target::Access(a) => a.to_string(),
                Target::Workspace(_) => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn ssymv_lowers_to_strict_and_diagonal_blocks() {
        let a = parse("y[i] += A[i, j] * x[j]\nsym A: {1, 2}\nloop i, j").unwrap();
        let k = symmetrize(&a);
        assert_eq!(
            k.dump(),
            "nest (i, j) where i <= j\n\
             \x20 block i < j:\n\
             \x20   y[i] += A[i, j] * x[j]\n\
             \x20   y[j] += A[i, j] * x[i]\n\
             \x20 block i == j:\n\
             \x20   y[i] += A[i, j] * x[j]\n"
        );
        assert_eq!(k.driver.as_deref(), Some("A"));
    }

    #[test]
    fn three_way_product_restores_all_six_orderings() {
        let a = parse("C[i, j] += A[i, k, l] * B[k, j] * B[l, j]\nsym A: {1, 2, 3}\nloop i, k, l, j")
            .unwrap();
        let k = symmetrize(&a);
        let nest = &k.nests[0];
        assert_eq!(nest.chain.len(), 3);
        assert_eq!(nest.blocks.len(), 4);

        let guards: Vec<String> = nest.blocks.iter().map(|b| b.guard.to_string()).collect();
        assert_eq!(guards, vec!["i < k && k < l", "i == k && k < l", "i < k && k == l", "i == k && k == l"]);

        assert_eq!(
            target_names(&nest.blocks[0]),
            vec!["C[i, j]", "C[i, j]", "C[k, j]", "C[k, j]", "C[l, j]", "C[l, j]"]
        );
        assert_eq!(target_names(&nest.blocks[1]), vec!["C[i, j]", "C[i, j]", "C[l, j]"]);
        assert_eq!(target_names(&nest.blocks[2]), vec!["C[i, j]", "C[k, j]", "C[k, j]"]);
        assert_eq!(target_names(&nest.blocks[3]), vec!["C[i, j]"]);

        let diag = &nest.blocks[1].stmts[2];
        assert_eq!(
            crate::ir::stmt_str(diag, nest, &k.algebra),
            "C[l, j] += A[i, k, l] * B[i, j] * B[k, j]"
        );
    }

    #[test]
    fn relabeling_renames_every_occurrence() {
        let a = parse("C[i, j] += A[i, k, l] * B[k, j] * B[l, j]\nsym A: {1, 2, 3}\nloop i, k, l, j")
            .unwrap();
        let chain = permutable_chain(&a);
        assert_eq!(chain.iter().map(|v| v.name()).collect::<Vec<_>>(), vec!["i", "k", "l"]);
        let sigma = Perm::from_one_based(&[3, 1, 2]).unwrap();
        let r = normalize(&relabel(&a, &chain, &sigma));
        assert_eq!(
            format!("{} += {} * {} * {}", r.output, r.operands[0], r.operands[1], r.operands[2]),
            "C[l, j] += A[i, k, l] * B[i, j] * B[k, j]"
        );
    }

    #[test]
    fn matrix_product_in_tensor_restores_pair_targets() {
        let a = parse("C[i, j, l] = A[k, j, l] * B[k, i]\nsym A: {1, 2, 3}\nloop i, j, k, l").unwrap();
        let k = symmetrize(&a);
        let nest = &k.nests[0];
        assert_eq!(nest.chain.iter().map(|v| v.name()).collect::<Vec<_>>(), vec!["j", "k", "l"]);
        assert_eq!(
            target_names(&nest.blocks[0]),
            vec!["C[i, j, l]", "C[i, j, k]", "C[i, k, l]", "C[i, k, j]", "C[i, l, k]", "C[i, l, j]"]
        );
        for (s, missing) in nest.blocks[0].stmts.iter().zip(["k", "l", "j", "l", "j", "k"]) {
            match &s.terms[1] {
                Term::Access(b) => assert_eq!(b.indices[0].name(), missing),
                other => panic!("expected an access, got {other}"),
            }
        }
    }

    #[test]
    fn no_symmetry_means_one_unguarded_block() {
        let a = parse("C[i, j] = A[i, k] * A[j, k]\nloop i, j, k").unwrap();
        let k = symmetrize(&a);
        assert!(k.nests[0].chain.is_empty());
        assert_eq!(k.nests[0].blocks.len(), 1);
        assert!(k.nests[0].blocks[0].guard.is_always());
        assert_eq!(k.nests[0].blocks[0].stmts.len(), 1);
    }

    #[test]
    fn unique_relabelings_cover_every_class_full_enumeration_reaches() {
        for text in [
            "y[i] += A[i, j] * x[j]\nsym A: {1, 2}\nloop i, j",
            "C[i, j] += A[i, k, l] * B[k, j] * B[l, j]\nsym A: {1, 2, 3}\nloop i, k, l, j",
            "C[i, j, l] = A[k, j, l] * B[k, i]\nsym A: {1, 2, 3}\nloop i, j, k, l",
            "C[i, j] += A[i, k, l, m] * B[k, j] * B[l, j] * B[m, j]\nsym A: {1, 2, 3, 4}\nloop i, k, l, m, j",
        ] {
            let a = normalize(&parse(text).unwrap());
            let chain = permutable_chain(&a);
            for classes in Composition::enumerate(chain.len()) {
                let mut reps: BTreeMap<IndexVar, IndexVar> = BTreeMap::new();
                for run in classes.runs() {
                    for m in run.clone() {
                        reps.insert(chain[m].clone(), chain[run.start].clone());
                    }
                }
                let semantic = |sigma: &Perm| {
                    normalize(&substitute(&normalize(&relabel(&a, &chain, sigma)), &reps))
                };
                let all: Vec<_> = Perm::all(chain.len()).iter().map(&semantic).collect();
                let kept: Vec<_> = unique_relabelings(&classes).iter().map(&semantic).collect();
                assert_eq!(kept.len() as u64, classes.coset_count());
                for form in &all {
                    assert!(kept.contains(form), "pattern {classes} misses a restored statement");
                }
            }
        }
    }
}
