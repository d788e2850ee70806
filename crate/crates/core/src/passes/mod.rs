//! Rewrites over the lowered block structure. Each pass preserves the
//! kernel's results exactly; together they turn the raw relabeled form
//! into the one worth executing: repeated loads bound once, duplicate
//! statements folded into scale factors, mirrored output writes replaced
//! by an epilogue copy, equal blocks merged, the diagonal separated from
//! the strict interior, accesses made concordant with the loop order, and
//! hot accumulations hoisted into scalars.
//!
//! `default_pipeline` lists the passes `optimize` applies in order. The
//! factor-table rewrite is registered but not default: it collapses the
//! per-pattern blocks into one table-scaled block, which is a different
//! shape than the folded form the rest of the pipeline builds.

mod accumulator;
mod binds;
mod branches;
mod concordant;
mod consolidate;
mod diagonal;
mod grouping;
mod lookup;
mod output_canon;

pub use accumulator::hoist_accumulator;
pub use binds::bind_reads;
pub use branches::share_branches;
pub use concordant::concordant_order;
pub use consolidate::merge_blocks;
pub use diagonal::split_diagonal;
pub use grouping::fold_duplicates;
pub use lookup::factor_table;
pub use output_canon::canonical_output;

use crate::ast::{normalize, EinsumAssignment, IndexVar};
use crate::ir::{CmpOp, CompiledKernel, Guard, Stmt, Target, Term};
use crate::symmetrize::substitute;
use std::collections::BTreeMap;

pub type PassFn = fn(&mut CompiledKernel);

/// Every registered pass, in the order `optimize` runs the default ones.
pub fn registry() -> &'static [(&'static str, PassFn, bool)] {
    &[
        ("bind-reads", bind_reads as PassFn, true),
        ("canonical-output", canonical_output as PassFn, true),
        ("fold-duplicates", fold_duplicates as PassFn, true),
        ("merge-blocks", merge_blocks as PassFn, true),
        ("share-branches", share_branches as PassFn, true),
        ("split-diagonal", split_diagonal as PassFn, true),
        ("concordant-order", concordant_order as PassFn, true),
        ("hoist-accumulator", hoist_accumulator as PassFn, true),
        ("factor-table", factor_table as PassFn, false),
    ]
}

pub fn default_pipeline() -> Vec<&'static str> {
    registry().iter().filter(|(_, _, default)| *default).map(|(name, _, _)| *name).collect()
}

pub fn pass_by_name(name: &str) -> Option<PassFn> {
    registry().iter().find(|(n, _, _)| *n == name).map(|(_, f, _)| *f)
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown pass {0}")]
pub struct UnknownPass(pub String);

pub fn apply(kernel: &mut CompiledKernel, names: &[&str]) -> Result<(), UnknownPass> {
    let passes: Vec<PassFn> = names
        .iter()
        .map(|n| pass_by_name(n).ok_or_else(|| UnknownPass(n.to_string())))
        .collect::<Result<_, _>>()?;
    for p in passes {
        p(kernel);
    }
    Ok(())
}

pub fn optimize(kernel: &mut CompiledKernel) {
    apply(kernel, &default_pipeline()).expect("default pipeline names are registered");
}

/// Reconstructs a resolved statement as a one-statement assignment so the
/// existing normalization rules apply to it.
pub(crate) fn stmt_as_assignment(kernel: &CompiledKernel, s: &Stmt) -> EinsumAssignment {
    let output = match &s.target {
        Target::Access(a) => a.clone(),
        Target::Workspace(_) => panic!("statement comparison before accumulator hoisting only"),
    };
    let operands = s
        .terms
        .iter()
        .map(|t| match t {
            Term::Access(a) => a.clone(),
            Term::Bound(name) => panic!("statement {name} must be resolved first"),
        })
        .collect();
    EinsumAssignment {
        output,
        algebra: kernel.algebra.clone(),
        operands,
        symmetries: kernel.assignment.symmetries.clone(),
        loop_order: kernel.assignment.loop_order.clone(),
    }
}

/// The statement in canonical spelling, optionally with variables first
/// collapsed to equality-class representatives.
pub(crate) fn canon_stmt(
    kernel: &CompiledKernel,
    s: &Stmt,
    reps: &BTreeMap<IndexVar, IndexVar>,
) -> Stmt {
    let mut a = stmt_as_assignment(kernel, s);
    if !reps.is_empty() {
        a = substitute(&a, reps);
    }
    let a = normalize(&a);
    Stmt {
        target: Target::Access(a.output),
        factor: s.factor.clone(),
        terms: a.operands.into_iter().map(Term::Access).collect(),
    }
}

/// Comparison key for a statement's computation, excluding its factor.
pub(crate) fn stmt_key(
    kernel: &CompiledKernel,
    s: &Stmt,
    reps: &BTreeMap<IndexVar, IndexVar>,
) -> String {
    let c = canon_stmt(kernel, s, reps);
    let target = match &c.target {
        Target::Access(a) => a.to_string(),
        Target::Workspace(id) => format!("temp#{id}"),
    };
    let terms: Vec<String> = c.terms.iter().map(|t| t.to_string()).collect();
    format!("{target} <- {}", terms.join(" , "))
}

/// Variable classes a single-conjunction guard forces equal, mapped to
/// the class member earliest in loop order. Disjunctive guards yield no
/// equalities: nothing is known to hold across all clauses.
pub(crate) fn eq_representatives(
    kernel: &CompiledKernel,
    guard: &Guard,
) -> BTreeMap<IndexVar, IndexVar> {
    if guard.clauses().len() != 1 {
        return BTreeMap::new();
    }
    let mut classes: Vec<Vec<IndexVar>> = Vec::new();
    for a in &guard.clauses()[0] {
        if a.op != CmpOp::Eq {
            continue;
        }
        let find = |v: &IndexVar, classes: &[Vec<IndexVar>]| {
            classes.iter().position(|c| c.contains(v))
        };
        match (find(&a.lhs, &classes), find(&a.rhs, &classes)) {
            (Some(x), Some(y)) if x != y => {
                let merged = classes.remove(y.max(x));
                classes[x.min(y)].extend(merged);
            }
            (Some(_), Some(_)) => {}
            (Some(x), None) => classes[x].push(a.rhs.clone()),
            (None, Some(y)) => classes[y].push(a.lhs.clone()),
            (None, None) => classes.push(vec![a.lhs.clone(), a.rhs.clone()]),
        }
    }
    let mut reps = BTreeMap::new();
    for class in classes {
        let rep = class
            .iter()
            .min_by_key(|v| kernel.assignment.loop_pos(v))
            .expect("equality classes are nonempty")
            .clone();
        for v in class {
            if v != rep {
                reps.insert(v, rep.clone());
            }
        }
    }
    reps
}

/// Equality classes of a guard as variable groups of size two or more.
pub(crate) fn eq_classes(
    kernel: &CompiledKernel,
    guard: &Guard,
) -> Vec<Vec<IndexVar>> {
    let reps = eq_representatives(kernel, guard);
    let mut groups: BTreeMap<IndexVar, Vec<IndexVar>> = BTreeMap::new();
    for (v, rep) in &reps {
        groups.entry(rep.clone()).or_insert_with(|| vec![rep.clone()]).push(v.clone());
    }
    let mut out: Vec<Vec<IndexVar>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_by_key(|v| kernel.assignment.loop_pos(v));
    }
    out.sort_by_key(|g| kernel.assignment.loop_pos(&g[0]));
    out
}

/// Every distinct statement reachable from `s` by permuting variables
/// within the given equality classes, in canonical spelling, the identity
/// image first.
pub(crate) fn eq_orbit(
    kernel: &CompiledKernel,
    s: &Stmt,
    classes: &[Vec<IndexVar>],
) -> Vec<Stmt> {
    let empty = BTreeMap::new();
    let mut out: Vec<Stmt> = vec![canon_stmt(kernel, s, &empty)];
    let mut keys: Vec<String> = vec![stmt_key(kernel, s, &empty)];
    let mut mappings: Vec<BTreeMap<IndexVar, IndexVar>> = vec![BTreeMap::new()];
    for class in classes {
        let perms = crate::symmetry::Perm::all(class.len());
        let mut extended = Vec::new();
        for m in &mappings {
            for p in &perms {
                let mut m2 = m.clone();
                for (pos, v) in class.iter().enumerate() {
                    m2.insert(v.clone(), class[p.apply(pos)].clone());
                }
                extended.push(m2);
            }
        }
        mappings = extended;
    }
    for m in mappings {
        let image = substitute(&stmt_as_assignment(kernel, s), &m);
        let image_stmt = Stmt {
            target: Target::Access(image.output.clone()),
            factor: s.factor.clone(),
            terms: image.operands.iter().cloned().map(Term::Access).collect(),
        };
        let canon = canon_stmt(kernel, &image_stmt, &empty);
        let key = stmt_key(kernel, &canon, &empty);
        if !keys.contains(&key) {
            keys.push(key);
            out.push(canon);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{normalize, IndexVar};
    use crate::exec::run_dense;
    use crate::ir::{atom, Block, Factor, Guard, Stmt};
    use crate::scalar::Rat;
    use crate::suite;
    use crate::symmetrize::{permutable_chain, symmetrize};
    use crate::tensor::DenseTensor;
    use num_traits::One;
    use std::collections::BTreeMap;

    fn dims_for(a: &crate::ast::EinsumAssignment, chain_dim: usize, free_dim: usize) -> BTreeMap<IndexVar, usize> {
        let chain = permutable_chain(&normalize(a));
        a.loop_order
            .iter()
            .map(|v| (v.clone(), if chain.contains(v) { chain_dim } else { free_dim }))
            .collect()
    }

    /// Deterministic dense operands honoring each tensor's declared
    /// symmetry: the value only depends on the coordinate's sorted form.
    fn hashed_inputs(
        a: &crate::ast::EinsumAssignment,
        dims: &BTreeMap<IndexVar, usize>,
    ) -> BTreeMap<String, DenseTensor<i64>> {
        let mut inputs = BTreeMap::new();
        for access in &a.operands {
            if inputs.contains_key(&access.tensor) {
                continue;
            }
            let shape: Vec<usize> = access.indices.iter().map(|v| dims[v]).collect();
            let parts = a
                .symmetries
                .get(&access.tensor)
                .map(|p| p.parts().to_vec())
                .unwrap_or_default();
            let name = access.tensor.clone();
            inputs.insert(
                name.clone(),
                DenseTensor::from_fn(shape, |coords| {
                    let mut canon = coords.to_vec();
                    for part in &parts {
                        let mut vals: Vec<usize> = part.iter().map(|&ax| canon[ax]).collect();
                        vals.sort_unstable();
                        for (&ax, v) in part.iter().zip(vals) {
                            canon[ax] = v;
                        }
                    }
                    let mut h = name.bytes().fold(7i64, |h, b| h.wrapping_mul(31) ^ b as i64);
                    for c in canon {
                        h = h.wrapping_mul(131).wrapping_add(c as i64 + 3);
                    }
                    h.rem_euclid(9) + 1
                }),
            );
        }
        inputs
    }

    #[test]
    fn every_default_pass_preserves_dense_results() {
        for spec in suite::kernels() {
            let a = suite::parsed(spec.id);
            let dims = dims_for(&a, 4, 3);
            let inputs = hashed_inputs(&a, &dims);

            let mut reference_form = a.clone();
            reference_form.symmetries.clear();
            let reference = run_dense(&symmetrize(&reference_form), &inputs, None)
                .unwrap_or_else(|e| panic!("{}: reference run failed: {e}", spec.id));

            let mut kernel = symmetrize(&a);
            let before = run_dense(&kernel, &inputs, None).unwrap();
            assert_eq!(before.output, reference.output, "{}: lowering", spec.id);
            for name in default_pipeline() {
                apply(&mut kernel, &[name]).unwrap();
                let after = run_dense(&kernel, &inputs, None)
                    .unwrap_or_else(|e| panic!("{}: run failed after {name}: {e}", spec.id));
                assert_eq!(after.output, reference.output, "{}: after {name}", spec.id);
            }

            let naive = run_dense(&crate::compile_naive(&a), &inputs, None).unwrap();
            assert_eq!(naive.output, reference.output, "{}: naive lowering", spec.id);

            if !a.algebra.scalar_scaling {
                continue;
            }
            // Lookup tables can hold non-integer weights, so this leg runs
            // over exact rationals.
            let rat_inputs: BTreeMap<String, DenseTensor<Rat>> = inputs
                .iter()
                .map(|(k, t)| {
                    let shape = t.dims().to_vec();
                    (k.clone(), DenseTensor::from_fn(shape, |c| Rat::from(*t.get(c))))
                })
                .collect();
            let rat_reference = run_dense(&symmetrize(&reference_form), &rat_inputs, None).unwrap();
            let tabled = crate::compile_with(
                &a,
                &["bind-reads", "canonical-output", "fold-duplicates", "factor-table"],
            )
            .unwrap();
            let tabled_run = run_dense(&tabled, &rat_inputs, None).unwrap();
            assert_eq!(tabled_run.output, rat_reference.output, "{}: factor-table", spec.id);
        }
    }

    fn const_factor(s: &Stmt) -> Rat {
        match &s.factor {
            Factor::Const(r) => *r,
            Factor::Lookup(_) => panic!("expected constant factor"),
        }
    }

    #[test]
    fn duplicate_folding_assigns_integer_factors() {
        let a = suite::parsed("mttkrp3");
        let kernel =
            crate::compile_with(&a, &["bind-reads", "canonical-output", "fold-duplicates"]).unwrap();
        assert_eq!(kernel.nests.len(), 1);
        let mut shapes: Vec<Vec<Rat>> = kernel.nests[0]
            .blocks
            .iter()
            .map(|b| b.stmts.iter().map(const_factor).collect())
            .collect();
        shapes.sort();
        let one = Rat::one();
        let two = Rat::from(2);
        assert_eq!(
            shapes,
            vec![vec![one], vec![one, one, one], vec![one, one, one], vec![two, two, two]]
        );
    }

    #[test]
    fn branch_regroup_fires_only_when_it_reduces_statements() {
        let a = crate::parse::parse("y[i] += u[i] * v[j]\nloop i, j").unwrap();
        let b = crate::parse::parse("y[i] += u[j] * v[i]\nloop i, j").unwrap();
        let mut kernel = crate::symmetrize::symmetrize_with_chain(&a, Vec::new());
        let s2 = crate::symmetrize::symmetrize_with_chain(&b, Vec::new()).nests[0].blocks[0].stmts
            [0]
        .clone();
        let nest = &mut kernel.nests[0];
        let s1 = nest.blocks[0].stmts[0].clone();
        let (i, j) = (IndexVar::new("i"), IndexVar::new("j"));
        let lt = Guard::always().and_atom(&atom(&i, crate::ir::CmpOp::Lt, &j));
        let eq = Guard::always().and_atom(&atom(&i, crate::ir::CmpOp::Eq, &j));
        let gt = Guard::always().and_atom(&atom(&j, crate::ir::CmpOp::Lt, &i));
        nest.blocks = vec![
            Block::new(lt, vec![s1.clone()]),
            Block::new(eq, vec![s2.clone()]),
            Block::new(gt, vec![s1.clone(), s2.clone()]),
        ];
        share_branches(&mut kernel);
        let nest = &kernel.nests[0];
        assert_eq!(nest.blocks.len(), 2);
        assert_eq!(nest.blocks.iter().map(|b| b.stmts.len()).sum::<usize>(), 2);
        assert_eq!(nest.blocks[0].guard.clauses().len(), 2);

        // Regrouping three tensor-times-matrix branches would tear the bind
        // of the driver read shared inside the strict branch, so the pass
        // must leave that kernel alone.
        let ttm = suite::parsed("ttm");
        let mut staged = crate::compile_with(
            &ttm,
            &["bind-reads", "canonical-output", "fold-duplicates", "merge-blocks"],
        )
        .unwrap();
        let before = staged.dump();
        share_branches(&mut staged);
        assert_eq!(staged.dump(), before);
        assert_eq!(staged.nests[0].blocks.len(), 4);
    }

    #[test]
    fn factor_table_derives_simplicial_weights() {
        let chain = ["bind-reads", "canonical-output", "fold-duplicates", "factor-table"];
        let k3 = crate::compile_with(&suite::parsed("mttkrp3"), &chain).unwrap();
        assert_eq!(k3.nests.len(), 1);
        assert_eq!(k3.nests[0].blocks.len(), 1);
        assert!(k3.nests[0].blocks[0].guard.is_always());
        assert!(k3
            .dump()
            .contains("lookup w: key = 1*(i == k) + 2*(k == l); table [2, 1, 1, 1/3]"));

        let k1 = crate::compile_with(&suite::parsed("ssymv"), &chain).unwrap();
        assert!(k1.dump().contains("lookup w: key = 1*(i == j); table [1, 1/2]"));
    }

    #[test]
    fn factor_table_declines_unsupported_kernels() {
        for id in ["bellman", "ssyrk"] {
            let a = suite::parsed(id);
            let mut kernel = symmetrize(&a);
            apply(&mut kernel, &["bind-reads", "canonical-output", "fold-duplicates"]).unwrap();
            let before = kernel.dump();
            factor_table(&mut kernel);
            assert_eq!(kernel.dump(), before, "{id}");
        }
    }

    #[test]
    fn reorder_beats_transpose_when_chain_allows() {
        let a = crate::parse::parse("C[i] += A[j, i]\nloop i, j").unwrap();
        let kernel = crate::compile(&a);
        assert!(kernel.transposes.is_empty());
        let names: Vec<&str> = kernel.nests[0].loops.iter().map(|v| v.name()).collect();
        assert_eq!(names, ["j", "i"]);
    }

    #[test]
    fn ssymv_final_form() {
        let dump = crate::compile(&suite::parsed("ssymv")).dump();
        assert_eq!(
            dump,
            "\
split A -> A_nondiag, A_diag
nest (i, j) where i <= j
  temp t0 for y[i] at i
  block i < j:
    bind A_ij = A_nondiag[i, j]
    t0 += A_ij * x[j]
    y[j] += A_ij * x[i]
nest (i, j) where i <= j
  temp t1 for y[i] at i
  block i == j:
    t1 += A_diag[i, j] * x[j]
"
        );
    }

    #[test]
    fn mttkrp3_final_form() {
        let dump = crate::compile(&suite::parsed("mttkrp3")).dump();
        assert_eq!(
            dump,
            "\
split A -> A_nondiag, A_diag
nest (i, k, l, j) where i <= k <= l
  block i < k && k < l:
    bind A_ikl = A_nondiag[i, k, l]
    bind B_kj = B[k, j]
    bind B_lj = B[l, j]
    bind B_ij = B[i, j]
    C[i, j] += 2 * A_ikl * B_kj * B_lj
    C[k, j] += 2 * A_ikl * B_ij * B_lj
    C[l, j] += 2 * A_ikl * B_ij * B_kj
nest (i, k, l, j) where i <= k <= l
  block (i == k && k < l) || (i < k && k == l):
    bind A_ikl = A_diag[i, k, l]
    bind B_kj = B[k, j]
    bind B_lj = B[l, j]
    bind B_ij = B[i, j]
    C[i, j] += A_ikl * B_kj * B_lj
    C[k, j] += A_ikl * B_ij * B_lj
    C[l, j] += A_ikl * B_ij * B_kj
  block i == k && k == l:
    C[i, j] += A_diag[i, k, l] * B[k, j] * B[l, j]
"
        );
    }

    #[test]
    fn ttm_final_form() {
        let dump = crate::compile(&suite::parsed("ttm")).dump();
        assert_eq!(
            dump,
            "\
view B_T = transpose(B, (2, 1))
split A -> A_nondiag, A_diag
nest (i, j, k, l) where j <= k <= l
  temp t0 for C[i, j, k] at k
  block j < k && k < l:
    bind A_jkl = A_nondiag[j, k, l]
    C[i, j, l] += A_jkl * B_T[i, k]
    t0 += A_jkl * B_T[i, l]
    C[i, k, l] += A_jkl * B_T[i, j]
nest (i, j, k, l) where j <= k <= l
  temp t1 for C[i, j, k] at k
  block j == k && k < l:
    bind A_jkl = A_diag[j, k, l]
    C[i, j, l] += A_jkl * B_T[i, k]
    t1 += A_jkl * B_T[i, l]
  block j < k && k == l:
    bind A_jkl = A_diag[j, k, l]
    C[i, j, l] += A_jkl * B_T[i, k]
    C[i, k, l] += A_jkl * B_T[i, j]
  block j == k && k == l:
    C[i, j, l] += A_diag[j, k, l] * B_T[i, k]
replicate C over {2, 3}
"
        );
    }

    #[test]
    fn ssyrk_final_form() {
        let dump = crate::compile(&suite::parsed("ssyrk")).dump();
        assert_eq!(
            dump,
            "\
nest (i, j, k)
  temp t0 for C[i, j] at j
  block i <= j:
    t0 += A[i, k] * A[j, k]
replicate C over {1, 2}
"
        );
    }

    #[test]
    fn syprd_final_form() {
        let dump = crate::compile(&suite::parsed("syprd")).dump();
        assert_eq!(
            dump,
            "\
split A -> A_nondiag, A_diag
nest (i, j) where i <= j
  temp t0 for y[] at i
  block i < j:
    t0 += 2 * A_nondiag[i, j] * x[i] * x[j]
nest (i, j) where i <= j
  temp t1 for y[] at i
  block i == j:
    t1 += A_diag[i, j] * x[i] * x[j]
"
        );
    }

    #[test]
    fn bellman_final_form() {
        let dump = crate::compile(&suite::parsed("bellman")).dump();
        assert_eq!(
            dump,
            "\
split A -> A_nondiag, A_diag
nest (i, j) where i <= j
  temp t0 for y[i] at i
  block i < j:
    bind A_ij = A_nondiag[i, j]
    t0 min= A_ij + d[j]
    y[j] min= A_ij + d[i]
nest (i, j) where i <= j
  temp t1 for y[i] at i
  block i == j:
    t1 min= A_diag[i, j] + d[j]
"
        );
    }
}
