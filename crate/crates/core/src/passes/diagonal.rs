//! Separates the strict interior of the canonical space from its
//! diagonals.
//!
//! Once every block is guarded either entirely by strict comparisons or
//! entirely by clauses containing an equality, the nest splits in two:
//! one nest of strict blocks reading the driver's off-diagonal entries
//! and one of diagonal blocks reading the rest. The split is recorded on
//! the kernel so the runner can materialize the two views, each padded
//! with the reduction identity where the other holds the data, keeping
//! every guard's outcome unchanged while the strict nest walks only the
//! entries it can use.

use crate::ir::{CmpOp, CompiledKernel, LoopNest, SplitRequest};

pub fn split_diagonal(kernel: &mut CompiledKernel) {
    if kernel.nests.len() != 1 || kernel.split.is_some() {
        return;
    }
    let driver = match &kernel.driver {
        Some(d) => d.clone(),
        None => return,
    };
    let symmetric_driver = kernel
        .assignment
        .partition_of(&driver)
        .map(|p| p.symmetric_parts().next().is_some())
        .unwrap_or(false);
    let nest = &kernel.nests[0];
    if !symmetric_driver || nest.chain.len() < 2 {
        return;
    }

    #[derive(PartialEq)]
    enum Kind {
        Strict,
        Diagonal,
    }
    let mut kinds = Vec::new();
    for block in &nest.blocks {
        if block.lookup.is_some() || block.guard.is_always() {
            return;
        }
        let mut clause_kinds = block.guard.clauses().iter().map(|clause| {
            if clause.iter().any(|a| a.op == CmpOp::Le) {
                None
            } else if clause.iter().any(|a| a.op == CmpOp::Eq) {
                Some(Kind::Diagonal)
            } else {
                Some(Kind::Strict)
            }
        });
        let first = match clause_kinds.next().flatten() {
            Some(k) => k,
            None => return,
        };
        for k in clause_kinds {
            if k.as_ref() != Some(&first) {
                return;
            }
        }
        kinds.push(first);
    }
    if !kinds.contains(&Kind::Strict) || !kinds.contains(&Kind::Diagonal) {
        return;
    }

    let nondiag = format!("{driver}_nondiag");
    let diag = format!("{driver}_diag");
    let base = kernel.nests.remove(0);
    let mut strict_nest = LoopNest {
        loops: base.loops.clone(),
        chain: base.chain.clone(),
        blocks: Vec::new(),
        workspaces: base.workspaces.clone(),
    };
    let mut diag_nest = strict_nest.clone();
    for (block, kind) in base.blocks.into_iter().zip(kinds) {
        let (nest, view) = match kind {
            Kind::Strict => (&mut strict_nest, &nondiag),
            Kind::Diagonal => (&mut diag_nest, &diag),
        };
        let mut block = block;
        for bind in &mut block.binds {
            if bind.access.tensor == driver {
                bind.access.tensor = view.clone();
            }
        }
        for s in &mut block.stmts {
            for t in &mut s.terms {
                if let crate::ir::Term::Access(a) = t {
                    if a.tensor == driver {
                        a.tensor = view.clone();
                    }
                }
            }
        }
        nest.blocks.push(block);
    }
    kernel.nests = vec![strict_nest, diag_nest];
    kernel.split = Some(SplitRequest { base: driver, nondiag, diag });
}
