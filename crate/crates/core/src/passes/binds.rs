//! Loads each repeated input access once per block.
//!
//! A block whose statements read the same tensor element more than once
//! gets a named bind for that element, and the statements switch to the
//! bound name. Blocks are rebound from scratch, so running this after a
//! pass that reshuffled statements refreshes the decision.

use crate::ast::TensorAccess;
use crate::ir::{Bind, Block, CompiledKernel, Term};

pub fn bind_reads(kernel: &mut CompiledKernel) {
    for nest in &mut kernel.nests {
        for block in &mut nest.blocks {
            fold_binds(block);
        }
    }
}

/// Recomputes the bind list for one block: inline whatever is currently
/// bound, count access occurrences across all statements, and bind the
/// ones that occur at least twice.
pub(crate) fn fold_binds(block: &mut Block) {
    let stmts = block.resolved_stmts();
    block.binds.clear();

    let mut seen: Vec<(TensorAccess, usize)> = Vec::new();
    for s in &stmts {
        for t in &s.terms {
            if let Term::Access(a) = t {
                match seen.iter_mut().find(|(b, _)| b == a) {
                    Some((_, n)) => *n += 1,
                    None => seen.push((a.clone(), 1)),
                }
            }
        }
    }

    let mut taken: Vec<String> = Vec::new();
    for (access, count) in &seen {
        if *count < 2 {
            continue;
        }
        let mut name = format!(
            "{}_{}",
            access.tensor,
            access.indices.iter().map(|v| v.name()).collect::<String>()
        );
        while taken.iter().any(|t| t == &name) {
            name.push('_');
        }
        taken.push(name.clone());
        block.binds.push(Bind { name, access: access.clone() });
    }

    block.stmts = stmts
        .into_iter()
        .map(|mut s| {
            for t in &mut s.terms {
                if let Term::Access(a) = t {
                    if let Some(b) = block.binds.iter().find(|b| &b.access == a) {
                        *t = Term::Bound(b.name.clone());
                    }
                }
            }
            s
        })
        .collect();
}
