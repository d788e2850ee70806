//! Merges blocks that run the same statements under different guards.
//!
//! Two guarded blocks whose statement lists are equal as multisets, with
//! equal factors, collapse into one block whose guard is the disjunction
//! of the originals, simplified where adjacent comparisons fold.

use super::stmt_key;
use crate::ir::{CompiledKernel, Factor};
use crate::scalar::Rat;

pub fn merge_blocks(kernel: &mut CompiledKernel) {
    let snapshot = kernel.clone();
    for nest in &mut kernel.nests {
        let mut merged: Vec<crate::ir::Block> = Vec::new();
        let mut signatures: Vec<Vec<(String, Option<Rat>)>> = Vec::new();
        for block in nest.blocks.drain(..) {
            let sig = signature(&snapshot, &block);
            match (block.lookup.is_none())
                .then(|| signatures.iter().position(|s| s == &sig))
                .flatten()
            {
                Some(i) => {
                    merged[i].guard = merged[i].guard.or(&block.guard).simplified();
                }
                None => {
                    signatures.push(sig);
                    merged.push(block);
                }
            }
        }
        nest.blocks = merged;
    }
}

fn signature(kernel: &CompiledKernel, block: &crate::ir::Block) -> Vec<(String, Option<Rat>)> {
    let empty = Default::default();
    let mut sig: Vec<(String, Option<Rat>)> = block
        .resolved_stmts()
        .iter()
        .map(|s| {
            let factor = match &s.factor {
                Factor::Const(r) => Some(*r),
                Factor::Lookup(_) => None,
            };
            (stmt_key(kernel, s, &empty), factor)
        })
        .collect();
    sig.sort();
    sig
}
