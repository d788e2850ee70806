//! Regroups blocks around shared statements.
//!
//! When the distinct statements across a nest's blocks number fewer than
//! the blocks themselves, the branch structure repeats work: some
//! statement appears under several guards. Each distinct statement then
//! gets the disjunction of the guards it appears under, and statements
//! sharing a combined guard form one block.
//!
//! The nest is left alone when that count does not drop, and also when
//! regrouping would pull apart statements that share a bound load: giving
//! such statements different guards would turn one load into several,
//! which costs more than the branches it saves.

use super::stmt_key;
use crate::ir::{Block, CompiledKernel, Factor, Guard, Stmt, Term};
use crate::scalar::Rat;

pub fn share_branches(kernel: &mut CompiledKernel) {
    let snapshot = kernel.clone();
    for nest in &mut kernel.nests {
        if nest.blocks.len() < 2 || nest.blocks.iter().any(|b| b.lookup.is_some()) {
            continue;
        }
        let empty = Default::default();
        let mut keys: Vec<(String, Option<Rat>)> = Vec::new();
        let mut stmts: Vec<Stmt> = Vec::new();
        let mut guards: Vec<Guard> = Vec::new();
        let mut repeats_within_block = false;
        for block in &nest.blocks {
            let mut block_keys: Vec<(String, Option<Rat>)> = Vec::new();
            for s in block.resolved_stmts() {
                let factor = match &s.factor {
                    Factor::Const(r) => Some(*r),
                    Factor::Lookup(_) => None,
                };
                let key = (stmt_key(&snapshot, &s, &empty), factor);
                if block_keys.contains(&key) {
                    repeats_within_block = true;
                }
                block_keys.push(key.clone());
                match keys.iter().position(|k| k == &key) {
                    Some(i) => guards[i] = guards[i].or(&block.guard).simplified(),
                    None => {
                        keys.push(key);
                        stmts.push(s);
                        guards.push(block.guard.clone());
                    }
                }
            }
        }
        if repeats_within_block || keys.len() >= nest.blocks.len() {
            continue;
        }

        let guard_of = |s: &Stmt| -> &Guard {
            let factor = match &s.factor {
                Factor::Const(r) => Some(*r),
                Factor::Lookup(_) => None,
            };
            let key = (stmt_key(&snapshot, s, &empty), factor);
            let i = keys.iter().position(|k| k == &key).expect("statement was scanned");
            &guards[i]
        };
        let tears_shared_bind = nest.blocks.iter().any(|block| {
            let resolved = block.resolved_stmts();
            block.binds.iter().any(|bind| {
                let users: Vec<&Stmt> = block
                    .stmts
                    .iter()
                    .zip(&resolved)
                    .filter(|(raw, _)| {
                        raw.terms.iter().any(|t| matches!(t, Term::Bound(n) if n == &bind.name))
                    })
                    .map(|(_, r)| r)
                    .collect();
                users.windows(2).any(|w| guard_of(w[0]) != guard_of(w[1]))
            })
        });
        if tears_shared_bind {
            continue;
        }

        let mut blocks: Vec<Block> = Vec::new();
        for (s, g) in stmts.into_iter().zip(guards) {
            match blocks.iter_mut().find(|b| b.guard == g) {
                Some(b) => b.stmts.push(s),
                None => blocks.push(Block::new(g, vec![s])),
            }
        }
        for b in &mut blocks {
            super::binds::fold_binds(b);
        }
        nest.blocks = blocks;
    }
}
