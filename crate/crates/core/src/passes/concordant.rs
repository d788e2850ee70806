//! Makes every access walk its tensor in storage order.
//!
//! Storage is row major, so an access is cheap to stream when its index
//! variables appear as a subsequence of the loop order. This pass searches
//! the loop orders that keep the canonical chain in sequence, scores each
//! by which accesses would need a transposed copy of their tensor, and
//! picks the cheapest: first never transposing the walked driver if any
//! alternative exists, then the fewest transposed views, then the fewest
//! transposed axes, preferring the order the kernel was written with. The
//! accesses left discordant under the chosen order are rewritten against
//! named transpose views for the runner to materialize.

use crate::ast::{IndexVar, TensorAccess};
use crate::ir::{CompiledKernel, Target, Term, TransposeRequest};
use crate::symmetry::Perm;
use std::collections::BTreeSet;

pub fn concordant_order(kernel: &mut CompiledKernel) {
    let loops = match kernel.nests.first() {
        Some(n) => n.loops.clone(),
        None => return,
    };
    if kernel.nests.iter().any(|n| n.loops != loops) || loops.len() > 7 {
        return;
    }
    let chain = kernel.nests[0].chain.clone();

    let out_name = kernel.assignment.output.tensor.clone();
    let mut fixed: BTreeSet<String> = BTreeSet::new();
    fixed.insert(out_name.clone());
    if let Some(d) = &kernel.driver {
        fixed.insert(d.clone());
    }
    if let Some(split) = &kernel.split {
        fixed.insert(split.nondiag.clone());
        fixed.insert(split.diag.clone());
    }

    let mut accesses: Vec<TensorAccess> = Vec::new();
    let push = |a: &TensorAccess, accesses: &mut Vec<TensorAccess>| {
        if !accesses.contains(a) {
            accesses.push(a.clone());
        }
    };
    for nest in &kernel.nests {
        for block in &nest.blocks {
            for bind in &block.binds {
                push(&bind.access, &mut accesses);
            }
            for s in &block.stmts {
                if let Target::Access(a) = &s.target {
                    push(a, &mut accesses);
                }
                for t in &s.terms {
                    if let Term::Access(a) = t {
                        push(a, &mut accesses);
                    }
                }
            }
        }
    }

    struct Score {
        fixed_hits: usize,
        views: BTreeSet<(String, Vec<usize>)>,
        axes: usize,
        keep_order: bool,
    }
    let evaluate = |order: &[IndexVar]| -> Option<Score> {
        let mut views = BTreeSet::new();
        let mut fixed_hits = BTreeSet::new();
        for a in &accesses {
            let positions: Vec<usize> =
                a.indices.iter().map(|v| order.iter().position(|o| o == v).unwrap()).collect();
            if positions.windows(2).all(|w| w[0] <= w[1]) {
                continue;
            }
            if a.tensor == out_name {
                return None;
            }
            if fixed.contains(&a.tensor) {
                fixed_hits.insert(a.tensor.clone());
            }
            views.insert((a.tensor.clone(), view_perm(&positions)));
        }
        let axes = views.iter().map(|(_, p)| p.len()).sum();
        Some(Score { fixed_hits: fixed_hits.len(), views, axes, keep_order: order == loops })
    };

    let mut best: Option<(Vec<usize>, Vec<IndexVar>, BTreeSet<(String, Vec<usize>)>)> = None;
    for p in Perm::all(loops.len()) {
        let order: Vec<IndexVar> = (0..loops.len()).map(|m| loops[p.apply(m)].clone()).collect();
        let chain_ok = chain
            .iter()
            .map(|v| order.iter().position(|o| o == v).unwrap())
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[0] < w[1]);
        if !chain_ok {
            continue;
        }
        if let Some(s) = evaluate(&order) {
            let key = vec![s.fixed_hits, s.views.len(), s.axes, usize::from(!s.keep_order)];
            if best.as_ref().map_or(true, |(k, _, _)| key < *k) {
                best = Some((key, order, s.views));
            }
        }
    }
    let (_, order, views) = match best {
        Some(b) => b,
        None => return,
    };
    if order == loops && views.is_empty() {
        return;
    }

    let taken: BTreeSet<String> = accesses.iter().map(|a| a.tensor.clone()).collect();
    let mut requests: Vec<TransposeRequest> = Vec::new();
    for (base, images) in &views {
        let mut suffix = 1usize;
        let name = loop {
            let candidate =
                if suffix == 1 { format!("{base}_T") } else { format!("{base}_T{suffix}") };
            if !taken.contains(&candidate) && !requests.iter().any(|r| r.name == candidate) {
                break candidate;
            }
            suffix += 1;
        };
        requests.push(TransposeRequest {
            base: base.clone(),
            name,
            perm: Perm::from_images(images.clone()).expect("argsort yields a permutation"),
        });
    }

    let rewrite = |a: &mut TensorAccess| {
        let positions: Vec<usize> =
            a.indices.iter().map(|v| order.iter().position(|o| o == v).unwrap()).collect();
        if positions.windows(2).all(|w| w[0] <= w[1]) {
            return;
        }
        let images = view_perm(&positions);
        let req = requests
            .iter()
            .find(|r| r.base == a.tensor && r.perm.images() == images.as_slice())
            .expect("every discordant access got a view");
        a.indices = images.iter().map(|&axis| a.indices[axis].clone()).collect();
        a.tensor = req.name.clone();
    };
    for nest in &mut kernel.nests {
        nest.loops = order.clone();
        for block in &mut nest.blocks {
            for bind in &mut block.binds {
                rewrite(&mut bind.access);
            }
            for s in &mut block.stmts {
                for t in &mut s.terms {
                    if let Term::Access(a) = t {
                        rewrite(a);
                    }
                }
            }
        }
    }
    kernel.transposes.extend(requests);
}

/// Stable argsort of an access's loop positions: entry m is the original
/// axis whose variable comes m-th in the loop order.
fn view_perm(positions: &[usize]) -> Vec<usize> {
    let mut axes: Vec<usize> = (0..positions.len()).collect();
    axes.sort_by_key(|&axis| (positions[axis], axis));
    axes
}
