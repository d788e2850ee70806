//! Dense interpreter: runs a compiled kernel with every operand held as a
//! full dense tensor. Slow but obviously correct, it is the reference the
//! optimization passes and the sparse executor are tested against.

use super::{
    guard_holds, map_value, reduce_identity, reduce_value, replicate_output, resolve,
    Counts, ExecError, Program, RFactor, RNest, RTarget, RTerm, Tally,
};
use crate::ir::CompiledKernel;
use crate::scalar::Value;
use crate::tensor::DenseTensor;
use std::collections::BTreeMap;

/// What a run produced: the output tensor and the work counters.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub output: DenseTensor<T>,
    pub counts: Counts,
}

/// Materializes the views a kernel declares: transposed copies and the
/// strict/repeated split of the symmetric operand. Entries not covered by
/// stored coordinates are filled with the reduction identity, which the
/// map op absorbs.
fn prepare<T: Value>(
    kernel: &CompiledKernel,
    inputs: &BTreeMap<String, DenseTensor<T>>,
) -> Result<BTreeMap<String, DenseTensor<T>>, ExecError> {
    let mut env = inputs.clone();
    for t in &kernel.transposes {
        let base = env.get(&t.base).ok_or_else(|| ExecError::MissingTensor(t.base.clone()))?;
        let view = base.permuted(&t.perm);
        env.insert(t.name.clone(), view);
    }
    if let Some(split) = &kernel.split {
        let base =
            env.get(&split.base).ok_or_else(|| ExecError::MissingTensor(split.base.clone()))?.clone();
        let partition = kernel
            .assignment
            .partition_of(&split.base)
            .cloned()
            .unwrap_or_else(|| crate::ast::SymmetryPartition::trivial(base.order()));
        let fill: T = reduce_identity(kernel.algebra.reduce)?;
        let has_repeat = |coords: &[usize]| {
            partition.symmetric_parts().any(|part| {
                part.iter().enumerate().any(|(n, &ax)| {
                    part.iter().skip(n + 1).any(|&bx| coords[ax] == coords[bx])
                })
            })
        };
        let nondiag = DenseTensor::from_fn(base.dims().to_vec(), |c| {
            if has_repeat(c) { fill.clone() } else { base.get(c).clone() }
        });
        let diag = DenseTensor::from_fn(base.dims().to_vec(), |c| {
            if has_repeat(c) { base.get(c).clone() } else { fill.clone() }
        });
        env.insert(split.nondiag.clone(), nondiag);
        env.insert(split.diag.clone(), diag);
    }
    Ok(env)
}

pub fn run_dense<T: Value>(
    kernel: &CompiledKernel,
    inputs: &BTreeMap<String, DenseTensor<T>>,
    initial_output: Option<&DenseTensor<T>>,
) -> Result<Evaluation<T>, ExecError> {
    let env = prepare(kernel, inputs)?;
    let prog: Program<T> = resolve(kernel, &|name| env.get(name).map(|t| t.dims().to_vec()))?;

    let tensors: Vec<&DenseTensor<T>> = prog
        .names
        .iter()
        .map(|n| env.get(n).ok_or_else(|| ExecError::MissingTensor(n.clone())))
        .collect::<Result<_, _>>()?;

    let mut output = match initial_output {
        Some(t) => {
            if t.dims() != prog.out_dims.as_slice() {
                return Err(ExecError::InitialDimsMismatch {
                    expected: prog.out_dims.clone(),
                    found: t.dims().to_vec(),
                });
            }
            t.clone()
        }
        None => DenseTensor::filled(prog.out_dims.clone(), reduce_identity(prog.reduce)?),
    };

    let mut tally = Tally::new(prog.names.len());
    for nest in &prog.nests {
        run_nest(nest, &prog, &tensors, &mut output, &mut tally)?;
    }
    if let Some(groups) = &prog.replication {
        replicate_output(&mut output, groups, &mut tally);
    }
    Ok(Evaluation { output, counts: tally.into_counts(&prog.names, &prog.base) })
}

fn run_nest<T: Value>(
    nest: &RNest<T>,
    prog: &Program<T>,
    tensors: &[&DenseTensor<T>],
    output: &mut DenseTensor<T>,
    tally: &mut Tally,
) -> Result<(), ExecError> {
    let ident: Option<T> = reduce_identity(prog.reduce).ok();
    if !nest.workspaces.is_empty() && ident.is_none() {
        return Err(ExecError::MissingIdentity);
    }
    let mut vals = vec![0usize; nest.loops.len()];
    let mut temps: Vec<(T, bool)> = nest
        .workspaces
        .iter()
        .map(|_| (ident.clone().unwrap_or_else(T::zero), false))
        .collect();
    let mut coords = Vec::new();
    let mut bind_vals: Vec<T> = Vec::new();

    fn level<T: Value>(
        d: usize,
        nest: &RNest<T>,
        prog: &Program<T>,
        tensors: &[&DenseTensor<T>],
        output: &mut DenseTensor<T>,
        tally: &mut Tally,
        vals: &mut [usize],
        temps: &mut [(T, bool)],
        coords: &mut Vec<usize>,
        bind_vals: &mut Vec<T>,
        ident: &Option<T>,
    ) {
        if d == nest.loops.len() {
            exec_point(nest, prog, tensors, output, tally, vals, temps, coords, bind_vals);
            return;
        }
        let start = nest.loops[d].prev_chain_slot.map(|s| vals[s]).unwrap_or(0);
        for v in start..nest.loops[d].extent {
            vals[d] = v;
            for (w, decl) in nest.workspaces.iter().enumerate() {
                if decl.depth == d {
                    temps[w] = (ident.clone().unwrap(), false);
                }
            }
            level(d + 1, nest, prog, tensors, output, tally, vals, temps, coords, bind_vals, ident);
            for (w, decl) in nest.workspaces.iter().enumerate() {
                if decl.depth == d && temps[w].1 {
                    coords.clear();
                    coords.extend(decl.target_slots.iter().map(|&s| vals[s]));
                    let off = output.offset(coords);
                    let cur = output.at(off).clone();
                    *output.at_mut(off) = reduce_value(prog.reduce, &cur, &temps[w].0);
                    tally.writes += 1;
                    tally.reduce_ops += 1;
                }
            }
        }
    }

    level(
        0, nest, prog, tensors, output, tally, &mut vals, &mut temps, &mut coords, &mut bind_vals,
        &ident,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn exec_point<T: Value>(
    nest: &RNest<T>,
    prog: &Program<T>,
    tensors: &[&DenseTensor<T>],
    output: &mut DenseTensor<T>,
    tally: &mut Tally,
    vals: &[usize],
    temps: &mut [(T, bool)],
    coords: &mut Vec<usize>,
    bind_vals: &mut Vec<T>,
) {
    for block in &nest.blocks {
        if !guard_holds(&block.guard, vals) {
            continue;
        }
        bind_vals.clear();
        for b in &block.binds {
            coords.clear();
            coords.extend(b.slots.iter().map(|&s| vals[s]));
            bind_vals.push(tensors[b.id].get(coords).clone());
            tally.reads[b.base] += 1;
        }
        let lookup_factor: Option<&T> = block.lookup.as_ref().map(|(atoms, table)| {
            let mut key = 0usize;
            for (m, a) in atoms.iter().enumerate() {
                if a.holds(vals) {
                    key |= 1 << m;
                }
            }
            &table[key]
        });
        for stmt in &block.stmts {
            let mut value: Option<T> = None;
            for term in &stmt.terms {
                let v: &T = match term {
                    RTerm::Bound(ix) => &bind_vals[*ix],
                    RTerm::Access(a) => {
                        coords.clear();
                        coords.extend(a.slots.iter().map(|&s| vals[s]));
                        tally.reads[a.base] += 1;
                        tensors[a.id].get(coords)
                    }
                };
                value = Some(match value {
                    None => v.clone(),
                    Some(acc) => {
                        tally.map_ops += 1;
                        map_value(prog.map, &acc, v)
                    }
                });
            }
            let mut value = value.expect("statement with no terms");
            match &stmt.factor {
                RFactor::One => {}
                RFactor::Const(f) => value = value * f.clone(),
                RFactor::Lookup => {
                    value = value * lookup_factor.expect("lookup factor without table").clone()
                }
            }
            match &stmt.target {
                RTarget::Out(slots) => {
                    coords.clear();
                    coords.extend(slots.iter().map(|&s| vals[s]));
                    let off = output.offset(coords);
                    let cur = output.at(off).clone();
                    *output.at_mut(off) = reduce_value(prog.reduce, &cur, &value);
                    tally.writes += 1;
                    tally.reduce_ops += 1;
                }
                RTarget::Ws(ix) => {
                    let (acc, dirty) = &mut temps[*ix];
                    *acc = reduce_value(prog.reduce, acc, &value);
                    *dirty = true;
                    tally.reduce_ops += 1;
                }
            }
        }
    }
}
