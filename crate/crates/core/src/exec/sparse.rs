//! Sparse interpreter. Loops covered by the driver tensor's axes iterate
//! its stored coordinates instead of the full extent, descending one
//! storage level per loop; chain bounds turn into seeks within a segment,
//! so a canonical-triangle kernel never even visits the coordinates it
//! proved away. All other loops and operands behave as in the dense
//! interpreter, and the counters mean the same thing in both.

use super::{
    guard_holds, map_value, reduce_identity, reduce_value, replicate_output, resolve, Counts,
    Evaluation, ExecError, Program, RFactor, RNest, RStmt, RTarget, RTerm, Tally,
};
use crate::ast::{MapOp, ReduceOp};
use crate::ir::CompiledKernel;
use crate::scalar::Value;
use crate::tensor::{DenseTensor, LevelTensor};
use std::collections::BTreeMap;

/// One bound input: either a dense buffer or a compressed level tree.
#[derive(Clone, Debug)]
pub enum Operand<T> {
    Dense(DenseTensor<T>),
    Level(LevelTensor<T>),
}

impl<T: Clone + PartialEq> Operand<T> {
    pub fn dims(&self) -> &[usize] {
        match self {
            Operand::Dense(t) => t.dims(),
            Operand::Level(t) => t.dims(),
        }
    }

    pub fn get(&self, coords: &[usize]) -> &T {
        match self {
            Operand::Dense(t) => t.get(coords),
            Operand::Level(t) => t.get(coords),
        }
    }
}

/// Which tensor's stored coordinates drive iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum DriverChoice {
    /// The driver the compiler designated (split views included).
    #[default]
    Kernel,
    /// No driver: iterate every loop over its full extent.
    Dense,
    /// Walk this tensor, which must be bound as a level tensor.
    Named(String),
}

#[derive(Clone, Debug)]
pub struct ExecConfig {
    pub driver: DriverChoice,
    pub collect_counters: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { driver: DriverChoice::Kernel, collect_counters: true }
    }
}

/// How one nest iterates: the interned id of the walked access, and the
/// loop slot holding each of its axes, outer to inner.
#[derive(Clone, Debug)]
struct NestWalk {
    id: usize,
    slots: Vec<usize>,
}

/// A kernel resolved against its inputs with views already materialized,
/// so repeated runs time only the iteration itself.
pub struct SparsePrepared<T> {
    prog: Program<T>,
    tensors: Vec<Operand<T>>,
    walks: Vec<Option<NestWalk>>,
    collect: bool,
}

pub fn prepare_sparse<T: Value>(
    kernel: &CompiledKernel,
    inputs: &BTreeMap<String, Operand<T>>,
    cfg: &ExecConfig,
) -> Result<SparsePrepared<T>, ExecError> {
    let mut env: BTreeMap<String, Operand<T>> = inputs.clone();
    for t in &kernel.transposes {
        let base = env.get(&t.base).ok_or_else(|| ExecError::MissingTensor(t.base.clone()))?;
        let view = match base {
            Operand::Dense(d) => Operand::Dense(d.permuted(&t.perm)),
            Operand::Level(l) => Operand::Level(l.transposed(&t.perm)),
        };
        env.insert(t.name.clone(), view);
    }
    if let Some(split) = &kernel.split {
        let base =
            env.get(&split.base).ok_or_else(|| ExecError::MissingTensor(split.base.clone()))?;
        let partition = kernel
            .assignment
            .partition_of(&split.base)
            .cloned()
            .unwrap_or_else(|| crate::ast::SymmetryPartition::trivial(base.dims().len()));
        let parts: Vec<Vec<usize>> = partition.symmetric_parts().cloned().collect();
        let (nondiag, diag) = match base {
            Operand::Level(l) => {
                let (a, b) = l.split_diagonal(&parts);
                (Operand::Level(a), Operand::Level(b))
            }
            Operand::Dense(d) => {
                let fill: T = reduce_identity(kernel.algebra.reduce)?;
                let has_repeat = |coords: &[usize]| {
                    parts.iter().any(|part| {
                        part.iter().enumerate().any(|(n, &ax)| {
                            part.iter().skip(n + 1).any(|&bx| coords[ax] == coords[bx])
                        })
                    })
                };
                let keep = |want_repeat: bool| {
                    DenseTensor::from_fn(d.dims().to_vec(), |c| {
                        if has_repeat(c) == want_repeat { d.get(c).clone() } else { fill.clone() }
                    })
                };
                (Operand::Dense(keep(false)), Operand::Dense(keep(true)))
            }
        };
        env.insert(split.nondiag.clone(), nondiag);
        env.insert(split.diag.clone(), diag);
    }

    let prog: Program<T> = resolve(kernel, &|name| env.get(name).map(|t| t.dims().to_vec()))?;
    let tensors: Vec<Operand<T>> = prog
        .names
        .iter()
        .map(|n| env.remove(n).ok_or_else(|| ExecError::MissingTensor(n.clone())))
        .collect::<Result<_, _>>()?;

    let mut candidates: Vec<String> = Vec::new();
    match &cfg.driver {
        DriverChoice::Dense => {}
        DriverChoice::Named(name) => candidates.push(name.clone()),
        DriverChoice::Kernel => {
            if let Some(split) = &kernel.split {
                candidates.push(split.nondiag.clone());
                candidates.push(split.diag.clone());
            }
            if let Some(d) = &kernel.driver {
                candidates.push(d.clone());
            }
        }
    }

    let identity: Option<T> = if fill_absorbs(kernel.algebra.map, kernel.algebra.reduce) {
        reduce_identity(kernel.algebra.reduce).ok()
    } else {
        None
    };
    let mut walks = Vec::with_capacity(prog.nests.len());
    for nest in &prog.nests {
        walks.push(plan_walk(nest, &prog, &tensors, &candidates, identity.as_ref())?);
    }

    Ok(SparsePrepared { prog, tensors, walks, collect: cfg.collect_counters })
}

/// Whether an unstored driver entry, read as the fill value, wipes out the
/// whole term it appears in. Zero annihilates a product and an infinite
/// edge never improves a min or max, so those coordinates can be skipped;
/// an additive join under an additive reduction has no such value.
fn fill_absorbs(map: MapOp, reduce: ReduceOp) -> bool {
    matches!(
        (map, reduce),
        (MapOp::Mul, ReduceOp::Add) | (MapOp::Add, ReduceOp::Min) | (MapOp::Add, ReduceOp::Max)
    )
}

/// Picks the access a nest walks, or `None` for a full dense sweep.
/// Walking requires a level-stored candidate read by every statement
/// (anything skipped must contribute the reduction identity), with its
/// fill equal to that identity and its axes nested in loop order.
fn plan_walk<T: Value>(
    nest: &RNest<T>,
    prog: &Program<T>,
    tensors: &[Operand<T>],
    candidates: &[String],
    identity: Option<&T>,
) -> Result<Option<NestWalk>, ExecError> {
    for name in candidates {
        let Some(id) = prog.names.iter().position(|n| n == name) else { continue };
        let Operand::Level(level) = &tensors[id] else { continue };

        let mut accesses = Vec::new();
        let mut read_here = false;
        for block in &nest.blocks {
            for b in &block.binds {
                if b.id == id {
                    accesses.push(b.slots.clone());
                    read_here = true;
                }
            }
            for s in &block.stmts {
                for t in &s.terms {
                    if let RTerm::Access(a) = t {
                        if a.id == id {
                            accesses.push(a.slots.clone());
                            read_here = true;
                        }
                    }
                }
            }
        }
        if !read_here {
            continue;
        }
        if identity != Some(level.fill()) {
            return Ok(None);
        }
        for block in &nest.blocks {
            let driver_bind: Vec<bool> = block.binds.iter().map(|b| b.id == id).collect();
            for s in &block.stmts {
                let touches = s.terms.iter().any(|t| match t {
                    RTerm::Access(a) => a.id == id,
                    RTerm::Bound(ix) => driver_bind[*ix],
                });
                if !touches {
                    return Ok(None);
                }
            }
        }
        let walked = accesses
            .into_iter()
            .find(|slots| slots.windows(2).all(|w| w[0] < w[1]))
            .ok_or_else(|| ExecError::DriverNotConcordant(name.clone()))?;
        return Ok(Some(NestWalk { id, slots: walked }));
    }
    Ok(None)
}

pub fn run_sparse<T: Value>(
    kernel: &CompiledKernel,
    inputs: &BTreeMap<String, Operand<T>>,
    initial_output: Option<&DenseTensor<T>>,
    cfg: &ExecConfig,
) -> Result<Evaluation<T>, ExecError> {
    let prepared = prepare_sparse(kernel, inputs, cfg)?;
    prepared.run(initial_output)
}

impl<T: Value> SparsePrepared<T> {
    /// Name of the tensor the kernel writes.
    pub fn output_name(&self) -> &str {
        &self.prog.out_name
    }

    /// Per nest, the tensor whose stored coordinates drive it, or `None`
    /// where the nest sweeps its full iteration space.
    pub fn nest_drivers(&self) -> Vec<Option<&str>> {
        self.walks
            .iter()
            .map(|w| w.as_ref().map(|w| self.prog.names[w.id].as_str()))
            .collect()
    }

    pub fn run(&self, initial_output: Option<&DenseTensor<T>>) -> Result<Evaluation<T>, ExecError> {
        let prog = &self.prog;
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
        for (nest, walk) in prog.nests.iter().zip(&self.walks) {
            let ident: Option<T> = reduce_identity(prog.reduce).ok();
            if !nest.workspaces.is_empty() && ident.is_none() {
                return Err(ExecError::MissingIdentity);
            }
            let mut state = NestState {
                vals: vec![0usize; nest.loops.len()],
                temps: nest
                    .workspaces
                    .iter()
                    .map(|_| (ident.clone().unwrap_or_else(T::zero), false))
                    .collect(),
                coords: Vec::new(),
                bind_vals: Vec::new(),
                ident,
                collect: self.collect,
            };
            let driver = walk.as_ref().map(|w| match &self.tensors[w.id] {
                Operand::Level(l) => (w, l),
                Operand::Dense(_) => unreachable!("walk planned over a level tensor"),
            });
            self.level(0, 0, 0, nest, driver, &mut state, &mut output, &mut tally);
        }
        if let Some(groups) = &prog.replication {
            replicate_output(&mut output, groups, &mut tally);
        }
        let counts = tally.into_counts(&prog.names, &prog.base);
        Ok(Evaluation { output, counts })
    }

    /// Counters from a prepared run without keeping the output.
    pub fn counts(&self) -> Result<Counts, ExecError> {
        Ok(self.run(None)?.counts)
    }

    #[allow(clippy::too_many_arguments)]
    fn level(
        &self,
        d: usize,
        axis: usize,
        pos: usize,
        nest: &RNest<T>,
        driver: Option<(&NestWalk, &LevelTensor<T>)>,
        state: &mut NestState<T>,
        output: &mut DenseTensor<T>,
        tally: &mut Tally,
    ) {
        if d == nest.loops.len() {
            let leaf = driver.map(|(_, l)| l.value_at(pos));
            self.exec_point(nest, driver.map(|(w, _)| w), leaf, state, output, tally);
            return;
        }
        let start = nest.loops[d].prev_chain_slot.map(|s| state.vals[s]).unwrap_or(0);
        let on_walk = driver.is_some_and(|(w, _)| w.slots.get(axis) == Some(&d));
        if on_walk {
            let (_, level) = driver.unwrap();
            for (c, child) in level.level(axis).children_from(pos, start) {
                state.vals[d] = c;
                self.enter(d, nest, state);
                self.level(d + 1, axis + 1, child, nest, driver, state, output, tally);
                self.exit(d, nest, state, output, tally);
            }
        } else {
            for v in start..nest.loops[d].extent {
                state.vals[d] = v;
                self.enter(d, nest, state);
                self.level(d + 1, axis, pos, nest, driver, state, output, tally);
                self.exit(d, nest, state, output, tally);
            }
        }
    }

    fn enter(&self, d: usize, nest: &RNest<T>, state: &mut NestState<T>) {
        for (w, decl) in nest.workspaces.iter().enumerate() {
            if decl.depth == d {
                state.temps[w] = (state.ident.clone().expect("workspace needs identity"), false);
            }
        }
    }

    fn exit(
        &self,
        d: usize,
        nest: &RNest<T>,
        state: &mut NestState<T>,
        output: &mut DenseTensor<T>,
        tally: &mut Tally,
    ) {
        for (w, decl) in nest.workspaces.iter().enumerate() {
            if decl.depth == d && state.temps[w].1 {
                state.coords.clear();
                state.coords.extend(decl.target_slots.iter().map(|&s| state.vals[s]));
                let off = output.offset(&state.coords);
                let cur = output.at(off).clone();
                *output.at_mut(off) = reduce_value(self.prog.reduce, &cur, &state.temps[w].0);
                state.temps[w].1 = false;
                if state.collect {
                    tally.writes += 1;
                    tally.reduce_ops += 1;
                }
            }
        }
    }

    fn exec_point(
        &self,
        nest: &RNest<T>,
        walk: Option<&NestWalk>,
        leaf: Option<&T>,
        state: &mut NestState<T>,
        output: &mut DenseTensor<T>,
        tally: &mut Tally,
    ) {
        let read = |slots: &[usize], id: usize, state: &mut NestState<T>| -> T {
            if let (Some(w), Some(v)) = (walk, leaf) {
                if w.id == id && w.slots == slots {
                    return v.clone();
                }
            }
            state.coords.clear();
            state.coords.extend(slots.iter().map(|&s| state.vals[s]));
            self.tensors[id].get(&state.coords).clone()
        };

        for block in &nest.blocks {
            if !guard_holds(&block.guard, &state.vals) {
                continue;
            }
            state.bind_vals.clear();
            for b in &block.binds {
                let v = read(&b.slots, b.id, state);
                state.bind_vals.push(v);
                if state.collect {
                    tally.reads[b.base] += 1;
                }
            }
            let lookup_factor: Option<T> = block.lookup.as_ref().map(|(atoms, table)| {
                let mut key = 0usize;
                for (m, a) in atoms.iter().enumerate() {
                    if a.holds(&state.vals) {
                        key |= 1 << m;
                    }
                }
                table[key].clone()
            });
            for stmt in &block.stmts {
                self.exec_stmt(stmt, lookup_factor.as_ref(), &read, state, output, tally);
            }
        }
    }

    fn exec_stmt(
        &self,
        stmt: &RStmt<T>,
        lookup_factor: Option<&T>,
        read: &impl Fn(&[usize], usize, &mut NestState<T>) -> T,
        state: &mut NestState<T>,
        output: &mut DenseTensor<T>,
        tally: &mut Tally,
    ) {
        let prog = &self.prog;
        let mut value: Option<T> = None;
        for term in &stmt.terms {
            let v: T = match term {
                RTerm::Bound(ix) => state.bind_vals[*ix].clone(),
                RTerm::Access(a) => {
                    let v = read(&a.slots, a.id, state);
                    if state.collect {
                        tally.reads[a.base] += 1;
                    }
                    v
                }
            };
            value = Some(match value {
                None => v,
                Some(acc) => {
                    if state.collect {
                        tally.map_ops += 1;
                    }
                    map_value(prog.map, &acc, &v)
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
                state.coords.clear();
                state.coords.extend(slots.iter().map(|&s| state.vals[s]));
                let off = output.offset(&state.coords);
                let cur = output.at(off).clone();
                *output.at_mut(off) = reduce_value(prog.reduce, &cur, &value);
                if state.collect {
                    tally.writes += 1;
                    tally.reduce_ops += 1;
                }
            }
            RTarget::Ws(ix) => {
                let (acc, dirty) = &mut state.temps[*ix];
                *acc = reduce_value(prog.reduce, acc, &value);
                *dirty = true;
                if state.collect {
                    tally.reduce_ops += 1;
                }
            }
        }
    }
}

struct NestState<T> {
    vals: Vec<usize>,
    temps: Vec<(T, bool)>,
    coords: Vec<usize>,
    bind_vals: Vec<T>,
    ident: Option<T>,
    collect: bool,
}
