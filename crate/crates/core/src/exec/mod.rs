//! Kernel interpreters. `dense` runs a compiled kernel against dense
//! operands, `sparse` walks a compressed operand's stored coordinates.
//! Both count work the same way, so their reports are directly
//! comparable; both resolve the kernel to slot-indexed form first.

pub mod bench;
pub mod dense;
pub mod report;
pub mod sparse;

pub use bench::{bench_prepared, BenchResult};
pub use dense::{run_dense, Evaluation};
pub use report::ExecReport;
pub use sparse::{prepare_sparse, run_sparse, DriverChoice, ExecConfig, Operand, SparsePrepared};

use crate::ast::{MapOp, ReduceOp};
use crate::ir::{
    CmpOp, CompiledKernel, Factor, Target, Term,
};
use crate::scalar::{Rat, Value};
use crate::tensor::DenseTensor;
use std::collections::BTreeMap;

/// Work performed by one execution. Reads are element value loads,
/// attributed to the tensor a view was derived from; guard checks and
/// coordinate comparisons are free. Map ops count one per combining
/// operator between loaded terms, so constant scale factors are not
/// arithmetic. Writes cover main-nest target stores; copies made by the
/// replication epilogue are tallied separately.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Counts {
    pub reads_by_tensor: BTreeMap<String, u64>,
    pub writes: u64,
    pub map_ops: u64,
    pub reduce_ops: u64,
    pub replicated_writes: u64,
}

impl Counts {
    pub fn reads(&self) -> u64 {
        self.reads_by_tensor.values().sum()
    }

    pub fn reads_of(&self, tensor: &str) -> u64 {
        self.reads_by_tensor.get(tensor).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("tensor {0} was not provided")]
    MissingTensor(String),
    #[error("extent of {var} is {found} from {tensor} but {expected} elsewhere")]
    ExtentMismatch { var: String, tensor: String, expected: usize, found: usize },
    #[error("no operand determines the extent of {0}")]
    MissingExtent(String),
    #[error("loop variable {0} is not a loop of its nest")]
    UnknownLoopVar(String),
    #[error("factor {0} is not representable in the scalar type")]
    FactorUnrepresentable(String),
    #[error("the algebra does not support constant scale factors")]
    FactorNeedsScaling,
    #[error("the scalar type has no identity for the reduction")]
    MissingIdentity,
    #[error("statement targets {0}, not the kernel output")]
    TargetNotOutput(String),
    #[error("statement references workspace {0} that its nest does not declare")]
    UnknownWorkspace(usize),
    #[error("term {0} is not bound in its block")]
    UnboundTerm(String),
    #[error("initial output has dims {found:?}, kernel needs {expected:?}")]
    InitialDimsMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("driver {0} must be walked in storage order; reorder loops or transpose")]
    DriverNotConcordant(String),
}

/// Identity of the reduction, which is also the fill value an absent
/// stored entry stands for under that algebra.
pub fn reduce_identity<T: Value>(reduce: ReduceOp) -> Result<T, ExecError> {
    match reduce {
        ReduceOp::Add => Ok(T::zero()),
        ReduceOp::Min => T::pos_inf().ok_or(ExecError::MissingIdentity),
        ReduceOp::Max => T::neg_inf().ok_or(ExecError::MissingIdentity),
    }
}

pub(crate) fn reduce_value<T: Value>(reduce: ReduceOp, acc: &T, v: &T) -> T {
    match reduce {
        ReduceOp::Add => acc.clone() + v.clone(),
        ReduceOp::Min => T::min_of(acc, v),
        ReduceOp::Max => T::max_of(acc, v),
    }
}

pub(crate) fn map_value<T: Value>(map: MapOp, acc: &T, v: &T) -> T {
    match map {
        MapOp::Mul => acc.clone() * v.clone(),
        MapOp::Add => T::add_inf(acc, v),
    }
}

/// Tensor access with loop variables replaced by slot numbers into the
/// nest's current index values.
#[derive(Clone, Debug)]
pub(crate) struct RAccess {
    pub id: usize,
    pub base: usize,
    pub slots: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RAtom {
    pub a: usize,
    pub op: CmpOp,
    pub b: usize,
}

impl RAtom {
    #[inline]
    pub fn holds(&self, vals: &[usize]) -> bool {
        self.op.holds(vals[self.a], vals[self.b])
    }
}

#[derive(Clone, Debug)]
pub(crate) enum RFactor<T> {
    One,
    Const(T),
    Lookup,
}

#[derive(Clone, Debug)]
pub(crate) enum RTerm {
    Access(RAccess),
    Bound(usize),
}

#[derive(Clone, Debug)]
pub(crate) enum RTarget {
    Out(Vec<usize>),
    Ws(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct RStmt<T> {
    pub target: RTarget,
    pub factor: RFactor<T>,
    pub terms: Vec<RTerm>,
}

#[derive(Clone, Debug)]
pub(crate) struct RBlock<T> {
    pub guard: Vec<Vec<RAtom>>,
    pub binds: Vec<RAccess>,
    pub lookup: Option<(Vec<RAtom>, Vec<T>)>,
    pub stmts: Vec<RStmt<T>>,
}

#[derive(Clone, Debug)]
pub(crate) struct RLoop {
    pub extent: usize,
    /// Slot whose current value lower-bounds this loop, for chain entries
    /// after the first.
    pub prev_chain_slot: Option<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct RWorkspace {
    pub depth: usize,
    pub target_slots: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct RNest<T> {
    pub loops: Vec<RLoop>,
    pub blocks: Vec<RBlock<T>>,
    pub workspaces: Vec<RWorkspace>,
}

/// A kernel resolved against concrete operand dims: names interned,
/// variables turned into slots, factors lowered to the scalar type.
pub(crate) struct Program<T> {
    pub names: Vec<String>,
    pub base: Vec<usize>,
    pub nests: Vec<RNest<T>>,
    pub out_dims: Vec<usize>,
    pub out_name: String,
    pub replication: Option<Vec<Vec<usize>>>,
    pub reduce: ReduceOp,
    pub map: MapOp,
}

pub(crate) struct Interner {
    names: Vec<String>,
    base: Vec<usize>,
    aliases: BTreeMap<String, String>,
}

impl Interner {
    pub fn new(kernel: &CompiledKernel) -> Self {
        let mut aliases = BTreeMap::new();
        for t in &kernel.transposes {
            aliases.insert(t.name.clone(), t.base.clone());
        }
        if let Some(s) = &kernel.split {
            aliases.insert(s.nondiag.clone(), s.base.clone());
            aliases.insert(s.diag.clone(), s.base.clone());
        }
        Interner { names: Vec::new(), base: Vec::new(), aliases }
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(ix) = self.names.iter().position(|n| n == name) {
            return ix;
        }
        self.names.push(name.to_string());
        self.base.push(usize::MAX);
        let ix = self.names.len() - 1;
        let base_name = self.aliases.get(name).cloned().unwrap_or_else(|| name.to_string());
        let base = if base_name == name {
            ix
        } else {
            self.intern(&base_name)
        };
        self.base[ix] = base;
        ix
    }
}

pub(crate) fn resolve<T: Value>(
    kernel: &CompiledKernel,
    dims_of: &dyn Fn(&str) -> Option<Vec<usize>>,
) -> Result<Program<T>, ExecError> {
    let mut interner = Interner::new(kernel);
    let out_name = kernel.assignment.output.tensor.clone();
    let mut nests = Vec::with_capacity(kernel.nests.len());
    let mut out_dims: Option<Vec<usize>> = None;

    for nest in &kernel.nests {
        let slot_of = |v: &crate::ast::IndexVar| -> Result<usize, ExecError> {
            nest.depth_of(v).ok_or_else(|| ExecError::UnknownLoopVar(v.to_string()))
        };

        let mut extents: Vec<Option<usize>> = vec![None; nest.loops.len()];
        let record = |acc: &crate::ast::TensorAccess,
                          extents: &mut Vec<Option<usize>>|
         -> Result<(), ExecError> {
            let dims = dims_of(&acc.tensor)
                .ok_or_else(|| ExecError::MissingTensor(acc.tensor.clone()))?;
            for (axis, v) in acc.indices.iter().enumerate() {
                let slot = slot_of(v)?;
                let d = dims[axis];
                match extents[slot] {
                    Some(e) if e != d => {
                        return Err(ExecError::ExtentMismatch {
                            var: v.to_string(),
                            tensor: acc.tensor.clone(),
                            expected: e,
                            found: d,
                        })
                    }
                    _ => extents[slot] = Some(d),
                }
            }
            Ok(())
        };
        for block in &nest.blocks {
            for b in &block.binds {
                record(&b.access, &mut extents)?;
            }
            for s in &block.stmts {
                for t in &s.terms {
                    if let Term::Access(a) = t {
                        record(a, &mut extents)?;
                    }
                }
            }
        }

        let resolve_access = |acc: &crate::ast::TensorAccess,
                              interner: &mut Interner|
         -> Result<RAccess, ExecError> {
            let id = interner.intern(&acc.tensor);
            let base = interner.base[id];
            let slots =
                acc.indices.iter().map(&slot_of).collect::<Result<Vec<usize>, ExecError>>()?;
            Ok(RAccess { id, base, slots })
        };
        let resolve_atoms = |atoms: &[crate::ir::Atom]| -> Result<Vec<RAtom>, ExecError> {
            atoms
                .iter()
                .map(|a| Ok(RAtom { a: slot_of(&a.lhs)?, op: a.op, b: slot_of(&a.rhs)? }))
                .collect()
        };

        let mut blocks = Vec::with_capacity(nest.blocks.len());
        for block in &nest.blocks {
            let guard = block
                .guard
                .clauses()
                .iter()
                .map(|c| resolve_atoms(c))
                .collect::<Result<Vec<_>, _>>()?;
            let binds = block
                .binds
                .iter()
                .map(|b| resolve_access(&b.access, &mut interner))
                .collect::<Result<Vec<_>, _>>()?;
            let lookup = match &block.lookup {
                Some(l) => {
                    if !kernel.algebra.scalar_scaling {
                        return Err(ExecError::FactorNeedsScaling);
                    }
                    let atoms = resolve_atoms(&l.atoms)?;
                    let table = l
                        .table
                        .iter()
                        .map(|r| lower_rat::<T>(r))
                        .collect::<Result<Vec<T>, _>>()?;
                    Some((atoms, table))
                }
                None => None,
            };
            let mut stmts = Vec::with_capacity(block.stmts.len());
            for s in &block.stmts {
                let target = match &s.target {
                    Target::Access(a) => {
                        if a.tensor != out_name {
                            return Err(ExecError::TargetNotOutput(a.tensor.clone()));
                        }
                        RTarget::Out(
                            a.indices
                                .iter()
                                .map(&slot_of)
                                .collect::<Result<Vec<usize>, ExecError>>()?,
                        )
                    }
                    Target::Workspace(id) => RTarget::Ws(
                        nest.workspaces
                            .iter()
                            .position(|w| w.id == *id)
                            .ok_or(ExecError::UnknownWorkspace(*id))?,
                    ),
                };
                let factor = match &s.factor {
                    Factor::Const(r) if r == &Rat::from_integer(1) => RFactor::One,
                    Factor::Const(r) => {
                        if !kernel.algebra.scalar_scaling {
                            return Err(ExecError::FactorNeedsScaling);
                        }
                        RFactor::Const(lower_rat::<T>(r)?)
                    }
                    Factor::Lookup(_) => {
                        if block.lookup.is_none() {
                            return Err(ExecError::UnboundTerm("lookup factor".into()));
                        }
                        RFactor::Lookup
                    }
                };
                let terms = s
                    .terms
                    .iter()
                    .map(|t| match t {
                        Term::Access(a) => Ok(RTerm::Access(resolve_access(a, &mut interner)?)),
                        Term::Bound(name) => block
                            .binds
                            .iter()
                            .position(|b| &b.name == name)
                            .map(RTerm::Bound)
                            .ok_or_else(|| ExecError::UnboundTerm(name.clone())),
                    })
                    .collect::<Result<Vec<RTerm>, ExecError>>()?;
                stmts.push(RStmt { target, factor, terms });
            }
            blocks.push(RBlock { guard, binds, lookup, stmts });
        }

        let workspaces = nest
            .workspaces
            .iter()
            .map(|w| {
                Ok(RWorkspace {
                    depth: w.depth,
                    target_slots: w
                        .target
                        .indices
                        .iter()
                        .map(&slot_of)
                        .collect::<Result<Vec<usize>, ExecError>>()?,
                })
            })
            .collect::<Result<Vec<_>, ExecError>>()?;

        let mut loops = Vec::with_capacity(nest.loops.len());
        for (d, v) in nest.loops.iter().enumerate() {
            let extent = extents[d]
                .ok_or_else(|| ExecError::MissingExtent(v.to_string()))?;
            let prev_chain_slot = nest
                .chain
                .iter()
                .position(|c| c == v)
                .filter(|&m| m > 0)
                .map(|m| nest.depth_of(&nest.chain[m - 1]).unwrap());
            loops.push(RLoop { extent, prev_chain_slot });
        }

        if out_dims.is_none() {
            let dims = kernel
                .assignment
                .output
                .indices
                .iter()
                .map(|v| {
                    let slot = slot_of(v)?;
                    extents[slot].ok_or_else(|| ExecError::MissingExtent(v.to_string()))
                })
                .collect::<Result<Vec<usize>, ExecError>>()?;
            out_dims = Some(dims);
        }

        nests.push(RNest { loops, blocks, workspaces });
    }

    Ok(Program {
        names: interner.names,
        base: interner.base,
        nests,
        out_dims: out_dims.unwrap_or_default(),
        out_name,
        replication: kernel.replication.as_ref().map(|r| r.axis_groups.clone()),
        reduce: kernel.algebra.reduce,
        map: kernel.algebra.map,
    })
}

pub(crate) fn lower_rat<T: Value>(r: &Rat) -> Result<T, ExecError> {
    T::from_rat(*r).ok_or_else(|| ExecError::FactorUnrepresentable(crate::ir::rat_str(r)))
}

pub(crate) fn guard_holds(clauses: &[Vec<RAtom>], vals: &[usize]) -> bool {
    clauses.iter().any(|c| c.iter().all(|a| a.holds(vals)))
}

/// Raw counters indexed by interned tensor id, folded into named `Counts`
/// after the run.
pub(crate) struct Tally {
    pub reads: Vec<u64>,
    pub writes: u64,
    pub map_ops: u64,
    pub reduce_ops: u64,
    pub replicated_writes: u64,
}

impl Tally {
    pub fn new(n_tensors: usize) -> Self {
        Tally { reads: vec![0; n_tensors], writes: 0, map_ops: 0, reduce_ops: 0, replicated_writes: 0 }
    }

    pub fn into_counts(self, names: &[String], base: &[usize]) -> Counts {
        let mut reads_by_tensor: BTreeMap<String, u64> = BTreeMap::new();
        for (id, n) in self.reads.iter().enumerate() {
            if *n > 0 {
                *reads_by_tensor.entry(names[base[id]].clone()).or_insert(0) += n;
            }
        }
        Counts {
            reads_by_tensor,
            writes: self.writes,
            map_ops: self.map_ops,
            reduce_ops: self.reduce_ops,
            replicated_writes: self.replicated_writes,
        }
    }
}

/// Copies every non-canonical output coordinate from the sorted one
/// within each symmetric axis group.
pub(crate) fn replicate_output<T: Value>(
    out: &mut DenseTensor<T>,
    groups: &[Vec<usize>],
    tally: &mut Tally,
) {
    let dims = out.dims().to_vec();
    for coords in crate::tensor::CoordIter::new(dims) {
        let mut canon = coords.clone();
        for g in groups {
            let mut vals: Vec<usize> = g.iter().map(|&ax| canon[ax]).collect();
            vals.sort_unstable();
            for (&ax, v) in g.iter().zip(vals) {
                canon[ax] = v;
            }
        }
        if canon != coords {
            let v = out.get(&canon).clone();
            out.set(&coords, v);
            tally.replicated_writes += 1;
        }
    }
}
