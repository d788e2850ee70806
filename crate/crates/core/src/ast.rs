//! Einsum assignments: the parsed form of a kernel before lowering.
//!
//! An assignment is one statement like `C[i,j] += A[i,k,l] * B[k,j] * B[l,j]`
//! together with per-tensor symmetry partitions and a loop order. Everything
//! downstream (symmetrization, the optimization passes, the executors) works
//! on relabeled and normalized copies of this structure.

use std::collections::BTreeMap;
use std::fmt;

/// A loop index variable, compared by name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexVar(String);

impl IndexVar {
    pub fn new(name: impl Into<String>) -> Self {
        IndexVar(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IndexVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for IndexVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for IndexVar {
    fn from(s: &str) -> Self {
        IndexVar::new(s)
    }
}

/// One tensor access, e.g. `A[i, k, l]`. An empty index list is a scalar
/// (order-0) access like `y[]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TensorAccess {
    pub tensor: String,
    pub indices: Vec<IndexVar>,
}

impl TensorAccess {
    pub fn new(tensor: impl Into<String>, indices: Vec<IndexVar>) -> Self {
        TensorAccess { tensor: tensor.into(), indices }
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }
}

impl fmt::Display for TensorAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.tensor)?;
        for (n, ix) in self.indices.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{ix}")?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReduceOp {
    Add,
    Min,
    Max,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MapOp {
    Mul,
    Add,
}

/// The operator pair a kernel reduces and maps with, plus the algebraic
/// flags the optimization passes consult. The constructors fill the flags
/// in for the builtin pairs; custom algebras set them explicitly.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OperatorAlgebra {
    pub reduce: ReduceOp,
    pub map: MapOp,
    /// Reducing the same value twice equals reducing it once (min, max).
    pub idempotent_reduce: bool,
    /// map distributes over reduce, e.g. mul over add or add over min.
    pub map_distributes_over_reduce: bool,
    /// Reducing N copies of x can be replaced by scaling x by N.
    pub scalar_scaling: bool,
}

impl OperatorAlgebra {
    pub fn plus_times() -> Self {
        OperatorAlgebra {
            reduce: ReduceOp::Add,
            map: MapOp::Mul,
            idempotent_reduce: false,
            map_distributes_over_reduce: true,
            scalar_scaling: true,
        }
    }

    pub fn min_plus() -> Self {
        OperatorAlgebra {
            reduce: ReduceOp::Min,
            map: MapOp::Add,
            idempotent_reduce: true,
            map_distributes_over_reduce: true,
            scalar_scaling: false,
        }
    }

    pub fn max_plus() -> Self {
        OperatorAlgebra {
            reduce: ReduceOp::Max,
            map: MapOp::Add,
            idempotent_reduce: true,
            map_distributes_over_reduce: true,
            scalar_scaling: false,
        }
    }

    pub fn reduce_spelling(&self) -> &'static str {
        match self.reduce {
            ReduceOp::Add => "+=",
            ReduceOp::Min => "min=",
            ReduceOp::Max => "max=",
        }
    }

    pub fn map_spelling(&self) -> &'static str {
        match self.map {
            MapOp::Mul => "*",
            MapOp::Add => "+",
        }
    }
}

/// Partition of a tensor's axes into symmetric groups, 0-based. Axes in the
/// same part may be permuted freely without changing the stored value; a
/// part of size 1 declares no symmetry for that axis.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SymmetryPartition {
    parts: Vec<Vec<usize>>,
}

impl SymmetryPartition {
    /// Builds a partition for a tensor of order `order`. Parts must be
    /// disjoint and in range; axes not mentioned become singleton parts.
    pub fn new(order: usize, parts: Vec<Vec<usize>>) -> Result<Self, AstError> {
        let mut seen = vec![false; order];
        let mut full: Vec<Vec<usize>> = Vec::new();
        for part in parts {
            let mut part = part;
            part.sort_unstable();
            for &axis in &part {
                if axis >= order {
                    return Err(AstError::SymmetryAxisOutOfRange { axis: axis + 1, order });
                }
                if seen[axis] {
                    return Err(AstError::SymmetryAxisRepeated { axis: axis + 1 });
                }
                seen[axis] = true;
            }
            if !part.is_empty() {
                full.push(part);
            }
        }
        for (axis, covered) in seen.iter().enumerate() {
            if !covered {
                full.push(vec![axis]);
            }
        }
        full.sort_by_key(|p| p[0]);
        Ok(SymmetryPartition { parts: full })
    }

    pub fn trivial(order: usize) -> Self {
        SymmetryPartition { parts: (0..order).map(|a| vec![a]).collect() }
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    /// Parts of size >= 2, the ones that actually permit permutation.
    pub fn symmetric_parts(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.parts.iter().filter(|p| p.len() >= 2)
    }

    pub fn order(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }
}

/// A full parsed kernel: one assignment, its algebra, declared symmetries,
/// and the loop order lowering will use.
#[derive(Clone, PartialEq, Debug)]
pub struct EinsumAssignment {
    pub output: TensorAccess,
    pub algebra: OperatorAlgebra,
    pub operands: Vec<TensorAccess>,
    pub symmetries: BTreeMap<String, SymmetryPartition>,
    pub loop_order: Vec<IndexVar>,
}

impl EinsumAssignment {
    /// Position of `ix` in the loop order; used as the canonical ordering
    /// on index variables throughout lowering.
    pub fn loop_pos(&self, ix: &IndexVar) -> usize {
        self.loop_order.iter().position(|v| v == ix).unwrap_or(usize::MAX)
    }

    pub fn accesses(&self) -> impl Iterator<Item = &TensorAccess> {
        std::iter::once(&self.output).chain(self.operands.iter())
    }

    /// Checks the structural invariants: loop order covers exactly the used
    /// variables without duplicates, arities are consistent per tensor, and
    /// symmetry declarations fit the tensors they name.
    pub fn validate(&self) -> Result<(), AstError> {
        let mut seen = BTreeMap::new();
        for v in &self.loop_order {
            if seen.insert(v.clone(), ()).is_some() {
                return Err(AstError::DuplicateLoopVar(v.clone()));
            }
        }
        let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
        for acc in self.accesses() {
            for ix in &acc.indices {
                if !seen.contains_key(ix) {
                    return Err(AstError::UnlistedIndex(ix.clone()));
                }
            }
            match arity.get(acc.tensor.as_str()) {
                Some(&n) if n != acc.order() => {
                    return Err(AstError::ArityMismatch {
                        tensor: acc.tensor.clone(),
                        first: n,
                        second: acc.order(),
                    })
                }
                _ => {
                    arity.insert(&acc.tensor, acc.order());
                }
            }
        }
        let used: Vec<&IndexVar> = self.accesses().flat_map(|a| a.indices.iter()).collect();
        for v in &self.loop_order {
            if !used.contains(&v) {
                return Err(AstError::UnusedLoopVar(v.clone()));
            }
        }
        for (tensor, part) in &self.symmetries {
            match arity.get(tensor.as_str()) {
                Some(&n) if part.order() == n => {}
                Some(&n) => {
                    return Err(AstError::SymmetryOrderMismatch {
                        tensor: tensor.clone(),
                        declared: part.order(),
                        actual: n,
                    })
                }
                None => return Err(AstError::SymmetryUnknownTensor(tensor.clone())),
            }
        }
        Ok(())
    }

    pub fn partition_of(&self, tensor: &str) -> Option<&SymmetryPartition> {
        self.symmetries.get(tensor)
    }
}

impl fmt::Display for EinsumAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.output, self.algebra.reduce_spelling())?;
        for (n, t) in self.operands.iter().enumerate() {
            if n > 0 {
                write!(f, " {} ", self.algebra.map_spelling())?;
            }
            write!(f, "{t}")?;
        }
        for (tensor, partition) in &self.symmetries {
            write!(f, "\nsym {tensor}:")?;
            for part in partition.parts() {
                write!(f, " {{")?;
                for (n, axis) in part.iter().enumerate() {
                    if n > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", axis + 1)?;
                }
                write!(f, "}}")?;
            }
        }
        write!(f, "\nloop ")?;
        for (n, v) in self.loop_order.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Rewrites `a` into its canonical spelling: within every declared symmetric
/// part the accessed indices are sorted by loop position, and operands are
/// sorted by tensor name then index tuple. Idempotent, and preserves the
/// kernel's value because part-sorting only uses declared symmetry and the
/// map op is commutative.
pub fn normalize(a: &EinsumAssignment) -> EinsumAssignment {
    let mut out = a.clone();
    let sort_access = |acc: &mut TensorAccess| {
        if let Some(partition) = a.symmetries.get(&acc.tensor) {
            for part in partition.symmetric_parts() {
                let mut entries: Vec<IndexVar> =
                    part.iter().map(|&axis| acc.indices[axis].clone()).collect();
                entries.sort_by_key(|ix| a.loop_pos(ix));
                for (&axis, ix) in part.iter().zip(entries) {
                    acc.indices[axis] = ix;
                }
            }
        }
    };
    sort_access(&mut out.output);
    for op in &mut out.operands {
        sort_access(op);
    }
    let key = |acc: &TensorAccess| {
        let positions: Vec<usize> = acc.indices.iter().map(|ix| a.loop_pos(ix)).collect();
        (acc.tensor.clone(), positions)
    };
    out.operands.sort_by_key(key);
    out
}

/// Structural equality modulo normalization.
pub fn assignments_equal(a: &EinsumAssignment, b: &EinsumAssignment) -> bool {
    normalize(a) == normalize(b)
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum AstError {
    #[error("symmetry axis {axis} out of range for order-{order} tensor")]
    SymmetryAxisOutOfRange { axis: usize, order: usize },
    #[error("symmetry axis {axis} listed twice")]
    SymmetryAxisRepeated { axis: usize },
    #[error("loop variable {0} listed twice")]
    DuplicateLoopVar(IndexVar),
    #[error("loop variable {0} is not used by the assignment")]
    UnusedLoopVar(IndexVar),
    #[error("index {0} does not appear in the loop order")]
    UnlistedIndex(IndexVar),
    #[error("tensor {tensor} used with arity {first} and arity {second}")]
    ArityMismatch { tensor: String, first: usize, second: usize },
    #[error("symmetry declared for unknown tensor {0}")]
    SymmetryUnknownTensor(String),
    #[error("symmetry for {tensor} covers {declared} axes but the tensor has {actual}")]
    SymmetryOrderMismatch { tensor: String, declared: usize, actual: usize },
}
