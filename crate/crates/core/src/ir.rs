//! Lowered kernel form: guarded statement blocks inside loop nests.
//!
//! Lowering a symmetric kernel produces one or more `LoopNest`s. A nest
//! iterates its loop variables in order, restricting the permutable chain
//! to nondecreasing tuples, and at every point runs each `Block` whose
//! guard holds: bound values are loaded once, then each statement reduces
//! a scaled product of terms into its target. The executors interpret this
//! structure directly, so it is the unit the optimization passes rewrite
//! and the unit the golden tests pin down via `CompiledKernel::dump`.

use crate::ast::{EinsumAssignment, IndexVar, MapOp, OperatorAlgebra, TensorAccess};
use crate::scalar::Rat;
use crate::symmetry::Perm;
use num_traits::One;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn spelling(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, a: usize, b: usize) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

/// One comparison between two loop variables.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub lhs: IndexVar,
    pub op: CmpOp,
    pub rhs: IndexVar,
}

impl Atom {
    pub fn eval(&self, env: &dyn Fn(&IndexVar) -> usize) -> bool {
        self.op.holds(env(&self.lhs), env(&self.rhs))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.spelling(), self.rhs)
    }
}

pub fn atom(lhs: &IndexVar, op: CmpOp, rhs: &IndexVar) -> Atom {
    Atom { lhs: lhs.clone(), op, rhs: rhs.clone() }
}

/// Guard in disjunctive normal form. The guard holds when any clause's
/// atoms all hold; a single empty clause is the always-true guard.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Guard {
    clauses: Vec<Vec<Atom>>,
}

impl Guard {
    pub fn always() -> Self {
        Guard { clauses: vec![Vec::new()] }
    }

    pub fn from_conj(atoms: Vec<Atom>) -> Self {
        Guard { clauses: vec![atoms] }
    }

    pub fn clauses(&self) -> &[Vec<Atom>] {
        &self.clauses
    }

    pub fn is_always(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    pub fn or(&self, other: &Guard) -> Guard {
        let mut clauses = self.clauses.clone();
        for c in &other.clauses {
            if !clauses.contains(c) {
                clauses.push(c.clone());
            }
        }
        Guard { clauses }
    }

    /// Conjoins one atom onto every clause.
    pub fn and_atom(&self, a: &Atom) -> Guard {
        Guard {
            clauses: self
                .clauses
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    if !c.contains(a) {
                        c.push(a.clone());
                    }
                    c
                })
                .collect(),
        }
    }

    pub fn eval(&self, env: &dyn Fn(&IndexVar) -> usize) -> bool {
        self.clauses.iter().any(|c| c.iter().all(|a| a.eval(env)))
    }

    /// Equality atoms of the clause that holds under `env`, or of the only
    /// clause if the guard is a single conjunction.
    pub fn eq_pairs(&self) -> Vec<(IndexVar, IndexVar)> {
        let mut out = Vec::new();
        for c in &self.clauses {
            for a in c {
                if a.op == CmpOp::Eq {
                    let pair = (a.lhs.clone(), a.rhs.clone());
                    if !out.contains(&pair) {
                        out.push(pair);
                    }
                }
            }
        }
        out
    }

    /// Folds pairs of clauses that differ only in one atom's operator,
    /// `<` against `==` on the same variables, into a single `<=` clause,
    /// repeating until nothing merges.
    pub fn simplified(&self) -> Guard {
        let mut clauses = self.clauses.clone();
        for c in &mut clauses {
            c.dedup();
        }
        clauses.dedup();
        loop {
            let mut merged = None;
            'search: for i in 0..clauses.len() {
                for j in i + 1..clauses.len() {
                    if let Some(m) = merge_clauses(&clauses[i], &clauses[j]) {
                        merged = Some((i, j, m));
                        break 'search;
                    }
                }
            }
            match merged {
                Some((i, j, m)) => {
                    clauses.remove(j);
                    clauses[i] = m;
                }
                None => break,
            }
        }
        Guard { clauses }
    }
}

fn merge_clauses(a: &[Atom], b: &[Atom]) -> Option<Vec<Atom>> {
    if a.len() != b.len() {
        return None;
    }
    let mut diff = None;
    for (x, y) in a.iter().zip(b) {
        if x == y {
            continue;
        }
        if diff.is_some() || x.lhs != y.lhs || x.rhs != y.rhs {
            return None;
        }
        let ops = (x.op, y.op);
        if ops == (CmpOp::Lt, CmpOp::Eq) || ops == (CmpOp::Eq, CmpOp::Lt) {
            diff = Some(x.lhs.clone());
        } else {
            return None;
        }
    }
    let widened = diff?;
    Some(
        a.iter()
            .map(|x| {
                if x.lhs == widened && matches!(x.op, CmpOp::Lt | CmpOp::Eq) {
                    Atom { lhs: x.lhs.clone(), op: CmpOp::Le, rhs: x.rhs.clone() }
                } else {
                    x.clone()
                }
            })
            .collect(),
    )
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_always() {
            return f.write_str("true");
        }
        let many = self.clauses.len() > 1;
        for (n, clause) in self.clauses.iter().enumerate() {
            if n > 0 {
                f.write_str(" || ")?;
            }
            if many && clause.len() > 1 {
                f.write_str("(")?;
            }
            for (m, a) in clause.iter().enumerate() {
                if m > 0 {
                    f.write_str(" && ")?;
                }
                write!(f, "{a}")?;
            }
            if many && clause.len() > 1 {
                f.write_str(")")?;
            }
        }
        Ok(())
    }
}

/// A value loaded once per block and reused by its statements.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Bind {
    pub name: String,
    pub access: TensorAccess,
}

/// Scale factor table selected by which equality atoms hold. The key is a
/// bitmask: atom m contributes 2^m when it holds, and `table[key]` is the
/// factor. Installed by the factor-lookup pass in place of per-pattern
/// blocks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LookupBind {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub table: Vec<Rat>,
}

impl fmt::Display for LookupBind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lookup {}: key =", self.name)?;
        for (m, a) in self.atoms.iter().enumerate() {
            if m > 0 {
                write!(f, " +")?;
            }
            write!(f, " {}*({a})", 1u64 << m)?;
        }
        write!(f, "; table [")?;
        for (n, v) in self.table.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", rat_str(v))?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Factor {
    Const(Rat),
    Lookup(String),
}

impl Factor {
    pub fn one() -> Self {
        Factor::Const(Rat::one())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Factor::Const(r) if r.is_one())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Term {
    Access(TensorAccess),
    Bound(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Access(a) => write!(f, "{a}"),
            Term::Bound(name) => f.write_str(name),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Target {
    Access(TensorAccess),
    Workspace(usize),
}

/// One reduction statement: `target reduce= factor * map(terms)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Stmt {
    pub target: Target,
    pub factor: Factor,
    pub terms: Vec<Term>,
}

impl Stmt {
    pub fn new(target: TensorAccess, terms: Vec<Term>) -> Self {
        Stmt { target: Target::Access(target), factor: Factor::one(), terms }
    }

    /// The statement with bound terms replaced by the accesses they load,
    /// the form passes compare and the dense executor checks against.
    pub fn resolved(&self, binds: &[Bind]) -> Stmt {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Bound(name) => {
                    let b = binds
                        .iter()
                        .find(|b| &b.name == name)
                        .unwrap_or_else(|| panic!("unbound term {name}"));
                    Term::Access(b.access.clone())
                }
                other => other.clone(),
            })
            .collect();
        Stmt { target: self.target.clone(), factor: self.factor.clone(), terms }
    }
}

/// A guarded group of statements sharing bound loads.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub guard: Guard,
    pub binds: Vec<Bind>,
    pub lookup: Option<LookupBind>,
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(guard: Guard, stmts: Vec<Stmt>) -> Self {
        Block { guard, binds: Vec::new(), lookup: None, stmts }
    }

    /// Statements with binds inlined, for structural comparison across
    /// blocks regardless of what each block chose to bind.
    pub fn resolved_stmts(&self) -> Vec<Stmt> {
        self.stmts.iter().map(|s| s.resolved(&self.binds)).collect()
    }
}

/// Scalar accumulator scoped to one loop level: reset at each iteration
/// of `loops[depth]`, reduced into `target` on the way out when written.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WorkspaceDecl {
    pub id: usize,
    pub name: String,
    pub depth: usize,
    pub target: TensorAccess,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LoopNest {
    /// Loop variables, outermost first.
    pub loops: Vec<IndexVar>,
    /// The permutable chain, a subsequence of `loops` iterated under
    /// p1 <= p2 <= ... <= pn. Empty when the kernel has no symmetry.
    pub chain: Vec<IndexVar>,
    pub blocks: Vec<Block>,
    pub workspaces: Vec<WorkspaceDecl>,
}

impl LoopNest {
    pub fn depth_of(&self, v: &IndexVar) -> Option<usize> {
        self.loops.iter().position(|x| x == v)
    }
}

/// View of a tensor with axes permuted, materialized before execution so
/// every access in the nest walks its storage in loop order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TransposeRequest {
    pub base: String,
    pub name: String,
    pub perm: Perm,
}

/// Request to split a symmetric operand into its strict part and the
/// coordinates with a repeated index, so the strict nest runs unguarded.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SplitRequest {
    pub base: String,
    pub nondiag: String,
    pub diag: String,
}

/// Epilogue: the main nests fill only canonical output coordinates; the
/// remaining ones are copied from the sorted coordinate within each
/// symmetric axis group.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReplicationPlan {
    pub output: String,
    pub axis_groups: Vec<Vec<usize>>,
}

/// A fully lowered kernel, ready for the executors.
#[derive(Clone, PartialEq, Debug)]
pub struct CompiledKernel {
    pub assignment: EinsumAssignment,
    pub algebra: OperatorAlgebra,
    pub nests: Vec<LoopNest>,
    /// Operand whose stored coordinates drive sparse iteration.
    pub driver: Option<String>,
    pub transposes: Vec<TransposeRequest>,
    pub split: Option<SplitRequest>,
    pub replication: Option<ReplicationPlan>,
}

impl CompiledKernel {
    /// Stable line-oriented rendering used by tests and `--dump`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        use fmt::Write;
        for t in &self.transposes {
            writeln!(out, "view {} = transpose({}, {})", t.name, t.base, t.perm).unwrap();
        }
        if let Some(s) = &self.split {
            writeln!(out, "split {} -> {}, {}", s.base, s.nondiag, s.diag).unwrap();
        }
        for nest in &self.nests {
            write!(out, "nest (").unwrap();
            for (n, v) in nest.loops.iter().enumerate() {
                if n > 0 {
                    write!(out, ", ").unwrap();
                }
                write!(out, "{v}").unwrap();
            }
            write!(out, ")").unwrap();
            if nest.chain.len() >= 2 {
                write!(out, " where ").unwrap();
                for (n, v) in nest.chain.iter().enumerate() {
                    if n > 0 {
                        write!(out, " <= ").unwrap();
                    }
                    write!(out, "{v}").unwrap();
                }
            }
            writeln!(out).unwrap();
            for w in &nest.workspaces {
                writeln!(out, "  temp {} for {} at {}", w.name, w.target, nest.loops[w.depth])
                    .unwrap();
            }
            for block in &nest.blocks {
                writeln!(out, "  block {}:", block.guard).unwrap();
                for b in &block.binds {
                    writeln!(out, "    bind {} = {}", b.name, b.access).unwrap();
                }
                if let Some(l) = &block.lookup {
                    writeln!(out, "    {l}").unwrap();
                }
                for s in &block.stmts {
                    writeln!(out, "    {}", stmt_str(s, nest, &self.algebra)).unwrap();
                }
            }
        }
        if let Some(r) = &self.replication {
            write!(out, "replicate {} over", r.output).unwrap();
            for g in &r.axis_groups {
                write!(out, " {{").unwrap();
                for (n, axis) in g.iter().enumerate() {
                    if n > 0 {
                        write!(out, ", ").unwrap();
                    }
                    write!(out, "{}", axis + 1).unwrap();
                }
                write!(out, "}}").unwrap();
            }
            writeln!(out).unwrap();
        }
        out
    }
}

pub fn rat_str(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn stmt_str(s: &Stmt, nest: &LoopNest, algebra: &OperatorAlgebra) -> String {
    let target = match &s.target {
        Target::Access(a) => a.to_string(),
        Target::Workspace(id) => nest
            .workspaces
            .iter()
            .find(|w| w.id == *id)
            .map(|w| w.name.clone())
            .unwrap_or_else(|| format!("temp#{id}")),
    };
    let mut rhs = String::new();
    match &s.factor {
        Factor::Const(r) if r.is_one() => {}
        Factor::Const(r) => rhs = format!("{} * ", rat_str(r)),
        Factor::Lookup(name) => rhs = format!("{name} * "),
    }
    let joiner = match algebra.map {
        MapOp::Mul => " * ",
        MapOp::Add => " + ",
    };
    for (n, t) in s.terms.iter().enumerate() {
        if n > 0 {
            rhs.push_str(joiner);
        }
        rhs.push_str(&t.to_string());
    }
    format!("{} {} {}", target, algebra.reduce_spelling(), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::IndexVar;

    fn v(s: &str) -> IndexVar {
        IndexVar::new(s)
    }

    fn acc(t: &str, ix: &[&str]) -> TensorAccess {
        TensorAccess::new(t, ix.iter().map(|s| IndexVar::new(*s)).collect())
    }

    #[test]
    fn guard_display_and_eval() {
        let g = Guard::from_conj(vec![atom(&v("i"), CmpOp::Eq, &v("k")), atom(&v("k"), CmpOp::Lt, &v("l"))])
            .or(&Guard::from_conj(vec![
                atom(&v("i"), CmpOp::Lt, &v("k")),
                atom(&v("k"), CmpOp::Eq, &v("l")),
            ]));
        assert_eq!(g.to_string(), "(i == k && k < l) || (i < k && k == l)");
        let env = |vals: [usize; 3]| move |x: &IndexVar| match x.name() {
            "i" => vals[0],
            "k" => vals[1],
            _ => vals[2],
        };
        assert!(g.eval(&env([2, 2, 5])));
        assert!(g.eval(&env([1, 3, 3])));
        assert!(!g.eval(&env([1, 2, 3])));
        assert!(!g.eval(&env([2, 2, 2])));
        assert!(Guard::always().eval(&env([0, 0, 0])));
    }

    #[test]
    fn simplify_folds_strict_and_equal_into_le() {
        let g = Guard::from_conj(vec![atom(&v("i"), CmpOp::Lt, &v("j"))])
            .or(&Guard::from_conj(vec![atom(&v("i"), CmpOp::Eq, &v("j"))]));
        assert_eq!(g.simplified().to_string(), "i <= j");

        let chain = Guard::from_conj(vec![
            atom(&v("i"), CmpOp::Lt, &v("k")),
            atom(&v("k"), CmpOp::Lt, &v("l")),
        ])
        .or(&Guard::from_conj(vec![
            atom(&v("i"), CmpOp::Lt, &v("k")),
            atom(&v("k"), CmpOp::Eq, &v("l")),
        ]));
        assert_eq!(chain.simplified().to_string(), "i < k && k <= l");

        let two_apart = Guard::from_conj(vec![
            atom(&v("i"), CmpOp::Eq, &v("k")),
            atom(&v("k"), CmpOp::Lt, &v("l")),
        ])
        .or(&Guard::from_conj(vec![
            atom(&v("i"), CmpOp::Lt, &v("k")),
            atom(&v("k"), CmpOp::Eq, &v("l")),
        ]));
        assert_eq!(two_apart.simplified(), two_apart);
    }

    #[test]
    fn statements_render_with_factors_and_binds() {
        let nest = LoopNest {
            loops: vec![v("i"), v("k"), v("l"), v("j")],
            chain: vec![v("i"), v("k"), v("l")],
            blocks: Vec::new(),
            workspaces: vec![WorkspaceDecl { id: 0, name: "t0".into(), depth: 0, target: acc("y", &["i"]) }],
        };
        let alg = OperatorAlgebra::plus_times();
        let mut s = Stmt::new(acc("C", &["i", "j"]), vec![
            Term::Bound("A_ikl".into()),
            Term::Access(acc("B", &["k", "j"])),
        ]);
        s.factor = Factor::Const(Rat::new(2, 1));
        assert_eq!(stmt_str(&s, &nest, &alg), "C[i, j] += 2 * A_ikl * B[k, j]");
        s.factor = Factor::Const(Rat::new(1, 3));
        assert_eq!(stmt_str(&s, &nest, &alg), "C[i, j] += 1/3 * A_ikl * B[k, j]");
        s.factor = Factor::one();
        s.target = Target::Workspace(0);
        assert_eq!(stmt_str(&s, &nest, &alg), "t0 += A_ikl * B[k, j]");
    }

    #[test]
    fn resolving_inlines_bound_terms() {
        let block = Block {
            guard: Guard::always(),
            binds: vec![Bind { name: "A_ij".into(), access: acc("A", &["i", "j"]) }],
            lookup: None,
            stmts: vec![Stmt::new(acc("y", &["i"]), vec![
                Term::Bound("A_ij".into()),
                Term::Access(acc("x", &["j"])),
            ])],
        };
        let r = block.resolved_stmts();
        assert_eq!(r[0].terms[0], Term::Access(acc("A", &["i", "j"])));
    }
}
