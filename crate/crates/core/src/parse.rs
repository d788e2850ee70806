//! Parser for the kernel description language.
//!
//! A kernel is a short text file:
//!
//! ```text
//! C[i, j] += A[i, k, l] * B[k, j] * B[l, j]
//! sym A: {1, 2, 3}
//! loop i, k, l, j
//! ```
//!
//! Grammar, one construct per line, `#` starts a comment:
//!
//! ```text
//! kernel  := line*
//! line    := assign | sym | loop | blank
//! assign  := access op term (joiner term)*
//! op      := "+=" | "min=" | "max=" | "="
//! joiner  := "*" | "+"            (uniform within one assignment)
//! term    := access
//! access  := NAME "[" [NAME ("," NAME)*] "]"
//! sym     := "sym" NAME ":" ("{" INT ("," INT)* "}")+
//! loop    := "loop" NAME ("," NAME)*
//! ```
//!
//! `+=` reduces with addition, `min=`/`max=` with min/max, and plain `=`
//! is the einsum convention for sum reduction. The `*` joiner multiplies
//! terms; with a `min=`/`max=` reduction the `+` joiner selects the
//! tropical map op instead. Axis positions in `sym` are 1-based; axes not
//! mentioned form singleton parts. A missing `loop` line defaults to the
//! output indices followed by the remaining indices in order of first
//! appearance.

use crate::ast::{
    AstError, EinsumAssignment, IndexVar, MapOp, OperatorAlgebra, ReduceOp, SymmetryPartition,
    TensorAccess,
};
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, col {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{0}")]
    Invalid(#[from] AstError),
}

pub fn parse(text: &str) -> Result<EinsumAssignment, ParseError> {
    let mut assignment: Option<(TensorAccess, OperatorAlgebra, Vec<TensorAccess>)> = None;
    let mut symmetries: Vec<(String, Vec<Vec<usize>>, usize, usize)> = Vec::new();
    let mut loop_order: Option<Vec<IndexVar>> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let mut lx = Lexer::new(raw, lineno + 1);
        if lx.at_end() {
            continue;
        }
        let word = lx.peek_word();
        match word.as_deref() {
            Some("sym") => {
                lx.expect_word("sym")?;
                let tensor = lx.name("tensor name")?;
                lx.expect(':')?;
                let mut parts = Vec::new();
                while !lx.at_end() {
                    lx.expect('{')?;
                    let mut part = Vec::new();
                    loop {
                        let (axis, col) = lx.integer()?;
                        if axis == 0 {
                            return Err(lx.fail_at(col, "symmetry axes are 1-based"));
                        }
                        part.push(axis - 1);
                        if !lx.eat(',') {
                            break;
                        }
                    }
                    lx.expect('}')?;
                    parts.push(part);
                }
                symmetries.push((tensor, parts, lx.line, 1));
            }
            Some("loop") => {
                if loop_order.is_some() {
                    return Err(lx.fail("duplicate loop line"));
                }
                lx.expect_word("loop")?;
                let mut order = vec![IndexVar::new(lx.name("index variable")?)];
                while lx.eat(',') {
                    order.push(IndexVar::new(lx.name("index variable")?));
                }
                lx.end_of_line()?;
                loop_order = Some(order);
            }
            _ => {
                if assignment.is_some() {
                    return Err(lx.fail("a kernel contains exactly one assignment"));
                }
                assignment = Some(parse_assignment(&mut lx)?);
            }
        }
    }

    let (output, algebra, operands) = assignment.ok_or(ParseError::Syntax {
        line: text.lines().count().max(1),
        col: 1,
        message: "kernel has no assignment".into(),
    })?;

    let loop_order = loop_order.unwrap_or_else(|| default_loop_order(&output, &operands));

    let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
    for acc in std::iter::once(&output).chain(operands.iter()) {
        arity.entry(acc.tensor.as_str()).or_insert(acc.order());
    }
    let mut partitions = BTreeMap::new();
    for (tensor, parts, line, col) in symmetries {
        let order = *arity.get(tensor.as_str()).ok_or_else(|| ParseError::Syntax {
            line,
            col,
            message: format!("symmetry declared for unknown tensor {tensor}"),
        })?;
        let partition = SymmetryPartition::new(order, parts)?;
        if partitions.insert(tensor.clone(), partition).is_some() {
            return Err(ParseError::Syntax {
                line,
                col,
                message: format!("duplicate symmetry declaration for {tensor}"),
            });
        }
    }

    let out = EinsumAssignment { output, algebra, operands, symmetries: partitions, loop_order };
    out.validate()?;
    Ok(out)
}

fn parse_assignment(
    lx: &mut Lexer,
) -> Result<(TensorAccess, OperatorAlgebra, Vec<TensorAccess>), ParseError> {
    let output = parse_access(lx)?;
    let reduce = lx.reduce_op()?;
    let mut operands = vec![parse_access(lx)?];
    let mut joiner: Option<char> = None;
    while !lx.at_end() {
        let col = lx.col();
        let j = if lx.eat('*') {
            '*'
        } else if lx.eat('+') {
            '+'
        } else {
            return Err(lx.fail("expected `*`, `+`, or end of line"));
        };
        match joiner {
            Some(prev) if prev != j => {
                return Err(lx.fail_at(col, "terms must be joined by one operator"))
            }
            _ => joiner = Some(j),
        }
        operands.push(parse_access(lx)?);
    }
    let map = match joiner {
        Some('+') => MapOp::Add,
        _ => MapOp::Mul,
    };
    let algebra = match (reduce, map) {
        (ReduceOp::Add, MapOp::Mul) => OperatorAlgebra::plus_times(),
        (ReduceOp::Min, MapOp::Add) => OperatorAlgebra::min_plus(),
        (ReduceOp::Max, MapOp::Add) => OperatorAlgebra::max_plus(),
        (ReduceOp::Min | ReduceOp::Max, MapOp::Mul) if operands.len() == 1 => OperatorAlgebra {
            reduce,
            map,
            idempotent_reduce: true,
            map_distributes_over_reduce: true,
            scalar_scaling: false,
        },
        _ => return Err(lx.fail("unsupported reduce/map operator combination")),
    };
    Ok((output, algebra, operands))
}

fn parse_access(lx: &mut Lexer) -> Result<TensorAccess, ParseError> {
    let tensor = lx.name("tensor name")?;
    lx.expect('[')?;
    let mut indices = Vec::new();
    if !lx.eat(']') {
        loop {
            indices.push(IndexVar::new(lx.name("index variable")?));
            if !lx.eat(',') {
                break;
            }
        }
        lx.expect(']')?;
    }
    Ok(TensorAccess::new(tensor, indices))
}

fn default_loop_order(output: &TensorAccess, operands: &[TensorAccess]) -> Vec<IndexVar> {
    let mut order: Vec<IndexVar> = Vec::new();
    for ix in output.indices.iter().chain(operands.iter().flat_map(|t| t.indices.iter())) {
        if !order.contains(ix) {
            order.push(ix.clone());
        }
    }
    order
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0, line }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && (self.bytes[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
            self.pos = self.bytes.len();
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.bytes.len()
    }

    fn col(&mut self) -> usize {
        self.skip_ws();
        self.pos + 1
    }

    fn peek_word(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.bytes.len() && is_name_byte(self.bytes[end], end > start) {
            end += 1;
        }
        (end > start).then(|| self.src[start..end].to_string())
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.bytes.len() && is_name_byte(self.bytes[end], end > start) {
            end += 1;
        }
        if end == start {
            return Err(self.fail(&format!("expected {what}")));
        }
        self.pos = end;
        Ok(self.src[start..end].to_string())
    }

    fn integer(&mut self) -> Result<(usize, usize), ParseError> {
        self.skip_ws();
        let col = self.pos + 1;
        let start = self.pos;
        let mut end = start;
        while end < self.bytes.len() && self.bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end == start {
            return Err(self.fail("expected an axis number"));
        }
        self.pos = end;
        let value = self.src[start..end]
            .parse()
            .map_err(|_| self.fail_at(col, "axis number out of range"))?;
        Ok((value, col))
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.pos < self.bytes.len() && self.bytes[self.pos] == c as u8 {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.fail(&format!("expected `{c}`")))
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        let got = self.name("keyword")?;
        if got == word {
            Ok(())
        } else {
            Err(self.fail(&format!("expected `{word}`")))
        }
    }

    fn reduce_op(&mut self) -> Result<ReduceOp, ParseError> {
        self.skip_ws();
        for (spelling, op) in [
            ("+=", ReduceOp::Add),
            ("min=", ReduceOp::Min),
            ("max=", ReduceOp::Max),
            ("=", ReduceOp::Add),
        ] {
            if self.src[self.pos..].starts_with(spelling) {
                self.pos += spelling.len();
                return Ok(op);
            }
        }
        Err(self.fail("expected `+=`, `min=`, `max=`, or `=`"))
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.fail("unexpected trailing input"))
        }
    }

    fn fail(&mut self, message: &str) -> ParseError {
        self.skip_ws();
        self.fail_at(self.pos + 1, message)
    }

    fn fail_at(&self, col: usize, message: &str) -> ParseError {
        ParseError::Syntax { line: self.line, col, message: message.into() }
    }
}

fn is_name_byte(b: u8, continuation: bool) -> bool {
    b == b'_' || b.is_ascii_alphabetic() || (continuation && b.is_ascii_digit())
}
