//! Compiler and interpreter for symmetry-exploiting sparse tensor kernels.
//!
//! A kernel is a single einsum-style assignment over tensors whose entries
//! are invariant under permutations of declared axis groups. Storing only a
//! canonical triangle of such a tensor and restoring the missing work by
//! code transformation, rather than by materializing the full tensor, cuts
//! both memory traffic and arithmetic. This crate parses kernel
//! descriptions, derives the symmetric loop structure, runs a pipeline of
//! cleanup passes over it, and interprets the result against dense or
//! compressed sparse operands, counting the work as it goes.

pub mod ast;
pub mod exec;
pub mod ir;
pub mod parse;
pub mod passes;
pub mod suite;
pub mod symmetrize;
pub mod symmetry;
pub mod tensor;
pub mod scalar;

pub use scalar::{Rat, Value};

/// Dense tensor at the float precision the tools run at.
pub type DenseF64 = tensor::DenseTensor<f64>;
/// Compressed sparse tensor at the same precision.
pub type LevelF64 = tensor::LevelTensor<f64>;
/// Dense tensor over machine integers, for exact runs.
pub type DenseI64 = tensor::DenseTensor<i64>;
/// Compressed sparse tensor over machine integers.
pub type LevelI64 = tensor::LevelTensor<i64>;

use ast::EinsumAssignment;
use ir::CompiledKernel;

/// Lowers an assignment to its symmetry-exploiting form and runs the
/// default pass pipeline over it.
pub fn compile(a: &EinsumAssignment) -> CompiledKernel {
    let mut kernel = symmetrize::symmetrize(a);
    passes::optimize(&mut kernel);
    kernel
}

/// Lowers an assignment ignoring its symmetry declarations: one unguarded
/// block over the full iteration space, accesses still made concordant so
/// the comparison against the symmetric form is fair.
pub fn compile_naive(a: &EinsumAssignment) -> CompiledKernel {
    let mut kernel = symmetrize::symmetrize_with_chain(a, Vec::new());
    passes::concordant_order(&mut kernel);
    kernel
}

/// Lowers an assignment and runs an explicit pass list instead of the
/// default pipeline.
pub fn compile_with(
    a: &EinsumAssignment,
    pass_names: &[&str],
) -> Result<CompiledKernel, passes::UnknownPass> {
    let mut kernel = symmetrize::symmetrize(a);
    passes::apply(&mut kernel, pass_names)?;
    Ok(kernel)
}
