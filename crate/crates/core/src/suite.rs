//! The bundled kernel descriptions.
//!
//! These are the kernels the benchmarks and acceptance checks exercise,
//! compiled into the library so every consumer sees the same text. `find`
//! looks one up by id; `parsed` returns its assignment ready to compile.

use crate::ast::EinsumAssignment;
use crate::parse::parse;

pub struct KernelSpec {
    pub id: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub fn kernels() -> &'static [KernelSpec] {
    &[
        KernelSpec {
            id: "ssymv",
            summary: "symmetric matrix times vector",
            text: include_str!("../kernels/ssymv.ein"),
        },
        KernelSpec {
            id: "bellman",
            summary: "tropical edge relaxation sweep",
            text: include_str!("../kernels/bellman.ein"),
        },
        KernelSpec {
            id: "syprd",
            summary: "quadratic form around a symmetric matrix",
            text: include_str!("../kernels/syprd.ein"),
        },
        KernelSpec {
            id: "ssyrk",
            summary: "rank-k update with a symmetric result",
            text: include_str!("../kernels/ssyrk.ein"),
        },
        KernelSpec {
            id: "ttm",
            summary: "symmetric 3-tensor times matrix",
            text: include_str!("../kernels/ttm.ein"),
        },
        KernelSpec {
            id: "mttkrp3",
            summary: "3-way Khatri-Rao contraction",
            text: include_str!("../kernels/mttkrp3.ein"),
        },
        KernelSpec {
            id: "mttkrp4",
            summary: "4-way Khatri-Rao contraction",
            text: include_str!("../kernels/mttkrp4.ein"),
        },
        KernelSpec {
            id: "mttkrp5",
            summary: "5-way Khatri-Rao contraction",
            text: include_str!("../kernels/mttkrp5.ein"),
        },
    ]
}

pub fn find(id: &str) -> Option<&'static KernelSpec> {
    kernels().iter().find(|k| k.id == id)
}

pub fn parsed(id: &str) -> EinsumAssignment {
    let spec = find(id).unwrap_or_else(|| panic!("no bundled kernel named {id}"));
    parse(spec.text).unwrap_or_else(|e| panic!("bundled kernel {id} must parse: {e}"))
}
