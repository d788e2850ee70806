//! Tensor storage: dense buffers and compressed sparse level trees, plus
//! readers and generators for test and benchmark data.

mod coo;
mod dense;
mod gen;
mod io;
mod level;

pub use coo::{symmetrize_matrix, CooBuffer};
pub use dense::{CoordIter, DenseTensor};
pub use gen::{gen_dense_uniform, gen_er_general, gen_er_symmetric, simplex_count};
pub use io::{parse_matrix_market, parse_tns, read_matrix_market, read_tns};
pub use level::{
    csf_format, dense_format, sparse_format, LevelChildren, LevelDesc, LevelTensor, StoredLevel,
};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("entry count {actual} does not match declared {header}")]
    CountMismatch { header: usize, actual: usize },
    #[error("coordinate {coords:?} outside dims {dims:?}")]
    OutOfRange { coords: Vec<usize>, dims: Vec<usize> },
    #[error("bad level format: {0}")]
    BadFormat(String),
    #[error("matrix with dims {dims:?} is not square")]
    NotSquare { dims: Vec<usize> },
    #[error("value at {coords:?} differs from a symmetric image")]
    Asymmetric { coords: Vec<usize> },
}
