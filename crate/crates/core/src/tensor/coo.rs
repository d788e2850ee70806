//! Coordinate-list staging buffer. Readers and generators append entries
//! in any order; level tensors are built from the sorted, deduplicated
//! view.

use super::dense::DenseTensor;
use super::StoreError;

#[derive(Clone, Debug, PartialEq)]
pub struct CooBuffer<T> {
    dims: Vec<usize>,
    entries: Vec<(Vec<usize>, T)>,
}

impl<T: Clone> CooBuffer<T> {
    pub fn new(dims: Vec<usize>) -> Self {
        CooBuffer { dims, entries: Vec::new() }
    }

    pub fn from_entries(
        dims: Vec<usize>,
        entries: impl IntoIterator<Item = (Vec<usize>, T)>,
    ) -> Result<Self, StoreError> {
        let mut buf = CooBuffer::new(dims);
        for (coords, v) in entries {
            buf.push(coords, v)?;
        }
        Ok(buf)
    }

    /// Every coordinate of `t` that differs from `skip`.
    pub fn from_dense(t: &DenseTensor<T>, skip: &T) -> Self
    where
        T: PartialEq,
    {
        let mut buf = CooBuffer::new(t.dims().to_vec());
        for coords in t.iter_coords() {
            let v = t.get(&coords);
            if v != skip {
                buf.entries.push((coords, v.clone()));
            }
        }
        buf
    }

    pub fn push(&mut self, coords: Vec<usize>, value: T) -> Result<(), StoreError> {
        if coords.len() != self.dims.len()
            || coords.iter().zip(&self.dims).any(|(c, d)| c >= d)
        {
            return Err(StoreError::OutOfRange { coords, dims: self.dims.clone() });
        }
        self.entries.push((coords, value));
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vec<usize>, T)] {
        &self.entries
    }

    /// Lexicographically sorted entries with duplicate coordinates combined.
    pub fn sorted_entries(&self, combine: impl Fn(&T, &T) -> T) -> Vec<(Vec<usize>, T)> {
        let mut sorted: Vec<&(Vec<usize>, T)> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Vec<usize>, T)> = Vec::with_capacity(sorted.len());
        for (coords, v) in sorted {
            match out.last_mut() {
                Some((prev, acc)) if prev == coords => *acc = combine(acc, v),
                _ => out.push((coords.clone(), v.clone())),
            }
        }
        out
    }
}

/// Sum of a square matrix and its transpose, the usual way an unsymmetric
/// benchmark matrix is turned into a symmetric one. Diagonal entries double.
pub fn symmetrize_matrix<T>(buf: &CooBuffer<T>) -> Result<CooBuffer<T>, StoreError>
where
    T: Clone + std::ops::Add<Output = T>,
{
    let [rows, cols] = buf.dims() else {
        return Err(StoreError::NotSquare { dims: buf.dims().to_vec() });
    };
    if rows != cols {
        return Err(StoreError::NotSquare { dims: buf.dims().to_vec() });
    }
    let mut out = CooBuffer::new(buf.dims().to_vec());
    for (coords, v) in buf.entries() {
        out.push(coords.clone(), v.clone())?;
        out.push(vec![coords[1], coords[0]], v.clone())?;
    }
    let entries = out.sorted_entries(|a, b| a.clone() + b.clone());
    CooBuffer::from_entries(buf.dims().to_vec(), entries)
}
