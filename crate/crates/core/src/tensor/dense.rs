//! Row-major dense tensors. Axis 0 is outermost: the last coordinate
//! varies fastest in memory.

use crate::symmetry::Perm;

#[derive(Clone, PartialEq, Debug)]
pub struct DenseTensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Clone> DenseTensor<T> {
    pub fn filled(dims: Vec<usize>, fill: T) -> Self {
        let len = dims.iter().product();
        DenseTensor { dims, data: vec![fill; len] }
    }

    pub fn from_vec(dims: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(data.len(), dims.iter().product::<usize>(), "data length must match dims");
        DenseTensor { dims, data }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for coords in CoordIter::new(dims.clone()) {
            data.push(f(&coords));
        }
        DenseTensor { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn offset(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut off = 0;
        for (c, d) in coords.iter().zip(&self.dims) {
            debug_assert!(c < d);
            off = off * d + c;
        }
        off
    }

    #[inline]
    pub fn get(&self, coords: &[usize]) -> &T {
        &self.data[self.offset(coords)]
    }

    #[inline]
    pub fn at(&self, offset: usize) -> &T {
        &self.data[offset]
    }

    #[inline]
    pub fn at_mut(&mut self, offset: usize) -> &mut T {
        &mut self.data[offset]
    }

    pub fn set(&mut self, coords: &[usize], value: T) {
        let off = self.offset(coords);
        self.data[off] = value;
    }

    pub fn iter_coords(&self) -> CoordIter {
        CoordIter::new(self.dims.clone())
    }

    /// View with axis m reading this tensor's axis `perm(m)`.
    pub fn permuted(&self, perm: &Perm) -> Self {
        assert_eq!(perm.len(), self.dims.len());
        let dims: Vec<usize> = (0..self.dims.len()).map(|m| self.dims[perm.apply(m)]).collect();
        let mut base = vec![0usize; self.dims.len()];
        DenseTensor::from_fn(dims, |coords| {
            for (m, &c) in coords.iter().enumerate() {
                base[perm.apply(m)] = c;
            }
            self.get(&base).clone()
        })
    }
}

/// Odometer over all coordinates of a dims box, last axis fastest.
pub struct CoordIter {
    dims: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl CoordIter {
    pub fn new(dims: Vec<usize>) -> Self {
        let next = if dims.iter().any(|&d| d == 0) { None } else { Some(vec![0; dims.len()]) };
        CoordIter { dims, next }
    }
}

impl Iterator for CoordIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut bumped = current.clone();
        let mut axis = self.dims.len();
        loop {
            if axis == 0 {
                self.next = None;
                break;
            }
            axis -= 1;
            bumped[axis] += 1;
            if bumped[axis] < self.dims[axis] {
                self.next = Some(bumped);
                break;
            }
            bumped[axis] = 0;
        }
        Some(current)
    }
}
