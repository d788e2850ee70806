//! Level-composed sparse tensors. A format is a stack of per-axis levels
//! over a single leaf of values: dense levels index arithmetically, sparse
//! levels keep compressed positions over sorted coordinates. A matrix in
//! CSR is `[Dense(rows), Sparse, Element(fill)]`; the three-axis analogue
//! `[Dense, Sparse, Sparse, Element]` stores one tree path per nonzero.

use super::coo::CooBuffer;
use super::dense::DenseTensor;
use super::StoreError;
use crate::symmetry::Perm;

#[derive(Clone, Debug, PartialEq)]
pub enum LevelDesc<T> {
    Dense(usize),
    Sparse,
    Element(T),
}

/// All-dense format over `dims`.
pub fn dense_format<T>(dims: &[usize], fill: T) -> Vec<LevelDesc<T>> {
    let mut f: Vec<LevelDesc<T>> = dims.iter().map(|&d| LevelDesc::Dense(d)).collect();
    f.push(LevelDesc::Element(fill));
    f
}

/// Dense outer axis, compressed inner axes: CSR for matrices, CSF for
/// higher orders.
pub fn csf_format<T>(dims: &[usize], fill: T) -> Vec<LevelDesc<T>> {
    let mut f = Vec::with_capacity(dims.len() + 1);
    for axis in 0..dims.len() {
        f.push(if axis == 0 { LevelDesc::Dense(dims[axis]) } else { LevelDesc::Sparse });
    }
    f.push(LevelDesc::Element(fill));
    f
}

/// Every axis compressed.
pub fn sparse_format<T>(dims: &[usize], fill: T) -> Vec<LevelDesc<T>> {
    let mut f: Vec<LevelDesc<T>> = dims.iter().map(|_| LevelDesc::Sparse).collect();
    f.push(LevelDesc::Element(fill));
    f
}

#[derive(Clone, Debug, PartialEq)]
pub enum StoredLevel {
    Dense { extent: usize },
    Sparse { pos: Vec<usize>, crd: Vec<usize> },
}

impl StoredLevel {
    /// Children of position `parent` with coordinate >= `min`, as
    /// (coordinate, child position) pairs in increasing coordinate order.
    pub fn children_from(&self, parent: usize, min: usize) -> LevelChildren<'_> {
        match self {
            StoredLevel::Dense { extent } => LevelChildren::Dense {
                base: parent * extent,
                next: min,
                extent: *extent,
            },
            StoredLevel::Sparse { pos, crd } => {
                let seg = &crd[pos[parent]..pos[parent + 1]];
                let skip = seg.partition_point(|&c| c < min);
                LevelChildren::Sparse { offset: pos[parent] + skip, crd: &seg[skip..] }
            }
        }
    }

    pub fn children(&self, parent: usize) -> LevelChildren<'_> {
        self.children_from(parent, 0)
    }

    /// Child position for an exact coordinate, if stored.
    pub fn find(&self, parent: usize, coord: usize) -> Option<usize> {
        match self {
            StoredLevel::Dense { extent } => {
                (coord < *extent).then(|| parent * extent + coord)
            }
            StoredLevel::Sparse { pos, crd } => {
                let seg = &crd[pos[parent]..pos[parent + 1]];
                seg.binary_search(&coord).ok().map(|k| pos[parent] + k)
            }
        }
    }
}

pub enum LevelChildren<'a> {
    Dense { base: usize, next: usize, extent: usize },
    Sparse { offset: usize, crd: &'a [usize] },
}

impl Iterator for LevelChildren<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        match self {
            LevelChildren::Dense { base, next, extent } => {
                if *next >= *extent {
                    return None;
                }
                let c = *next;
                *next += 1;
                Some((c, *base + c))
            }
            LevelChildren::Sparse { offset, crd } => {
                let (&c, rest) = crd.split_first()?;
                let p = *offset;
                *offset += 1;
                *crd = rest;
                Some((c, p))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelTensor<T> {
    dims: Vec<usize>,
    levels: Vec<StoredLevel>,
    vals: Vec<T>,
    fill: T,
}

impl<T: Clone + PartialEq> LevelTensor<T> {
    /// Builds a tensor from finalized coordinates. Duplicate coordinates are
    /// combined with `combine`, so a min-plus kernel can keep the lightest
    /// parallel edge instead of summing.
    pub fn from_coo_with(
        buf: &CooBuffer<T>,
        format: &[LevelDesc<T>],
        combine: impl Fn(&T, &T) -> T,
    ) -> Result<Self, StoreError> {
        let dims = buf.dims().to_vec();
        let fill = check_format(format, &dims)?;
        let entries = buf.sorted_entries(combine);

        let mut levels = Vec::with_capacity(dims.len());
        let mut parent_count = 1usize;
        let mut parent_of = vec![0usize; entries.len()];
        for (axis, desc) in format[..dims.len()].iter().enumerate() {
            match desc {
                LevelDesc::Dense(extent) => {
                    for (p, (coords, _)) in parent_of.iter_mut().zip(&entries) {
                        *p = *p * extent + coords[axis];
                    }
                    parent_count *= extent;
                    levels.push(StoredLevel::Dense { extent: *extent });
                }
                LevelDesc::Sparse => {
                    let mut pos = vec![0usize; parent_count + 1];
                    let mut crd = Vec::new();
                    let mut last = None;
                    for (p, (coords, _)) in parent_of.iter_mut().zip(&entries) {
                        let key = (*p, coords[axis]);
                        if last != Some(key) {
                            crd.push(key.1);
                            pos[key.0 + 1] += 1;
                            last = Some(key);
                        }
                        *p = crd.len() - 1;
                    }
                    for q in 1..=parent_count {
                        pos[q] += pos[q - 1];
                    }
                    parent_count = crd.len();
                    levels.push(StoredLevel::Sparse { pos, crd });
                }
                LevelDesc::Element(_) => unreachable!("checked by check_format"),
            }
        }

        let mut vals = vec![fill.clone(); parent_count];
        for (p, (_, v)) in parent_of.iter().zip(entries) {
            vals[*p] = v;
        }
        Ok(LevelTensor { dims, levels, vals, fill })
    }

    pub fn from_coo(buf: &CooBuffer<T>, format: &[LevelDesc<T>]) -> Result<Self, StoreError>
    where
        T: std::ops::Add<Output = T>,
    {
        Self::from_coo_with(buf, format, |a, b| a.clone() + b.clone())
    }

    pub fn from_dense(t: &DenseTensor<T>, format: &[LevelDesc<T>]) -> Result<Self, StoreError> {
        let fill = check_format(format, t.dims())?;
        Self::from_coo_with(&CooBuffer::from_dense(t, &fill), format, |a, _| a.clone())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn fill(&self) -> &T {
        &self.fill
    }

    pub fn level(&self, axis: usize) -> &StoredLevel {
        &self.levels[axis]
    }

    /// Count of explicitly stored values, fills under dense levels included.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn value_at(&self, leaf_pos: usize) -> &T {
        &self.vals[leaf_pos]
    }

    pub fn get(&self, coords: &[usize]) -> &T {
        debug_assert_eq!(coords.len(), self.dims.len());
        let mut pos = 0usize;
        for (level, &c) in self.levels.iter().zip(coords) {
            match level.find(pos, c) {
                Some(child) => pos = child,
                None => return &self.fill,
            }
        }
        &self.vals[pos]
    }

    /// Stored (coordinate, value) pairs in lexicographic storage order.
    pub fn stored(&self) -> Vec<(Vec<usize>, &T)> {
        let mut out = Vec::with_capacity(self.vals.len());
        if self.dims.iter().any(|&d| d == 0) {
            return out;
        }
        let mut prefix = Vec::with_capacity(self.dims.len());
        self.walk(0, 0, &mut prefix, &mut out);
        out
    }

    fn walk<'a>(
        &'a self,
        axis: usize,
        pos: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, &'a T)>,
    ) {
        if axis == self.dims.len() {
            out.push((prefix.clone(), &self.vals[pos]));
            return;
        }
        for (c, child) in self.levels[axis].children(pos) {
            prefix.push(c);
            self.walk(axis + 1, child, prefix, out);
            prefix.pop();
        }
    }

    pub fn to_dense(&self) -> DenseTensor<T> {
        let mut t = DenseTensor::filled(self.dims.clone(), self.fill.clone());
        for (coords, v) in self.stored() {
            t.set(&coords, v.clone());
        }
        t
    }

    fn format(&self) -> Vec<LevelDesc<T>> {
        let mut f: Vec<LevelDesc<T>> = self
            .levels
            .iter()
            .map(|l| match l {
                StoredLevel::Dense { extent } => LevelDesc::Dense(*extent),
                StoredLevel::Sparse { .. } => LevelDesc::Sparse,
            })
            .collect();
        f.push(LevelDesc::Element(self.fill.clone()));
        f
    }

    /// Tensor whose axis `m` reads this tensor's axis `perm(m)`, stored in
    /// the same per-axis level kinds rearranged to match.
    pub fn transposed(&self, perm: &Perm) -> Self {
        assert_eq!(perm.len(), self.dims.len());
        let dims: Vec<usize> = (0..self.dims.len()).map(|m| self.dims[perm.apply(m)]).collect();
        let own = self.format();
        let mut format: Vec<LevelDesc<T>> =
            (0..self.dims.len()).map(|m| own[perm.apply(m)].clone()).collect();
        format.push(LevelDesc::Element(self.fill.clone()));

        let mut buf = CooBuffer::new(dims);
        for (coords, v) in self.stored() {
            let moved: Vec<usize> =
                (0..coords.len()).map(|m| coords[perm.apply(m)]).collect();
            buf.push(moved, v.clone()).expect("transposed coordinate in range");
        }
        Self::from_coo_with(&buf, &format, |a, _| a.clone()).expect("format checked")
    }

    /// Splits stored coordinates by whether any two axes within one of the
    /// given parts carry equal indices. The pair reconstructs the original:
    /// every stored coordinate lands in exactly one side.
    pub fn split_diagonal(&self, parts: &[Vec<usize>]) -> (Self, Self) {
        let format = self.format();
        let mut strict = CooBuffer::new(self.dims.clone());
        let mut diag = CooBuffer::new(self.dims.clone());
        for (coords, v) in self.stored() {
            if *v == self.fill {
                continue;
            }
            let repeated = parts.iter().any(|part| {
                part.iter().enumerate().any(|(n, &a)| {
                    part.iter().skip(n + 1).any(|&b| coords[a] == coords[b])
                })
            });
            let side = if repeated { &mut diag } else { &mut strict };
            side.push(coords, v.clone()).expect("stored coordinate in range");
        }
        let build = |buf: &CooBuffer<T>| {
            Self::from_coo_with(buf, &format, |a, _| a.clone()).expect("format checked")
        };
        (build(&strict), build(&diag))
    }

    /// Checks that stored values are invariant under permuting the axes of
    /// each part, the ingest-time guarantee symmetric kernels rely on.
    pub fn verify_symmetric(&self, parts: &[Vec<usize>]) -> Result<(), StoreError> {
        for (coords, v) in self.stored() {
            for part in parts {
                for perm in Perm::all(part.len()) {
                    let mut image = coords.clone();
                    for (m, &axis) in part.iter().enumerate() {
                        image[axis] = coords[part[perm.apply(m)]];
                    }
                    if self.get(&image) != v {
                        return Err(StoreError::Asymmetric { coords: coords.clone() });
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_format<T: Clone>(format: &[LevelDesc<T>], dims: &[usize]) -> Result<T, StoreError> {
    let bad = |msg: String| Err(StoreError::BadFormat(msg));
    if format.len() != dims.len() + 1 {
        return bad(format!("format has {} levels, tensor needs {}", format.len(), dims.len() + 1));
    }
    for (axis, desc) in format[..dims.len()].iter().enumerate() {
        match desc {
            LevelDesc::Dense(extent) if *extent != dims[axis] => {
                return bad(format!("dense level extent {extent} != dim {}", dims[axis]));
            }
            LevelDesc::Element(_) => return bad("element leaf before last level".into()),
            _ => {}
        }
    }
    match format.last() {
        Some(LevelDesc::Element(fill)) => Ok(fill.clone()),
        _ => bad("format must end in an element leaf".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries3() -> Vec<(Vec<usize>, f64)> {
        vec![
            (vec![1, 0, 2], 4.0),
            (vec![0, 1, 1], 2.0),
            (vec![1, 2, 0], 5.0),
            (vec![0, 0, 0], 1.0),
            (vec![1, 0, 0], 3.0),
        ]
    }

    #[test]
    fn empty_buffer_builds_an_all_fill_tensor() {
        let buf: CooBuffer<f64> = CooBuffer::new(vec![2, 3]);
        let t = LevelTensor::from_coo(&buf, &sparse_format(&[2, 3], 0.0)).unwrap();
        assert_eq!(t.nnz(), 0);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(*t.get(&[i, j]), 0.0);
            }
        }
        assert!(t.stored().is_empty());
    }

    #[test]
    fn csf_stores_one_path_per_nonzero() {
        let dims = vec![2, 3, 3];
        let buf = CooBuffer::from_entries(dims.clone(), entries3()).unwrap();
        let t = LevelTensor::from_coo(&buf, &csf_format(&dims, 0.0)).unwrap();
        assert_eq!(t.nnz(), 5);
        assert!(matches!(t.level(0), StoredLevel::Dense { extent: 2 }));
        assert!(matches!(t.level(1), StoredLevel::Sparse { .. }));
        assert!(matches!(t.level(2), StoredLevel::Sparse { .. }));

        let mut expect = entries3();
        expect.sort_by(|a, b| a.0.cmp(&b.0));
        let got: Vec<(Vec<usize>, f64)> =
            t.stored().into_iter().map(|(c, v)| (c, *v)).collect();
        assert_eq!(got, expect);
        assert_eq!(*t.get(&[1, 2, 0]), 5.0);
        assert_eq!(*t.get(&[1, 2, 1]), 0.0);
    }

    #[test]
    fn formats_agree_on_every_coordinate() {
        let dims = vec![2, 3, 3];
        let buf = CooBuffer::from_entries(dims.clone(), entries3()).unwrap();
        let a = LevelTensor::from_coo(&buf, &dense_format(&dims, 0.0)).unwrap();
        let b = LevelTensor::from_coo(&buf, &csf_format(&dims, 0.0)).unwrap();
        let c = LevelTensor::from_coo(&buf, &sparse_format(&dims, 0.0)).unwrap();
        assert_eq!(a.nnz(), 18);
        for coords in super::super::dense::CoordIter::new(dims) {
            assert_eq!(a.get(&coords), b.get(&coords));
            assert_eq!(b.get(&coords), c.get(&coords));
        }
        assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn duplicates_combine_with_the_given_op() {
        let mut buf = CooBuffer::new(vec![2, 2]);
        buf.push(vec![0, 1], 2.0).unwrap();
        buf.push(vec![0, 1], 3.0).unwrap();
        let fmt = sparse_format(&[2, 2], 0.0);
        let summed = LevelTensor::from_coo(&buf, &fmt).unwrap();
        assert_eq!(*summed.get(&[0, 1]), 5.0);
        let lightest =
            LevelTensor::from_coo_with(&buf, &fmt, |a, b| if a < b { *a } else { *b }).unwrap();
        assert_eq!(*lightest.get(&[0, 1]), 2.0);
    }

    #[test]
    fn transpose_matches_the_dense_oracle() {
        let dims = vec![2, 3, 3];
        let buf = CooBuffer::from_entries(dims.clone(), entries3()).unwrap();
        let t = LevelTensor::from_coo(&buf, &csf_format(&dims, 0.0)).unwrap();

        let ident = Perm::identity(3);
        assert_eq!(t.transposed(&ident).to_dense(), t.to_dense());

        let rot = Perm::from_one_based(&[3, 1, 2]).unwrap();
        let moved = t.transposed(&rot);
        assert_eq!(moved.to_dense(), t.to_dense().permuted(&rot));
        assert_eq!(moved.transposed(&rot.inverse()).to_dense(), t.to_dense());
    }

    #[test]
    fn diagonal_split_partitions_stored_coordinates() {
        let dims = vec![3, 3];
        let part = vec![vec![0usize, 1]];
        let diag_only = CooBuffer::from_entries(
            dims.clone(),
            vec![(vec![0, 0], 1.0), (vec![2, 2], 2.0)],
        )
        .unwrap();
        let t = LevelTensor::from_coo(&diag_only, &csf_format(&dims, 0.0)).unwrap();
        let (strict, diag) = t.split_diagonal(&part);
        assert_eq!(strict.nnz(), 0);
        assert_eq!(diag.to_dense(), t.to_dense());

        let hollow = CooBuffer::from_entries(
            dims.clone(),
            vec![(vec![0, 1], 1.0), (vec![1, 0], 1.0), (vec![2, 0], 4.0), (vec![0, 2], 4.0)],
        )
        .unwrap();
        let h = LevelTensor::from_coo(&hollow, &csf_format(&dims, 0.0)).unwrap();
        let (strict, diag) = h.split_diagonal(&part);
        assert_eq!(diag.nnz(), 0);
        assert_eq!(strict.to_dense(), h.to_dense());

        let mixed = CooBuffer::from_entries(
            dims.clone(),
            vec![(vec![0, 1], 1.0), (vec![1, 1], 2.0), (vec![2, 1], 3.0)],
        )
        .unwrap();
        let m = LevelTensor::from_coo(&mixed, &csf_format(&dims, 0.0)).unwrap();
        let (strict, diag) = m.split_diagonal(&part);
        assert_eq!(strict.nnz() + diag.nnz(), m.nnz());
        for coords in super::super::dense::CoordIter::new(dims) {
            let rebuilt = *strict.get(&coords) + *diag.get(&coords);
            assert_eq!(rebuilt, *m.get(&coords));
        }
    }

    #[test]
    fn symmetry_verification_catches_a_broken_entry() {
        let dims = vec![3, 3];
        let good = CooBuffer::from_entries(
            dims.clone(),
            vec![(vec![0, 1], 5.0), (vec![1, 0], 5.0), (vec![2, 2], 1.0)],
        )
        .unwrap();
        let fmt = csf_format(&dims, 0.0);
        let part = vec![vec![0usize, 1]];
        LevelTensor::from_coo(&good, &fmt).unwrap().verify_symmetric(&part).unwrap();

        let bad = CooBuffer::from_entries(
            dims.clone(),
            vec![(vec![0, 1], 5.0), (vec![1, 0], 6.0)],
        )
        .unwrap();
        let err = LevelTensor::from_coo(&bad, &fmt).unwrap().verify_symmetric(&part);
        assert!(matches!(err, Err(StoreError::Asymmetric { .. })));
    }

    #[test]
    fn malformed_formats_are_rejected() {
        let buf: CooBuffer<f64> = CooBuffer::new(vec![2, 2]);
        let short = vec![LevelDesc::Sparse, LevelDesc::Element(0.0)];
        assert!(LevelTensor::from_coo(&buf, &short).is_err());
        let wrong_extent =
            vec![LevelDesc::Dense(3), LevelDesc::Sparse, LevelDesc::Element(0.0)];
        assert!(LevelTensor::from_coo(&buf, &wrong_extent).is_err());
        let no_leaf: Vec<LevelDesc<f64>> =
            vec![LevelDesc::Sparse, LevelDesc::Sparse, LevelDesc::Sparse];
        assert!(LevelTensor::from_coo(&buf, &no_leaf).is_err());
        let leaf_early =
            vec![LevelDesc::Element(0.0), LevelDesc::Sparse, LevelDesc::Element(0.0)];
        assert!(LevelTensor::from_coo(&buf, &leaf_early).is_err());
    }
}
