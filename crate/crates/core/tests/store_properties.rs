//! Randomized storage checks: any format over the same dims answers every
//! coordinate identically, building from coordinates loses nothing, and the
//! structural transforms (transpose, diagonal split) agree with brute-force
//! dense reference computations.

use proptest::prelude::*;
use symten::symmetry::Perm;
use symten::tensor::{
    csf_format, dense_format, sparse_format, CooBuffer, CoordIter, LevelTensor,
};
use std::collections::BTreeMap;

fn arb_case() -> impl Strategy<Value = (Vec<usize>, Vec<(Vec<usize>, i64)>)> {
    (1usize..=3)
        .prop_flat_map(|order| {
            (
                proptest::collection::vec(1usize..=4, order),
                proptest::collection::vec(
                    (proptest::collection::vec(0usize..16, order), -9i64..=9),
                    0..12,
                ),
            )
        })
        .prop_map(|(dims, raw)| {
            let entries = raw
                .into_iter()
                .map(|(coords, v)| {
                    let wrapped: Vec<usize> =
                        coords.iter().zip(&dims).map(|(c, d)| c % d).collect();
                    (wrapped, v)
                })
                .collect();
            (dims, entries)
        })
}

proptest! {
    #[test]
    fn building_from_coordinates_loses_nothing((dims, entries) in arb_case()) {
        let buf = CooBuffer::from_entries(dims.clone(), entries.clone()).unwrap();
        let t = LevelTensor::from_coo(&buf, &sparse_format(&dims, 0i64)).unwrap();

        let mut expect: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
        for (coords, v) in entries {
            *expect.entry(coords).or_insert(0) += v;
        }
        let got: BTreeMap<Vec<usize>, i64> =
            t.stored().into_iter().map(|(c, v)| (c, *v)).collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn all_formats_answer_alike((dims, entries) in arb_case()) {
        let buf = CooBuffer::from_entries(dims.clone(), entries).unwrap();
        let boxed = LevelTensor::from_coo(&buf, &dense_format(&dims, 0i64)).unwrap();
        let csf = LevelTensor::from_coo(&buf, &csf_format(&dims, 0i64)).unwrap();
        let compressed = LevelTensor::from_coo(&buf, &sparse_format(&dims, 0i64)).unwrap();
        for coords in CoordIter::new(dims) {
            prop_assert_eq!(boxed.get(&coords), csf.get(&coords));
            prop_assert_eq!(csf.get(&coords), compressed.get(&coords));
        }
    }

    #[test]
    fn diagonal_split_is_a_partition((dims, entries) in arb_case()) {
        prop_assume!(dims.len() >= 2);
        let buf = CooBuffer::from_entries(dims.clone(), entries).unwrap();
        let t = LevelTensor::from_coo(&buf, &sparse_format(&dims, 0i64)).unwrap();
        let parts = vec![(0..dims.len()).collect::<Vec<usize>>()];
        let (strict, diag) = t.split_diagonal(&parts);
        let kept = t.stored().iter().filter(|(_, v)| **v != 0).count();
        prop_assert_eq!(strict.nnz() + diag.nnz(), kept);
        for (coords, v) in strict.stored() {
            let mut sorted = coords.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), coords.len(), "repeat leaked into strict side");
            prop_assert_eq!(v, t.get(&coords));
        }
        for coords in CoordIter::new(dims) {
            prop_assert_eq!(*strict.get(&coords) + *diag.get(&coords), *t.get(&coords));
        }
    }

    #[test]
    fn transposing_twice_returns_home((dims, entries) in arb_case(), salt in 0usize..24) {
        let buf = CooBuffer::from_entries(dims.clone(), entries).unwrap();
        let t = LevelTensor::from_coo(&buf, &csf_format(&dims, 0i64)).unwrap();
        let perms = Perm::all(dims.len());
        let perm = &perms[salt % perms.len()];
        let moved = t.transposed(perm);
        prop_assert_eq!(moved.to_dense(), t.to_dense().permuted(perm));
        prop_assert_eq!(moved.transposed(&perm.inverse()).to_dense(), t.to_dense());
    }
}
