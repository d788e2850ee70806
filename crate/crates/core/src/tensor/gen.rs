//! Seeded random tensors for tests and benchmarks. Symmetric inputs are
//! drawn per canonical coordinate (an Erdős–Rényi inclusion coin for each
//! nondecreasing tuple) and the kept orbits are expanded to every
//! permutation, so the result is symmetric by construction. Values are
//! small integers, which keeps float and integer runs exactly comparable.

use super::coo::CooBuffer;
use super::dense::DenseTensor;
use crate::scalar::Value;
use crate::symmetry::Perm;
use num_integer::binomial;
use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use std::collections::BTreeSet;

/// Above this many candidate coordinates the generators switch from one
/// inclusion coin per coordinate to drawing the kept count and unranking.
const COIN_LIMIT: u64 = 1 << 24;

pub fn gen_er_symmetric<T: Value>(order: usize, dim: usize, p: f64, seed: u64) -> CooBuffer<T> {
    assert!(order >= 1 && dim >= 1, "degenerate tensor shape");
    assert!((0.0..=1.0).contains(&p), "inclusion probability out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = simplex_count(dim as u64, order);
    let mut buf = CooBuffer::new(vec![dim; order]);
    let perms = Perm::all(order);

    let keep = |coords: &[usize], rng: &mut ChaCha8Rng, buf: &mut CooBuffer<T>| {
        let v = T::from_int(rng.gen_range(1..=9));
        let orbit: BTreeSet<Vec<usize>> = perms
            .iter()
            .map(|perm| (0..order).map(|m| coords[perm.apply(m)]).collect())
            .collect();
        for image in orbit {
            buf.push(image, v.clone()).expect("orbit coordinate in range");
        }
    };

    if count <= COIN_LIMIT {
        let coin = Bernoulli::new(p).expect("probability checked");
        let mut coords = vec![0usize; order];
        loop {
            if coin.sample(&mut rng) {
                keep(&coords, &mut rng, &mut buf);
            }
            if !next_nondecreasing(&mut coords, dim) {
                break;
            }
        }
    } else {
        let wanted = Binomial::new(count, p).expect("probability checked").sample(&mut rng);
        let mut ranks = BTreeSet::new();
        while (ranks.len() as u64) < wanted {
            ranks.insert(rng.gen_range(0..count));
        }
        for rank in ranks {
            keep(&unrank_nondecreasing(rank, dim, order), &mut rng, &mut buf);
        }
    }
    buf
}

/// Unsymmetric counterpart: every coordinate of the box is its own
/// candidate.
pub fn gen_er_general<T: Value>(dims: &[usize], p: f64, seed: u64) -> CooBuffer<T> {
    assert!((0.0..=1.0).contains(&p), "inclusion probability out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = dims.iter().map(|&d| d as u64).product::<u64>();
    let mut buf = CooBuffer::new(dims.to_vec());

    if count <= COIN_LIMIT {
        let coin = Bernoulli::new(p).expect("probability checked");
        for coords in super::dense::CoordIter::new(dims.to_vec()) {
            if coin.sample(&mut rng) {
                let v = T::from_int(rng.gen_range(1..=9));
                buf.push(coords, v).expect("iterated coordinate in range");
            }
        }
    } else {
        let wanted = Binomial::new(count, p).expect("probability checked").sample(&mut rng);
        let mut offsets = BTreeSet::new();
        while (offsets.len() as u64) < wanted {
            offsets.insert(rng.gen_range(0..count));
        }
        for offset in offsets {
            let mut rest = offset;
            let mut coords = vec![0usize; dims.len()];
            for (c, &d) in coords.iter_mut().zip(dims).rev() {
                *c = (rest % d as u64) as usize;
                rest /= d as u64;
            }
            let v = T::from_int(rng.gen_range(1..=9));
            buf.push(coords, v).expect("decoded coordinate in range");
        }
    }
    buf
}

/// Fully populated box of small random integers, for the dense operands a
/// kernel reads alongside its sparse driver.
pub fn gen_dense_uniform<T: Value>(dims: &[usize], seed: u64) -> DenseTensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(dims.to_vec(), |_| T::from_int(rng.gen_range(1..=9)))
}

/// Number of nondecreasing `order`-tuples over `0..dim`.
pub fn simplex_count(dim: u64, order: usize) -> u64 {
    binomial(dim + order as u64 - 1, order as u64)
}

/// Advances to the next nondecreasing tuple in lexicographic order.
fn next_nondecreasing(coords: &mut [usize], dim: usize) -> bool {
    for a in (0..coords.len()).rev() {
        if coords[a] + 1 < dim {
            let v = coords[a] + 1;
            for c in &mut coords[a..] {
                *c = v;
            }
            return true;
        }
    }
    false
}

/// The `rank`-th nondecreasing tuple in the same lexicographic order.
fn unrank_nondecreasing(rank: u64, dim: usize, order: usize) -> Vec<usize> {
    let mut rest = rank;
    let mut floor = 0usize;
    let mut coords = Vec::with_capacity(order);
    for m in 0..order {
        let remaining = order - m - 1;
        for v in floor..dim {
            let block = simplex_count((dim - v) as u64, remaining);
            if rest < block {
                coords.push(v);
                floor = v;
                break;
            }
            rest -= block;
        }
    }
    debug_assert_eq!(coords.len(), order);
    coords
}


#[cfg(test)]
mod er_tests {
    use super::super::{csf_format, LevelTensor};
    use super::*;
    use crate::symmetry::is_canonical;
    use crate::ast::SymmetryPartition;
    use std::collections::BTreeMap;

    #[test]
    fn edge_probabilities_zero_and_one() {
        let none: CooBuffer<i64> = gen_er_symmetric(3, 5, 0.0, 11);
        assert!(none.is_empty());

        let all: CooBuffer<i64> = gen_er_symmetric(2, 3, 1.0, 11);
        assert_eq!(all.len(), 9);
        let t = LevelTensor::from_coo_with(&all, &csf_format(&[3, 3], 0), |a, _| *a).unwrap();
        t.verify_symmetric(&[vec![0, 1]]).unwrap();
    }

    fn orbit_groups(buf: &CooBuffer<i64>) -> BTreeMap<Vec<usize>, Vec<(Vec<usize>, i64)>> {
        let mut groups: BTreeMap<Vec<usize>, Vec<(Vec<usize>, i64)>> = BTreeMap::new();
        for (coords, v) in buf.entries() {
            let mut key = coords.clone();
            key.sort_unstable();
            groups.entry(key).or_default().push((coords.clone(), *v));
        }
        groups
    }

    #[test]
    fn kept_orbits_are_expanded_with_equal_values() {
        for seed in [0, 1, 2, 3, 4] {
            let buf: CooBuffer<i64> = gen_er_symmetric(3, 6, 0.3, seed);
            for (key, members) in orbit_groups(&buf) {
                let perms = Perm::all(3);
                let orbit: BTreeSet<Vec<usize>> = perms
                    .iter()
                    .map(|perm| (0..3).map(|m| key[perm.apply(m)]).collect())
                    .collect();
                let coords: BTreeSet<Vec<usize>> =
                    members.iter().map(|(c, _)| c.clone()).collect();
                assert_eq!(coords, orbit, "orbit of {key:?} incomplete");
                assert!(members.iter().all(|(_, v)| *v == members[0].1));
            }
        }
    }

    #[test]
    fn same_seed_same_tensor() {
        let a: CooBuffer<i64> = gen_er_symmetric(4, 7, 0.2, 99);
        let b: CooBuffer<i64> = gen_er_symmetric(4, 7, 0.2, 99);
        assert_eq!(a, b);
        let c: CooBuffer<i64> = gen_er_symmetric(4, 7, 0.2, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn canonical_fraction_approaches_one_over_factorial() {
        let buf: CooBuffer<i64> = gen_er_symmetric(3, 60, 0.02, 5);
        let part = SymmetryPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let canonical =
            buf.entries().iter().filter(|(c, _)| is_canonical(c, &part)).count() as f64;
        let fraction = canonical / buf.len() as f64;
        assert!(fraction >= 1.0 / 6.0 && fraction < 0.19, "fraction {fraction}");
    }

    #[test]
    fn rank_sampling_path_matches_the_symmetric_contract() {
        let dim = 1000;
        assert!(simplex_count(dim as u64, 3) > COIN_LIMIT);
        let a: CooBuffer<i64> = gen_er_symmetric(3, dim, 2e-6, 42);
        let b: CooBuffer<i64> = gen_er_symmetric(3, dim, 2e-6, 42);
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for (key, members) in orbit_groups(&a) {
            let distinct: BTreeSet<&Vec<usize>> = members.iter().map(|(c, _)| c).collect();
            let perms = Perm::all(3);
            let orbit: BTreeSet<Vec<usize>> = perms
                .iter()
                .map(|perm| (0..3).map(|m| key[perm.apply(m)]).collect())
                .collect();
            assert_eq!(distinct.len(), orbit.len());
        }
    }

    #[test]
    fn general_generator_covers_both_paths() {
        let small: CooBuffer<i64> = gen_er_general(&[4, 5], 1.0, 7);
        assert_eq!(small.len(), 20);
        let empty: CooBuffer<i64> = gen_er_general(&[4, 5], 0.0, 7);
        assert!(empty.is_empty());

        let dims = [4096, 4096, 2];
        assert!(dims.iter().map(|&d| d as u64).product::<u64>() > COIN_LIMIT);
        let big: CooBuffer<i64> = gen_er_general(&dims, 1e-6, 3);
        let again: CooBuffer<i64> = gen_er_general(&dims, 1e-6, 3);
        assert_eq!(big, again);
        for (coords, _) in big.entries() {
            assert!(coords.iter().zip(&dims).all(|(c, d)| c < d));
        }
    }
}
