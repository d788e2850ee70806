//! Combinatorics behind symmetric iteration: permutations of the index
//! chain, compositions describing which chain entries coincide, and the
//! canonical-coordinate predicate for symmetric storage.
//!
//! When a kernel iterates a sorted chain p1 <= p2 <= ... <= pn of permutable
//! indices, each composition of n (a split of the chain into consecutive
//! runs) describes one equality pattern: indices within a run are equal,
//! runs are separated by strict inequality. Restoring the skipped iteration
//! space under a pattern takes one statement per coset of the run-wise
//! stabilizer in S_n, and `unique_relabelings` picks exactly one relabeling
//! per coset.

use crate::ast::SymmetryPartition;
use num_integer::binomial;
use std::fmt;

/// A permutation of {0, .., n-1}, stored as the image list.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n).collect())
    }

    /// Builds a permutation from 1-based images, checking bijectivity.
    pub fn from_one_based(images: &[usize]) -> Option<Self> {
        let n = images.len();
        let mut hit = vec![false; n];
        for &v in images {
            if v == 0 || v > n || hit[v - 1] {
                return None;
            }
            hit[v - 1] = true;
        }
        Some(Perm(images.iter().map(|&v| v - 1).collect()))
    }

    /// Builds a permutation from 0-based images, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Option<Self> {
        let n = images.len();
        let mut hit = vec![false; n];
        for &v in &images {
            if v >= n || hit[v] {
                return None;
            }
            hit[v] = true;
        }
        Some(Perm(images))
    }

    /// All permutations of {0, .., n-1} in lexicographic order.
    pub fn all(n: usize) -> Vec<Perm> {
        fn extend(prefix: &mut Vec<usize>, left: &[usize], out: &mut Vec<Perm>) {
            if left.is_empty() {
                out.push(Perm(prefix.clone()));
                return;
            }
            for (slot, &v) in left.iter().enumerate() {
                prefix.push(v);
                let rest: Vec<usize> =
                    left.iter().enumerate().filter(|&(s, _)| s != slot).map(|(_, &x)| x).collect();
                extend(prefix, &rest, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        extend(&mut Vec::new(), &(0..n).collect::<Vec<_>>(), &mut out);
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Image of position `m`.
    pub fn apply(&self, m: usize) -> usize {
        self.0[m]
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.0.len()];
        for (m, &v) in self.0.iter().enumerate() {
            inv[v] = m;
        }
        Perm(inv)
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(m, &v)| m == v)
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, v) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, ")")
    }
}

/// A composition of n: consecutive run lengths summing to n. Runs mark
/// which entries of the sorted index chain are equal.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Composition {
    sizes: Vec<usize>,
}

impl Composition {
    pub fn new(sizes: Vec<usize>) -> Self {
        debug_assert!(sizes.iter().all(|&s| s > 0));
        Composition { sizes }
    }

    /// All 2^(n-1) compositions of n, ordered by gap mask: bit m of the
    /// mask set means chain positions m and m+1 fall in the same run.
    /// Mask 0 is the all-distinct pattern, the strict interior.
    pub fn enumerate(n: usize) -> Vec<Composition> {
        if n == 0 {
            return vec![Composition { sizes: Vec::new() }];
        }
        let mut out = Vec::with_capacity(1 << (n - 1));
        for mask in 0u64..(1 << (n - 1)) {
            let mut sizes = vec![1usize];
            for gap in 0..n - 1 {
                if mask >> gap & 1 == 1 {
                    *sizes.last_mut().unwrap() += 1;
                } else {
                    sizes.push(1);
                }
            }
            out.push(Composition { sizes });
        }
        out
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Runs as position ranges into the chain.
    pub fn runs(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut start = 0;
        for &s in &self.sizes {
            out.push(start..start + s);
            start += s;
        }
        out
    }

    /// Index of the run containing chain position `m`.
    pub fn run_of(&self, m: usize) -> usize {
        let mut start = 0;
        for (r, &s) in self.sizes.iter().enumerate() {
            if m < start + s {
                return r;
            }
            start += s;
        }
        panic!("position {m} out of range for composition of {}", self.n());
    }

    pub fn all_distinct(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    /// Number of cosets n! / prod(run!), i.e. how many statements restore
    /// the full iteration space under this equality pattern.
    pub fn coset_count(&self) -> u64 {
        let mut v = factorial(self.n() as u64);
        for &s in &self.sizes {
            v /= factorial(s as u64);
        }
        v
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, r) in self.runs().iter().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "[{}..{}]", r.start + 1, r.end)?;
        }
        Ok(())
    }
}

/// One relabeling per coset: those sigma whose inverse is ascending within
/// every run of `classes`. Two relabelings that differ only by permuting
/// equal (same-run) source positions produce the same statement once
/// normalized, so exactly one representative of each such family is kept.
pub fn unique_relabelings(classes: &Composition) -> Vec<Perm> {
    let n = classes.n();
    Perm::all(n)
        .into_iter()
        .filter(|sigma| {
            let inv = sigma.inverse();
            classes.runs().iter().all(|run| {
                run.clone().zip(run.clone().skip(1)).all(|(a, b)| inv.apply(a) < inv.apply(b))
            })
        })
        .collect()
}

pub fn factorial(n: u64) -> u64 {
    (2..=n).product::<u64>().max(1)
}

/// Whether a coordinate tuple lies in the stored triangle: nondecreasing
/// within every symmetric part of the partition.
pub fn is_canonical(coords: &[usize], partition: &SymmetryPartition) -> bool {
    partition.symmetric_parts().all(|part| {
        part.iter().zip(part.iter().skip(1)).all(|(&a, &b)| coords[a] <= coords[b])
    })
}

/// How many canonical coordinates a `dim^order` tensor has under the
/// partition: a product of simplex counts, one per part.
pub fn canonical_count(dim: u64, partition: &SymmetryPartition) -> u64 {
    partition
        .parts()
        .iter()
        .map(|part| binomial(dim + part.len() as u64 - 1, part.len() as u64))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::SymmetryPartition;

    #[test]
    fn compositions_of_four_in_mask_order() {
        let sizes: Vec<Vec<usize>> =
            Composition::enumerate(4).into_iter().map(|c| c.sizes).collect();
        assert_eq!(
            sizes,
            vec![
                vec![1, 1, 1, 1],
                vec![2, 1, 1],
                vec![1, 2, 1],
                vec![3, 1],
                vec![1, 1, 2],
                vec![2, 2],
                vec![1, 3],
                vec![4],
            ]
        );
    }

    #[test]
    fn coset_counts_match_the_multinomial() {
        for n in 0..=6 {
            for c in Composition::enumerate(n) {
                let expected =
                    factorial(n as u64) / c.sizes().iter().map(|&s| factorial(s as u64)).product::<u64>().max(1);
                assert_eq!(c.coset_count(), expected, "composition {c}");
                assert_eq!(unique_relabelings(&c).len() as u64, expected, "composition {c}");
            }
        }
    }

    #[test]
    fn relabeling_totals_are_the_fubini_numbers() {
        let fubini = [1u64, 1, 3, 13, 75, 541];
        for (n, &expected) in fubini.iter().enumerate() {
            let total: u64 = Composition::enumerate(n)
                .iter()
                .map(|c| unique_relabelings(c).len() as u64)
                .sum();
            assert_eq!(total, expected, "n = {n}");
        }
    }

    #[test]
    fn merged_pair_keeps_the_expected_triple() {
        let printed = |c: &Composition| -> Vec<String> {
            unique_relabelings(c).iter().map(|p| p.to_string()).collect()
        };
        let first_pair = Composition::new(vec![2, 1]);
        assert_eq!(printed(&first_pair), vec!["(1, 2, 3)", "(1, 3, 2)", "(3, 1, 2)"]);
        let second_pair = Composition::new(vec![1, 2]);
        assert_eq!(printed(&second_pair), vec!["(1, 2, 3)", "(2, 1, 3)", "(2, 3, 1)"]);
        let merged = Composition::new(vec![3]);
        assert_eq!(printed(&merged), vec!["(1, 2, 3)"]);
    }

    #[test]
    fn relabelings_are_distinct_bijections() {
        for c in Composition::enumerate(5) {
            let perms = unique_relabelings(&c);
            for p in &perms {
                let mut seen = vec![false; 5];
                for m in 0..5 {
                    assert!(!seen[p.apply(m)]);
                    seen[p.apply(m)] = true;
                }
                let inv = p.inverse();
                assert!((0..5).all(|m| inv.apply(p.apply(m)) == m));
            }
            let mut dedup = perms.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), perms.len());
        }
    }

    #[test]
    fn canonical_coordinate_counts_are_simplex_numbers() {
        let full3 = SymmetryPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let count = |dim: usize, p: &SymmetryPartition, order: usize| -> u64 {
            let mut total = 0;
            let mut coords = vec![0usize; order];
            loop {
                if is_canonical(&coords, p) {
                    total += 1;
                }
                let mut axis = order;
                loop {
                    if axis == 0 {
                        return total;
                    }
                    axis -= 1;
                    coords[axis] += 1;
                    if coords[axis] < dim {
                        break;
                    }
                    coords[axis] = 0;
                }
            }
        };
        assert_eq!(count(4, &full3, 3), 20);
        assert_eq!(canonical_count(4, &full3), 20);

        let pair = SymmetryPartition::new(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(count(4, &pair, 2), 10);
        assert_eq!(canonical_count(4, &pair), 10);

        let tail_pair = SymmetryPartition::new(3, vec![vec![1, 2]]).unwrap();
        assert_eq!(count(4, &tail_pair, 3), 40);
        assert_eq!(canonical_count(4, &tail_pair), 40);

        let trivial = SymmetryPartition::trivial(3);
        assert_eq!(canonical_count(5, &trivial), 125);
    }
}
