//! Scalar value types the executors are generic over.
//!
//! Kernels compute over any [`Value`]: `f32`/`f64` for measurement runs,
//! `i64` for exact integer checks, and `Ratio<i64>` when statement factors
//! are fractional (lookup tables) and exactness still matters.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Num, NumAssign};

/// A rational number as used for statement factors and exact execution.
pub type Rat = Ratio<i64>;

/// Scalar type a kernel can execute over.
///
/// `num_traits::Num` supplies zero, one and the ring operations; the
/// extensions below cover what the interpreters additionally need: building
/// values from integers and rationals, the infinities used as fill by
/// min-plus/max-plus algebras, and min/max themselves.
pub trait Value: Num + NumAssign + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// Converts a small integer; used by data generators and tests.
    fn from_int(v: i64) -> Self;

    /// Converts a rational statement factor, or `None` when the type cannot
    /// represent it exactly (e.g. 1/3 as `i64`).
    fn from_rat(r: Rat) -> Option<Self>;

    /// Additive absorbing element for min reductions, if the type has one.
    fn pos_inf() -> Option<Self> {
        None
    }

    /// Counterpart of [`Value::pos_inf`] for max reductions.
    fn neg_inf() -> Option<Self> {
        None
    }

    /// Addition that must stay absorbing at the infinities. The default is
    /// plain `+`; integer types saturate instead of overflowing.
    fn add_inf(a: &Self, b: &Self) -> Self {
        a.clone() + b.clone()
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if b < a {
            b.clone()
        } else {
            a.clone()
        }
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if b > a {
            b.clone()
        } else {
            a.clone()
        }
    }

    /// Relative difference used by tolerance comparisons. Exact types
    /// return 0.0 on equality and infinity otherwise.
    fn rel_diff(a: &Self, b: &Self) -> f64;
}

impl Value for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_rat(r: Rat) -> Option<Self> {
        Some(*r.numer() as f64 / *r.denom() as f64)
    }

    fn pos_inf() -> Option<Self> {
        Some(f64::INFINITY)
    }

    fn neg_inf() -> Option<Self> {
        Some(f64::NEG_INFINITY)
    }

    fn rel_diff(a: &Self, b: &Self) -> f64 {
        rel_diff_float(*a, *b)
    }
}

impl Value for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }

    fn from_rat(r: Rat) -> Option<Self> {
        Some(*r.numer() as f32 / *r.denom() as f32)
    }

    fn pos_inf() -> Option<Self> {
        Some(f32::INFINITY)
    }

    fn neg_inf() -> Option<Self> {
        Some(f32::NEG_INFINITY)
    }

    fn rel_diff(a: &Self, b: &Self) -> f64 {
        rel_diff_float(*a as f64, *b as f64)
    }
}

impl Value for i64 {
    fn from_int(v: i64) -> Self {
        v
    }

    fn from_rat(r: Rat) -> Option<Self> {
        if *r.denom() == 1 {
            Some(*r.numer())
        } else {
            None
        }
    }

    fn pos_inf() -> Option<Self> {
        Some(i64::MAX)
    }

    fn neg_inf() -> Option<Self> {
        Some(i64::MIN)
    }

    fn add_inf(a: &Self, b: &Self) -> Self {
        a.saturating_add(*b)
    }

    fn rel_diff(a: &Self, b: &Self) -> f64 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

impl Value for Rat {
    fn from_int(v: i64) -> Self {
        Rat::from_integer(v)
    }

    fn from_rat(r: Rat) -> Option<Self> {
        Some(r)
    }

    fn rel_diff(a: &Self, b: &Self) -> f64 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn rel_diff_float(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() / scale
}
