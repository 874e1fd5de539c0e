use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::Add;

use num_rational::Ratio;

/// Scalar used to accumulate path costs. `f64` for flight, `Ratio<i64>` when
/// results have to be compared exactly.
pub trait PathCost: Copy + Debug + PartialEq + Add<Output = Self> + Send + Sync + 'static {
    fn zero() -> Self;
    fn from_int(n: i64) -> Self;
    /// Conversion from a configuration value. Exact for integers; the
    /// rational implementation approximates other values.
    fn from_f64(x: f64) -> Self;
    fn div_int(self, k: i64) -> Self;
    fn total_cmp(&self, other: &Self) -> Ordering;
    fn to_f64(self) -> f64;
}

impl PathCost for f64 {
    fn zero() -> Self {
        0.0
    }

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn div_int(self, k: i64) -> Self {
        self / k as f64
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl PathCost for Ratio<i64> {
    fn zero() -> Self {
        Ratio::from_integer(0)
    }

    fn from_int(n: i64) -> Self {
        Ratio::from_integer(n)
    }

    fn from_f64(x: f64) -> Self {
        if x.fract() == 0.0 && x.abs() < (1i64 << 52) as f64 {
            return Ratio::from_integer(x as i64);
        }
        Ratio::approximate_float(x).expect("cost representable as a ratio")
    }

    fn div_int(self, k: i64) -> Self {
        self / Ratio::from_integer(k)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// A cost or infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dist<C> {
    Finite(C),
    Inf,
}

impl<C: PathCost> Dist<C> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Dist::Finite(_))
    }

    pub fn finite(self) -> Option<C> {
        match self {
            Dist::Finite(c) => Some(c),
            Dist::Inf => None,
        }
    }

    pub fn plus(self, c: C) -> Self {
        match self {
            Dist::Finite(a) => Dist::Finite(a + c),
            Dist::Inf => Dist::Inf,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.cmp_total(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn cmp_total(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Dist::Finite(a), Dist::Finite(b)) => a.total_cmp(b),
            (Dist::Finite(_), Dist::Inf) => Ordering::Less,
            (Dist::Inf, Dist::Finite(_)) => Ordering::Greater,
            (Dist::Inf, Dist::Inf) => Ordering::Equal,
        }
    }
}

impl<C: PathCost> Eq for Dist<C> {}

impl<C: PathCost> PartialOrd for Dist<C> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<C: PathCost> Ord for Dist<C> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_total(other)
    }
}
