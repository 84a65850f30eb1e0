//! Integer intervals over the int32 range.
//!
//! Bounds never leave `[INT_MIN, INT_MAX]`: program values are int32 and
//! widening jumps straight to the range ends, which play the role of the
//! infinite bounds.

use std::fmt;

pub const MIN: i64 = i32::MIN as i64;
pub const MAX: i64 = i32::MAX as i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interval {
    Bottom,
    Range(i64, i64),
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |v: i64| match v {
            MIN => "-oo".to_string(),
            MAX => "+oo".to_string(),
            v => v.to_string(),
        };
        match self {
            Interval::Bottom => write!(f, "_|_"),
            Interval::Range(lo, hi) => write!(f, "[{}, {}]", b(*lo), b(*hi)),
        }
    }
}

impl Interval {
    pub const TOP: Interval = Interval::Range(MIN, MAX);

    pub fn new(lo: i64, hi: i64) -> Interval {
        let lo = lo.max(MIN);
        let hi = hi.min(MAX);
        if lo > hi {
            Interval::Bottom
        } else {
            Interval::Range(lo, hi)
        }
    }

    pub fn single(v: i64) -> Interval {
        Interval::new(v, v)
    }

    /// Clamps an exact (possibly out-of-range) result to int32.
    fn from_wide(lo: i128, hi: i128) -> Interval {
        Interval::new(lo.clamp(MIN as i128, MAX as i128 + 1) as i64, hi.clamp(MIN as i128 - 1, MAX as i128) as i64)
    }

    pub fn is_bottom(self) -> bool {
        self == Interval::Bottom
    }

    pub fn bounds(self) -> Option<(i64, i64)> {
        match self {
            Interval::Range(a, b) => Some((a, b)),
            Interval::Bottom => None,
        }
    }

    pub fn contains(self, v: i64) -> bool {
        matches!(self, Interval::Range(a, b) if a <= v && v <= b)
    }

    pub fn leq(self, other: Interval) -> bool {
        match (self, other) {
            (Interval::Bottom, _) => true,
            (_, Interval::Bottom) => false,
            (Interval::Range(a, b), Interval::Range(c, d)) => c <= a && b <= d,
        }
    }

    pub fn join(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, x) | (x, Interval::Bottom) => x,
            (Interval::Range(a, b), Interval::Range(c, d)) => Interval::Range(a.min(c), b.max(d)),
        }
    }

    pub fn meet(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Bottom, _) | (_, Interval::Bottom) => Interval::Bottom,
            (Interval::Range(a, b), Interval::Range(c, d)) => Interval::new(a.max(c), b.min(d)),
        }
    }

    pub fn widen(self, next: Interval) -> Interval {
        match (self, next) {
            (Interval::Bottom, x) => x,
            (x, Interval::Bottom) => x,
            (Interval::Range(a, b), Interval::Range(c, d)) => {
                Interval::Range(if c < a { MIN } else { a }, if d > b { MAX } else { b })
            }
        }
    }

    /// Exact bounds of `op` over the operands, before int32 clamping.
    pub fn exact(op: ArithOp, x: Interval, y: Interval) -> Option<(i128, i128)> {
        let ((a, b), (c, d)) = (x.bounds()?, y.bounds()?);
        let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
        Some(match op {
            ArithOp::Add => (a + c, b + d),
            ArithOp::Sub => (a - d, b - c),
            ArithOp::Mul => {
                let ps = [a * c, a * d, b * c, b * d];
                (*ps.iter().min().expect("4"), *ps.iter().max().expect("4"))
            }
        })
    }

    pub fn arith(op: ArithOp, x: Interval, y: Interval) -> Interval {
        match Interval::exact(op, x, y) {
            Some((lo, hi)) => Interval::from_wide(lo, hi),
            None => Interval::Bottom,
        }
    }

    pub fn neg(self) -> Interval {
        match self {
            Interval::Bottom => Interval::Bottom,
            // -INT_MIN overflows; a successful negation never yields it.
            Interval::Range(a, b) => Interval::from_wide(-(b as i128), -(a as i128)),
        }
    }

    /// Truncating division, for executions where it succeeds.
    pub fn div(self, y: Interval) -> Interval {
        let Some((a, b)) = self.bounds() else { return Interval::Bottom };
        let mut out = Interval::Bottom;
        for part in [y.meet(Interval::new(MIN, -1)), y.meet(Interval::new(1, MAX))] {
            let Some((c, d)) = part.bounds() else { continue };
            let qs = [(a, c), (a, d), (b, c), (b, d)].map(|(p, q)| p as i128 / q as i128);
            out = out.join(Interval::from_wide(*qs.iter().min().expect("4"), *qs.iter().max().expect("4")));
        }
        out
    }

    /// Truncating remainder: sign follows the dividend, magnitude below |y|.
    pub fn rem(self, y: Interval) -> Interval {
        let (Some((a, b)), Some((c, d))) = (self.bounds(), y.bounds()) else { return Interval::Bottom };
        let m = (c.unsigned_abs().max(d.unsigned_abs()) as i64 - 1).max(0);
        let mut out = Interval::Bottom;
        if b >= 0 {
            out = out.join(Interval::new(0, m.min(b)));
        }
        if a < 0 {
            out = out.join(Interval::new((-m).max(a), 0));
        }
        out
    }

    /// Values `v` such that `v op r` is possible for some `r` in `other`.
    pub fn constrain(op: CmpOp, other: Interval) -> Interval {
        let Some((c, d)) = other.bounds() else { return Interval::Bottom };
        match op {
            CmpOp::Lt => Interval::new(MIN, d - 1),
            CmpOp::Le => Interval::new(MIN, d),
            CmpOp::Gt => Interval::new(c + 1, MAX),
            CmpOp::Ge => Interval::new(c, MAX),
            CmpOp::Eq => other,
            CmpOp::Ne => Interval::TOP,
        }
    }

    /// Removes a single excluded value when it sits on an endpoint.
    pub fn exclude(self, v: i64) -> Interval {
        match self {
            Interval::Range(a, b) if a == v && b == v => Interval::Bottom,
            Interval::Range(a, b) if a == v => Interval::Range(a + 1, b),
            Interval::Range(a, b) if b == v => Interval::Range(a, b - 1),
            x => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            c => c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv() -> impl Strategy<Value = Interval> {
        (-50i64..50, 0i64..40).prop_map(|(a, w)| Interval::new(a, a + w))
    }

    proptest! {
        #[test]
        fn arith_is_sound(x in iv(), y in iv(), i in 0usize..40, j in 0usize..40) {
            let (a, b) = x.bounds().unwrap();
            let (c, d) = y.bounds().unwrap();
            let u = (a + i as i64).min(b);
            let v = (c + j as i64).min(d);
            prop_assert!(Interval::arith(ArithOp::Add, x, y).contains(u + v));
            prop_assert!(Interval::arith(ArithOp::Sub, x, y).contains(u - v));
            prop_assert!(Interval::arith(ArithOp::Mul, x, y).contains(u * v));
            if v != 0 {
                prop_assert!(x.div(y).contains(u / v));
                prop_assert!(x.rem(y).contains(u % v));
            }
        }

        #[test]
        fn join_is_upper_bound(x in iv(), y in iv()) {
            let j = x.join(y);
            prop_assert!(x.leq(j) && y.leq(j));
            prop_assert!(x.meet(y).leq(x));
            prop_assert!(x.leq(x.widen(y)) && y.leq(x.widen(y)));
        }
    }

    #[test]
    fn int_min_negation() {
        assert_eq!(Interval::single(MIN).neg(), Interval::Bottom);
        assert_eq!(Interval::new(MIN, -1).neg(), Interval::new(1, MAX));
    }

    #[test]
    fn exact_detects_overflow() {
        let (lo, hi) = Interval::exact(ArithOp::Add, Interval::single(MAX), Interval::single(1)).unwrap();
        assert!(lo > MAX as i128 && hi > MAX as i128);
        assert_eq!(Interval::arith(ArithOp::Add, Interval::single(MAX), Interval::single(1)), Interval::Bottom);
    }
}
