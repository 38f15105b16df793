use std::cmp::Ordering;

use super::bigfloat::BigFloat;

/// Nonnegative error bound `m * 2^e` with an unbounded exponent.
///
/// Every operation rounds upward, so a `Radius` only ever overestimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius {
    m: f64,
    e: i64,
}

const UP: f64 = 1.0 + 1.0 / (1u64 << 40) as f64;

impl Radius {
    pub const ZERO: Radius = Radius { m: 0.0, e: 0 };

    fn norm(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::ZERO;
        }
        let k = m.log2().floor() as i64;
        Radius { m: m * 2f64.powi(-k as i32), e: e + k }
    }

    pub fn pow2(e: i64) -> Self {
        Radius { m: 1.0, e }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::norm(x.abs() * UP, 0)
    }

    /// Upper bound on `|x|`.
    pub fn magnitude(x: &BigFloat) -> Self {
        match x.msb() {
            None => Self::ZERO,
            Some(k) => Self::pow2(k + 1),
        }
    }

    /// Lower bound on `|x|` (zero for zero).
    pub fn magnitude_below(x: &BigFloat) -> Self {
        match x.msb() {
            None => Self::ZERO,
            Some(k) => Self::pow2(k),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0.0
    }

    pub fn add(self, o: Self) -> Self {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let (hi, lo) = if self.e >= o.e { (self, o) } else { (o, self) };
        let d = hi.e - lo.e;
        let m = if d > 1000 { hi.m + f64::EPSILON } else { hi.m + lo.m * 2f64.powi(-(d as i32)) };
        Self::norm(m * UP, hi.e)
    }

    pub fn mul(self, o: Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::ZERO;
        }
        Self::norm(self.m * o.m * UP, self.e + o.e)
    }

    /// `self / o` rounded up; `o` must be nonzero.
    pub fn div(self, o: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::norm(self.m / o.m * UP, self.e - o.e)
    }

    pub fn sqrt(self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        let (m, e) = if self.e % 2 == 0 { (self.m, self.e) } else { (self.m * 2.0, self.e - 1) };
        Self::norm(m.sqrt() * UP, e / 2)
    }

    pub fn cmp(&self, o: &Self) -> Ordering {
        match (self.is_zero(), o.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.e.cmp(&o.e).then(self.m.partial_cmp(&o.m).unwrap()),
        }
    }

    /// Compares against `|x|` exactly enough for certification: returns true
    /// only if `|x| > self` is guaranteed.
    pub fn below_magnitude(&self, x: &BigFloat) -> bool {
        self.cmp(&Self::magnitude_below(x)) == Ordering::Less
    }

    pub fn to_f64(&self) -> f64 {
        if self.e > 1000 {
            f64::INFINITY
        } else if self.e < -1000 {
            0.0
        } else {
            self.m * 2f64.powi(self.e as i32)
        }
    }

    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.e as f64 + self.m.log2()
        }
    }
}
