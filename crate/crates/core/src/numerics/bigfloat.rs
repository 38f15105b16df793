use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

use super::rational::Rational;

/// Binary floating point with an unbounded exponent: `(-1)^neg * mant * 2^exp`.
///
/// Results are rounded to nearest-even at the precision passed to each
/// operation. Zero has an empty mantissa and is never negative.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BigFloat {
    neg: bool,
    mant: BigUint,
    exp: i64,
}

impl BigFloat {
    pub fn zero() -> Self {
        BigFloat { neg: false, mant: BigUint::zero(), exp: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_parts(n < 0, BigUint::from(n.unsigned_abs()), 0)
    }

    fn from_parts(neg: bool, mant: BigUint, exp: i64) -> Self {
        if mant.is_zero() {
            return Self::zero();
        }
        let tz = mant.trailing_zeros().unwrap_or(0);
        BigFloat { neg, mant: mant >> tz as usize, exp: exp + tz as i64 }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.neg {
            -1
        } else {
            1
        }
    }

    /// Exponent of the leading bit: `2^msb <= |x| < 2^(msb+1)`.
    pub fn msb(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64 - 1)
        }
    }

    /// Rounds `mant * 2^exp` to `prec` bits; `sticky` marks nonzero bits
    /// already discarded below `mant`.
    fn round_parts(neg: bool, mant: BigUint, exp: i64, prec: u32, sticky: bool) -> Self {
        let bits = mant.bits();
        if bits <= prec as u64 {
            // Callers only pass sticky with at least two extra bits.
            return Self::from_parts(neg, mant, exp);
        }
        let drop = (bits - prec as u64) as usize;
        let kept = &mant >> drop;
        let half = BigUint::one() << (drop - 1);
        let rem = &mant - (&kept << drop);
        let round_up = match rem.cmp(&half) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => sticky || kept.bit(0),
        };
        let kept = if round_up { kept + 1u32 } else { kept };
        Self::from_parts(neg, kept, exp + drop as i64)
    }

    pub fn round(&self, prec: u32) -> Self {
        Self::round_parts(self.neg, self.mant.clone(), self.exp, prec, false)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        BigFloat { neg: !self.neg, mant: self.mant.clone(), exp: self.exp }
    }

    pub fn abs(&self) -> Self {
        BigFloat { neg: false, mant: self.mant.clone(), exp: self.exp }
    }

    fn to_signed(&self) -> BigInt {
        BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, self.mant.clone())
    }

    pub fn add(&self, o: &Self, prec: u32) -> Self {
        if self.is_zero() {
            return o.round(prec);
        }
        if o.is_zero() {
            return self.round(prec);
        }
        let (hi, lo) = if self.msb() >= o.msb() { (self, o) } else { (o, self) };
        // A summand below half an ulp of the other cannot change the rounding,
        // except to break an exact tie, which needs one sticky bit.
        let gap = hi.msb().unwrap() - lo.msb().unwrap();
        if gap > prec as i64 + 2 && hi.mant.bits() <= prec as u64 {
            let keep = hi.exp.min(hi.msb().unwrap() - prec as i64 - 2);
            let m = &hi.mant << (hi.exp - keep) as usize;
            let m = if hi.neg == lo.neg { m + 1u32 } else { m - 1u32 };
            return Self::round_parts(hi.neg, m, keep, prec, true);
        }
        let e = self.exp.min(o.exp);
        let a = self.to_signed() << (self.exp - e) as usize;
        let b = o.to_signed() << (o.exp - e) as usize;
        let s = a + b;
        let (sign, mag) = s.into_parts();
        Self::round_parts(sign == Sign::Minus, mag, e, prec, false)
    }

    pub fn sub(&self, o: &Self, prec: u32) -> Self {
        self.add(&o.neg(), prec)
    }

    pub fn mul(&self, o: &Self, prec: u32) -> Self {
        Self::round_parts(self.neg != o.neg, &self.mant * &o.mant, self.exp + o.exp, prec, false)
    }

    /// Panics on division by zero; callers check first.
    pub fn div(&self, o: &Self, prec: u32) -> Self {
        assert!(!o.is_zero(), "BigFloat division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        let shift = (prec as i64 + 2 + o.mant.bits() as i64 - self.mant.bits() as i64).max(0);
        let num = &self.mant << shift as usize;
        let q = &num / &o.mant;
        let sticky = !(&num % &o.mant).is_zero();
        let (q, e) = ((q << 1usize) | BigUint::from(sticky as u32), self.exp - o.exp - shift - 1);
        Self::round_parts(self.neg != o.neg, q, e, prec, sticky)
    }

    /// Square root of a nonnegative value.
    pub fn sqrt(&self, prec: u32) -> Self {
        assert!(!self.neg, "BigFloat sqrt of a negative value");
        if self.is_zero() {
            return Self::zero();
        }
        let mut shift = (2 * prec as i64 + 4 - self.mant.bits() as i64).max(0);
        if (self.exp - shift) % 2 != 0 {
            shift += 1;
        }
        let m = &self.mant << shift as usize;
        let r = m.sqrt();
        let sticky = &r * &r != m;
        let (r, e) = ((r << 1usize) | BigUint::from(sticky as u32), (self.exp - shift) / 2 - 1);
        Self::round_parts(false, r, e, prec, sticky)
    }

    /// Correctly rounded `q` at `prec` bits.
    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        let n = q.numer();
        let d = q.denom();
        let (sign, n) = n.into_parts();
        let d = d.magnitude().clone();
        if n.is_zero() {
            return Self::zero();
        }
        let shift = (prec as i64 + 2 + d.bits() as i64 - n.bits() as i64).max(0);
        let num = &n << shift as usize;
        let qq = &num / &d;
        let sticky = !(&num % &d).is_zero();
        let (qq, e) = ((qq << 1usize) | BigUint::from(sticky as u32), -shift - 1);
        Self::round_parts(sign == Sign::Minus, qq, e, prec, sticky)
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let (m, e) = if bits > 60 {
            ((&self.mant >> (bits - 60) as usize).to_f64().unwrap(), self.exp + bits - 60)
        } else {
            (self.mant.to_f64().unwrap(), self.exp)
        };
        let v = if e > 2000 {
            f64::INFINITY
        } else if e < -2200 {
            0.0
        } else {
            // split the scaling so intermediate powers stay finite
            m * 2f64.powi((e / 2) as i32) * 2f64.powi((e - e / 2) as i32)
        };
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// Exact rational value.
    pub fn to_rational(&self) -> Rational {
        let m = self.to_signed();
        if self.exp >= 0 {
            Rational::from_bigints(m << self.exp as usize, BigInt::one())
        } else {
            Rational::from_bigints(m, BigInt::one() << (-self.exp) as usize)
        }
    }

    pub fn cmp_value(&self, o: &Self) -> Ordering {
        match (self.signum(), o.signum()) {
            (a, b) if a != b => a.cmp(&b),
            (0, 0) => Ordering::Equal,
            (s, _) => {
                let mag = match self.msb().cmp(&o.msb()) {
                    Ordering::Equal => {
                        let e = self.exp.min(o.exp);
                        let a = &self.mant << (self.exp - e) as usize;
                        let b = &o.mant << (o.exp - e) as usize;
                        a.cmp(&b)
                    }
                    c => c,
                };
                if s < 0 {
                    mag.reverse()
                } else {
                    mag
                }
            }
        }
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}*2^{}", if self.neg { "-" } else { "" }, self.mant, self.exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn one_third_rounds_to_nearest() {
        let x = BigFloat::from_rational(&q(1, 3), 8);
        // 1/3 = 0.0101010101..b, 8 bits: 10101011 * 2^-9 (round up)
        assert_eq!(x.to_rational(), q(171, 512));
    }

    #[test]
    fn ties_round_to_even() {
        let x = BigFloat::from_int(0b1001_1000); // 9 bits? 152 = 10011000b (8 bits)
        assert_eq!(x.round(4).to_rational(), q(160, 1)); // 1001|1 tie -> 1010
        let y = BigFloat::from_int(0b1000_1000);
        assert_eq!(y.round(4).to_rational(), q(128, 1)); // 1000|1 tie -> 1000
    }

    #[test]
    fn sqrt_two() {
        let s = BigFloat::from_int(2).sqrt(53);
        assert_eq!(s.to_f64(), 2f64.sqrt());
    }

    #[test]
    fn division_matches_f64() {
        for (a, b) in [(1, 3), (-7, 9), (22, 7), (1, 1024)] {
            let x = BigFloat::from_int(a).div(&BigFloat::from_int(b), 53);
            assert_eq!(x.to_f64(), a as f64 / b as f64);
        }
    }

    #[test]
    fn tiny_addend_breaks_tie_upward() {
        // 1 + 2^-200 at 1 bit of precision past the leading one stays 1;
        // 1.5 + tiny at 1 bit: tie between 1 and 2 broken by the sticky bit.
        let one_half = BigFloat::from_rational(&q(3, 2), 64);
        let tiny = BigFloat::from_rational(&q(1, 1), 64).div(&BigFloat::from_int(1 << 20), 64);
        let tiny = tiny.mul(&tiny, 64).mul(&tiny, 64);
        assert_eq!(one_half.add(&tiny, 1).to_rational(), q(2, 1));
        assert_eq!(one_half.sub(&tiny, 1).to_rational(), q(1, 1));
    }

    #[test]
    fn compare_values() {
        let a = BigFloat::from_rational(&q(1, 3), 30);
        let b = BigFloat::from_rational(&q(1, 3), 60);
        assert_ne!(a.cmp_value(&b), Ordering::Equal);
        assert_eq!(a.neg().cmp_value(&a), Ordering::Less);
        assert_eq!(BigFloat::zero().cmp_value(&a.neg()), Ordering::Greater);
    }

    #[test]
    fn huge_exponent_to_f64() {
        let x = BigFloat::from_int(3).mul(&BigFloat { neg: false, mant: BigUint::one(), exp: -3000 }, 10);
        assert_eq!(x.to_f64(), 0.0);
        assert!(!x.is_zero());
    }
}
