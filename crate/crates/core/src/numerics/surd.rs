use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_traits::{Signed, ToPrimitive, Zero};
use smallvec::SmallVec;

use super::rational::{big_ratio_to_f64, Rational};
use super::NumericError;

/// One summand `coef * sqrt(rad)` with `rad` square-free.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Term {
    pub coef: Rational,
    pub rad: u128,
}

/// A finite sum of rational multiples of square roots of distinct square-free
/// integers. Square roots of distinct square-free integers are linearly
/// independent over the rationals, so the canonical form decides equality
/// and a nonzero form never evaluates to zero.
#[derive(Clone)]
pub struct Surd {
    terms: SmallVec<[Term; 2]>,
    approx: OnceLock<f64>,
}

impl PartialEq for Surd {
    fn eq(&self, o: &Self) -> bool {
        self.terms == o.terms
    }
}

impl Eq for Surd {}

impl Hash for Surd {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.terms.hash(h)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn square_part_cache() -> &'static Mutex<HashMap<u128, (u128, u128)>> {
    static CACHE: OnceLock<Mutex<HashMap<u128, (u128, u128)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Writes `n = f^2 * s` with `s` square-free and returns `(f, s)`.
///
/// Trial division runs up to the cube root; what is left is then either
/// prime, a product of two distinct primes, or a prime square.
pub fn square_part(n: u128) -> (u128, u128) {
    if n < 4 {
        return (1, n);
    }
    if let Some(&r) = square_part_cache().lock().unwrap().get(&n) {
        return r;
    }
    let mut m = n;
    let mut f: u128 = 1;
    let mut s: u128 = 1;
    let mut p: u128 = 2;
    while p * p * p <= m {
        if m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            for _ in 0..e / 2 {
                f *= p;
            }
            if e % 2 == 1 {
                s *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    let r = m.sqrt();
    if m > 1 && r * r == m {
        f *= r;
    } else {
        s *= m;
    }
    square_part_cache().lock().unwrap().insert(n, (f, s));
    (f, s)
}

fn isqrt_big(n: &BigUint) -> BigUint {
    n.sqrt()
}

impl Surd {
    pub fn zero() -> Self {
        Surd { terms: SmallVec::new(), approx: OnceLock::new() }
    }

    pub fn from_rational(q: Rational) -> Self {
        let mut terms = SmallVec::new();
        if !q.is_zero() {
            terms.push(Term { coef: q, rad: 1 });
        }
        Surd { terms, approx: OnceLock::new() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_int(n))
    }

    /// `coef * sqrt(n)` for an arbitrary nonnegative integer `n`.
    pub fn scaled_sqrt(coef: Rational, n: u128) -> Self {
        if coef.is_zero() || n == 0 {
            return Self::zero();
        }
        let (f, s) = square_part(n);
        let c = match i64::try_from(f) {
            Ok(f) => coef.mul_int(f),
            Err(_) => coef.mul(&Rational::from_bigints(BigInt::from(f), BigInt::from(1))),
        };
        let mut terms = SmallVec::new();
        terms.push(Term { coef: c, rad: s });
        Surd { terms, approx: OnceLock::new() }
    }

    /// Wraps a single term whose radicand is already square-free.
    pub fn from_term(t: Term) -> Self {
        let mut terms = SmallVec::new();
        if !t.coef.is_zero() {
            terms.push(t);
        }
        Surd { terms, approx: OnceLock::new() }
    }

    pub(crate) fn scaled_bounds_pub(&self, bits: u32) -> (BigInt, BigInt) {
        self.scaled_bounds(bits)
    }

    fn from_terms(mut terms: SmallVec<[Term; 2]>) -> Self {
        terms.sort_by_key(|t| t.rad);
        let mut out: SmallVec<[Term; 2]> = SmallVec::new();
        for t in terms {
            match out.last_mut() {
                Some(last) if last.rad == t.rad => last.coef = last.coef.add(&t.coef),
                _ => out.push(t),
            }
        }
        out.retain(|t| !t.coef.is_zero());
        Surd { terms: out, approx: OnceLock::new() }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::ZERO),
            [t] if t.rad == 1 => Some(t.coef.clone()),
            _ => None,
        }
    }

    pub fn neg(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { coef: t.coef.neg(), rad: t.rad })
            .collect();
        Surd { terms, approx: OnceLock::new() }
    }

    pub fn add(&self, o: &Self) -> Self {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        let (a, b) = (&self.terms, &o.terms);
        let mut out: SmallVec<[Term; 2]> = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = if j == b.len() || (i < a.len() && a[i].rad < b[j].rad) {
                i += 1;
                a[i - 1].clone()
            } else if i == a.len() || b[j].rad < a[i].rad {
                j += 1;
                b[j - 1].clone()
            } else {
                i += 1;
                j += 1;
                Term { coef: a[i - 1].coef.add(&b[j - 1].coef), rad: a[i - 1].rad }
            };
            if !next.coef.is_zero() {
                out.push(next);
            }
        }
        Surd { terms: out, approx: OnceLock::new() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Result<Self, NumericError> {
        if self.is_zero() || o.is_zero() {
            return Ok(Self::zero());
        }
        if let (Some(a), Some(b)) = (self.as_rational(), o.as_rational()) {
            return Ok(Self::from_rational(a.mul(&b)));
        }
        let mut terms: SmallVec<[Term; 2]> = SmallVec::new();
        for x in &self.terms {
            for y in &o.terms {
                let g = gcd(x.rad, y.rad);
                let rad = (x.rad / g)
                    .checked_mul(y.rad / g)
                    .ok_or_else(|| NumericError::NotRepresentable("radicand overflow".into()))?;
                let mut coef = x.coef.mul(&y.coef);
                if g != 1 {
                    coef = match i64::try_from(g) {
                        Ok(g) => coef.mul_int(g),
                        Err(_) => coef.mul(&Rational::from_bigints(BigInt::from(g), BigInt::from(1))),
                    };
                }
                terms.push(Term { coef, rad });
            }
        }
        Ok(Self::from_terms(terms))
    }

    pub fn mul_rational(&self, q: &Rational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term { coef: t.coef.mul(q), rad: t.rad })
            .collect();
        Surd { terms, approx: OnceLock::new() }
    }

    /// Division by a rational or by a single term; sums of two terms are
    /// rationalized with their conjugate.
    pub fn div(&self, o: &Self) -> Result<Self, NumericError> {
        match o.terms.as_slice() {
            [] => Err(NumericError::DivisionByZero),
            [t] => {
                // x / (c sqrt s) = x sqrt s / (c s)
                let inv = t
                    .coef
                    .mul(&rad_rational(t.rad))
                    .recip()
                    .ok_or(NumericError::DivisionByZero)?;
                let mut root = SmallVec::new();
                root.push(Term { coef: inv, rad: t.rad });
                self.mul(&Surd { terms: root, approx: OnceLock::new() })
            }
            [a, b] => {
                let conj = Surd::from_terms(SmallVec::from_vec(vec![
                    a.clone(),
                    Term { coef: b.coef.neg(), rad: b.rad },
                ]));
                let den = o.mul(&conj)?;
                self.mul(&conj)?.div(&den)
            }
            _ => Err(NumericError::NotRepresentable(
                "division by a sum of three or more radicals".into(),
            )),
        }
    }

    /// Square root; defined for nonnegative rationals only.
    pub fn sqrt(&self) -> Result<Self, NumericError> {
        let q = self.as_rational().ok_or_else(|| {
            NumericError::NotRepresentable("square root of an irrational value".into())
        })?;
        if q.signum() < 0 {
            return Err(NumericError::NegativeSqrt);
        }
        if q.is_zero() {
            return Ok(Self::zero());
        }
        // sqrt(a/b) = sqrt(a b) / b
        let (a, b) = (q.numer(), q.denom());
        let ab = (&a * &b)
            .to_u128()
            .ok_or_else(|| NumericError::NotRepresentable("square root argument too large".into()))?;
        Ok(Self::scaled_sqrt(Rational::from_bigints(BigInt::from(1), b), ab))
    }

    /// Interval `[lo, hi]` containing `self * 2^bits`.
    fn scaled_bounds(&self, bits: u32) -> (BigInt, BigInt) {
        let mut lo = BigInt::zero();
        let mut hi = BigInt::zero();
        for t in &self.terms {
            let n = t.coef.numer();
            let d = t.coef.denom();
            if t.rad == 1 {
                let v = n << bits as usize;
                let (q, r) = (&v / &d, &v % &d);
                let fl = if r.is_negative() { &q - 1 } else { q.clone() };
                let ce = if r.is_zero() { fl.clone() } else { &fl + 1 };
                lo += fl;
                hi += ce;
                continue;
            }
            let root = isqrt_big(&(BigUint::from(t.rad) << (2 * bits as usize)));
            // sqrt(rad) 2^bits lies in [root, root + 1)
            let r0 = BigInt::from(root);
            let r1 = &r0 + 1;
            let (a, b) = if n.is_negative() { (&n * &r1, &n * &r0) } else { (&n * &r0, &n * &r1) };
            lo += a.div_floor_big(&d);
            hi += b.div_ceil_big(&d);
        }
        (lo, hi)
    }

    /// Sign of the value: -1, 0 or 1. Exact.
    pub fn signum(&self) -> i32 {
        match self.terms.as_slice() {
            [] => 0,
            [t] => t.coef.signum(),
            [a, b] => {
                let (sa, sb) = (a.coef.signum(), b.coef.signum());
                if sa == sb {
                    return sa;
                }
                // compare a^2 ra with b^2 rb
                let la = a.coef.mul(&a.coef).mul(&rad_rational(a.rad));
                let lb = b.coef.mul(&b.coef).mul(&rad_rational(b.rad));
                match la.cmp(&lb) {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => unreachable!("distinct square-free radicands"),
                }
            }
            _ => {
                let (est, err) = self.float_sum();
                if est.abs() > err {
                    return if est > 0.0 { 1 } else { -1 };
                }
                let mut bits = 96;
                loop {
                    let (lo, hi) = self.scaled_bounds(bits);
                    if lo.is_positive() {
                        return 1;
                    }
                    if hi.is_negative() {
                        return -1;
                    }
                    bits *= 2;
                }
            }
        }
    }

    /// Plain f64 summation with a rigorous bound on its absolute error.
    fn float_sum(&self) -> (f64, f64) {
        let mut sum = 0.0;
        let mut mag = 0.0;
        for t in &self.terms {
            let v = t.coef.to_f64() * (t.rad as f64).sqrt();
            sum += v;
            mag += v.abs();
        }
        (sum, mag * 8.0 * f64::EPSILON + f64::MIN_POSITIVE)
    }

    /// An f64 within relative error 2^-48 of the exact value.
    pub fn approx(&self) -> f64 {
        *self.approx.get_or_init(|| self.compute_approx())
    }

    fn compute_approx(&self) -> f64 {
        if self.terms.len() <= 1 {
            return self.float_sum().0;
        }
        let (est, err) = self.float_sum();
        if est.abs() > err * 2f64.powi(49) {
            return est;
        }
        let mut bits = 128;
        loop {
            let (lo, hi) = self.scaled_bounds(bits);
            let width = &hi - &lo;
            if lo.signum() == hi.signum() && !lo.is_zero() {
                let mag = if lo.is_negative() { hi.abs() } else { lo.abs() };
                if (width << 50usize) <= mag {
                    let scale = BigInt::from(1) << bits as usize;
                    return big_ratio_to_f64(&lo, &scale);
                }
            }
            bits *= 2;
        }
    }

    pub fn cmp_value(&self, o: &Self) -> Ordering {
        match self.sub(o).signum() {
            -1 => Ordering::Less,
            0 => Ordering::Equal,
            _ => Ordering::Greater,
        }
    }
}

trait DivRound {
    fn div_floor_big(&self, d: &BigInt) -> BigInt;
    fn div_ceil_big(&self, d: &BigInt) -> BigInt;
}

impl DivRound for BigInt {
    fn div_floor_big(&self, d: &BigInt) -> BigInt {
        num_integer::Integer::div_floor(self, d)
    }
    fn div_ceil_big(&self, d: &BigInt) -> BigInt {
        -num_integer::Integer::div_floor(&-self, d)
    }
}

fn rad_rational(r: u128) -> Rational {
    match i64::try_from(r) {
        Ok(r) => Rational::from_int(r),
        Err(_) => Rational::from_bigints(BigInt::from(r), BigInt::from(1)),
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if t.rad == 1 {
                write!(f, "{}", t.coef)?;
            } else {
                write!(f, "{}*sqrt({})", t.coef, t.rad)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Surd {
        Surd::from_rational(Rational::new(n, d))
    }

    #[test]
    fn square_parts() {
        assert_eq!(square_part(72), (6, 2));
        assert_eq!(square_part(49), (7, 1));
        assert_eq!(square_part(1_000_003 * 1_000_033), (1, 1_000_003 * 1_000_033));
        assert_eq!(square_part(1_000_003u128 * 1_000_003), (1_000_003, 1));
    }

    #[test]
    fn inverse_root_squared_is_half() {
        let h = r(1, 2).sqrt().unwrap();
        assert_eq!(h.mul(&h).unwrap(), r(1, 2));
    }

    #[test]
    fn three_over_root_ten_below_one() {
        let x = Surd::from_int(10).sqrt().unwrap();
        let v = Surd::from_int(3).div(&x).unwrap();
        assert_eq!(v.cmp_value(&Surd::from_int(1)), Ordering::Less);
    }

    #[test]
    fn tiny_differences_have_exact_sign() {
        // 1 - (n(n+1)+1)/sqrt((n^2+1)((n+1)^2+1)) is positive but about 1/(2 n^4)
        let n: u128 = 100_000;
        let num = Surd::from_rational(Rational::from_int((n * (n + 1) + 1) as i64));
        let den = Surd::scaled_sqrt(Rational::ONE, n * n + 1)
            .mul(&Surd::scaled_sqrt(Rational::ONE, (n + 1) * (n + 1) + 1))
            .unwrap();
        let p = Surd::from_int(1).sub(&num.div(&den).unwrap());
        assert_eq!(p.signum(), 1);
        let a = p.approx();
        let expect = 1.0 / (2.0 * (n as f64).powi(4));
        assert!((a / expect - 1.0).abs() < 1e-3, "{a} vs {expect}");
    }

    #[test]
    fn three_radicals_sign() {
        // sqrt2 + sqrt3 - sqrt(10) ~ -0.016
        let v = Surd::scaled_sqrt(Rational::ONE, 2)
            .add(&Surd::scaled_sqrt(Rational::ONE, 3))
            .sub(&Surd::scaled_sqrt(Rational::ONE, 10));
        assert_eq!(v.signum(), -1);
        assert!((v.approx() - (2f64.sqrt() + 3f64.sqrt() - 10f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn division_by_binomial() {
        let a = Surd::from_int(1).add(&Surd::scaled_sqrt(Rational::ONE, 2));
        let q = Surd::from_int(1).div(&a).unwrap();
        assert_eq!(q.mul(&a).unwrap(), Surd::from_int(1));
    }
}
