use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::bigfloat::BigFloat;
use super::exact::{layer_norm_rational, positional_exact};
use super::radius::Radius;
use super::rational::Rational;
use super::surd::{Surd, Term};
use super::{Backend, NumericError, PrecisionConfig};

/// How comparisons treat operands that cannot be told apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloatMode {
    /// Round both operands to the significant bits (dropping guard bits) and
    /// compare; equal roundings are an error unless certified equal.
    Rounded,
    /// Decide only when the tracked error radii separate the operands.
    Certified,
}

/// A float value with an error radius and, when known, its exact value as a
/// single term `c * sqrt(s)`.
///
/// The exact term is used only to certify equality; orderings always come
/// from the float value.
#[derive(Debug, Clone)]
pub struct FloatScalar {
    pub value: BigFloat,
    pub err: Radius,
    pub exact: Option<Term>,
}

impl FloatScalar {
    fn exact_value(&self) -> Option<Surd> {
        self.exact.as_ref().map(|t| Surd::from_term(t.clone()))
    }
}

fn single_term(s: &Surd) -> Option<Term> {
    match s.terms() {
        [] => Some(Term { coef: Rational::ZERO, rad: 1 }),
        [t] => Some(t.clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatBackend {
    pub significant_bits: u32,
    pub guard_bits: u32,
    pub mode: FloatMode,
}

impl FloatBackend {
    pub fn new(config: &PrecisionConfig, mode: FloatMode) -> Self {
        FloatBackend {
            significant_bits: config.significant_bits,
            guard_bits: config.guard_bits,
            mode,
        }
    }

    pub fn rounded(significant_bits: u32, guard_bits: u32) -> Self {
        FloatBackend { significant_bits, guard_bits, mode: FloatMode::Rounded }
    }

    pub fn certified(significant_bits: u32, guard_bits: u32) -> Self {
        FloatBackend { significant_bits, guard_bits, mode: FloatMode::Certified }
    }

    pub fn precision(&self) -> u32 {
        self.significant_bits + self.guard_bits
    }

    fn rounding(&self, v: &BigFloat) -> Radius {
        match v.msb() {
            None => Radius::ZERO,
            Some(m) => Radius::pow2(m - self.precision() as i64),
        }
    }

    fn make(&self, value: BigFloat, err: Radius, exact: Option<Term>) -> FloatScalar {
        let err = err.add(self.rounding(&value));
        FloatScalar { value, err, exact }
    }

    fn exact_of(&self, a: &FloatScalar) -> Option<Surd> {
        a.exact_value()
    }

    fn combine<F>(&self, a: &FloatScalar, b: &FloatScalar, f: F) -> Option<Term>
    where
        F: FnOnce(&Surd, &Surd) -> Option<Surd>,
    {
        let (x, y) = (self.exact_of(a)?, self.exact_of(b)?);
        single_term(&f(&x, &y)?)
    }

    fn certified_equal(&self, a: &FloatScalar, b: &FloatScalar) -> bool {
        match (&a.exact, &b.exact) {
            (Some(x), Some(y)) => x == y || (x.coef.is_zero() && y.coef.is_zero()),
            _ => false,
        }
    }

    fn exhausted(&self, a: &FloatScalar, b: &FloatScalar) -> NumericError {
        NumericError::PrecisionExhausted(format!(
            "cannot order {} and {} at {}+{} bits",
            a.value, b.value, self.significant_bits, self.guard_bits
        ))
    }
}

impl Backend for FloatBackend {
    type Scalar = FloatScalar;
    type Key = Vec<Term>;

    fn label(&self) -> String {
        format!("float({}+{})", self.significant_bits, self.guard_bits)
    }

    fn from_rational(&self, q: &Rational) -> FloatScalar {
        let value = BigFloat::from_rational(q, self.precision());
        let exact_repr = value.to_rational() == *q;
        let err = if exact_repr { Radius::ZERO } else { self.rounding(&value) };
        FloatScalar { value, err, exact: Some(Term { coef: q.clone(), rad: 1 }) }
    }

    fn is_zero(&self, a: &FloatScalar) -> bool {
        a.value.is_zero() && a.err.is_zero() && a.exact.as_ref().is_some_and(|t| t.coef.is_zero())
    }

    fn add(&self, a: &FloatScalar, b: &FloatScalar) -> Result<FloatScalar, NumericError> {
        let v = a.value.add(&b.value, self.precision());
        let exact = self.combine(a, b, |x, y| Some(x.add(y)));
        Ok(self.make(v, a.err.add(b.err), exact))
    }

    fn sub(&self, a: &FloatScalar, b: &FloatScalar) -> Result<FloatScalar, NumericError> {
        self.add(a, &self.neg(b))
    }

    fn mul(&self, a: &FloatScalar, b: &FloatScalar) -> Result<FloatScalar, NumericError> {
        let v = a.value.mul(&b.value, self.precision());
        let err = Radius::magnitude(&a.value)
            .mul(b.err)
            .add(Radius::magnitude(&b.value).mul(a.err))
            .add(a.err.mul(b.err));
        let exact = self.combine(a, b, |x, y| x.mul(y).ok());
        Ok(self.make(v, err, exact))
    }

    fn div(&self, a: &FloatScalar, b: &FloatScalar) -> Result<FloatScalar, NumericError> {
        if b.value.is_zero() {
            return Err(if b.exact.as_ref().is_some_and(|t| t.coef.is_zero()) || b.err.is_zero() {
                NumericError::DivisionByZero
            } else {
                self.exhausted(a, b)
            });
        }
        let lo_b = Radius::magnitude_below(&b.value);
        if lo_b.cmp(&b.err) != Ordering::Greater {
            return Err(self.exhausted(a, b));
        }
        let v = a.value.div(&b.value, self.precision());
        // |a/b - a'/b'| <= (|a| eb + |b| ea) / (|b| (|b| - eb)), bounded crudely
        // with |b| - eb >= |b| / 2 once eb is at most half of |b|.
        let num = Radius::magnitude(&a.value).mul(b.err).add(Radius::magnitude(&b.value).mul(a.err));
        let err = if b.err.mul(Radius::pow2(1)).cmp(&lo_b) == Ordering::Greater {
            return Err(self.exhausted(a, b));
        } else {
            num.mul(Radius::pow2(1)).div(lo_b.mul(lo_b))
        };
        let exact = self.combine(a, b, |x, y| x.div(y).ok());
        Ok(self.make(v, err, exact))
    }

    fn neg(&self, a: &FloatScalar) -> FloatScalar {
        FloatScalar {
            value: a.value.neg(),
            err: a.err,
            exact: a.exact.as_ref().map(|t| Term { coef: t.coef.neg(), rad: t.rad }),
        }
    }

    fn sqrt(&self, a: &FloatScalar) -> Result<FloatScalar, NumericError> {
        if a.value.is_negative() {
            return Err(NumericError::NegativeSqrt);
        }
        let v = a.value.sqrt(self.precision());
        let lo = Radius::magnitude_below(&a.value);
        let err = if lo.cmp(&a.err.mul(Radius::pow2(1))) == Ordering::Greater {
            // sqrt(x + e) - sqrt(x) <= e / sqrt(x)
            a.err.div(lo.sqrt())
        } else {
            Radius::magnitude(&a.value).add(a.err).sqrt()
        };
        let exact = self
            .exact_of(a)
            .and_then(|x| x.as_rational())
            .and_then(|q| Surd::from_rational(q).sqrt().ok())
            .and_then(|s| single_term(&s));
        Ok(self.make(v, err, exact))
    }

    fn compare(&self, a: &FloatScalar, b: &FloatScalar) -> Result<Ordering, NumericError> {
        if self.certified_equal(a, b) {
            return Ok(Ordering::Equal);
        }
        match self.mode {
            FloatMode::Rounded => {
                let ra = a.value.round(self.significant_bits);
                let rb = b.value.round(self.significant_bits);
                match ra.cmp_value(&rb) {
                    Ordering::Equal => Err(self.exhausted(a, b)),
                    o => Ok(o),
                }
            }
            FloatMode::Certified => {
                let d = a.value.sub(&b.value, u32::MAX);
                if a.err.add(b.err).below_magnitude(&d) {
                    Ok(if d.is_negative() { Ordering::Less } else { Ordering::Greater })
                } else {
                    Err(self.exhausted(a, b))
                }
            }
        }
    }

    /// ReLU is continuous, so near zero either branch is within rounding of
    /// the other and no ordering is needed.
    fn relu(&self, a: &FloatScalar) -> Result<FloatScalar, NumericError> {
        let positive = match &a.exact {
            Some(t) => t.coef.signum() > 0,
            None => !a.value.is_zero() && !a.value.is_negative(),
        };
        Ok(if positive { a.clone() } else { self.zero() })
    }

    fn layer_norm(&self, v: &[FloatScalar]) -> Result<Vec<FloatScalar>, NumericError> {
        if let [x] = v {
            let s = match self.compare(x, &self.zero())? {
                Ordering::Greater => 1,
                Ordering::Less => -1,
                Ordering::Equal => 0,
            };
            return Ok(vec![self.from_int(s)]);
        }
        let exact: Option<Vec<Rational>> = v
            .iter()
            .map(|x| self.exact_of(x).and_then(|s| s.as_rational()))
            .collect();
        let exact = match exact {
            Some(r) => Some(layer_norm_rational(&r)?),
            None => None,
        };
        if v.iter().all(|x| x.value.is_zero()) {
            if exact.as_ref().is_some_and(|e| e.iter().all(Surd::is_zero)) {
                return Ok(v.iter().map(|_| self.zero()).collect());
            }
            return Err(NumericError::PrecisionExhausted("layer norm of an uncertified zero vector".into()));
        }
        // Exact values are attached afterwards from the exact layer norm.
        let v: Vec<FloatScalar> = v.iter().map(|x| FloatScalar { exact: None, ..x.clone() }).collect();
        let mut norm2 = self.zero();
        for x in &v {
            norm2 = self.add(&norm2, &self.mul(x, x)?)?;
        }
        let norm = self.sqrt(&norm2)?;
        let mut out = Vec::with_capacity(v.len());
        for (k, x) in v.iter().enumerate() {
            let mut y = self.div(x, &norm)?;
            y.exact = exact.as_ref().and_then(|e| single_term(&e[k]));
            out.push(y);
        }
        Ok(out)
    }

    fn positional(&self, i: usize) -> Result<FloatScalar, NumericError> {
        // The positional value is an input to the network: store it correctly
        // rounded rather than recomputing it with cancellation.
        let p = positional_exact(i)?;
        let approx_bits = self.precision() + 8 * (64 - (i as u64 + 2).leading_zeros()) + 16;
        let q = surd_to_rational(&p, approx_bits);
        let value = BigFloat::from_rational(&q, self.precision());
        let err = self.rounding(&value).mul(Radius::pow2(1));
        Ok(FloatScalar { value, err, exact: None })
    }

    fn approx(&self, a: &FloatScalar) -> f64 {
        a.value.to_f64()
    }

    fn to_rational(&self, a: &FloatScalar) -> Option<Rational> {
        self.exact_of(a).and_then(|s| s.as_rational())
    }

    fn key(&self, v: &[FloatScalar]) -> Option<Vec<Term>> {
        v.iter().map(|x| x.exact.clone()).collect()
    }

    fn screen_tolerance(&self) -> f64 {
        (2f64.powi(-(self.significant_bits as i32) + 4)).max(1e-12)
    }

    fn render(&self, a: &FloatScalar) -> String {
        format!("{:e}", a.value.to_f64())
    }
}

/// A dyadic rational within `2^-bits` of `s`.
pub(crate) fn surd_to_rational(s: &Surd, bits: u32) -> Rational {
    let (lo, _) = s.scaled_bounds_pub(bits);
    Rational::from_bigints(lo, num_bigint::BigInt::from(1) << bits as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_half_squared_is_certified_half() {
        let b = FloatBackend::certified(64, 32);
        let h = b.sqrt(&b.from_rational(&Rational::new(1, 2))).unwrap();
        let x = b.mul(&h, &h).unwrap();
        assert_eq!(b.compare(&x, &b.from_rational(&Rational::new(1, 2))).unwrap(), Ordering::Equal);
    }

    #[test]
    fn rounded_mode_drops_guard_bits() {
        let b = FloatBackend::rounded(8, 32);
        let x = b.from_rational(&Rational::new(1, 3));
        let y = b.add(&x, &b.from_rational(&Rational::new(1, 1 << 20))).unwrap();
        // differ only below the significant bits and carry no exact value
        let y = FloatScalar { exact: None, ..y };
        assert!(matches!(b.compare(&x, &y), Err(NumericError::PrecisionExhausted(_))));
        let wide = FloatBackend::rounded(40, 32);
        let x = wide.from_rational(&Rational::new(1, 3));
        let y = wide.add(&x, &wide.from_rational(&Rational::new(1, 1 << 20))).unwrap();
        assert_eq!(wide.compare(&x, &y).unwrap(), Ordering::Less);
    }

    #[test]
    fn certified_compare_of_unit_components() {
        let b = FloatBackend::certified(64, 32);
        let u = |k: i64| {
            b.layer_norm(&[b.from_int(k), b.from_int(1)]).unwrap().remove(0)
        };
        assert_eq!(b.compare(&u(5), &u(6)).unwrap(), Ordering::Less);
        assert_eq!(b.compare(&u(6), &u(6)).unwrap(), Ordering::Equal);
    }

    #[test]
    fn positional_is_correctly_rounded() {
        let b = FloatBackend::rounded(53, 0);
        for i in [0usize, 1, 10, 1000, 100_000] {
            let p = b.positional(i).unwrap();
            let e = positional_exact(i).unwrap().approx();
            assert!(((p.value.to_f64() - e) / e).abs() < 1e-14, "i = {i}");
        }
    }
}
