use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::rational::Rational;
use super::surd::Surd;
use super::{Backend, NumericError, Sim};

/// Ground-truth arithmetic over `Q(sqrt 2, sqrt 3, ...)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactBackend;

/// `LN` of a rational vector, computed exactly.
pub(crate) fn layer_norm_rational(v: &[Rational]) -> Result<Vec<Surd>, NumericError> {
    if v.iter().all(Rational::is_zero) {
        return Ok(vec![Surd::zero(); v.len()]);
    }
    match layer_norm_small(v) {
        Some(out) => Ok(out),
        None => layer_norm_big(v),
    }
}

fn layer_norm_big(v: &[Rational]) -> Result<Vec<Surd>, NumericError> {
    // Scale to a primitive integer vector; LN is invariant under positive scaling.
    let mut lcm = BigInt::one();
    for q in v {
        lcm = lcm.lcm(&q.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|q| q.numer() * (&lcm / q.denom())).collect();
    let mut g = BigInt::zero();
    for n in &ints {
        g = g.gcd(n);
    }
    let ints: Vec<BigInt> = ints.into_iter().map(|n| n / &g).collect();
    let norm2: BigInt = ints.iter().map(|n| n * n).sum();
    let norm2 = norm2
        .to_u128()
        .ok_or_else(|| NumericError::NotRepresentable("layer norm input too large".into()))?;
    // |v| = f sqrt(s); component k is n_k / (f sqrt s) = n_k / (f s) * sqrt s
    let (f, s) = super::surd::square_part(norm2);
    let den = BigInt::from(f) * BigInt::from(s);
    Ok(ints
        .into_iter()
        .map(|n| Surd::scaled_sqrt(Rational::from_bigints(n, den.clone()), s))
        .collect())
}

/// Machine-integer path of `layer_norm_rational`; `None` on overflow or
/// when an entry is not a small rational.
fn layer_norm_small(v: &[Rational]) -> Option<Vec<Surd>> {
    let gcd = |mut a: i128, mut b: i128| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    };
    let mut lcm: i128 = 1;
    for q in v {
        let Rational::Small(_, d) = q else { return None };
        let d = *d as i128;
        lcm = (lcm / gcd(lcm, d)).checked_mul(d)?;
    }
    let mut ints = Vec::with_capacity(v.len());
    let mut g = 0;
    for q in v {
        let Rational::Small(n, d) = q else { return None };
        let x = (*n as i128).checked_mul(lcm / *d as i128)?;
        g = gcd(g, x);
        ints.push(x);
    }
    let mut norm2: u128 = 0;
    for x in &mut ints {
        *x /= g;
        norm2 = norm2.checked_add(x.unsigned_abs().checked_mul(x.unsigned_abs())?)?;
    }
    let (f, s) = super::surd::square_part(norm2);
    let den = i128::try_from(f.checked_mul(s)?).ok()?;
    Some(ints.into_iter().map(|n| Surd::scaled_sqrt(Rational::from_i128(n, den), s)).collect())
}

pub(crate) fn positional_exact(i: usize) -> Result<Surd, NumericError> {
    let a = (i as u128 + 1) * (i as u128 + 1) + 1;
    let b = (i as u128 + 2) * (i as u128 + 2) + 1;
    let num = Surd::from_rational(Rational::from_bigints(
        BigInt::from((i as u128 + 1) * (i as u128 + 2) + 1),
        BigInt::one(),
    ));
    let den = Surd::scaled_sqrt(Rational::ONE, a).mul(&Surd::scaled_sqrt(Rational::ONE, b))?;
    Ok(Surd::from_int(1).sub(&num.div(&den)?))
}

/// Relative accuracy of `Surd::approx`, with slack.
const EPS: f64 = 1.0 / (1u64 << 46) as f64;

impl ExactBackend {
    /// Exact sign of `q . (ka - kb)`.
    fn diff_sign(&self, q: &[Surd], ka: &[Surd], kb: &[Surd]) -> Result<i32, NumericError> {
        let mut acc = Surd::zero();
        for ((qd, a), b) in q.iter().zip(ka).zip(kb) {
            if a == b || qd.is_zero() {
                continue;
            }
            acc = acc.add(&qd.mul(&a.sub(b))?);
        }
        Ok(acc.signum())
    }

    /// f64 estimate of `q . (ka - kb)` with a bound on its error.
    fn diff_estimate(q: &[f64], qs: &[Surd], ka: &[Surd], kb: &[Surd]) -> (f64, f64) {
        let mut est = 0.0;
        let mut err = 0.0;
        for (d, ((qd, a), b)) in qs.iter().zip(ka).zip(kb).enumerate() {
            if a == b || qd.is_zero() {
                continue;
            }
            let (x, y) = (a.approx(), b.approx());
            let t = q[d] * (x - y);
            est += t;
            err += q[d].abs() * (x.abs() + y.abs()) * 4.0 * EPS + t.abs() * 4.0 * EPS;
        }
        (est, err + est.abs() * 4.0 * EPS)
    }

    fn score_vs_cap(&self, q: &[Surd], k: &[Surd], cap: &Surd) -> Result<Ordering, NumericError> {
        let mut est = 0.0;
        let mut mag = 0.0;
        for (a, b) in q.iter().zip(k) {
            let t = a.approx() * b.approx();
            est += t;
            mag += t.abs();
        }
        let c = cap.approx();
        let err = (mag + c.abs()) * 8.0 * EPS;
        if est - c > err {
            return Ok(Ordering::Greater);
        }
        if est - c < -err {
            return Ok(Ordering::Less);
        }
        Ok(self.dot(q, k)?.cmp_value(cap))
    }

    fn argmax_identity(&self, q: &[Surd], keys: &[&[Surd]]) -> Result<Vec<usize>, NumericError> {
        let qa: Vec<f64> = q.iter().map(Surd::approx).collect();
        let approx_score = |k: &[Surd]| -> f64 { k.iter().zip(&qa).map(|(x, y)| x.approx() * y).sum() };
        let mut best = (0..keys.len())
            .max_by(|&a, &b| approx_score(keys[a]).total_cmp(&approx_score(keys[b])))
            .unwrap_or(0);
        'restart: loop {
            let mut ties = vec![best];
            let mut better: Option<(usize, f64)> = None;
            for (j, k) in keys.iter().enumerate() {
                if j == best {
                    continue;
                }
                let (est, err) = Self::diff_estimate(&qa, q, k, keys[best]);
                let sign = if est > err {
                    1
                } else if est < -err {
                    -1
                } else {
                    self.diff_sign(q, k, keys[best])?
                };
                match sign {
                    1 => {
                        if better.map_or(true, |(_, e)| est > e) {
                            better = Some((j, est));
                        }
                    }
                    0 => ties.push(j),
                    _ => {}
                }
            }
            if let Some((j, _)) = better {
                best = j;
                continue 'restart;
            }
            ties.sort_unstable();
            return Ok(ties);
        }
    }
}

impl Backend for ExactBackend {
    type Scalar = Surd;
    type Key = Vec<Surd>;

    fn label(&self) -> String {
        "exact".into()
    }

    fn from_rational(&self, q: &Rational) -> Surd {
        Surd::from_rational(q.clone())
    }

    fn is_zero(&self, a: &Surd) -> bool {
        a.is_zero()
    }

    fn add(&self, a: &Surd, b: &Surd) -> Result<Surd, NumericError> {
        Ok(a.add(b))
    }

    fn sub(&self, a: &Surd, b: &Surd) -> Result<Surd, NumericError> {
        Ok(a.sub(b))
    }

    fn mul(&self, a: &Surd, b: &Surd) -> Result<Surd, NumericError> {
        a.mul(b)
    }

    fn div(&self, a: &Surd, b: &Surd) -> Result<Surd, NumericError> {
        a.div(b)
    }

    fn neg(&self, a: &Surd) -> Surd {
        a.neg()
    }

    fn sqrt(&self, a: &Surd) -> Result<Surd, NumericError> {
        if a.signum() < 0 {
            return Err(NumericError::NegativeSqrt);
        }
        a.sqrt()
    }

    fn compare(&self, a: &Surd, b: &Surd) -> Result<Ordering, NumericError> {
        Ok(a.cmp_value(b))
    }

    fn relu(&self, a: &Surd) -> Result<Surd, NumericError> {
        Ok(if a.signum() > 0 { a.clone() } else { Surd::zero() })
    }

    fn layer_norm(&self, v: &[Surd]) -> Result<Vec<Surd>, NumericError> {
        if let [x] = v {
            return Ok(vec![Surd::from_int(x.signum() as i64)]);
        }
        let rats: Option<Vec<Rational>> = v.iter().map(Surd::as_rational).collect();
        match rats {
            Some(r) => layer_norm_rational(&r),
            None => Err(NumericError::NotRepresentable(
                "layer norm of a vector with irrational entries".into(),
            )),
        }
    }

    fn positional(&self, i: usize) -> Result<Surd, NumericError> {
        positional_exact(i)
    }

    fn approx(&self, a: &Surd) -> f64 {
        a.approx()
    }

    fn to_rational(&self, a: &Surd) -> Option<Rational> {
        a.as_rational()
    }

    fn key(&self, v: &[Surd]) -> Option<Vec<Surd>> {
        Some(v.to_vec())
    }

    fn screen_tolerance(&self) -> f64 {
        // Approximations are accurate to about 2^-46 relative.
        1e-12
    }

    fn render(&self, a: &Surd) -> String {
        a.to_string()
    }

    fn select_max(&self, q: &[Surd], keys: &[&[Surd]], sim: &Sim) -> Result<Vec<usize>, NumericError> {
        if keys.len() <= 1 {
            return Ok((0..keys.len()).collect());
        }
        if let Sim::Min(c) = sim {
            let cap = Surd::from_rational(c.clone());
            let mut at_cap = Vec::new();
            for (j, k) in keys.iter().enumerate() {
                if self.score_vs_cap(q, k, &cap)? != Ordering::Less {
                    at_cap.push(j);
                }
            }
            if !at_cap.is_empty() {
                return Ok(at_cap);
            }
        }
        self.argmax_identity(q, keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64, d: i64) -> Surd {
        Surd::from_rational(Rational::new(n, d))
    }

    #[test]
    fn p0_value() {
        let p = positional_exact(0).unwrap();
        // 1 - 3/sqrt(10)
        assert!((p.approx() - (1.0 - 3.0 / 10f64.sqrt())).abs() < 1e-15);
        assert!((p.approx() - 0.05132).abs() < 1e-5);
    }

    #[test]
    fn positional_strictly_decreasing() {
        let mut prev = positional_exact(0).unwrap();
        for i in 1..200 {
            let p = positional_exact(i).unwrap();
            assert_eq!(p.cmp_value(&prev), Ordering::Less);
            prev = p;
        }
    }

    #[test]
    fn small_and_big_layer_norm_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let len = rng.gen_range(1..4);
            let v: Vec<Rational> =
                (0..len).map(|_| Rational::new(rng.gen_range(-50..50), rng.gen_range(1..40))).collect();
            if v.iter().all(Rational::is_zero) {
                continue;
            }
            assert_eq!(layer_norm_small(&v), Some(layer_norm_big(&v).unwrap()), "{v:?}");
        }
    }

    #[test]
    fn layer_norm_of_counts() {
        let b = ExactBackend;
        let out = b.layer_norm(&[s(3, 7), s(1, 7)]).unwrap();
        // (3, 1) / sqrt(10)
        assert!((out[0].approx() - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        let d = b.dot(&out, &out).unwrap();
        assert_eq!(d, Surd::from_int(1));
        assert_eq!(b.layer_norm(&[s(-5, 2)]).unwrap(), vec![Surd::from_int(-1)]);
        assert_eq!(b.layer_norm(&[s(0, 1), s(0, 1)]).unwrap(), vec![Surd::zero(), Surd::zero()]);
    }

    #[test]
    fn select_max_finds_ties_and_tiny_gaps() {
        let b = ExactBackend;
        let p = positional_exact(5000).unwrap();
        let q = vec![s(1, 1), p.clone()];
        // scores 1 - p/(j+1)-like differences of order 1e-23
        let keys: Vec<Vec<Surd>> = (0..5).map(|j| vec![s(1, 1), s(-1, 4000 + j)]).collect();
        let refs: Vec<&[Surd]> = keys.iter().map(|k| k.as_slice()).collect();
        assert_eq!(b.select_max(&q, &refs, &Sim::Identity).unwrap(), vec![4]);
        let keys: Vec<Vec<Surd>> = (0..3).map(|_| vec![s(1, 1), s(-1, 9)]).collect();
        let refs: Vec<&[Surd]> = keys.iter().map(|k| k.as_slice()).collect();
        assert_eq!(b.select_max(&q, &refs, &Sim::Identity).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn select_max_with_cap() {
        let b = ExactBackend;
        let q = vec![s(1, 1)];
        let keys: Vec<Vec<Surd>> = vec![vec![s(3, 1)], vec![s(2, 1)], vec![s(1, 1)]];
        let refs: Vec<&[Surd]> = keys.iter().map(|k| k.as_slice()).collect();
        assert_eq!(b.select_max(&q, &refs, &Sim::Min(Rational::from_int(2))).unwrap(), vec![0, 1]);
    }
}
