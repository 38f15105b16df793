//! The three building blocks of the construction, usable on their own.

use std::cmp::Ordering;

use crate::numerics::{Backend, NumericError, Rational, Sim};

/// `u ∧ v = ReLU(u + v - 1)` for `u, v ∈ {0, 1}`.
pub fn gadget_and<B: Backend>(b: &B, u: &B::Scalar, v: &B::Scalar) -> Result<B::Scalar, NumericError> {
    b.relu(&b.sub(&b.add(u, v)?, &b.from_int(1))?)
}

pub fn gadget_not<B: Backend>(b: &B, u: &B::Scalar) -> Result<B::Scalar, NumericError> {
    b.sub(&b.from_int(1), u)
}

pub fn gadget_or<B: Backend>(b: &B, u: &B::Scalar, v: &B::Scalar) -> Result<B::Scalar, NumericError> {
    gadget_not(b, &gadget_and(b, &gadget_not(b, u)?, &gadget_not(b, v)?)?)
}

/// `ReLU(LN(u - v)) + ReLU(LN(v - u))`. Despite the name this evaluates to
/// 1 when `u ≠ v` and 0 when `u = v`, which is how the not-found channels
/// use it.
pub fn gadget_equal<B: Backend>(b: &B, u: &B::Scalar, v: &B::Scalar) -> Result<B::Scalar, NumericError> {
    let pos = b.layer_norm(&[b.sub(u, v)?])?.remove(0);
    let neg = b.layer_norm(&[b.sub(v, u)?])?.remove(0);
    b.add(&b.relu(&pos)?, &b.relu(&neg)?)
}

/// Uniform average of `values` over the positions with maximal score.
pub fn hardmax_attend<B: Backend>(
    b: &B,
    scores: &[B::Scalar],
    values: &[Vec<B::Scalar>],
) -> Result<Vec<B::Scalar>, NumericError> {
    assert_eq!(scores.len(), values.len(), "one value per score");
    assert!(!scores.is_empty(), "hardmax over an empty sequence");
    let mut best = 0;
    for j in 1..scores.len() {
        if b.compare(&scores[j], &scores[best])? == Ordering::Greater {
            best = j;
        }
    }
    let mut winners = Vec::new();
    for (j, s) in scores.iter().enumerate() {
        if j == best || b.compare(s, &scores[best])? == Ordering::Equal {
            winners.push(j);
        }
    }
    let mut acc = values[winners[0]].clone();
    for &j in &winners[1..] {
        for (a, x) in acc.iter_mut().zip(&values[j]) {
            *a = b.add(a, x)?;
        }
    }
    if winners.len() > 1 {
        let n = b.from_int(winners.len() as i64);
        acc = acc.iter().map(|x| b.div(x, &n)).collect::<Result<_, _>>()?;
    }
    Ok(acc)
}

/// Smallest `i` whose prefix sum `Σ_{j≤i} v_j` equals the total, found by
/// one causal attention step from the last position: query
/// `(u_{n-1}, p_{n-1})`, key `(u_i, 1/(i+1))` with
/// `u_i = LN(Σ_{j≤i} v_j / (i+1), 1/(i+1))`.
pub fn gadget_farthest_retrieval<B: Backend>(b: &B, values: &[i8]) -> Result<usize, NumericError> {
    assert!(!values.is_empty(), "farthest retrieval over an empty sequence");
    let mut keys = Vec::with_capacity(values.len());
    let mut sum = 0i64;
    for (i, &v) in values.iter().enumerate() {
        assert!((-1..=1).contains(&v), "values must lie in {{-1, 0, 1}}");
        sum += v as i64;
        let inv = Rational::new(1, i as i64 + 1);
        let mut u = b.layer_norm(&[b.from_rational(&Rational::new(sum, i as i64 + 1)), b.from_rational(&inv)])?;
        u.push(b.from_rational(&inv));
        keys.push(u);
    }
    let n = values.len();
    let mut q = keys[n - 1][..2].to_vec();
    q.push(b.positional(n - 1)?);
    let refs: Vec<&[B::Scalar]> = keys.iter().map(Vec::as_slice).collect();
    let winners = b.select_max(&q, &refs, &Sim::Identity)?;
    match winners.as_slice() {
        [i] => Ok(*i),
        _ => Err(NumericError::PrecisionExhausted("farthest retrieval found a tie".into())),
    }
}
