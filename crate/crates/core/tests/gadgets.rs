use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use promptvm::numerics::{Backend, ExactBackend, FloatBackend, Rational};
use promptvm::transformer::{gadget_and, gadget_equal, gadget_farthest_retrieval, gadget_not, gadget_or, hardmax_attend};

fn farthest_by_scan(v: &[i8]) -> usize {
    let total: i64 = v.iter().map(|&x| x as i64).sum();
    let mut acc = 0;
    v.iter().position(|&x| {
        acc += x as i64;
        acc == total
    })
    .unwrap()
}

fn int(n: i64) -> promptvm::numerics::Surd {
    ExactBackend.from_int(n)
}

#[test]
fn boolean_truth_tables() {
    let b = ExactBackend;
    for u in 0..2 {
        b.to_rational(&gadget_not(&b, &int(u)).unwrap()).map(|r| assert_eq!(r, Rational::from_int(1 - u)));
        for v in 0..2 {
            let and = b.to_rational(&gadget_and(&b, &int(u), &int(v)).unwrap()).unwrap();
            let or = b.to_rational(&gadget_or(&b, &int(u), &int(v)).unwrap()).unwrap();
            assert_eq!(and, Rational::from_int(u & v));
            assert_eq!(or, Rational::from_int(u | v));
        }
    }
}

#[test]
fn hardmax_examples() {
    let b = ExactBackend;
    let values: Vec<Vec<_>> = (0..3).map(|i| vec![int(10 * i)]).collect();
    let out = hardmax_attend(&b, &[int(0), int(2), int(1)], &values).unwrap();
    assert_eq!(b.to_rational(&out[0]), Some(Rational::from_int(10)));
    let out = hardmax_attend(&b, &[int(4), int(4), int(4)], &values).unwrap();
    assert_eq!(b.to_rational(&out[0]), Some(Rational::from_int(10)));
}

#[test]
fn farthest_retrieval_on_random_long_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let n = rng.gen_range(13..40);
        let v: Vec<i8> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
        assert_eq!(gadget_farthest_retrieval(&ExactBackend, &v).unwrap(), farthest_by_scan(&v), "{v:?}");
    }
}

#[test]
fn farthest_retrieval_with_floats() {
    // 64 significant bits separate all keys of these lengths.
    let b = FloatBackend::rounded(64, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let n = rng.gen_range(1..30);
        let v: Vec<i8> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
        assert_eq!(gadget_farthest_retrieval(&b, &v).unwrap(), farthest_by_scan(&v), "{v:?}");
    }
}

proptest! {
    #[test]
    fn equal_flags_differences(a in -1000i64..1000, b in 1i64..50, c in -1000i64..1000, d in 1i64..50, same in any::<bool>()) {
        let be = ExactBackend;
        let u = Rational::new(a, b);
        let v = if same { u.clone() } else { Rational::new(c, d) };
        let r = gadget_equal(&be, &be.from_rational(&u), &be.from_rational(&v)).unwrap();
        prop_assert_eq!(be.to_rational(&r), Some(Rational::from_int((u != v) as i64)));
    }
}
