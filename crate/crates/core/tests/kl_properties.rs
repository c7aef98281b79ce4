use gbl_core::kl::{kl_bernoulli, kl_plus};
use proptest::prelude::*;

fn open_unit() -> impl Strategy<Value = f64> {
    1e-6..(1.0 - 1e-6)
}

proptest! {
    #[test]
    fn pinsker(p in 0.0..=1.0f64, q in open_unit()) {
        let k = kl_bernoulli(p, q).unwrap().value();
        prop_assert!(k >= 2.0 * (p - q).powi(2) - 1e-12);
    }

    #[test]
    fn nonnegative_and_zero_on_diagonal(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let k = kl_bernoulli(p, q).unwrap().value();
        prop_assert!(k >= 0.0);
        prop_assert_eq!(kl_bernoulli(p, p).unwrap().value(), 0.0);
    }

    #[test]
    fn increasing_in_target_above_p(p in open_unit(), d1 in 0.0..1.0f64, d2 in 0.0..1.0f64) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let q1 = p + (1.0 - p) * lo;
        let q2 = p + (1.0 - p) * hi;
        let k1 = kl_bernoulli(p, q1).unwrap().value();
        let k2 = kl_bernoulli(p, q2).unwrap().value();
        prop_assert!(k1 <= k2 + 1e-12, "kl({p}|{q1}) = {k1} > kl({p}|{q2}) = {k2}");
    }

    #[test]
    fn truncated_zero_iff_target_not_above(p in 0.0..=1.0f64, q in -1.0..2.0f64) {
        let k = kl_plus(p, q).unwrap();
        prop_assert_eq!(k.is_zero(), q <= p);
        if q > p {
            prop_assert_eq!(k, kl_bernoulli(p, q.min(1.0)).unwrap());
        }
    }
}

#[test]
fn infinite_at_the_boundary() {
    assert!(kl_bernoulli(0.3, 1.0).unwrap().is_infinite());
    assert!(kl_bernoulli(0.3, 0.0).unwrap().is_infinite());
    assert_eq!(kl_bernoulli(1.0, 1.0).unwrap().value(), 0.0);
    assert!(kl_plus(0.3, 1.7).unwrap().is_infinite());
}

#[test]
fn rejects_out_of_range() {
    assert!(kl_bernoulli(-0.1, 0.5).is_err());
    assert!(kl_bernoulli(0.5, 1.5).is_err());
    assert!(kl_plus(1.1, 0.5).is_err());
    assert!(kl_plus(0.5, f64::NAN).is_err());
}
