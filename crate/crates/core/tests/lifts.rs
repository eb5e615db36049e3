use std::sync::Arc;

use formprime::arith::{self, PrimeTable};
use formprime::compose;
use formprime::equiv::Classifier;
use formprime::qform;

#[test]
fn two_lifts_represent_a_subset_of_primes() {
    let primes = Arc::new(PrimeTable::new(100_000).unwrap());
    let cl = Classifier::new(primes.clone(), compose::composer("dirichlet").unwrap());
    let mut lifted = 0;
    for n in 3..=600i64 {
        if !arith::is_discriminant(-n) {
            continue;
        }
        for q in qform::enumerate_gl2(-n).unwrap() {
            let Some(lift) = cl.two_lift(&q).unwrap() else {
                continue;
            };
            assert_eq!(lift.discriminant(), -4 * n, "{q} -> {lift}");
            let below = qform::represented_primes(&q, &primes).unwrap();
            let above = qform::represented_primes(&lift, &primes).unwrap();
            assert!(above.is_subset(&below), "{lift} is not a 2-lift of {q}");
            lifted += 1;
        }
    }
    assert!(lifted > 500, "{lifted}");
}
