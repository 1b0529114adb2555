//! Paired comparisons across seeds.

use statrs::distribution::{Binomial, DiscreteCDF};

/// One-sided sign test that `treatment` exceeds `control` pairwise. Ties are
/// dropped. Returns `(wins, non-tied pairs, p-value)`.
pub fn sign_test_greater(treatment: &[f64], control: &[f64]) -> (usize, usize, f64) {
    assert_eq!(treatment.len(), control.len(), "paired samples differ in length");
    let (mut wins, mut n) = (0usize, 0usize);
    for (t, c) in treatment.iter().zip(control) {
        if t != c {
            n += 1;
            if t > c {
                wins += 1;
            }
        }
    }
    if n == 0 {
        return (0, 0, 1.0);
    }
    if wins == 0 {
        return (0, n, 1.0);
    }
    let binom = Binomial::new(0.5, n as u64).expect("valid binomial");
    // P(X >= wins) = 1 - P(X <= wins - 1)
    (wins, n, binom.sf(wins as u64 - 1))
}
