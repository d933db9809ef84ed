//! Truncated cohomology of the principal sl_2 complex against brute force
//! and against partitions into parts `>= 2`.

#[path = "support/brst_oracle.rs"]
mod oracle;

use chiral_core::brst::{sl2_principal, TruncationWindow};
use chiral_core::scalar::{rat, Scalar};

fn partitions_min2(n: usize) -> usize {
    let mut p = vec![0usize; n + 1];
    p[0] = 1;
    for part in 2..=n {
        for m in part..=n {
            p[m] += p[m - part];
        }
    }
    p[n]
}

#[test]
fn sl2_cohomology_by_brute_force() {
    let c = sl2_principal(&Scalar::k()).unwrap();
    let engine = c.cohomology(&TruncationWindow::new(3, 4, -1, 1)).unwrap();
    let k0 = rat(1, 3);
    for w in 0..=3i64 {
        for g in -1..=1 {
            let brute = oracle::cohomology_dim(&c, w, g, 4, &k0);
            let expected = if g == 0 { partitions_min2(w as usize) } else { 0 };
            assert_eq!(brute, expected, "w = {}, ghost = {}", w, g);
            assert_eq!(engine.dim(w, g), Some(brute), "w = {}, ghost = {}", w, g);
        }
    }
}

#[test]
fn weight_four_has_two_classes() {
    let c = sl2_principal(&Scalar::k()).unwrap();
    assert_eq!(oracle::cohomology_dim(&c, 4, 0, 5, &rat(2, 7)), partitions_min2(4));
}
