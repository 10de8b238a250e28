mod common;

use common::oracle_suite::*;

#[test]
fn metrics_match_brute_force_oracles() {
    for (name, worst) in metric_discrepancies() {
        assert!(worst < METRIC_TOL, "{name}: {worst:e}");
    }
}

#[test]
fn anchored_metric_examples() {
    for (name, got, want, tol) in anchored_examples() {
        assert!((got - want).abs() < tol, "{name}: {got} vs {want}");
    }
}

#[test]
fn sinc_cuts_above_cutoff() {
    assert!(sinc_interior_gain(4.0) < 0.1);
    assert!((sinc_interior_gain(1.0) - 1.0).abs() < 0.1);
    assert!((sinc_dc_gain() - 1.0).abs() < 0.01);
}
