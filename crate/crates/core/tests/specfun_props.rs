use iedl::specfun::{digamma, log_gamma, tetragamma, trigamma, PositiveReal};
use proptest::prelude::*;

fn pr(x: f64) -> PositiveReal {
    PositiveReal::new(x).unwrap()
}

/// Tolerance scaled by magnitude once |value| exceeds 1: near x → 0 the
/// polygammas blow up like x^-(n+1) and a fixed absolute bound falls below
/// one ulp.
fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs().max(1.0)
}

// (x, lnΓ, ψ, ψ1, ψ2) evaluated at 30 significant digits.
const REFERENCE: [(f64, f64, f64, f64, f64); 7] = [
    (0.001, 6.9071788853838536825, -1000.5755719318103005, 1000001.642533195869, -2000000002.3976322897),
    (0.1, 2.2527126517342059599, -10.423754940411076795, 101.43329915079275882, -2001.8614573783440063),
    (0.7, 0.26086724653166651439, -1.2200235536979346147, 2.8340491566946106268, -6.4349928741909225451),
    (3.3, 0.98709857789473458788, 1.0348224890596217491, 0.35350154184106181026, -0.12375118526494271037),
    (17.5, 32.081114895947349487, 2.8333574322286841031, 0.058806588095783507448, -0.0034572203720343102715),
    (1234.5, 7550.5509010778948957, 7.1180162318279978433, 0.0008103727271269666527, -6.5670392093287152052e-7),
    (1000000.0, 12815504.56914761166, 13.815510057964190771, 1.0000005000001666667e-6, -1.0000010000005e-12),
];

#[test]
fn matches_high_precision_reference() {
    for &(x, lg, dg, tg, qg) in &REFERENCE {
        let x = pr(x);
        assert!((log_gamma(x) - lg).abs() <= 1e-12 * lg.abs(), "lnΓ({x:?})");
        assert!(close(digamma(x), dg, 1e-10), "ψ({x:?})");
        assert!(close(trigamma(x), tg, 1e-10), "ψ1({x:?})");
        assert!(close(tetragamma(x), qg, 1e-8), "ψ2({x:?})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn digamma_recurrence(x in 1e-3f64..100.0) {
        let lhs = digamma(pr(x + 1.0)) - digamma(pr(x));
        prop_assert!(close(lhs, 1.0 / x, 1e-10), "x={} lhs={} want={}", x, lhs, 1.0 / x);
    }

    #[test]
    fn trigamma_recurrence(x in 1e-3f64..100.0) {
        let lhs = trigamma(pr(x + 1.0)) - trigamma(pr(x));
        prop_assert!(close(lhs, -1.0 / (x * x), 1e-10));
    }

    #[test]
    fn tetragamma_recurrence(x in 1e-3f64..100.0) {
        let lhs = tetragamma(pr(x + 1.0)) - tetragamma(pr(x));
        prop_assert!(close(lhs, 2.0 / (x * x * x), 1e-8));
    }

    #[test]
    fn each_order_is_the_derivative_of_the_previous(x in 0.05f64..200.0) {
        let h = 1e-5 * x.max(1.0);
        let fd = |f: fn(PositiveReal) -> f64| (f(pr(x + h)) - f(pr(x - h))) / (2.0 * h);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        prop_assert!(rel(fd(log_gamma), digamma(pr(x))) < 1e-6 || (fd(log_gamma) - digamma(pr(x))).abs() < 1e-8);
        prop_assert!(rel(fd(digamma), trigamma(pr(x))) < 1e-6);
        prop_assert!(rel(fd(trigamma), tetragamma(pr(x))) < 1e-6);
    }

    #[test]
    fn trigamma_positive_decreasing_tetragamma_negative(x in 1e-3f64..1e6, step in 1e-6f64..10.0) {
        prop_assert!(trigamma(pr(x)) > 0.0);
        prop_assert!(trigamma(pr(x + step * x)) < trigamma(pr(x)));
        prop_assert!(tetragamma(pr(x)) < 0.0);
    }
}
