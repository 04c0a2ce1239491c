use callnet::validate::{hypergeom_pmf, pvalue_over};
use callnet_oracles::{close, hypergeom_pmf as exact_pmf, hypergeom_upper_tail};

#[test]
fn exhaustive_small_populations() {
    let mut checked = 0;
    for n in 1..=30u64 {
        for a in 0..=n {
            for b in 0..=a {
                let hi = a.min(b);
                for x in 0..=hi + 1 {
                    let want = hypergeom_upper_tail(x, n, a, b);
                    let got = pvalue_over(x, n, a, b).unwrap();
                    assert!(close(got, want, 1e-12), "P(X >= {x}) for N={n} N_ic={a} N_jr={b}: {got} vs {want}");
                    // The test is symmetric in the two marginals.
                    assert_eq!(got, pvalue_over(x, n, b, a).unwrap());
                    let pmf = hypergeom_pmf(x, n, a, b).unwrap();
                    assert!(close(pmf, exact_pmf(x, n, a, b), 1e-12));
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn large_population_samples() {
    let n = 1_000_000;
    let cases = [
        (10, 10, 1),
        (10, 10, 2),
        (120, 95, 3),
        (1_000, 1_000, 1),
        (1_000, 1_000, 4),
        (1_000, 1_000, 12),
        (5_000, 3_000, 30),
        (40, 40, 40),
        (40, 60, 25),
        (50_000, 20_000, 1_100),
        (300_000, 200, 95),
        (999_000, 2_000, 1_999),
    ];
    for (a, b, x) in cases {
        let want = hypergeom_upper_tail(x, n, a, b);
        let got = pvalue_over(x, n, a, b).unwrap();
        assert!(want > f64::MIN_POSITIVE);
        assert!(close(got, want, 1e-9), "N_ic={a} N_jr={b} X={x}: {got:e} vs {want:e}");
    }
}

#[test]
fn invalid_parameters_are_errors() {
    assert!(pvalue_over(0, 5, 6, 1).is_err());
    assert!(pvalue_over(0, 5, 1, 6).is_err());
    assert!(hypergeom_pmf(0, 0, 1, 0).is_err());
}
