use ctpt_core::ctpt::{cdf, logpdf, offset_m, pdf, quantile, skewness_ag, variance, CtptSpec, TailSpec};
use proptest::prelude::*;

fn tail() -> impl Strategy<Value = TailSpec> {
    prop_oneof![(2.05f64..200.0).prop_map(TailSpec::Finite), Just(TailSpec::NormalLimit)]
}

proptest! {
    #[test]
    fn reflection_in_gamma(g in 0.2f64..5.0, t in tail(), x in -20.0f64..20.0) {
        let a = CtptSpec::new(g, t).unwrap();
        let b = CtptSpec::new(1.0 / g, t).unwrap();
        prop_assert!((pdf(x, &a) - pdf(-x, &b)).abs() < 1e-12);
        prop_assert!((offset_m(&a) + offset_m(&b)).abs() < 1e-12);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(g in 0.2f64..5.0, t in tail(), x in -30.0f64..30.0, dx in 1e-3f64..5.0) {
        let s = CtptSpec::new(g, t).unwrap();
        let lo = cdf(x, &s).unwrap();
        let hi = cdf(x + dx, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(hi >= lo);
    }

    #[test]
    fn quantile_inverts_cdf(g in 0.2f64..5.0, t in tail(), p in 1e-6f64..(1.0 - 1e-6)) {
        let s = CtptSpec::new(g, t).unwrap();
        let x = quantile(p, &s).unwrap();
        prop_assert!((cdf(x, &s).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn density_finite_and_variance_positive(g in 0.2f64..5.0, t in tail(), x in -1e3f64..1e3) {
        let s = CtptSpec::new(g, t).unwrap();
        prop_assert!(logpdf(x, &s).is_finite());
        prop_assert!(variance(&s) > 0.0);
        let ag = skewness_ag(g).unwrap();
        prop_assert!(ag > -1.0 && ag < 1.0);
        prop_assert_eq!(ag.signum() == (g - 1.0).signum() || g == 1.0, true);
    }
}
