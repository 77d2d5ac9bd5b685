//! Property tests over randomized valid parameter sets.

use num_complex::Complex64;
use proptest::prelude::*;

use sdde_core::quad;
use sdde_core::{complex_jump_integral, JumpDistribution, NegTerm, PosTerm};

fn integrate_over_support(d: &JumpDistribution, f: impl Fn(f64) -> f64) -> f64 {
    d.support_segments(1e-16)
        .into_iter()
        .map(|(a, b)| quad::integrate(&f, a, b, 1e-13).unwrap())
        .sum()
}

/// Random valid mixture: up to two components per side, weights normalized.
fn arb_distribution() -> impl Strategy<Value = JumpDistribution> {
    let term = (0.05f64..1.0, 0.5f64..20.0);
    (
        proptest::collection::vec(term.clone(), 1..3),
        proptest::collection::vec((0.05f64..1.0, 0.5f64..20.0, 0.2f64..3.0), 0..3),
    )
        .prop_map(|(pos_raw, neg_raw)| {
            let total: f64 =
                pos_raw.iter().map(|t| t.0).sum::<f64>() + neg_raw.iter().map(|t| t.0).sum::<f64>();
            let pos = pos_raw
                .iter()
                .map(|&(w, rate)| PosTerm {
                    weight: w / total,
                    rate,
                })
                .collect();
            let neg = neg_raw
                .iter()
                .map(|&(w, rate, trunc)| NegTerm {
                    weight: w / total,
                    rate,
                    truncation: Some(trunc),
                })
                .collect();
            JumpDistribution::new(pos, neg).expect("normalized weights")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_has_unit_mass(dist in arb_distribution()) {
        let mass = integrate_over_support(&dist, |z| dist.density(z));
        prop_assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
    }

    #[test]
    fn closed_form_mean_matches_quadrature(dist in arb_distribution()) {
        let by_quad = integrate_over_support(&dist, |z| z * dist.density(z));
        prop_assert!((dist.mean() - by_quad).abs() < 1e-10,
            "closed {} vs quadrature {by_quad}", dist.mean());
    }

    #[test]
    fn cdf_is_monotone_and_normalized(dist in arb_distribution()) {
        let lo = dist.effective_lower_bound(1e-16);
        let hi = dist.effective_upper_bound(1e-14);
        let mut prev = 0.0;
        for k in 0..=200 {
            let z = lo + (hi - lo) * k as f64 / 200.0;
            let c = dist.cdf(z);
            prop_assert!(c >= prev - 1e-12, "cdf not monotone at {z}");
            prop_assert!((0.0..=1.0 + 1e-9).contains(&c));
            prev = c;
        }
        prop_assert!((dist.cdf(hi * 2.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn compensated_integral_nonnegative_at_one(
        dist in arb_distribution(),
        g in -0.2f64..0.3,
    ) {
        // 1 + z g must stay positive over the support for the test to make
        // sense; skip configurations that violate it.
        let lo = dist.lower_bound().unwrap();
        prop_assume!(g >= 0.0 || dist.pos_terms().is_empty());
        prop_assume!(1.0 + lo * g > 1e-6);
        let v = complex_jump_integral(&dist, g, Complex64::new(1.0, 0.0)).unwrap();
        prop_assert!(v.re >= -1e-12, "negative at c=1: {v}");
        prop_assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn sampling_stays_in_support(dist in arb_distribution(), seed in 0u64..1000) {
        let mut rng = sdde_core::CounterRng::new(seed, 0);
        let lo = dist.lower_bound().unwrap();
        for _ in 0..500 {
            let z = dist.sample(&mut rng);
            prop_assert!(z >= lo && z.is_finite(), "sample {z} below support {lo}");
        }
    }
}
