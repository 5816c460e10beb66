use infmod_core::dynamics::{exp_weights, logistic};
use infmod_core::grid::{make_grid, normalize, Density, TraitGrid};
use infmod_core::moments::{extract_moments, predict_t_moment, KernelMoments};
use infmod_core::operators::{apply_mutation, apply_t_fast, MutationKernel, SegregationKernel};
use infmod_core::random::{random_mean_matched_pair, seeded_rng, BumpMixture};
use infmod_core::sweep::fit_log_log;
use infmod_core::transport::{contraction_check, wasserstein1, wasserstein2};
use infmod_core::{integrate_mean_ode, MixingOperator, MortalitySpec, PathVariant};
use proptest::prelude::*;

fn grid() -> TraitGrid {
    make_grid(-2.5, 2.5, 512).unwrap()
}

fn bump(g: TraitGrid, mu: f64, sd: f64) -> Density {
    normalize(&Density::from_fn(g, |x| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp()).unwrap()).unwrap()
}

fn mixture(seed: u64) -> Density {
    let g = grid();
    BumpMixture::random_within(&g, -1.25, 1.25, &mut seeded_rng(seed))
        .density(&g)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mixing_keeps_mass_mean_and_sign(seed in any::<u64>(), eps in 0.1f64..0.3) {
        let q = mixture(seed);
        let tq = apply_t_fast(&q, &SegregationKernel::new(eps)).unwrap();
        let g = q.grid();
        prop_assert!((tq.mass() - 1.0).abs() < 1e-9);
        let (m_in, m_out) = (g.integrate_with(q.values(), |x| x), g.integrate_with(tq.values(), |x| x));
        prop_assert!((m_in - m_out).abs() < 1e-9);
        prop_assert!(tq.min_value() >= 0.0);
    }

    #[test]
    fn variance_relaxes_halfway_to_kernel(seed in any::<u64>(), eps in 0.1f64..0.3) {
        let q = mixture(seed);
        let tq = apply_t_fast(&q, &SegregationKernel::new(eps)).unwrap();
        let v_in = extract_moments(&q, 2).unwrap().variance();
        let v_out = extract_moments(&tq, 2).unwrap().variance();
        let want = 0.5 * v_in + 0.5 * eps * eps;
        prop_assert!((v_out - want).abs() < 1e-8 * want, "{v_out} vs {want}");
    }

    #[test]
    fn predicted_moments_match_quadrature(seed in any::<u64>()) {
        let eps = 0.2;
        let q = mixture(seed);
        let g = *q.grid();
        let tq = MixingOperator::new(g, SegregationKernel::new(eps)).apply(&q).unwrap();
        let mv = extract_moments(&q, 3).unwrap();
        let km = KernelMoments::new(eps, 3);
        for k in 1..=3 {
            let want = predict_t_moment(&mv, k, &km).unwrap();
            let got = g.integrate_with(tq.values(), |x| (x - mv.mean).powi(2 * k as i32));
            prop_assert!((got - want).abs() <= 1e-6 * want, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn mixing_contracts_mean_matched_pairs(seed in any::<u64>()) {
        let g = grid();
        let (a, b) = random_mean_matched_pair(&g, -1.25, 1.25, &mut seeded_rng(seed)).unwrap();
        let op = MixingOperator::new(g, SegregationKernel::new(0.2));
        let c = contraction_check(&a, &b, &op).unwrap();
        prop_assert!(c.pass, "{c:?}");
    }

    #[test]
    fn wasserstein_metric_axioms(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let (a, b, c) = (mixture(s1), mixture(s2), mixture(s3));
        let ab = wasserstein1(&a, &b).unwrap();
        prop_assert!((ab - wasserstein1(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= wasserstein1(&a, &c).unwrap() + wasserstein1(&c, &b).unwrap() + 1e-12);
        // W1 <= W2 up to the quantile discretization
        prop_assert!(ab <= wasserstein2(&a, &b).unwrap() + 1e-4);
    }

    #[test]
    fn translation_distance(mu in -0.5f64..0.5, h in 0.0f64..0.5) {
        let g = grid();
        let w = wasserstein1(&bump(g, mu, 0.15), &bump(g, mu + h, 0.15)).unwrap();
        prop_assert!((w - h).abs() < 1e-6);
    }

    #[test]
    fn mutation_preserves_mass_and_mean(seed in any::<u64>(), eps in 0.05f64..0.2) {
        let q = mixture(seed);
        let out = apply_mutation(&q, &MutationKernel::gaussian(eps));
        let g = q.grid();
        prop_assert!(g.trapezoid(&out).abs() < 1e-10);
        prop_assert!(g.integrate_with(&out, |x| x).abs() < 1e-10);
    }

    #[test]
    fn power_laws_fit_exactly(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(slope)).collect();
        let fit = fit_log_log(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-10);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn logistic_semigroup(rho in 0.01f64..5.0, a in -2.0f64..2.0, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let once = logistic(rho, a, 1.0, t1 + t2);
        let twice = logistic(logistic(rho, a, 1.0, t1), a, 1.0, t2);
        prop_assert!((once - twice).abs() <= 1e-12 * once.max(1.0));
        prop_assert!(once > 0.0);
    }

    #[test]
    fn exp_weights_are_continuous(z in 5e-4f64..2e-3) {
        let (e, p1, p2) = exp_weights(z);
        let em1 = (-z).exp_m1();
        prop_assert!((e - (-z).exp()).abs() < 1e-15);
        prop_assert!((p1 + em1 / z).abs() < 1e-12);
        prop_assert!((p2 - (z + em1) / (z * z)).abs() < 1e-8);
    }

    #[test]
    fn quadratic_mean_path_is_exponential(s in 0.2f64..2.0, z0 in -0.6f64..0.6) {
        let m = MortalitySpec::quadratic(s, 0.7);
        let p = integrate_mean_ode(&m, z0, 1.0, 1e-3, PathVariant::Limit).unwrap();
        let want = z0 * (-2.0 * s).exp();
        prop_assert!((p.z_values.last().unwrap() - want).abs() < 1e-11);
    }
}
