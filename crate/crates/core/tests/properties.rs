use csmark::estimators::{f_hat1, f_hat1_counting, f_hat2, g_hat, EstimatorConfig};
use csmark::kernels::{Bandwidths, UnivariateKernel};
use csmark::scenarios::{sample, scenario_a, scenario_b, Observation, Sample, Scenario};
use proptest::prelude::*;

fn observations() -> impl Strategy<Value = Sample> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, any::<bool>()), 1..80).prop_map(|v| {
        let obs = v
            .into_iter()
            .map(|(t, z, delta)| Observation {
                t,
                z: if delta { z } else { 0.0 },
                delta,
            })
            .collect();
        Sample::from_observations(obs).unwrap()
    })
}

proptest! {
    #[test]
    fn estimators_lie_in_unit_interval(
        s in observations(),
        t0 in 0.0..1.0f64,
        z0 in -0.2..1.5f64,
        alpha in 0.02..0.8f64,
        beta in 0.02..0.5f64,
    ) {
        let cfg = EstimatorConfig::epanechnikov(Bandwidths::new(alpha, beta).unwrap());
        if g_hat(&s, &cfg, t0) >= cfg.g_floor {
            let f1 = f_hat1(&s, &cfg, t0, z0).unwrap();
            let f2 = f_hat2(&s, &cfg, t0, z0).unwrap();
            prop_assert!((0.0..=1.0).contains(&f1));
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f2));
        }
    }

    #[test]
    fn estimators_nondecreasing_in_mark(
        s in observations(),
        t0 in 0.0..1.0f64,
        z0 in -0.2..1.2f64,
        dz in 0.0..0.5f64,
        alpha in 0.05..0.8f64,
        beta in 0.02..0.5f64,
    ) {
        let cfg = EstimatorConfig::epanechnikov(Bandwidths::new(alpha, beta).unwrap());
        if let (Ok(a), Ok(b)) = (f_hat1(&s, &cfg, t0, z0), f_hat1(&s, &cfg, t0, z0 + dz)) {
            prop_assert!(b >= a);
        }
        if let (Ok(a), Ok(b)) = (f_hat2(&s, &cfg, t0, z0), f_hat2(&s, &cfg, t0, z0 + dz)) {
            prop_assert!(b >= a - 1e-15);
        }
    }

    #[test]
    fn uniform_kernel_is_a_count(
        s in observations(),
        t0 in 0.0..1.0f64,
        z0 in 0.0..1.0f64,
        alpha in 0.01..0.6f64,
    ) {
        let cfg = EstimatorConfig::uniform(Bandwidths::time_only(alpha).unwrap());
        match (f_hat1(&s, &cfg, t0, z0), f_hat1_counting(&s, t0, z0, alpha)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-14),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn samples_respect_censoring_and_reproduce(n in 1usize..200, seed in any::<u64>(), b in any::<bool>()) {
        let scen: &dyn Scenario = if b { &scenario_b() } else { &scenario_a() };
        let s = sample(scen, n, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        for o in s.observations() {
            prop_assert!(o.delta || o.z == 0.0);
            prop_assert!(o.t >= 0.0 && o.z >= 0.0);
        }
        prop_assert_eq!(&s, &sample(scen, n, seed).unwrap());
        let back = Sample::from_csv(s.to_csv().as_bytes()).unwrap();
        prop_assert_eq!(back.observations(), s.observations());
    }

    #[test]
    fn rectangle_masses_nonnegative(
        x1 in 0.0..1.0f64, dx in 0.0..1.0f64,
        y1 in 0.0..1.0f64, dy in 0.0..1.0f64,
        b in any::<bool>(),
    ) {
        let scen: &dyn Scenario = if b { &scenario_b() } else { &scenario_a() };
        let (x2, y2) = (x1 + dx, y1 + dy);
        let mass = scen.cdf(x2, y2) - scen.cdf(x2, y1) - scen.cdf(x1, y2) + scen.cdf(x1, y1);
        prop_assert!(mass >= -1e-12);
        prop_assert!(scen.cdf(x2, y1) >= scen.cdf(x1, y1));
        prop_assert!(scen.cdf(x1, y2) >= scen.cdf(x1, y1));
    }

    #[test]
    fn rescaled_kernels_keep_unit_mass(alpha in 0.01..5.0f64, epa in any::<bool>()) {
        let k = if epa { UnivariateKernel::epanechnikov() } else { UnivariateKernel::uniform() };
        let mass = csmark::quad::integrate_pieces(
            |u| k.eval_rescaled(alpha, u).unwrap(),
            -2.0 * alpha,
            2.0 * alpha,
            &[-alpha, alpha],
            1e-12,
        )
        .unwrap();
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }
}
