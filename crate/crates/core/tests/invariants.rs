use gmech::analysis::doob_meyer;
use gmech::bsde::*;
use gmech::generator::*;
use gmech::lattice::Lattice;
use gmech::market::{parse_chain, synth_chain, strike_ladder};
use gmech::sampling::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn closed_form_step_solves_the_implicit_equation(
        mu in 0.0f64..3.0,
        dt in 1e-4f64..0.3,
        m in -50.0f64..50.0,
        z in -20.0f64..20.0,
        dk in -1.0f64..1.0,
    ) {
        prop_assume!(mu * dt < 1.0);
        let g = make_g_mu(mu).unwrap();
        let s = implicit_step(&g, 0.0, dt, m, z, dk);
        let lhs = s.y - m - dk - mu * (s.y.abs() + z.abs()) * dt;
        prop_assert!(lhs.abs() <= 1e-12 * s.y.abs().max(1.0));
    }

    #[test]
    fn prices_are_monotone_and_cash_shifts_pass_through(seed in any::<u64>(), n in 4usize..30, c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = Lattice::uniform(0.0, 1.0, n).unwrap();
        let g = random_lipschitz_generator(&mut rng, 1.0 / (l.sqrt_dt() + l.dt()));
        let x = random_claim(&mut rng, n + 1, 2.0);
        let bump = random_nonneg(&mut rng, n + 1, 1.0);
        let up: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let zero = DividendStream::zero();
        let a = price(&g, 0, n, &x, &zero, &l).unwrap()[0];
        let b = price(&g, 0, n, &up, &zero, &l).unwrap()[0];
        prop_assert!(b >= a - 1e-12);

        let h = random_y_free_generator(&mut rng, 1.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = price(&h, 0, n, &x, &zero, &l).unwrap()[0];
        let b = price(&h, 0, n, &shifted, &zero, &l).unwrap()[0];
        prop_assert!((b - a - c).abs() <= 1e-10);
    }

    #[test]
    fn doob_meyer_recovers_planted_dividends(seed in any::<u64>(), n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = Lattice::uniform(0.0, 1.0, n).unwrap();
        let g = random_lipschitz_generator(&mut rng, (1.0 / (l.sqrt_dt() + l.dt())).min(2.0));
        let x = random_claim(&mut rng, n + 1, 2.0);
        let a = random_stream(&mut rng, &l, 0.0, 1.0);
        let y = solve_range(&g, &l, 0, n, &x, &a).unwrap().y;
        let d = doob_meyer(&g, &y, &DividendStream::zero(), &l).unwrap();
        prop_assert!(d.increments.max_abs_diff(&a.to_process(&l)) <= 1e-9);
        prop_assert!(d.min_increment() >= -1e-12);
    }

    #[test]
    fn chain_csv_round_trips(
        r in 0.0f64..0.1,
        sigma in 0.05f64..0.8,
        s0 in 10.0f64..500.0,
        days in 1.0f64..1000.0,
        count in 1usize..12,
    ) {
        let p = BSMarketParams::new(r, r, sigma).unwrap();
        let chain = synth_chain(p, s0, &strike_ladder(0.5 * s0, 1.5 * s0, count), 0.0, days, None).unwrap();
        let back = parse_chain(&chain.to_csv().unwrap()).unwrap();
        prop_assert_eq!(back, chain);
    }
}
