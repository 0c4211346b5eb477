//! Property suites over randomized instances: metric/ball geometry,
//! pressure Lipschitz continuity, coboundary invariance, detector scan
//! equivalence, and deviation-DP agreement with enumeration.

use proptest::prelude::*;

use num_rational::Ratio;
use thermoform::maps::OrbitTrace;
use thermoform::*;

fn arb_system() -> impl Strategy<Value = SftSystem> {
    prop_oneof![
        Just(SftSystem::full_shift(2)),
        Just(SftSystem::golden_mean()),
        Just(SftSystem::full_shift(3)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_nesting(n in 0usize..6, shrink in 0.02f64..1.0, grow in 0.0f64..1.0) {
        let sys = SftSystem::full_shift(2);
        let word = sys.word(vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1, 0]).unwrap();
        let eps_small = shrink * 0.9;
        let eps_big = (eps_small + grow * (1.0 - eps_small)).min(1.0);
        let b_small = dynamical_ball_cylinder(&word, n, eps_small);
        let b_big = dynamical_ball_cylinder(&word, n, eps_big);
        if let (Ok(small), Ok(big)) = (b_small, b_big) {
            // Smaller radius means a deeper cylinder; nesting is prefix
            // containment.
            prop_assert!(small.len() >= big.len());
            prop_assert_eq!(small.prefix(big.len()), big);
        }
    }

    #[test]
    fn metric_prefix_consistency(eps in 1e-4f64..1.0) {
        let m = prefix_length_for_radius(eps).unwrap();
        // Agreement on m symbols forces distance < eps; disagreement within
        // the first m symbols allows distance >= eps.
        prop_assert!(cylinder_diameter(m) < eps + 1e-12);
        if m > 1 {
            prop_assert!(cylinder_diameter(m - 2 + 1) >= eps - 1e-12);
        }
    }

    #[test]
    fn pressure_lipschitz(seed in 0u64..5000) {
        // |P(phi) - P(psi)| <= sup|phi - psi| on random depth-2 pairs.
        let sys = SftSystem::golden_mean();
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let a: Vec<f64> = (0..4).map(|_| next()).collect();
        let b: Vec<f64> = (0..4).map(|_| next()).collect();
        let phi = Potential::locally_constant(&sys, 2, |w| {
            a[(w[0] * 2 + w[1]) as usize]
        }).unwrap();
        let psi = Potential::locally_constant(&sys, 2, |w| {
            b[(w[0] * 2 + w[1]) as usize]
        }).unwrap();
        let p_phi = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
        let p_psi = pressure(&sys, &psi, PressureMode::Spectral).unwrap().value;
        let sup_diff = (0..4)
            .filter(|&i| i != 3) // word 11 is inadmissible on the golden mean
            .map(|i| (a[i] - b[i]).abs())
            .fold(0.0f64, f64::max);
        prop_assert!((p_phi - p_psi).abs() <= sup_diff + 1e-10);
    }

    #[test]
    fn coboundary_invariance(seed in 0u64..5000) {
        // Random depth-3 u on a random depth-2 phi: pressure and
        // equilibrium weights are unchanged.
        let sys = SftSystem::full_shift(2);
        let mut state = seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(7);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let phi_vals: Vec<f64> = (0..4).map(|_| next()).collect();
        let u_vals: Vec<f64> = (0..8).map(|_| next()).collect();
        let phi = Potential::locally_constant(&sys, 2, |w| {
            phi_vals[(w[0] * 2 + w[1]) as usize]
        }).unwrap();
        let u = Potential::locally_constant(&sys, 3, |w| {
            u_vals[(w[0] * 4 + w[1] * 2 + w[2]) as usize]
        }).unwrap();
        let psi = coboundary_transform(&sys, &phi, &u).unwrap();
        let p_phi = pressure(&sys, &phi, PressureMode::Spectral).unwrap().value;
        let p_psi = pressure(&sys, &psi, PressureMode::Spectral).unwrap().value;
        prop_assert!((p_phi - p_psi).abs() <= 1e-8);
        let mu_phi = equilibrium_measure(&sys, &phi).unwrap();
        let mu_psi = equilibrium_measure(&sys, &psi).unwrap();
        for w in sys.words(6) {
            prop_assert!((mu_phi.weight(w.symbols()) - mu_psi.weight(w.symbols())).abs() <= 1e-8);
        }
    }

    #[test]
    fn pliss_scan_equals_direct(values in prop::collection::vec(-1.5f64..0.5, 1..400), c in 0.01f64..1.0) {
        // Synthetic log-inverse-derivative sequences: the linear scan and
        // the quadratic window check share the prefix representation and
        // must agree exactly.
        let trace = OrbitTrace::synthetic(values);
        let scan = hyperbolic_times(&trace, c).unwrap();
        let direct = hyperbolic_times_direct(&trace, c);
        prop_assert_eq!(scan.times(), direct.as_slice());
    }

    #[test]
    fn detector_frequency_monotone(seed in 0.02f64..0.98, c_lo in 0.02f64..0.2, extra in 0.01f64..0.3) {
        let map = PiecewiseMap::intermittent(0.5).unwrap();
        let trace = iterate_orbit(&map, seed, 800).unwrap();
        let c_hi = c_lo + extra;
        let loose = hyperbolic_times(&trace, c_lo).unwrap();
        let tight = hyperbolic_times(&trace, c_hi).unwrap();
        prop_assert!(loose.frequency >= tight.frequency);
    }

    #[test]
    fn deviation_dp_vs_bruteforce(sys in arb_system(), n in 1usize..10, num in 0i64..4, den in 1i64..5, inclusive in any::<bool>()) {
        prop_assume!(num <= den);
        let phi = Potential::zero(&sys);
        let mu = equilibrium_measure(&sys, &phi).unwrap();
        let psi = RationalObservable::indicator(&sys, 0).unwrap();
        let c = Ratio::new(num, den);
        let dp = deviation_prob_exact(&sys, &mu, &psi, c, n, inclusive).unwrap();
        let bf = deviation_prob_bruteforce(&sys, &mu, &psi, c, n, inclusive).unwrap();
        prop_assert!((dp - bf).abs() < 1e-12, "{} vs {}", dp, bf);
    }

    #[test]
    fn measure_additivity_on_random_potentials(seed in 0u64..3000) {
        let sys = SftSystem::golden_mean();
        let mut state = seed.wrapping_mul(0xd1342543de82ef95).wrapping_add(3);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let vals: Vec<f64> = (0..4).map(|_| next()).collect();
        let phi = Potential::locally_constant(&sys, 2, |w| {
            vals[(w[0] * 2 + w[1]) as usize]
        }).unwrap();
        let mu = equilibrium_measure(&sys, &phi).unwrap();
        for w in sys.words(7) {
            let mut children = 0.0;
            for b in sys.successors(*w.symbols().last().unwrap()) {
                let mut v = w.symbols().to_vec();
                v.push(b);
                children += mu.weight(&v);
            }
            prop_assert!((children - mu.weight(w.symbols())).abs() < 1e-12);
        }
    }

    #[test]
    fn glue_words_stay_admissible(la in 1usize..8, lb in 1usize..8, pick_a in 0usize..100, pick_b in 0usize..100) {
        let sys = SftSystem::golden_mean();
        let words_a: Vec<Word> = sys.words(la).collect();
        let words_b: Vec<Word> = sys.words(lb).collect();
        let a = words_a[pick_a % words_a.len()].clone();
        let b = words_b[pick_b % words_b.len()].clone();
        let glued = glue_segments(&sys, &[a, b]).unwrap();
        prop_assert!(sys.is_admissible(glued.word.symbols()));
        prop_assert!(glued.connectors[0] <= glued.connector_bound);
    }
}
