//! Property tests over random configurations: engine equivalence, work
//! conservation, potential monotonicity and the per-run makespan
//! inequality.

use proptest::prelude::*;

use ws_sim_core::analysis::extract_potential_series;
use ws_sim_core::engine::{divide_work, run_event, run_reference, RunOptions};
use ws_sim_core::model::SimConfig;
use ws_sim_core::stats::quartiles;

proptest! {
    #[test]
    fn division_conserves_and_respects_threshold(w in 1u64..100_000, lambda in 1u64..1_000) {
        let d = divide_work(w, lambda);
        // victim_keep + transfer = w − 1, as signed arithmetic
        prop_assert_eq!(d.victim_keep as i128 + d.transfer as i128, w as i128 - 1);
        prop_assert!((d.transfer as i128) <= d.victim_keep as i128 - lambda as i128 + 1);
        // accept exactly when the victim holds at least λ+3
        prop_assert_eq!(d.transfer >= 1, w >= lambda + 3);
        // the victim keeps the ceiling
        prop_assert!(d.victim_keep as i128 >= d.transfer as i128);
    }

    #[test]
    fn engines_agree_and_invariants_hold(
        w in 0u64..2_000,
        p in 1u32..10,
        lambda in 1u64..25,
        seed in any::<u64>(),
    ) {
        let cfg = SimConfig::new(w, p, lambda, seed);
        let opts = RunOptions::full();
        let a = run_reference(&cfg, &opts);
        let b = run_event(&cfg, &opts);
        prop_assert_eq!(&a, &b);

        prop_assert_eq!(a.executed_total, w);
        prop_assert_eq!(a.conservation_violations, 0);
        prop_assert_eq!(a.phi_violations, 0);

        // no run beats the perfect-balance floor
        prop_assert!(a.makespan >= w.div_ceil(u64::from(p)));
        // p·C_max ≤ W + 2λ·(steal requests)
        prop_assert!(
            u128::from(p) * u128::from(a.makespan)
                <= u128::from(w) + 2 * u128::from(lambda) * u128::from(a.steals_sent)
        );
        // every request is eventually answered or still in flight at the end
        prop_assert!(a.steals_success + a.steals_failed <= a.steals_sent);

        // series shape: one sample per boundary 0..=ceil(C/λ)
        let expected_len = a.makespan.div_ceil(lambda) + 1;
        prop_assert_eq!(a.phi_series.len() as u64, expected_len);
        prop_assert_eq!(a.phi_series[0], u128::from(w) * u128::from(w));
        prop_assert_eq!(*a.phi_series.last().unwrap(), 0);

        let series = extract_potential_series(&a, lambda).unwrap();
        prop_assert_eq!(series.tau, a.tau);
        prop_assert_eq!(series.r_until_tau, a.r_until_tau);
        // R_until_tau = Σ r_series[0..τ−1]
        let r_sum: u64 = a.r_series[..a.tau as usize].iter().sum();
        prop_assert_eq!(a.r_until_tau, r_sum);
        // φ never increases across boundaries
        for pair in a.phi_series.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn quartiles_are_ordered(mut v in proptest::collection::vec(0f64..1e6, 1..200)) {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = quartiles(&v);
        prop_assert!(v[0] <= q.q1);
        prop_assert!(q.q1 <= q.median);
        prop_assert!(q.median <= q.q3);
        prop_assert!(q.q3 <= v[v.len() - 1]);
    }
}
