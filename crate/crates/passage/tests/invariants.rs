//! Property-based invariants over randomized paths and inputs.

use passage::coupling::{invert, transform, verify_coupling};
use passage::policies::{
    run_b_policy, run_i_policy, sample_planar, smallest_first_count, ControlFunction,
};
use passage::processes::{inverse_identities_check, sample_arrivals, waiting_integrals};
use passage::stats::rng::RngStream;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_by_parts_is_exact(seed in any::<u64>(), x in 0.1f64..50.0) {
        let mut rng = RngStream::new(seed, 0).rng();
        let arrivals = sample_arrivals(x, &mut rng);
        let f = waiting_integrals(&arrivals, x).unwrap();
        let lhs = f.t_integral;
        let rhs = x * f.count as f64 - f.s_integral;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn inverse_identities_hold_on_every_path(seed in any::<u64>(), t in 0.0f64..40.0) {
        let mut rng = RngStream::new(seed, 1).rng();
        // horizon with slack beyond sqrt(2t) so the count is determined
        let arrivals = sample_arrivals((2.0 * t).sqrt() + 30.0, &mut rng);
        prop_assert!(inverse_identities_check(&arrivals, t).unwrap());
    }

    #[test]
    fn smallest_first_ignores_input_order(
        items in prop::collection::vec(0.001f64..1.0, 1..40),
        capacity in 0.1f64..5.0,
        rot in 0usize..40,
    ) {
        let base = smallest_first_count(&items, capacity).unwrap();
        let mut rotated = items.clone();
        rotated.rotate_left(rot % items.len());
        prop_assert_eq!(base, smallest_first_count(&rotated, capacity).unwrap());
        let mut reversed = items.clone();
        reversed.reverse();
        prop_assert_eq!(base, smallest_first_count(&reversed, capacity).unwrap());
    }

    #[test]
    fn policy_paths_respect_their_constraints(seed in any::<u64>(), t in 0.1f64..60.0) {
        let mut rng = RngStream::new(seed, 2).rng();
        let s = sample_planar(t, &mut rng);
        for control in [ControlFunction::Optimal, ControlFunction::Greedy] {
            let i_trace = run_i_policy(&s, &control).unwrap();
            // monotone constraint: strictly increasing record path in (0,1]
            prop_assert!(i_trace.path.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(i_trace.path.iter().all(|&v| v > 0.0 && v <= 1.0));
            let b_trace = run_b_policy(&s, &control).unwrap();
            // sum constraint: nondecreasing total never above 1
            prop_assert!(b_trace.path.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(b_trace.path.last().map_or(true, |&v| v <= 1.0));
        }
    }

    #[test]
    fn rearrangement_round_trips_bitwise(seed in any::<u64>(), t in 1.0f64..60.0) {
        let mut rng = RngStream::new(seed, 3).rng();
        let s = sample_planar(t, &mut rng);
        let r = transform(&s, &ControlFunction::Optimal).unwrap();
        let restored = invert(&r.transformed, &r.steps).unwrap();
        for (a, b) in restored.points.iter().zip(&s.points) {
            prop_assert_eq!(a.mark.to_bits(), b.mark.to_bits());
            prop_assert_eq!(a.time.to_bits(), b.time.to_bits());
        }
    }

    #[test]
    fn coupling_report_passes_for_all_seeds(seed in any::<u64>(), t in 1.0f64..40.0) {
        let mut rng = RngStream::new(seed, 4).rng();
        let s = sample_planar(t, &mut rng);
        let (report, _) = verify_coupling(&s, &ControlFunction::Greedy).unwrap();
        prop_assert!(report.pass, "{:?}", report);
    }
}
