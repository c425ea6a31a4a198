use proptest::prelude::*;
use spikelearn_harness::ConvergenceTracker;

proptest! {
    #[test]
    fn convergence_is_latched_and_matches_first_qualifying_window(
        errors in prop::collection::vec(0.0f64..0.1, 0..200),
        window in 1usize..15,
    ) {
        let tol = 0.05;
        let mut t = ConvergenceTracker::new(window, tol);
        let mut seen = false;
        for (c, &e) in errors.iter().enumerate() {
            let now = t.observe(c, e);
            prop_assert!(!seen || now, "convergence was revoked");
            seen = now;
        }
        let first = (0..errors.len())
            .find(|&s| s + window <= errors.len() && errors[s..s + window].iter().all(|&e| e < tol));
        prop_assert_eq!(t.converged_at(), first);
    }
}
