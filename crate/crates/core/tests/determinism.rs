//! Results do not depend on the worker count.

use agecycle::simulate::{renewal_function_mc, run_snapshots, ReplicationPlan};
use agecycle::solver::{ratio_tail_forcing, solve_renewal};
use agecycle::InterArrivalLaw;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn snapshots_and_solver_identical_across_pools() {
    let law = InterArrivalLaw::pareto(0.5, 1.0).unwrap();
    let plan = ReplicationPlan::new(law, 1e4, 3000, 77);
    let b = ratio_tail_forcing(law, 0.5).unwrap();
    let run = || {
        (
            run_snapshots(&plan).unwrap(),
            renewal_function_mc(&law, &[10.0, 100.0], 500, 8).unwrap(),
            solve_renewal(&law, &b, 200.0, 0.05).unwrap(),
        )
    };
    let one = in_pool(1, run);
    for threads in [2, 5] {
        let other = in_pool(threads, run);
        assert_eq!(one.0, other.0);
        assert_eq!(one.1, other.1);
        let bits =
            |g: &agecycle::GridFunction| g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one.2), bits(&other.2));
    }
}
