mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xorlab::ensemble::{gen_pinned, trial_rng, EnsembleParams};
use xorlab::spmat::frozen_set;
use xorlab::wp::{
    fixed_point_violations, labels, standard_messages, wp_iterate, wp_update, Init, MessageSet,
    Msg, TannerGraph, DEFAULT_STANDARD_BUDGET,
};

#[test]
fn trees_are_solved_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..200 {
        let f = gf([2u64, 3, 4][i % 3]);
        let n = rng.gen_range(2..=40);
        let a = random_tree_instance(&f, n, &mut rng);
        let g = TannerGraph::new(&a);
        let std = standard_messages(&a, DEFAULT_STANDARD_BUDGET).unwrap();
        assert_eq!(fixed_point_violations(&g, &std), 0, "instance {i}");
        let it = wp_iterate(&g, Init::AllFrozen, 10_000).unwrap();
        assert!(it.converged);
        assert_eq!(it.messages, std, "instance {i}");
        assert_eq!(
            labels(&g, &std).non_unfrozen_vars(),
            frozen_set(&a),
            "instance {i}"
        );
    }
}

#[test]
fn frozen_labels_nearly_match_on_small_random_instances() {
    let params = EnsembleParams::with_density(60, 3, 2.5, 2);
    let mut total = 0;
    for i in 0..20 {
        let (a, _) = gen_pinned(&params, &mut trial_rng(22, i)).unwrap();
        let g = TannerGraph::new(&a);
        let std = standard_messages(&a, DEFAULT_STANDARD_BUDGET).unwrap();
        let wp: std::collections::BTreeSet<usize> =
            labels(&g, &std).non_unfrozen_vars().into_iter().collect();
        let fz: std::collections::BTreeSet<usize> = frozen_set(&a).into_iter().collect();
        total += wp.symmetric_difference(&fz).count();
    }
    assert!(
        (total as f64 / 20.0) <= 0.1 * 60.0,
        "mean symdiff {}",
        total as f64 / 20.0
    );
}

fn random_messages(g: &TannerGraph, seed: u64) -> MessageSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || if rng.gen_bool(0.5) { Msg::F } else { Msg::U };
    MessageSet {
        var_to_check: (0..g.n_edges()).map(|_| pick()).collect(),
        check_to_var: (0..g.n_edges()).map(|_| pick()).collect(),
    }
}

proptest! {
    #[test]
    fn update_is_monotone(seed in any::<u64>(), n in 5usize..80, d in 0.5f64..4.0) {
        let params = EnsembleParams::with_density(n, 3, d, 2);
        let (a, _) = gen_pinned(&params, &mut trial_rng(seed, 0)).unwrap();
        let g = TannerGraph::new(&a);
        let lo = random_messages(&g, seed);
        let mut hi = random_messages(&g, seed ^ 1);
        for e in 0..g.n_edges() {
            if lo.var_to_check[e] == Msg::F { hi.var_to_check[e] = Msg::F; }
            if lo.check_to_var[e] == Msg::F { hi.check_to_var[e] = Msg::F; }
        }
        prop_assert!(wp_update(&g, &lo).frozen_subset_of(&wp_update(&g, &hi)));
    }

    #[test]
    fn iteration_from_all_frozen_dominates_other_fixed_points(seed in any::<u64>(), n in 5usize..80, d in 0.5f64..4.0) {
        let params = EnsembleParams::with_density(n, 3, d, 2);
        let (a, _) = gen_pinned(&params, &mut trial_rng(seed, 1)).unwrap();
        let g = TannerGraph::new(&a);
        let top = wp_iterate(&g, Init::AllFrozen, 100_000).unwrap();
        prop_assert!(top.converged);
        prop_assert_eq!(fixed_point_violations(&g, &top.messages), 0);
        let bottom = wp_iterate(&g, Init::AllUnfrozen, 100_000).unwrap();
        if bottom.converged {
            prop_assert!(bottom.messages.frozen_subset_of(&top.messages));
        }
    }
}
