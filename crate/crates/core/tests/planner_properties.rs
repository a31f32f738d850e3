use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ipp_core::environment::manhattan_distance;
use ipp_core::planner::{plan_with_tree, SearchTree};
use ipp_core::{CostParams, GridSpec, Location, LocationSet, PlannerParams, PlanningContext};

fn context(current: Location, pool: Vec<Location>, slack: f64, iterations: usize) -> PlanningContext {
    let grid = GridSpec::new(30, 30).unwrap();
    let final_loc = grid.lower_right();
    let cost = CostParams::default();
    let candidates: LocationSet = pool.into_iter().filter(|l| *l != current).collect();
    let variances = candidates
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, 0.2 + (i % 7) as f64 / 10.0))
        .collect();
    PlanningContext {
        current,
        remaining_budget: cost.worst_cost(current, final_loc) + slack,
        final_loc,
        candidates,
        variances,
        cost,
        params: PlannerParams {
            iterations,
            ..PlannerParams::default()
        },
    }
}

fn arb_context() -> impl Strategy<Value = PlanningContext> {
    let loc = (0u32..30, 0u32..30).prop_map(|(x, y)| Location::new(x, y));
    (
        loc.clone(),
        prop::collection::vec(loc, 5..80),
        0.0..40.0f64,
        20usize..300,
    )
        .prop_map(|(c, pool, slack, it)| context(c, pool, slack, it))
}

fn path_to(tree: &SearchTree, id: usize) -> Vec<usize> {
    let mut path = vec![id];
    let mut cur = id;
    while let Some(p) = tree.node(cur).parent() {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_invariants_hold(ctx in arb_context(), seed in any::<u64>()) {
        let (choice, tree) = plan_with_tree(&ctx, &mut ChaCha8Rng::seed_from_u64(seed));
        let root = tree.node(SearchTree::ROOT);
        let stats = tree.stats();

        let child_visits: u32 = root.children().iter().map(|&c| tree.node(c).visits()).sum();
        prop_assert_eq!(child_visits as usize, stats.iterations - stats.root_only_iterations);
        prop_assert_eq!(stats.exploration_violations, 0);
        prop_assert_eq!(tree.count_premature_descents(), 0);

        for id in 0..tree.len() {
            let node = tree.node(id);
            prop_assert!(node.remaining_budget() >= 0.0);
            let path = path_to(&tree, id);
            let locs: Vec<Location> = path.iter().map(|&n| tree.node(n).loc()).collect();
            let distinct: HashSet<_> = locs.iter().collect();
            prop_assert_eq!(distinct.len(), locs.len(), "repeated location on {:?}", locs);
            prop_assert_eq!(tree.visited_along_path(id).len(), path.len() - 1);
            if let Some(p) = node.parent() {
                let parent = tree.node(p);
                if manhattan_distance(parent.loc(), node.loc()) > 0 {
                    prop_assert!(node.remaining_budget() < parent.remaining_budget());
                }
            }
        }

        let worst_final = ctx.cost.worst_cost(ctx.current, ctx.final_loc);
        prop_assert!(choice == ctx.final_loc || ctx.candidates.contains(&choice));
        let worst = ctx.cost.worst_cost(ctx.current, choice)
            + if choice == ctx.final_loc { 0.0 } else { ctx.cost.worst_cost(choice, ctx.final_loc) };
        prop_assert!(worst <= ctx.remaining_budget || worst_final > ctx.remaining_budget);
    }

    #[test]
    fn identical_seeds_give_identical_plans(ctx in arb_context(), seed in any::<u64>()) {
        let (a, ta) = plan_with_tree(&ctx, &mut ChaCha8Rng::seed_from_u64(seed));
        let (b, tb) = plan_with_tree(&ctx, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
        prop_assert_eq!(ta.stats(), tb.stats());
        prop_assert_eq!(ta.len(), tb.len());
        for id in 0..ta.len() {
            prop_assert_eq!(ta.node(id).visits(), tb.node(id).visits());
            prop_assert_eq!(ta.node(id).value().to_bits(), tb.node(id).value().to_bits());
        }
    }
}

#[test]
fn exhausted_budget_returns_final() {
    let ctx = context(Location::new(27, 27), vec![Location::new(5, 5), Location::new(28, 27)], 0.0, 200);
    let (choice, _) = plan_with_tree(&ctx, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(choice, ctx.final_loc);
}

#[test]
fn at_final_plans_nothing() {
    let ctx = context(Location::new(29, 29), vec![Location::new(5, 5)], 50.0, 200);
    let (choice, tree) = plan_with_tree(&ctx, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(choice, ctx.final_loc);
    assert_eq!(tree.len(), 1);
}
