mod common;

use common::{dag, node_set, subsets, sym};
use elicit_core::semigraphoid::{closure, compose_backward, compose_forward, is_implied, Implication, StatementSet};
use elicit_core::statement::VarSet;
use elicit_core::CiStatement;
use elicit_oracles::{bn, dsep, random};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Checks both engine algorithms against the path oracle for every pair
/// and every conditioning set.
fn agree_everywhere(n: usize, edges: &[(usize, usize)]) -> Result<(), String> {
    let g = dag(n, edges);
    for a in 0..n {
        for b in a + 1..n {
            let rest: Vec<usize> = (0..n).filter(|v| *v != a && *v != b).collect();
            for s in subsets(&rest) {
                let (sa, sb, ss) = (node_set(&[a]), node_set(&[b]), node_set(&s));
                let moral = g.d_separated(&sa, &sb, &ss).unwrap();
                let trails = g.d_separated_by_trails(&sa, &sb, &ss).unwrap();
                let paths = dsep::separated_by_paths(n, edges, a, b, &s);
                if moral != trails || moral != paths {
                    return Err(format!("{edges:?}: {a} vs {b} given {s:?}: moral {moral} trails {trails} paths {paths}"));
                }
            }
        }
    }
    Ok(())
}

#[test]
fn all_small_dags_agree_with_paths() {
    for n in 1..=4 {
        for edges in dsep::all_dags(n) {
            agree_everywhere(n, &edges).unwrap();
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_dags_agree(seed in any::<u64>(), n in 5usize..=7, density in 0.1f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, density);
        prop_assert_eq!(agree_everywhere(n, &edges), Ok(()));
    }

    /// d-separation implies numerical independence in every distribution
    /// that factorizes over the graph.
    #[test]
    fn separation_is_sound_for_binary_tables(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, 0.5);
        let parents = random::parents_of(n, &edges);
        let tables = parents.iter().map(|ps| (0..1 << ps.len()).map(|_| rng.random_range(0.02..0.98)).collect()).collect();
        let joint = bn::BinaryBn { parents, tables }.joint();
        let g = dag(n, &edges);
        for a in 0..n {
            for b in a + 1..n {
                let rest: Vec<usize> = (0..n).filter(|v| *v != a && *v != b).collect();
                for s in subsets(&rest) {
                    if g.d_separated(&node_set(&[a]), &node_set(&[b]), &node_set(&s)).unwrap() {
                        prop_assert!(bn::ci_gap(&joint, a, b, &s) < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn closure_of_local_markov_is_sound(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, 0.4);
        let g = dag(n, &edges);
        let base: StatementSet = g.local_markov_statements().iter().map(CiStatement::canonical).collect();
        let universe: VarSet = (0..n).map(sym).collect();
        let c = closure(&base, &universe, 10_000).unwrap();
        for s in &c.statements {
            prop_assert!(g.statement_holds(s).unwrap(), "{:?}", s);
        }
        prop_assert!(c.traces.iter().all(|t| t.replays()));
    }

    #[test]
    fn composition_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Assign each of six variables to x, y, z or nothing.
        let (mut x, mut y, mut z) = (VarSet::new(), VarSet::new(), VarSet::new());
        for i in 0..6 {
            match rng.random_range(0..4) {
                0 => { x.insert(sym(i)); }
                1 => { y.insert(sym(i)); }
                2 => { z.insert(sym(i)); }
                _ => {}
            }
        }
        if x.is_empty() { x.insert(sym(6)); }
        while y.len() < 2 { y.insert(sym(7 + y.len())); }
        let s = CiStatement::from_sets(x, y.clone(), z).unwrap();
        let items: Vec<String> = y.into_iter().collect();
        let split = rng.random_range(1..items.len());
        let y1: VarSet = items[..split].iter().cloned().collect();
        let y2: VarSet = items[split..].iter().cloned().collect();
        let (first, second) = compose_forward(&s, &y1, &y2).unwrap();
        let back = compose_backward(&first, &second).unwrap();
        prop_assert!(back.same_orientation(&s));
    }

    #[test]
    fn implied_statements_carry_replayable_traces(seed in any::<u64>(), n in 3usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, 0.4);
        let g = dag(n, &edges);
        let base: StatementSet = g.local_markov_statements().iter().map(CiStatement::canonical).collect();
        let universe: VarSet = (0..n).map(sym).collect();
        let a = rng.random_range(0..n);
        let b = (a + 1 + rng.random_range(0..n - 1)) % n;
        let rest: Vec<usize> = (0..n).filter(|v| *v != a && *v != b).collect();
        let given: Vec<String> = rest.iter().filter(|_| rng.random_bool(0.5)).map(|v| sym(*v)).collect();
        let candidate = CiStatement::new([sym(a)], [sym(b)], given).unwrap();
        match is_implied(&candidate, &base, &universe, 10_000).unwrap() {
            Implication::Implied(trace) => {
                prop_assert!(trace.iter().all(|t| t.replays()));
                prop_assert_eq!(&trace.last().unwrap().conclusion, &candidate);
                prop_assert!(g.statement_holds(&candidate).unwrap());
            }
            Implication::NotDerivable | Implication::BudgetExhausted => {}
        }
    }
}
