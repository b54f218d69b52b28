use std::collections::BTreeMap;

use elicit_core::flow::{check_conservation, intervene, node_states, Action, FlowGraph, Mass, PathFlow};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn s(x: &str) -> String {
    x.to_string()
}

fn austin() -> FlowGraph {
    let levels = vec![
        vec![s("Revolution Foods"), s("Aramark")],
        vec![s("City Square"), s("Austin Independent School District"), s("Boys and Girls Club")],
        vec![
            s("Apartment complex A"),
            s("Apartment complex B"),
            s("Elementary School"),
            s("Intermediate School"),
            s("High School"),
            s("Boys and Girls Club site A"),
            s("Boys and Girls Club site B"),
        ],
    ];
    let e = [
        ("z(1,1)", "z(2,1)"),
        ("z(1,1)", "z(2,3)"),
        ("z(1,2)", "z(2,2)"),
        ("z(2,1)", "z(3,1)"),
        ("z(2,1)", "z(3,2)"),
        ("z(2,2)", "z(3,3)"),
        ("z(2,2)", "z(3,4)"),
        ("z(2,2)", "z(3,5)"),
        ("z(2,3)", "z(3,4)"),
        ("z(2,3)", "z(3,5)"),
        ("z(2,3)", "z(3,6)"),
        ("z(2,3)", "z(3,7)"),
    ];
    FlowGraph::from_labels(levels, &e).unwrap()
}

fn pick<R: Rng>(rng: &mut R, xs: &[String], k: usize) -> Vec<String> {
    xs.choose_multiple(rng, k).cloned().collect()
}

fn random_action<R: Rng>(rng: &mut R, g: &FlowGraph) -> Action {
    let lv = g.levels();
    let (vendors, sponsors, sites) = (&lv[0], &lv[1], &lv[2]);
    match rng.random_range(0..6) {
        0 => Action::PartnerSponsor {
            sites: {
                let k = rng.random_range(1..=2);
                pick(rng, sites, k)
            },
            sponsor: if rng.random_bool(0.7) { pick(rng, sponsors, 1)[0].clone() } else { format!("New sponsor {}", rng.random_range(0..99)) },
            vendors: pick(rng, vendors, 1),
        },
        1 => Action::MergeSponsors {
            sponsors: pick(rng, sponsors, 2),
            label: format!("Collective {}", rng.random_range(0..99)),
            vendor: rng.random_bool(0.5).then(|| pick(rng, vendors, 1)[0].clone()),
        },
        2 => Action::MergeSites { sites: pick(rng, sites, 2), label: format!("Hub {}", rng.random_range(0..99)) },
        3 => Action::ChangeVendor {
            sponsor: pick(rng, sponsors, 1)[0].clone(),
            old_vendor: pick(rng, vendors, 1)[0].clone(),
            new_vendor: pick(rng, vendors, 1)[0].clone(),
        },
        4 => Action::TransferSites {
            from: pick(rng, sponsors, 1)[0].clone(),
            to: pick(rng, sponsors, 1)[0].clone(),
            sites: pick(rng, sites, 1),
        },
        _ => {
            let level = rng.random_range(0..3);
            Action::RemoveActor { actor: pick(rng, &lv[level], 1)[0].clone() }
        }
    }
}

fn site_masses(g: &FlowGraph, flows: &[PathFlow]) -> BTreeMap<String, Mass> {
    let st = node_states(g, flows, None).unwrap();
    g.levels()[2].iter().cloned().zip(st.levels[2].iter().cloned()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interventions_conserve_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = austin();
        let mut flows: Vec<PathFlow> = g
            .enumerate_paths()
            .into_iter()
            .map(|p| PathFlow::new(p, format!("{}.{}", rng.random_range(0..40), rng.random_range(0..100)).parse().unwrap()))
            .collect();
        let total: Mass = flows.iter().map(|f| f.mass.clone()).sum();
        for _ in 0..6 {
            let action = random_action(&mut rng, &g);
            let Ok((g2, f2, diff)) = intervene(&g, &flows, &action) else { continue };
            let st = node_states(&g2, &f2, None).unwrap();
            let report = check_conservation(&st);
            prop_assert!(report.conserved);
            prop_assert!(report.totals.iter().all(|t| *t == total), "{:?} after {:?}", report.totals, action);
            prop_assert_eq!(f2.len(), g2.enumerate_paths().len());
            // Sites the action does not touch keep their demand.
            let untouched = match &action {
                Action::MergeSites { sites, .. } => Some(sites.clone()),
                Action::RemoveActor { .. } => None,
                _ => Some(Vec::new()),
            };
            if let Some(named) = untouched {
                let before = site_masses(&g, &flows);
                let after = site_masses(&g2, &f2);
                for (site, m) in &before {
                    if !named.contains(site) {
                        prop_assert_eq!(Some(m), after.get(site), "{} under {:?}", site, action);
                    }
                }
            }
            prop_assert!(diff.path_changes.iter().all(|c| c.before != c.after));
            g = g2;
            flows = f2;
        }
    }
}
