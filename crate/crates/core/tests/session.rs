mod common;

use common::{dag, sym};
use elicit_core::elicitation::{Answer, ElicitError, Session, SessionModel, Verdict};
use elicit_core::semigraphoid::{is_implied, Implication};
use elicit_core::statement::VarSet;
use elicit_oracles::random;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T: &str = "2024-06-01T09:00:00Z";

fn assert_nothing_pending_is_implied(s: &Session, n: usize) -> Result<(), TestCaseError> {
    let universe: VarSet = (0..n).map(sym).collect();
    for q in s.open_questions() {
        let verdict = is_implied(&q.ci, s.confirmed(), &universe, 10_000).unwrap();
        prop_assert!(!matches!(verdict, Implication::Implied(_)), "{} is implied", q.id);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_sessions_replay_and_never_ask_implied(seed in any::<u64>(), n in 3usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, 0.3);
        let model = SessionModel::Dag(dag(n, &edges));
        let mut s = Session::new("p", model.clone()).unwrap();
        assert_nothing_pending_is_implied(&s, n)?;
        for _ in 0..12 {
            let Some(q) = s.next_question(T) else { break };
            let verdict = match rng.random_range(0..3) {
                0 => Verdict::Irrelevant,
                1 => Verdict::Relevant,
                _ => Verdict::Unsure,
            };
            let mut answer = Answer::new(&q.id, verdict);
            if verdict == Verdict::Relevant {
                let o = &q.orientations[rng.random_range(0..q.orientations.len())];
                answer = answer.with_edge(&o.from, &o.to);
            }
            answer.model_hash = Some(s.model_hash());
            match s.apply_answer(&answer, T) {
                Ok(out) => {
                    if let Some(a) = out.advisory {
                        prop_assert!(a.cycle.is_some());
                        // Settle it the other way round.
                        let flip = q.orientations.iter().find(|o| o.cycle.is_none()).unwrap();
                        s.apply_answer(&Answer::new(&q.id, Verdict::Relevant).with_edge(&flip.from, &flip.to), T).unwrap();
                    }
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
            assert_nothing_pending_is_implied(&s, n)?;
        }
        let again = Session::replay("p", model, s.transcript()).unwrap();
        prop_assert_eq!(again.model_hash(), s.model_hash());
        prop_assert_eq!(again.transcript(), s.transcript());
    }

    #[test]
    fn regeneration_is_stable(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random::dag(&mut rng, n, 0.4);
        let a = Session::new("a", SessionModel::Dag(dag(n, &edges))).unwrap();
        let b = Session::new("b", SessionModel::Dag(dag(n, &edges))).unwrap();
        prop_assert_eq!(a.questions(), b.questions());
    }
}

#[test]
fn answering_twice_is_refused() {
    let edges = [(0, 2), (1, 2)];
    let mut s = Session::new("x", SessionModel::Dag(dag(3, &edges))).unwrap();
    let q = s.next_question(T).unwrap();
    s.apply_answer(&Answer::new(&q.id, Verdict::Irrelevant), T).unwrap();
    assert!(matches!(s.apply_answer(&Answer::new(&q.id, Verdict::Irrelevant), T), Err(ElicitError::NotAnswerable { .. })));
}
