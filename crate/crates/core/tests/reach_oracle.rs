mod common;

use std::collections::BTreeSet;

use ctxlock::corpus;
use ctxlock::explorer::{bounded_reach, explore, Bounds, Outcome};
use ctxlock::model::{LockSet, Model, MultiPdsSpec, PairQuery, PairTarget, PdsSpec, StateId, Transition};
use ctxlock::random::{contextual_pair, contextual_thread, random_thread, GenParams};
use ctxlock::reach::{build_product, pairwise_reach, state_bound, Decision, ProductState, ProductSymbol};
use ctxlock::saturation::{post_star, PushdownRules, Step};
use ctxlock::semantics::{Computation, LabelKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bfs_bounds() -> Bounds {
    Bounds {
        max_stack_depth: 8,
        max_steps: 100_000,
        max_count: 16,
    }
}

#[test]
fn figure1_saturation_matches_explicit_search() {
    let m = Model::compile(&corpus::figure1()).unwrap();
    let product = build_product(&m).unwrap();
    let (explicit, cut) = common::explicit_pds_reach(&product, 8);
    assert!(!cut);
    let sat = post_star(&product);
    let mut accepted = BTreeSet::new();
    for s in sat.reachable_controls() {
        for w in sat.stacks_up_to(s, 8) {
            accepted.insert((*s, w));
        }
    }
    assert_eq!(accepted, explicit);
}

#[test]
fn figure1_product_runs_comp2() {
    let m = Model::compile(&corpus::figure1()).unwrap();
    let product = build_product(&m).unwrap();
    let comp2 = Computation::from_labels(&m, &corpus::comp2_labels(&m)).unwrap();
    let mut state = product.initial();
    let mut stack: Vec<ProductSymbol> = Vec::new();
    for k in 0..comp2.len() {
        let t = comp2.label(k).thread;
        let next = comp2.config(k + 1);
        let want = |s: &ProductState| {
            let (q, h) = if t == 0 { (s.q0, s.h0) } else { (s.q1, s.h1) };
            q == next.control(t) && h == next.lockset(t)
        };
        if comp2.label(k).kind == LabelKind::Pop {
            let top = stack.pop().expect("non-empty shared stack");
            assert_eq!(top.thread as usize, t);
            state = product
                .pops(&state, &top)
                .into_iter()
                .map(|x| x.0)
                .find(want)
                .expect("pop enabled");
        } else {
            let (step, _) = product
                .steps(&state)
                .into_iter()
                .find(|(s, tag)| {
                    tag.thread == t
                        && match s {
                            Step::Internal(p) | Step::Push(p, _) => want(p),
                        }
                })
                .expect("move enabled");
            state = match step {
                Step::Internal(p) => p,
                Step::Push(p, g) => {
                    stack.push(g);
                    p
                }
            };
        }
    }
    assert_eq!(
        (state.q0, state.q1),
        (comp2.final_config().control(0), comp2.final_config().control(1))
    );
}

#[test]
fn acquisition_translates_for_every_free_pair() {
    let a = PdsSpec::new("A", "a0").acq("a0", "a1", "x");
    let b = PdsSpec::new("B", "b0").internal("b0", "b1").internal("b1", "b2");
    let m = Model::compile(&MultiPdsSpec::new("s", &["x", "y"], vec![a, b])).unwrap();
    let p = build_product(&m).unwrap();
    let x = m.lock_id("x").unwrap();
    let mut moves = 0;
    for s in p.all_states().filter(|s| s.q0 == StateId(0)) {
        let acq: Vec<_> = p.steps(&s).into_iter().filter(|(_, tag)| tag.thread == 0).collect();
        if s.h0.union(s.h1).contains(x) {
            assert!(acq.is_empty());
        } else {
            assert_eq!(acq.len(), 1);
            assert_eq!(
                acq[0].0,
                Step::Internal(ProductState {
                    q0: StateId(1),
                    h0: s.h0.with(x),
                    ..s
                })
            );
            moves += 1;
        }
    }
    // h0 and h1 range over subsets of {y}; q1 over three states.
    assert_eq!(moves, 2 * 2 * 3);
}

#[test]
fn figure4_loop_heads() {
    let m = Model::compile(&corpus::figure4()).unwrap();
    let report = pairwise_reach(&m, &corpus::figure4_query()).unwrap();
    assert!(report.decision.is_reachable());
    let t = m.resolve(&corpus::figure4_query()).unwrap();
    assert!(bounded_reach(&m, &t, &Bounds::default()).outcome.is_found());
}

/// Pairs seen by BFS, and whether the search covered everything.
fn bfs_pairs(m: &Model, bounds: &Bounds) -> (BTreeSet<(StateId, StateId)>, bool) {
    let cov = explore(m, bounds, |_, _, _| {});
    (
        cov.configs.iter().map(|c| (c.control(0), c.control(1))).collect(),
        cov.exhausted,
    )
}

fn check_against_bfs(m: &Model) -> Result<(), TestCaseError> {
    let analysis = build_product(m).unwrap().saturate().unwrap();
    let decided = analysis.reachable_pairs();
    let (seen, exhausted) = bfs_pairs(m, &bfs_bounds());
    prop_assert!(seen.is_subset(&decided));
    if exhausted {
        prop_assert_eq!(&seen, &decided);
    }
    prop_assert!(analysis.stats().control_states as u128 <= state_bound(m));
    prop_assert!(analysis
        .reachable_states()
        .all(|s| s.h0.intersection(s.h1) == LockSet::EMPTY));
    for &(q0, q1) in &decided {
        let Decision::Reachable { witness, .. } = analysis.decide(q0, q1).unwrap() else {
            return Err(TestCaseError::fail("decided pair without witness"));
        };
        prop_assert!(witness.validate(m).is_ok());
        let height = (0..=witness.len())
            .map(|k| witness.config(k).max_stack_height())
            .max()
            .unwrap();
        if !exhausted && height <= 8 {
            let t = PairTarget {
                i: 0,
                q_i: q0,
                j: 1,
                q_j: q1,
            };
            prop_assert!(bounded_reach(m, &t, &bfs_bounds()).outcome.is_found());
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn structured_pairs_agree_with_bfs(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Model::compile(&contextual_pair(&GenParams::default(), &mut rng)).unwrap();
        check_against_bfs(&m)?;
    }

    #[test]
    fn saturation_contains_explicit_search(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Model::compile(&contextual_pair(&GenParams::default(), &mut rng)).unwrap();
        let product = build_product(&m).unwrap();
        let sat = post_star(&product);
        let (explicit, cut) = common::explicit_pds_reach(&product, 5);
        for (s, w) in &explicit {
            prop_assert!(sat.accepts(s, w));
        }
        if !cut {
            let total: usize = sat.reachable_controls().map(|s| sat.stacks_up_to(s, 5).len()).sum();
            prop_assert_eq!(total, explicit.len());
        }
    }

    #[test]
    fn third_thread_does_not_change_the_answer(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GenParams { states: 4, symbols: 1, locks: 2, transitions: 7 };
        let a = contextual_thread("A", "a", &p, &mut rng);
        let b = contextual_thread("B", "b", &p, &mut rng);
        let c = contextual_thread("C", "c", &p, &mut rng);
        let m = Model::compile(&MultiPdsSpec::new("three", &["l0", "l1"], vec![a, b, c])).unwrap();
        let bounds = Bounds { max_stack_depth: 6, ..Bounds::default() };
        let cov = explore(&m, &bounds, |_, _, _| {});
        let seen: BTreeSet<_> = cov.configs.iter().map(|c| (c.control(0), c.control(2))).collect();
        for q0 in 0..m.threads[0].states.len() {
            for q2 in 0..m.threads[2].states.len() {
                let query = PairQuery::new(0, m.threads[0].states[q0].clone(), 2, m.threads[2].states[q2].clone());
                let decided = pairwise_reach(&m, &query).unwrap().decision.is_reachable();
                let found = seen.contains(&(StateId(q0 as u32), StateId(q2 as u32)));
                if found {
                    prop_assert!(decided);
                } else if cov.exhausted {
                    prop_assert!(!decided);
                }
            }
        }
    }

    #[test]
    fn non_contextual_threads_are_rejected_or_pass(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GenParams { states: 4, symbols: 2, locks: 2, transitions: 8 };
        let a = random_thread("A", "a", &p, &mut rng);
        let b = random_thread("B", "b", &p, &mut rng);
        let m = Model::compile(&MultiPdsSpec::new("r", &["l0", "l1"], vec![a, b])).unwrap();
        match build_product(&m) {
            Ok(_) => check_against_bfs(&m)?,
            Err(ctxlock::reach::ReachError::NonContextual { witness, .. }) => {
                prop_assert!(!ctxlock::discipline::check_contextual_trace(&witness, m.mode).is_empty());
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}

#[test]
fn witnesses_stay_in_their_thread() {
    // A pop must never fire against the other thread's symbol on the
    // shared stack.
    let a = PdsSpec::new("A", "a0").push("a0", "a1", "x").pop("a1", "x", "a2");
    let b = PdsSpec::new("B", "b0").push("b0", "b1", "y").pop("b1", "y", "b2");
    let m = Model::compile(&MultiPdsSpec::new("s", &[], vec![a, b])).unwrap();
    let p = build_product(&m).unwrap();
    for s in p.all_states() {
        for sym in [ProductSymbol {
            thread: 1,
            symbol: m.threads[1].symbol_id("y").unwrap(),
        }] {
            for (_, tag) in p.pops(&s, &sym) {
                assert_eq!(tag.thread, 1);
                assert!(matches!(
                    m.threads[1].transitions[tag.transition],
                    Transition::Pop { .. }
                ));
            }
        }
    }
    let analysis = p.saturate().unwrap();
    assert_eq!(analysis.reachable_pairs().len(), 9);
    let t = m.resolve(&PairQuery::new(0, "a2", 1, "b2")).unwrap();
    let Outcome::Found(_) = bounded_reach(&m, &t, &Bounds::default()).outcome else {
        panic!()
    };
}
