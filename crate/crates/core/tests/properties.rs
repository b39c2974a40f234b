mod common;

use std::collections::BTreeSet;

use ctxlock::discipline::{
    check_contextual_static, check_contextual_trace, classify, reorder_once, reorder_to_well_bracketed, Bracketing,
    StaticVerdict,
};
use ctxlock::explorer::enumerate_traces;
use ctxlock::model::{validate, LockId, LockMode, LockSet, Model, MultiPdsSpec, PdsSpec};
use ctxlock::random::{contextual_pair, random_thread, random_walk, GenParams};
use ctxlock::semantics::{match_calls_returns, Computation, LabelKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small() -> GenParams {
    GenParams {
        states: 5,
        symbols: 2,
        locks: 2,
        transitions: 9,
    }
}

fn random_model(seed: u64, p: &GenParams) -> Model {
    let mut r = rng(seed);
    Model::compile(&contextual_pair(p, &mut r)).unwrap()
}

fn walk(model: &Model, seed: u64, len: usize) -> Computation {
    random_walk(model, len, &mut rng(seed ^ 0x9e37_79b9))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lockset_matches_set_model(a in 0u64..256, b in 0u64..256, l in 0u8..8) {
        let (x, y) = (LockSet::from_bits(a), LockSet::from_bits(b));
        let sx: BTreeSet<u8> = (0..8).filter(|i| a >> i & 1 == 1).collect();
        let sy: BTreeSet<u8> = (0..8).filter(|i| b >> i & 1 == 1).collect();
        let back = |s: LockSet| s.iter().map(|l| l.0).collect::<BTreeSet<u8>>();
        prop_assert_eq!(back(x.union(y)), &sx | &sy);
        prop_assert_eq!(back(x.intersection(y)), &sx & &sy);
        prop_assert_eq!(back(x.difference(y)), &sx - &sy);
        prop_assert_eq!(x.is_subset(y), sx.is_subset(&sy));
        prop_assert_eq!(x.len(), sx.len());
        prop_assert_eq!(x.with(LockId(l)).contains(LockId(l)), true);
        prop_assert_eq!(x.without(LockId(l)).contains(LockId(l)), false);
    }

    #[test]
    fn validation_ignores_declaration_order(seed: u64) {
        let mut r = rng(seed);
        let p = GenParams { states: 4, symbols: 2, locks: 3, transitions: 8 };
        let a = random_thread("A", "a", &p, &mut r);
        // Deliberately overlapping names and an undeclared lock.
        let b = random_thread("B", "a", &p, &mut r).acq("a0", "a1", "ghost");
        let spec = MultiPdsSpec::new("s", &["l0", "l1"], vec![a, b]);
        let report = validate(&spec);
        let mut shuffled = spec.clone();
        for t in &mut shuffled.threads {
            t.transitions.shuffle(&mut r);
        }
        prop_assert_eq!(validate(&shuffled), report);
    }

    #[test]
    fn walks_respect_the_step_relation(seed: u64) {
        let m = random_model(seed, &GenParams::default());
        let c = walk(&m, seed, 30);
        prop_assert!(c.validate(&m).is_ok());
        let all = m.all_locks();
        for k in 0..c.len() {
            let (before, after) = (c.config(k), c.config(k + 1));
            let label = c.label(k);
            prop_assert!(after.locks_disjoint());
            let union = (0..2).fold(LockSet::EMPTY, |u, t| u.union(after.lockset(t)));
            prop_assert_eq!(after.free(all), all.difference(union));
            for t in 0..2 {
                let delta = after.stack_height(t) as i64 - before.stack_height(t) as i64;
                let expect = match (label.thread == t, label.kind) {
                    (true, LabelKind::Push) => 1,
                    (true, LabelKind::Pop) => -1,
                    _ => 0,
                };
                prop_assert_eq!(delta, expect);
            }
        }
    }

    #[test]
    fn label_replay_reconstructs_a_computation(seed: u64) {
        let m = random_model(seed, &small());
        let c = walk(&m, seed, 20);
        let again = Computation::from_labels(&m, &c.labels()).unwrap();
        prop_assert!(again.validate(&m).is_ok());
        prop_assert_eq!(again.labels(), c.labels());
    }

    #[test]
    fn matching_agrees_with_height_criterion(seed: u64) {
        let m = random_model(seed, &small());
        let c = walk(&m, seed, 20);
        let mm = match_calls_returns(&c);
        let lifo: BTreeSet<_> = (0..2).flat_map(|t| mm.pairs(t).map(move |(a, b)| (t, a, b))).collect();
        prop_assert_eq!(lifo, common::height_matches(&c));
        for t in 0..2 {
            for &u in mm.unmatched(t) {
                prop_assert_eq!(c.label(u).kind, LabelKind::Push);
                prop_assert!(mm.return_of(t, u).is_none());
            }
        }
    }

    #[test]
    fn contextual_trace_check_matches_definition(seed: u64, reentrant: bool) {
        let mut r = rng(seed);
        let p = small();
        let a = random_thread("A", "a", &p, &mut r);
        let b = random_thread("B", "b", &p, &mut r);
        let m = Model::compile(&MultiPdsSpec::new("s", &["l0", "l1"], vec![a, b]).reentrant(reentrant)).unwrap();
        let c = random_walk(&m, 20, &mut r);
        let found: BTreeSet<_> = check_contextual_trace(&c, m.mode)
            .iter()
            .map(|v| (v.thread, v.call_pos, v.return_pos))
            .collect();
        prop_assert_eq!(found, common::brute_contextual_offenders(&c, m.mode));
    }

    #[test]
    fn classify_agrees_with_brute_force(seed: u64) {
        let m = random_model(seed, &small());
        let c = walk(&m, seed, 20);
        let all = common::brute_witnesses(&c);
        match classify(&c).unwrap() {
            Bracketing::WellBracketed => prop_assert!(all.is_empty()),
            Bracketing::NonWellBracketed(w) => {
                let min = all.iter().min_by_key(|x| (x.0, x.1)).copied();
                prop_assert_eq!(min, Some((w.l1, w.l2, w.l3, w.thread)));
                // All witnesses sharing the least l1 agree on l3.
                prop_assert!(all.iter().filter(|x| x.0 == w.l1).all(|x| x.2 == w.l3));
            }
        }
    }

    #[test]
    fn reordering_preserves_the_computation_shape(seed: u64) {
        let m = random_model(seed, &small());
        let c = walk(&m, seed, 20);
        let Bracketing::NonWellBracketed(w) = classify(&c).unwrap() else { return Ok(()) };
        let once = reorder_once(&m, &c).unwrap();
        prop_assert!(once.validate(&m).is_ok());
        prop_assert_eq!(once.len(), c.len());
        prop_assert_eq!(once.final_config(), c.final_config());
        prop_assert!(check_contextual_trace(&once, LockMode::Plain).is_empty());
        for t in 0..2 {
            let own = |x: &Computation| x.labels().into_iter().filter(|l| l.thread == t).collect::<Vec<_>>();
            prop_assert_eq!(own(&once), own(&c));
        }
        prop_assert_eq!(&once.labels()[..w.l2], &c.labels()[..w.l2]);
        prop_assert_eq!(&once.labels()[w.l3 + 1..], &c.labels()[w.l3 + 1..]);
        if let Bracketing::NonWellBracketed(w2) = classify(&once).unwrap() {
            prop_assert!(w2.l1 > w.l1);
        }
        let full = reorder_to_well_bracketed(&m, &c).unwrap();
        prop_assert_eq!(classify(&full.result).unwrap(), Bracketing::WellBracketed);
        prop_assert!(full.iterations() <= c.len());
        prop_assert_eq!(full.result.final_config(), c.final_config());
    }

    #[test]
    fn static_verdict_matches_bounded_traces(seed: u64) {
        let mut r = rng(seed);
        let p = GenParams { states: 4, symbols: 2, locks: 2, transitions: 8 };
        let t = random_thread("A", "a", &p, &mut r);
        let m = Model::compile(&MultiPdsSpec::new("s", &["l0", "l1"], vec![t])).unwrap();
        match check_contextual_static(&m, 0).unwrap() {
            StaticVerdict::Holds => {
                for c in enumerate_traces(&m, 9) {
                    prop_assert!(common::brute_contextual_offenders(&c, LockMode::Plain).is_empty());
                }
            }
            StaticVerdict::Violated { witness, violation } => {
                prop_assert!(witness.validate(&m).is_ok());
                let offenders = common::brute_contextual_offenders(&witness, LockMode::Plain);
                prop_assert!(offenders.contains(&(0, violation.call_pos, violation.return_pos)));
            }
        }
    }
}

#[test]
fn lock_free_recursive_thread_holds() {
    let t = PdsSpec::new("R", "r0")
        .push("r0", "r0", "g")
        .pop("r0", "g", "r1")
        .push("r1", "r0", "g");
    let m = Model::compile(&MultiPdsSpec::new("s", &["l"], vec![t])).unwrap();
    assert!(check_contextual_static(&m, 0).unwrap().holds());
}

#[test]
fn push_free_trace_has_no_violation() {
    let t = PdsSpec::new("T", "x").acq("x", "y", "l").rel("y", "l", "z");
    let m = Model::compile(&MultiPdsSpec::new("s", &["l"], vec![t])).unwrap();
    for c in enumerate_traces(&m, 4) {
        assert!(check_contextual_trace(&c, LockMode::Plain).is_empty());
    }
}
