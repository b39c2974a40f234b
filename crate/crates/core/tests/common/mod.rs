//! Brute-force reference implementations, written directly from the
//! definitions and sharing no code with the library beyond the step
//! relation.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use ctxlock::model::{LockMode, Model};
use ctxlock::saturation::{PushdownRules, Step};
use ctxlock::semantics::{system_successors, Computation, LabelKind, SystemConfig};

/// Matching pairs `(thread, call, return)` by the stack-height criterion:
/// equal heights before the call and after the return, never below the
/// post-call height in between.
pub fn height_matches(comp: &Computation) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for (l, (label, _)) in comp.steps().iter().enumerate() {
        if label.kind != LabelKind::Push {
            continue;
        }
        let t = label.thread;
        let h = |k: usize| comp.config(k).stack_height(t);
        for j in l + 1..comp.len() {
            let lbl = comp.label(j);
            if lbl.thread == t
                && lbl.kind == LabelKind::Pop
                && h(l) == h(j + 1)
                && (l + 1..=j).all(|p| h(p) >= h(l + 1))
            {
                out.insert((t, l, j));
                break;
            }
        }
    }
    out
}

/// Every witness `(l1, l2, l3, thread)` of non-well-bracketing.
pub fn brute_witnesses(comp: &Computation) -> Vec<(usize, usize, usize, usize)> {
    let m = height_matches(comp);
    let ret_of = |t: usize, c: usize| m.iter().find(|&&(tt, cc, _)| tt == t && cc == c).map(|x| x.2);
    let n = comp.len();
    let mut out = Vec::new();
    for i in 0..2 {
        for l1 in 0..n {
            for l2 in l1 + 1..n {
                for l3 in l2 + 1..n {
                    if ret_of(i, l1) != Some(l3) {
                        continue;
                    }
                    let lb = comp.label(l2);
                    if lb.thread != 1 - i || lb.kind != LabelKind::Push {
                        continue;
                    }
                    if ret_of(1 - i, l2).is_none_or(|r| r > l3) {
                        out.push((l1, l2, l3, i));
                    }
                }
            }
        }
    }
    out
}

/// Matched pairs violating contextual locking, straight from the
/// definitions.
pub fn brute_contextual_offenders(comp: &Computation, mode: LockMode) -> BTreeSet<(usize, usize, usize)> {
    height_matches(comp)
        .into_iter()
        .filter(|&(t, l, j)| match mode {
            LockMode::Plain => {
                let ls = |k: usize| comp.config(k).lockset(t);
                ls(l) != ls(j) || (l..=j).any(|r| !ls(l).is_subset(ls(r)))
            }
            LockMode::Reentrant => {
                let held = |k: usize| comp.config(k).threads[t].held.counts().to_vec();
                let le = |a: &[u32], b: &[u32]| a.iter().zip(b).all(|(x, y)| x <= y);
                held(l) != held(j + 1) || (l..=j).any(|r| !le(&held(l), &held(r)))
            }
        })
        .collect()
}

/// Number of computations of length at most `k`, by memoized recursion
/// over configurations.
pub fn count_computations(model: &Model, k: usize) -> u64 {
    fn go(model: &Model, c: &SystemConfig, k: usize, memo: &mut HashMap<(SystemConfig, usize), u64>) -> u64 {
        if k == 0 {
            return 1;
        }
        if let Some(&v) = memo.get(&(c.clone(), k)) {
            return v;
        }
        let v = 1 + system_successors(model, c)
            .iter()
            .map(|(_, s)| go(model, s, k - 1, memo))
            .sum::<u64>();
        memo.insert((c.clone(), k), v);
        v
    }
    go(model, &SystemConfig::initial(model), k, &mut HashMap::new())
}

/// Shortest distance of every configuration reachable within `k` steps,
/// by exhaustive path enumeration.
pub fn distances_by_paths(model: &Model, k: usize) -> HashMap<SystemConfig, usize> {
    let mut best: HashMap<SystemConfig, usize> = HashMap::new();
    let mut stack = vec![(SystemConfig::initial(model), 0usize)];
    while let Some((c, d)) = stack.pop() {
        if best.get(&c).is_some_and(|&b| b <= d) {
            continue;
        }
        best.insert(c.clone(), d);
        if d < k {
            for (_, s) in system_successors(model, &c) {
                stack.push((s, d + 1));
            }
        }
    }
    best
}

pub type PdsConfigs<S, G> = BTreeSet<(S, Vec<G>)>;

/// Configurations `(state, stack)` of a pushdown system reachable without
/// the stack ever exceeding `max_height`, by explicit search. Stacks are
/// listed top first. The flag tells whether some push was cut off.
pub fn explicit_pds_reach<R: PushdownRules>(rules: &R, max_height: usize) -> (PdsConfigs<R::State, R::Symbol>, bool)
where
    R::State: Ord + std::fmt::Debug,
    R::Symbol: Ord + Hash,
{
    let start = (rules.initial(), Vec::new());
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut cut = false;
    while let Some((p, w)) = queue.pop_front() {
        let mut next = Vec::new();
        for (step, _) in rules.steps(&p) {
            match step {
                Step::Internal(q) => next.push((q, w.clone())),
                Step::Push(q, g) if w.len() < max_height => {
                    let mut w2 = vec![g];
                    w2.extend(w.iter().cloned());
                    next.push((q, w2));
                }
                Step::Push(..) => cut = true,
            }
        }
        if let Some(top) = w.first() {
            for (q, _) in rules.pops(&p, top) {
                next.push((q, w[1..].to_vec()));
            }
        }
        for n in next {
            if seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    (seen, cut)
}
