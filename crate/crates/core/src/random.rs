//! Random models and computations for fuzzing.
//!
//! [`contextual_thread`] builds threads that lock contextually by
//! construction. Every state is either a main state, annotated with the
//! exact lockset held there, or a procedure state, annotated with the locks
//! taken since the innermost call. Lock moves keep the annotations exact,
//! procedure code only releases what it took itself, and a symbol's push
//! and pop sites agree on the caller's annotation, so every return restores
//! the lockset of its call. [`random_thread`] has no such structure.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{LockSet, Model, MultiPdsSpec, PdsSpec};
use crate::semantics::{system_successors, Computation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub states: usize,
    pub symbols: usize,
    pub locks: usize,
    /// Number of transitions to draw, before deduplication.
    pub transitions: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            states: 6,
            symbols: 2,
            locks: 3,
            transitions: 10,
        }
    }
}

pub fn lock_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("l{i}")).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Main,
    Proc,
}

fn random_set(rng: &mut impl Rng, locks: usize) -> LockSet {
    LockSet::from_bits(rng.gen_range(0..1u64 << locks))
}

/// A thread named `name` whose states and symbols are prefixed by `prefix`.
pub fn contextual_thread(name: &str, prefix: &str, p: &GenParams, rng: &mut impl Rng) -> PdsSpec {
    let n = p.states.max(1);
    let state = |i: usize| format!("{prefix}{i}");
    let symbol = |i: usize| format!("{prefix}g{i}");
    let lock = |l: crate::model::LockId| format!("l{}", l.index());
    let mut kinds = vec![Kind::Main];
    let mut ann = vec![LockSet::EMPTY];
    for i in 1..n {
        // Keep at least one empty procedure state as a call target.
        let kind = if i == 1 || rng.gen_bool(0.5) {
            Kind::Proc
        } else {
            Kind::Main
        };
        kinds.push(kind);
        ann.push(if i == 1 || rng.gen_bool(0.3) {
            LockSet::EMPTY
        } else {
            random_set(rng, p.locks)
        });
    }
    let sym_kind: Vec<Kind> = (0..p.symbols)
        .map(|_| if rng.gen_bool(0.5) { Kind::Main } else { Kind::Proc })
        .collect();
    // Return annotations are drawn from existing states so that push and
    // pop sites exist.
    let sym_ret: Vec<LockSet> = (0..p.symbols).map(|_| ann[rng.gen_range(0..n)]).collect();

    let mut spec = PdsSpec::new(name, state(0));
    for i in 0..n {
        spec.declare_state(&state(i));
    }
    for s in 0..p.symbols {
        spec.declare_symbol(&symbol(s));
    }
    let mut attempts = 0;
    let mut added = 0;
    while added < p.transitions && attempts < p.transitions * 50 {
        attempts += 1;
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        match rng.gen_range(0..5) {
            0 if kinds[x] == kinds[y] && ann[x] == ann[y] => {
                spec = spec.internal(&state(x), &state(y));
            }
            1 if p.locks > 0 && kinds[x] == kinds[y] => {
                let missing: Vec<_> = LockSet::full(p.locks).difference(ann[x]).iter().collect();
                let Some(&l) = missing.choose(rng) else { continue };
                if ann[y] != ann[x].with(l) {
                    continue;
                }
                spec = spec.acq(&state(x), &state(y), &lock(l));
            }
            2 if kinds[x] == kinds[y] => {
                let held: Vec<_> = ann[x].iter().collect();
                let Some(&l) = held.choose(rng) else { continue };
                if ann[y] != ann[x].without(l) {
                    continue;
                }
                spec = spec.rel(&state(x), &lock(l), &state(y));
            }
            3 if p.symbols > 0 => {
                let s = rng.gen_range(0..p.symbols);
                if sym_kind[s] != kinds[x] || sym_ret[s] != ann[x] || kinds[y] != Kind::Proc || !ann[y].is_empty() {
                    continue;
                }
                spec = spec.push(&state(x), &state(y), &symbol(s));
            }
            4 if p.symbols > 0 => {
                let s = rng.gen_range(0..p.symbols);
                if kinds[x] != Kind::Proc || !ann[x].is_empty() || kinds[y] != sym_kind[s] || ann[y] != sym_ret[s] {
                    continue;
                }
                spec = spec.pop(&state(x), &symbol(s), &state(y));
            }
            _ => continue,
        }
        added += 1;
    }
    spec
}

/// A thread with uniformly random transitions.
pub fn random_thread(name: &str, prefix: &str, p: &GenParams, rng: &mut impl Rng) -> PdsSpec {
    let n = p.states.max(1);
    let state = |i: usize| format!("{prefix}{i}");
    let symbol = |i: usize| format!("{prefix}g{i}");
    let mut spec = PdsSpec::new(name, state(0));
    for i in 0..n {
        spec.declare_state(&state(i));
    }
    for s in 0..p.symbols {
        spec.declare_symbol(&symbol(s));
    }
    for _ in 0..p.transitions {
        let (x, y) = (state(rng.gen_range(0..n)), state(rng.gen_range(0..n)));
        let family = rng.gen_range(0..5);
        spec = match family {
            1 | 2 if p.symbols > 0 => {
                let s = symbol(rng.gen_range(0..p.symbols));
                if family == 1 {
                    spec.push(&x, &y, &s)
                } else {
                    spec.pop(&x, &s, &y)
                }
            }
            3 | 4 if p.locks > 0 => {
                let l = format!("l{}", rng.gen_range(0..p.locks));
                if family == 3 {
                    spec.acq(&x, &y, &l)
                } else {
                    spec.rel(&x, &l, &y)
                }
            }
            _ => spec.internal(&x, &y),
        };
    }
    spec
}

/// Two contextual threads `A` and `B` over `p.locks` locks.
pub fn contextual_pair(p: &GenParams, rng: &mut impl Rng) -> MultiPdsSpec {
    let a = contextual_thread("A", "a", p, rng);
    let b = contextual_thread("B", "b", p, rng);
    let locks = lock_names(p.locks);
    let locks: Vec<&str> = locks.iter().map(String::as_str).collect();
    MultiPdsSpec::new("random", &locks, vec![a, b])
}

/// A random walk of at most `max_len` steps, stopping early at a
/// configuration without successors.
pub fn random_walk(model: &Model, max_len: usize, rng: &mut impl Rng) -> Computation {
    let mut comp = Computation::empty(model);
    for _ in 0..max_len {
        let succs = system_successors(model, comp.final_config());
        let Some((label, cfg)) = succs.choose(rng).cloned() else {
            break;
        };
        comp.push_unchecked(label, cfg);
    }
    comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discipline::check_all_static;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structured_threads_pass_the_static_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let spec = contextual_pair(&GenParams::default(), &mut rng);
            let m = Model::compile(&spec).unwrap();
            assert!(check_all_static(&m).unwrap().iter().all(|v| v.holds()));
        }
    }

    #[test]
    fn walks_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = contextual_pair(&GenParams::default(), &mut rng);
        let m = Model::compile(&spec).unwrap();
        for _ in 0..20 {
            assert!(random_walk(&m, 20, &mut rng).validate(&m).is_ok());
        }
    }
}
