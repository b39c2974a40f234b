//! Lock discipline of computations and threads.
//!
//! * [`check_contextual_trace`] inspects every matched call/return pair of a
//!   computation.
//! * [`check_contextual_static`] decides, for one thread in isolation,
//!   whether every computation of it locks contextually. It saturates a
//!   pushdown system whose control remembers the lockset of the innermost
//!   open frame.
//! * [`classify`] finds the minimal non-well-bracketing witness of a
//!   2-thread computation, and [`reorder_once`] removes it by moving one
//!   thread's work inside the window ahead of the other's.

use thiserror::Error;

use crate::model::{LockMode, LockSet, Model, Thread, Transition};
use crate::saturation::{post_star, PushdownRules, Step};
use crate::semantics::{match_calls_returns, thread_successors, Computation, LabelKind, ReplayError, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Offense {
    /// The lockset after the return differs from the one at the call.
    ReturnDiffers,
    /// Some lock held at the call was not held in configuration `at`.
    Dipped { at: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContextualViolation {
    pub thread: usize,
    pub call_pos: usize,
    pub return_pos: usize,
    pub offense: Offense,
}

impl std::fmt::Display for ContextualViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "thread {} call {} return {}: ",
            self.thread, self.call_pos, self.return_pos
        )?;
        match self.offense {
            Offense::ReturnDiffers => write!(f, "lockset at return differs from lockset at call"),
            Offense::Dipped { at } => {
                write!(f, "lockset dipped below call-time lockset at position {at}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DisciplineError {
    #[error("expected a 2-thread computation, got {0} threads")]
    NotTwoThreads(usize),
    #[error("static contextual check requires non-reentrant locks")]
    Reentrant,
    #[error("thread index {0} out of range")]
    NoSuchThread(usize),
    #[error("computation is already well-bracketed")]
    AlreadyWellBracketed,
    #[error("input does not lock contextually: {0}")]
    NonContextual(ContextualViolation),
    #[error("reordered step {step} (original step {original}, thread {thread}) is not enabled")]
    StepNotEnabled {
        step: usize,
        original: usize,
        thread: usize,
    },
    #[error("reordering went wrong: {0}")]
    Invariant(String),
}

/// All contextual-locking violations of `comp`, one per offending matched
/// pair, ordered by thread then call position. Plain mode compares
/// locksets, re-entrant mode compares per-lock counts.
pub fn check_contextual_trace(comp: &Computation, mode: LockMode) -> Vec<ContextualViolation> {
    let matches = match_calls_returns(comp);
    let mut out = Vec::new();
    for thread in 0..comp.thread_count() {
        for (call, ret) in matches.pairs(thread) {
            let offense = match mode {
                LockMode::Plain => {
                    let at_call = comp.config(call).lockset(thread);
                    (call..=ret)
                        .find(|&r| !at_call.is_subset(comp.config(r).lockset(thread)))
                        .map(|at| Offense::Dipped { at })
                        .or_else(|| (comp.config(ret).lockset(thread) != at_call).then_some(Offense::ReturnDiffers))
                }
                LockMode::Reentrant => {
                    let at_call = &comp.config(call).threads[thread].held;
                    (call..=ret)
                        .find(|&r| !at_call.le(&comp.config(r).threads[thread].held))
                        .map(|at| Offense::Dipped { at })
                        .or_else(|| {
                            (&comp.config(ret + 1).threads[thread].held != at_call).then_some(Offense::ReturnDiffers)
                        })
                }
            };
            if let Some(offense) = offense {
                out.push(ContextualViolation {
                    thread,
                    call_pos: call,
                    return_pos: ret,
                    offense,
                });
            }
        }
    }
    out
}

/// Outcome of the static check for one thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StaticVerdict {
    Holds,
    /// `witness` is a computation of the thread run alone (a 1-thread
    /// model) ending in the offending return.
    Violated {
        witness: Computation,
        violation: ContextualViolation,
    },
}

impl StaticVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, StaticVerdict::Holds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum FrameState {
    Live {
        state: u32,
        held: LockSet,
        /// Lockset at the push of the innermost open frame.
        top: LockSet,
        dipped: bool,
    },
    Violation,
}

/// Stack symbol plus the caller's frame bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct FrameSymbol {
    symbol: u32,
    caller_top: LockSet,
    caller_dipped: bool,
}

struct FrameRules<'a> {
    thread: &'a Thread,
}

impl PushdownRules for FrameRules<'_> {
    type State = FrameState;
    type Symbol = FrameSymbol;
    type Tag = usize;

    fn initial(&self) -> FrameState {
        FrameState::Live {
            state: self.thread.initial.0,
            held: LockSet::EMPTY,
            top: LockSet::EMPTY,
            dipped: false,
        }
    }

    fn steps(&self, s: &FrameState) -> Vec<(Step<FrameState, FrameSymbol>, usize)> {
        let FrameState::Live {
            state,
            held,
            top,
            dipped,
        } = *s
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (ix, t) in self.thread.outgoing(crate::model::StateId(state)) {
            let to = t.to().0;
            let live = |held, dipped| FrameState::Live {
                state: to,
                held,
                top,
                dipped,
            };
            match *t {
                Transition::Internal { .. } => out.push((Step::Internal(live(held, dipped)), ix)),
                Transition::Acq { lock, .. } if !held.contains(lock) => {
                    out.push((Step::Internal(live(held.with(lock), dipped)), ix))
                }
                Transition::Rel { lock, .. } if held.contains(lock) => out.push((
                    Step::Internal(live(held.without(lock), dipped || top.contains(lock))),
                    ix,
                )),
                Transition::Push { symbol, .. } => {
                    let callee = FrameState::Live {
                        state: to,
                        held,
                        top: held,
                        dipped: false,
                    };
                    let frame = FrameSymbol {
                        symbol: symbol.0,
                        caller_top: top,
                        caller_dipped: dipped,
                    };
                    out.push((Step::Push(callee, frame), ix));
                }
                _ => {}
            }
        }
        out
    }

    fn pops(&self, s: &FrameState, frame: &FrameSymbol) -> Vec<(FrameState, usize)> {
        let FrameState::Live {
            state,
            held,
            top,
            dipped,
        } = *s
        else {
            return Vec::new();
        };
        self.thread
            .outgoing(crate::model::StateId(state))
            .filter_map(|(ix, t)| match *t {
                Transition::Pop { symbol, to, .. } if symbol.0 == frame.symbol => {
                    let next = if dipped || held != top {
                        FrameState::Violation
                    } else {
                        FrameState::Live {
                            state: to.0,
                            held,
                            top: frame.caller_top,
                            dipped: frame.caller_dipped,
                        }
                    };
                    Some((next, ix))
                }
                _ => None,
            })
            .collect()
    }
}

/// Decides whether every computation of thread `thread`, run with all
/// other locks free, locks contextually. Exact for plain locks.
pub fn check_contextual_static(model: &Model, thread: usize) -> Result<StaticVerdict, DisciplineError> {
    if model.mode == LockMode::Reentrant {
        return Err(DisciplineError::Reentrant);
    }
    let t = model.threads.get(thread).ok_or(DisciplineError::NoSuchThread(thread))?;
    let sat = post_star(&FrameRules { thread: t });
    let Some(tags) = sat.witness(&FrameState::Violation) else {
        return Ok(StaticVerdict::Holds);
    };
    let solo = model.project(&[thread]);
    let moves: Vec<(usize, usize)> = tags.into_iter().map(|ix| (0, ix)).collect();
    let witness = Computation::from_transitions(&solo, &moves)
        .map_err(|e| DisciplineError::Invariant(format!("static witness does not replay: {e}")))?;
    let violation = check_contextual_trace(&witness, LockMode::Plain)
        .into_iter()
        .find(|v| v.return_pos + 1 == witness.len())
        .ok_or_else(|| DisciplineError::Invariant("static witness is contextual".into()))?;
    Ok(StaticVerdict::Violated { witness, violation })
}

/// Runs [`check_contextual_static`] on every thread.
pub fn check_all_static(model: &Model) -> Result<Vec<StaticVerdict>, DisciplineError> {
    (0..model.threads.len())
        .map(|t| check_contextual_static(model, t))
        .collect()
}

/// A call/return pair of `thread` at `l1`/`l3` straddling a call of the
/// other thread at `l2` that has not returned by `l3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BracketWitness {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub thread: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bracketing {
    WellBracketed,
    NonWellBracketed(BracketWitness),
}

/// Minimal witness by smallest `l1`, then smallest `l2`.
pub fn classify(comp: &Computation) -> Result<Bracketing, DisciplineError> {
    if comp.thread_count() != 2 {
        return Err(DisciplineError::NotTwoThreads(comp.thread_count()));
    }
    let m = match_calls_returns(comp);
    let mut best: Option<BracketWitness> = None;
    for thread in 0..2 {
        let other = 1 - thread;
        for (l1, l3) in m.pairs(thread) {
            if best.is_some_and(|b| b.l1 < l1) {
                break;
            }
            let l2 = (l1 + 1..l3).find(|&k| {
                let label = comp.label(k);
                label.thread == other && label.kind == LabelKind::Push && m.return_of(other, k).is_none_or(|r| r > l3)
            });
            if let Some(l2) = l2 {
                let w = BracketWitness { l1, l2, l3, thread };
                if best.is_none_or(|b| (w.l1, w.l2) < (b.l1, b.l2)) {
                    best = Some(w);
                }
                break;
            }
        }
    }
    Ok(best.map_or(Bracketing::WellBracketed, Bracketing::NonWellBracketed))
}

fn require_contextual(model: &Model, comp: &Computation) -> Result<(), DisciplineError> {
    match check_contextual_trace(comp, model.mode).first() {
        Some(v) => Err(DisciplineError::NonContextual(*v)),
        None => Ok(()),
    }
}

/// Moves `thread` of `cur` to the local configuration it had after
/// original step `original`, using any enabled transition.
fn replay_step(model: &Model, comp: &Computation, cur: &SystemConfig, original: usize) -> Option<SystemConfig> {
    let label = comp.label(original);
    let target = &comp.config(original + 1).threads[label.thread];
    let free = cur.free(model.all_locks());
    thread_successors(
        &model.threads[label.thread],
        model.mode,
        free,
        &cur.threads[label.thread],
    )
    .into_iter()
    .find(|mv| mv.kind == label.kind && &mv.config == target)
    .map(|mv| {
        let mut next = cur.clone();
        next.threads[label.thread] = mv.config;
        next
    })
}

/// Removes the minimal witness of `comp`: inside `[l2, l3]`, all moves of
/// the witness thread run first (ending with its return), then the other
/// thread's. Everything outside the window is kept.
pub fn reorder_once(model: &Model, comp: &Computation) -> Result<Computation, DisciplineError> {
    let Bracketing::NonWellBracketed(w) = classify(comp)? else {
        return Err(DisciplineError::AlreadyWellBracketed);
    };
    require_contextual(model, comp)?;
    let order: Vec<usize> = (0..w.l2)
        .chain((w.l2..=w.l3).filter(|&k| comp.label(k).thread == w.thread))
        .chain((w.l2..=w.l3).filter(|&k| comp.label(k).thread != w.thread))
        .chain(w.l3 + 1..comp.len())
        .collect();
    let mut out = comp.prefix(0);
    for (step, &original) in order.iter().enumerate() {
        let thread = comp.label(original).thread;
        let next = replay_step(model, comp, out.final_config(), original).ok_or(DisciplineError::StepNotEnabled {
            step,
            original,
            thread,
        })?;
        out.push_unchecked(comp.label(original), next);
    }
    if out.final_config() != comp.final_config() {
        return Err(DisciplineError::Invariant("final configuration changed".into()));
    }
    Ok(out)
}

/// Result of [`reorder_to_well_bracketed`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reordering {
    pub result: Computation,
    /// The minimal witness removed by each iteration, in order.
    pub witnesses: Vec<BracketWitness>,
}

impl Reordering {
    pub fn iterations(&self) -> usize {
        self.witnesses.len()
    }
}

/// Applies [`reorder_once`] until the computation is well-bracketed.
pub fn reorder_to_well_bracketed(model: &Model, comp: &Computation) -> Result<Reordering, DisciplineError> {
    let mut current = comp.clone();
    let mut witnesses = Vec::new();
    while let Bracketing::NonWellBracketed(w) = classify(&current)? {
        if witnesses.last().is_some_and(|prev: &BracketWitness| w.l1 <= prev.l1) {
            return Err(DisciplineError::Invariant(format!(
                "minimal witness did not advance: {} after {}",
                w.l1,
                witnesses.last().unwrap().l1
            )));
        }
        witnesses.push(w);
        current = reorder_once(model, &current)?;
    }
    Ok(Reordering {
        result: current,
        witnesses,
    })
}

impl From<ReplayError> for DisciplineError {
    fn from(e: ReplayError) -> Self {
        DisciplineError::Invariant(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn fig1() -> Model {
        Model::compile(&corpus::figure1()).unwrap()
    }

    #[test]
    fn figure1_traces_are_contextual() {
        let m = fig1();
        for word in [corpus::comp1_labels(&m), corpus::comp2_labels(&m)] {
            let c = Computation::from_labels(&m, &word).unwrap();
            assert!(check_contextual_trace(&c, LockMode::Plain).is_empty());
        }
    }

    #[test]
    fn figure3_trace_has_one_violation() {
        let m = Model::compile(&corpus::figure3()).unwrap();
        let c = Computation::from_labels(&m, &corpus::figure3_trace(&m)).unwrap();
        let v = check_contextual_trace(&c, LockMode::Plain);
        assert_eq!(
            v,
            vec![ContextualViolation {
                thread: 0,
                call_pos: 1,
                return_pos: 4,
                offense: Offense::Dipped { at: 4 }
            }]
        );
    }

    #[test]
    fn static_check_on_corpus() {
        let m = fig1();
        assert!(check_all_static(&m).unwrap().iter().all(StaticVerdict::holds));
        let m3 = Model::compile(&corpus::figure3()).unwrap();
        match check_contextual_static(&m3, 0).unwrap() {
            StaticVerdict::Violated { witness, violation } => {
                assert_eq!(witness.labels(), corpus::figure3_trace(&m3));
                assert_eq!(violation.call_pos, 1);
            }
            StaticVerdict::Holds => panic!("figure 3 must violate"),
        }
    }

    #[test]
    fn static_check_rejects_reentrant() {
        let m = Model::compile(&corpus::figure1().reentrant(true)).unwrap();
        assert_eq!(check_contextual_static(&m, 0), Err(DisciplineError::Reentrant));
    }

    #[test]
    fn comp1_minimal_witness_and_reorder() {
        let m = fig1();
        let c1 = Computation::from_labels(&m, &corpus::comp1_labels(&m)).unwrap();
        assert_eq!(
            classify(&c1).unwrap(),
            Bracketing::NonWellBracketed(BracketWitness {
                l1: 0,
                l2: 2,
                l3: 7,
                thread: 0
            })
        );
        let r = reorder_once(&m, &c1).unwrap();
        assert_eq!(r.labels(), corpus::comp1_reordered_labels(&m));
        assert_eq!(r.final_config(), c1.final_config());
        let c2 = Computation::from_labels(&m, &corpus::comp2_labels(&m)).unwrap();
        assert_eq!(classify(&c2).unwrap(), Bracketing::WellBracketed);
        let again = reorder_to_well_bracketed(&m, &c2).unwrap();
        assert_eq!(again.iterations(), 0);
        assert_eq!(again.result, c2);
    }

    #[test]
    fn classify_needs_two_threads() {
        let m = Model::compile(&corpus::figure3()).unwrap();
        assert_eq!(
            classify(&Computation::empty(&m)),
            Err(DisciplineError::NotTwoThreads(1))
        );
    }
}
