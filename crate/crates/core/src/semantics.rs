//! Labeled operational semantics of a thread in a lock environment and of
//! the whole n-threaded system, plus computations and their matching
//! call/return structure.
//!
//! Plain and reentrant locks share one representation: a thread's holding
//! is a count per lock. In plain mode counts never exceed one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::model::{LockId, LockMode, LockSet, Model, StateId, SymbolId, Thread, Transition};

/// Per-lock acquisition counts of one thread.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Holdings(Vec<u32>);

impl Holdings {
    pub fn empty(locks: usize) -> Self {
        Holdings(vec![0; locks])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Holdings(counts)
    }

    pub fn count(&self, lock: LockId) -> u32 {
        self.0[lock.index()]
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// Locks held at least once.
    pub fn lockset(&self) -> LockSet {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| LockId(i as u8))
            .collect()
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Holdings) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn max_count(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    fn set(&mut self, lock: LockId, count: u32) {
        self.0[lock.index()] = count;
    }
}

impl fmt::Debug for Holdings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.0.iter().enumerate().filter(|(_, &c)| c > 0))
            .finish()
    }
}

/// Control state, stack (top is the last element) and holdings of a thread.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThreadConfig {
    pub state: StateId,
    pub stack: Vec<SymbolId>,
    pub held: Holdings,
}

impl ThreadConfig {
    pub fn initial(thread: &Thread, locks: usize) -> Self {
        ThreadConfig {
            state: thread.initial,
            stack: Vec::new(),
            held: Holdings::empty(locks),
        }
    }
}

/// A configuration of the whole system. The free lock set is derived.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemConfig {
    pub threads: Vec<ThreadConfig>,
}

impl SystemConfig {
    pub fn initial(model: &Model) -> Self {
        SystemConfig {
            threads: model
                .threads
                .iter()
                .map(|t| ThreadConfig::initial(t, model.lock_count()))
                .collect(),
        }
    }

    /// Locks not held by any thread.
    pub fn free(&self, all: LockSet) -> LockSet {
        self.threads
            .iter()
            .fold(all, |free, t| free.difference(t.held.lockset()))
    }

    pub fn control(&self, thread: usize) -> StateId {
        self.threads[thread].state
    }

    pub fn stack_height(&self, thread: usize) -> usize {
        self.threads[thread].stack.len()
    }

    pub fn lockset(&self, thread: usize) -> LockSet {
        self.threads[thread].held.lockset()
    }

    pub fn max_stack_height(&self) -> usize {
        self.threads.iter().map(|t| t.stack.len()).max().unwrap_or(0)
    }

    pub fn max_count(&self) -> u32 {
        self.threads.iter().map(|t| t.held.max_count()).max().unwrap_or(0)
    }

    /// No lock is held by two threads.
    pub fn locks_disjoint(&self) -> bool {
        let mut seen = LockSet::EMPTY;
        for t in &self.threads {
            let h = t.held.lockset();
            if !h.intersection(seen).is_empty() {
                return false;
            }
            seen = seen.union(h);
        }
        true
    }
}

/// What a step does, without the thread index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    State,
    Push,
    Pop,
    Acq(LockId),
    Rel(LockId),
}

impl LabelKind {
    pub fn of(transition: &Transition) -> Self {
        match *transition {
            Transition::Internal { .. } => LabelKind::State,
            Transition::Push { .. } => LabelKind::Push,
            Transition::Pop { .. } => LabelKind::Pop,
            Transition::Acq { lock, .. } => LabelKind::Acq(lock),
            Transition::Rel { lock, .. } => LabelKind::Rel(lock),
        }
    }
}

/// A step label: the kind of step and the thread taking it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub kind: LabelKind,
    pub thread: usize,
}

impl Label {
    pub fn new(kind: LabelKind, thread: usize) -> Self {
        Label { kind, thread }
    }

    /// Renders as `(kind,thread)` using the model's lock names.
    pub fn display<'a>(&'a self, model: &'a Model) -> impl fmt::Display + 'a {
        DisplayLabel { label: self, model }
    }
}

struct DisplayLabel<'a> {
    label: &'a Label,
    model: &'a Model,
}

impl fmt::Display for DisplayLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", kind_name(self.label.kind, self.model), self.label.thread)
    }
}

/// `state`, `push`, `pop`, `acq(l)` or `rel(l)`.
pub fn kind_name(kind: LabelKind, model: &Model) -> String {
    match kind {
        LabelKind::State => "state".into(),
        LabelKind::Push => "push".into(),
        LabelKind::Pop => "pop".into(),
        LabelKind::Acq(l) => format!("acq({})", model.lock_name(l)),
        LabelKind::Rel(l) => format!("rel({})", model.lock_name(l)),
    }
}

/// Renders a label word separated by spaces.
pub fn label_word(labels: &[Label], model: &Model) -> String {
    labels
        .iter()
        .map(|l| l.display(model).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One successor of a thread configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadMove {
    pub kind: LabelKind,
    /// Index of the transition used, into `Thread::transitions`.
    pub transition: usize,
    pub free: LockSet,
    pub config: ThreadConfig,
}

/// Applies one transition to a thread configuration in environment `free`.
/// Returns the new free set and configuration, or `None` if not enabled.
pub fn step_thread(
    transition: &Transition,
    mode: LockMode,
    free: LockSet,
    cfg: &ThreadConfig,
) -> Option<(LockSet, ThreadConfig)> {
    if transition.from() != cfg.state {
        return None;
    }
    let mut next = cfg.clone();
    next.state = transition.to();
    let mut free = free;
    match *transition {
        Transition::Internal { .. } => {}
        Transition::Push { symbol, .. } => next.stack.push(symbol),
        Transition::Pop { symbol, .. } => {
            if next.stack.last() != Some(&symbol) {
                return None;
            }
            next.stack.pop();
        }
        Transition::Acq { lock, .. } => {
            let count = cfg.held.count(lock);
            let enabled = match mode {
                LockMode::Plain => free.contains(lock),
                LockMode::Reentrant => free.contains(lock) || count > 0,
            };
            if !enabled {
                return None;
            }
            next.held.set(lock, count + 1);
            free = free.without(lock);
        }
        Transition::Rel { lock, .. } => {
            let count = cfg.held.count(lock);
            match (mode, count) {
                (_, 0) => return None,
                (LockMode::Reentrant, c) if c > 1 => next.held.set(lock, c - 1),
                _ => {
                    next.held.set(lock, 0);
                    free = free.with(lock);
                }
            }
        }
    }
    Some((free, next))
}

/// All successors of `cfg` under `thread`'s transitions, in canonical order.
pub fn thread_successors(thread: &Thread, mode: LockMode, free: LockSet, cfg: &ThreadConfig) -> Vec<ThreadMove> {
    thread
        .outgoing(cfg.state)
        .filter_map(|(ix, t)| {
            step_thread(t, mode, free, cfg).map(|(free, config)| ThreadMove {
                kind: LabelKind::of(t),
                transition: ix,
                free,
                config,
            })
        })
        .collect()
}

/// All successors of a system configuration: threads by index, then each
/// thread's canonical transition order.
pub fn system_successors(model: &Model, s: &SystemConfig) -> Vec<(Label, SystemConfig)> {
    let free = s.free(model.all_locks());
    let mut out = Vec::new();
    for (i, thread) in model.threads.iter().enumerate() {
        for mv in thread_successors(thread, model.mode, free, &s.threads[i]) {
            let mut next = s.clone();
            next.threads[i] = mv.config;
            out.push((Label::new(mv.kind, i), next));
        }
    }
    out
}

/// Applies transition `transition` of thread `thread` to `s`.
pub fn apply(model: &Model, s: &SystemConfig, thread: usize, transition: usize) -> Option<SystemConfig> {
    let t = &model.threads[thread].transitions[transition];
    let free = s.free(model.all_locks());
    step_thread(t, model.mode, free, &s.threads[thread]).map(|(_, cfg)| {
        let mut next = s.clone();
        next.threads[thread] = cfg;
        next
    })
}

/// Why a sequence of steps is not a computation of the model.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("computation does not start in the initial configuration")]
    NotInitial,
    #[error("step {step}: thread {thread} does not exist")]
    UnknownThread { step: usize, thread: usize },
    #[error("step {step}: no enabled transition of thread {thread} yields the recorded configuration")]
    NotEnabled { step: usize, thread: usize },
    #[error("step {step}: label is not enabled for thread {thread}")]
    LabelNotEnabled { step: usize, thread: usize },
}

/// A finite computation from the initial configuration. Configurations are
/// stored alongside labels: `config(k)` is the state before step `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Computation {
    start: SystemConfig,
    steps: Vec<(Label, SystemConfig)>,
}

impl Computation {
    pub fn empty(model: &Model) -> Self {
        Computation {
            start: SystemConfig::initial(model),
            steps: Vec::new(),
        }
    }

    /// Builds a computation from recorded steps, checking each against the
    /// semantics.
    pub fn from_steps(
        model: &Model,
        start: SystemConfig,
        steps: Vec<(Label, SystemConfig)>,
    ) -> Result<Self, ReplayError> {
        let comp = Computation { start, steps };
        comp.validate(model)?;
        Ok(comp)
    }

    /// Construction without checks, for callers that produced the steps
    /// from the semantics themselves.
    pub(crate) fn from_steps_unchecked(start: SystemConfig, steps: Vec<(Label, SystemConfig)>) -> Self {
        Computation { start, steps }
    }

    /// Replays a sequence of `(thread, transition index)` choices.
    pub fn from_transitions(model: &Model, moves: &[(usize, usize)]) -> Result<Self, ReplayError> {
        let mut comp = Computation::empty(model);
        for (step, &(thread, ix)) in moves.iter().enumerate() {
            if thread >= model.threads.len() {
                return Err(ReplayError::UnknownThread { step, thread });
            }
            let next = apply(model, comp.final_config(), thread, ix).ok_or(ReplayError::NotEnabled { step, thread })?;
            let kind = LabelKind::of(&model.threads[thread].transitions[ix]);
            comp.steps.push((Label::new(kind, thread), next));
        }
        Ok(comp)
    }

    /// Reconstructs a computation from its label word alone. Labels may be
    /// ambiguous (several transitions with the same label), so every
    /// consistent configuration is tracked; the first surviving one in
    /// successor order is returned.
    pub fn from_labels(model: &Model, labels: &[Label]) -> Result<Self, ReplayError> {
        let start = SystemConfig::initial(model);
        // layers[k]: config -> (parent index in layers[k-1])
        let mut layers: Vec<Vec<(SystemConfig, usize)>> = vec![vec![(start.clone(), 0)]];
        for (step, label) in labels.iter().enumerate() {
            if label.thread >= model.threads.len() {
                return Err(ReplayError::UnknownThread {
                    step,
                    thread: label.thread,
                });
            }
            let mut next: Vec<(SystemConfig, usize)> = Vec::new();
            let mut seen = HashMap::new();
            for (pi, (cfg, _)) in layers[step].iter().enumerate() {
                let thread = &model.threads[label.thread];
                let free = cfg.free(model.all_locks());
                for mv in thread_successors(thread, model.mode, free, &cfg.threads[label.thread]) {
                    if mv.kind != label.kind {
                        continue;
                    }
                    let mut succ = cfg.clone();
                    succ.threads[label.thread] = mv.config;
                    if seen.insert(succ.clone(), ()).is_none() {
                        next.push((succ, pi));
                    }
                }
            }
            if next.is_empty() {
                return Err(ReplayError::LabelNotEnabled {
                    step,
                    thread: label.thread,
                });
            }
            layers.push(next);
        }
        let mut steps = Vec::with_capacity(labels.len());
        let mut idx = 0;
        for k in (1..layers.len()).rev() {
            let (cfg, parent) = &layers[k][idx];
            steps.push((labels[k - 1], cfg.clone()));
            idx = *parent;
        }
        steps.reverse();
        Ok(Computation { start, steps })
    }

    /// Checks every step against the semantics.
    pub fn validate(&self, model: &Model) -> Result<(), ReplayError> {
        if self.start != SystemConfig::initial(model) {
            return Err(ReplayError::NotInitial);
        }
        let mut prev = &self.start;
        for (step, (label, cfg)) in self.steps.iter().enumerate() {
            if label.thread >= model.threads.len() || cfg.threads.len() != prev.threads.len() {
                return Err(ReplayError::UnknownThread {
                    step,
                    thread: label.thread,
                });
            }
            let thread = &model.threads[label.thread];
            let free = prev.free(model.all_locks());
            let ok = thread_successors(thread, model.mode, free, &prev.threads[label.thread])
                .into_iter()
                .any(|mv| mv.kind == label.kind && mv.config == cfg.threads[label.thread])
                && cfg
                    .threads
                    .iter()
                    .enumerate()
                    .all(|(t, c)| t == label.thread || *c == prev.threads[t]);
            if !ok {
                return Err(ReplayError::NotEnabled {
                    step,
                    thread: label.thread,
                });
            }
            prev = cfg;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn thread_count(&self) -> usize {
        self.start.threads.len()
    }

    /// Configuration `s_k` for `0 <= k <= len()`.
    pub fn config(&self, k: usize) -> &SystemConfig {
        if k == 0 {
            &self.start
        } else {
            &self.steps[k - 1].1
        }
    }

    /// Label of step `k`, the transition from `config(k)` to `config(k+1)`.
    pub fn label(&self, k: usize) -> Label {
        self.steps[k].0
    }

    pub fn labels(&self) -> Vec<Label> {
        self.steps.iter().map(|(l, _)| *l).collect()
    }

    pub fn steps(&self) -> &[(Label, SystemConfig)] {
        &self.steps
    }

    pub fn start(&self) -> &SystemConfig {
        &self.start
    }

    pub fn final_config(&self) -> &SystemConfig {
        self.config(self.len())
    }

    /// Appends a step without checking it.
    pub(crate) fn push_unchecked(&mut self, label: Label, cfg: SystemConfig) {
        self.steps.push((label, cfg));
    }

    /// The prefix of the first `len` steps.
    pub fn prefix(&self, len: usize) -> Computation {
        Computation {
            start: self.start.clone(),
            steps: self.steps[..len].to_vec(),
        }
    }
}

/// Matching call/return structure of a computation, per thread.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchMap {
    returns: Vec<BTreeMap<usize, usize>>,
    calls: Vec<BTreeMap<usize, usize>>,
    unmatched: Vec<BTreeSet<usize>>,
}

impl MatchMap {
    /// Matching return of the call at step `call` of `thread`.
    pub fn return_of(&self, thread: usize, call: usize) -> Option<usize> {
        self.returns[thread].get(&call).copied()
    }

    /// Matching call of the return at step `ret` of `thread`.
    pub fn call_of(&self, thread: usize, ret: usize) -> Option<usize> {
        self.calls[thread].get(&ret).copied()
    }

    /// Matched `(call, return)` pairs of `thread`, ordered by call.
    pub fn pairs(&self, thread: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.returns[thread].iter().map(|(&c, &r)| (c, r))
    }

    pub fn unmatched(&self, thread: usize) -> &BTreeSet<usize> {
        &self.unmatched[thread]
    }

    pub fn thread_count(&self) -> usize {
        self.returns.len()
    }
}

/// Computes the matching calls and returns of a computation. A pop matches
/// the most recent unmatched push of the same thread, which is exactly the
/// stack-height criterion.
pub fn match_calls_returns(comp: &Computation) -> MatchMap {
    let n = comp.thread_count();
    let mut map = MatchMap {
        returns: vec![BTreeMap::new(); n],
        calls: vec![BTreeMap::new(); n],
        unmatched: vec![BTreeSet::new(); n],
    };
    let mut open: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, (label, _)) in comp.steps.iter().enumerate() {
        match label.kind {
            LabelKind::Push => open[label.thread].push(k),
            LabelKind::Pop => {
                if let Some(c) = open[label.thread].pop() {
                    map.returns[label.thread].insert(c, k);
                    map.calls[label.thread].insert(k, c);
                }
            }
            _ => {}
        }
    }
    for (t, pending) in open.into_iter().enumerate() {
        map.unmatched[t].extend(pending);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::model::{MultiPdsSpec, PdsSpec};

    fn plain(spec: MultiPdsSpec) -> Model {
        Model::compile(&spec).unwrap()
    }

    #[test]
    fn plain_acquire_takes_free_lock() {
        let m = plain(MultiPdsSpec::new(
            "a",
            &["l1"],
            vec![PdsSpec::new("T", "q").acq("q", "q'", "l1")],
        ));
        let t = &m.threads[0];
        let cfg = ThreadConfig::initial(t, 1);
        let succ = thread_successors(t, LockMode::Plain, m.all_locks(), &cfg);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].kind, LabelKind::Acq(LockId(0)));
        assert_eq!(succ[0].free, LockSet::EMPTY);
        assert_eq!(succ[0].config.held.lockset(), LockSet::EMPTY.with(LockId(0)));
        assert_eq!(t.state_name(succ[0].config.state), "q'");
        // not free: blocked
        assert!(thread_successors(t, LockMode::Plain, LockSet::EMPTY, &cfg).is_empty());
    }

    #[test]
    fn pop_needs_matching_top() {
        let m = plain(MultiPdsSpec::new(
            "a",
            &[],
            vec![PdsSpec::new("T", "q").pop("q", "a", "q'")],
        ));
        let t = &m.threads[0];
        let cfg = ThreadConfig::initial(t, 0);
        assert!(thread_successors(t, LockMode::Plain, LockSet::EMPTY, &cfg).is_empty());
    }

    #[test]
    fn reentrant_release_decrements_then_frees() {
        let m = plain(
            MultiPdsSpec::new(
                "a",
                &["l1"],
                vec![PdsSpec::new("T", "q").rel("q", "l1", "q").acq("q", "q", "l1")],
            )
            .reentrant(true),
        );
        let t = &m.threads[0];
        let cfg = ThreadConfig {
            state: t.initial,
            stack: vec![],
            held: Holdings::from_counts(vec![2]),
        };
        let succ = thread_successors(t, LockMode::Reentrant, LockSet::EMPTY, &cfg);
        let rel = succ.iter().find(|m| m.kind == LabelKind::Rel(LockId(0))).unwrap();
        assert_eq!(rel.config.held.count(LockId(0)), 1);
        assert_eq!(rel.free, LockSet::EMPTY);
        // re-acquire while held, even though not free
        let acq = succ.iter().find(|m| m.kind == LabelKind::Acq(LockId(0))).unwrap();
        assert_eq!(acq.config.held.count(LockId(0)), 3);

        let one = ThreadConfig {
            held: Holdings::from_counts(vec![1]),
            ..cfg
        };
        let succ = thread_successors(t, LockMode::Reentrant, LockSet::EMPTY, &one);
        let rel = succ.iter().find(|m| m.kind == LabelKind::Rel(LockId(0))).unwrap();
        assert_eq!(rel.config.held.count(LockId(0)), 0);
        assert!(rel.free.contains(LockId(0)));
    }

    #[test]
    fn figure1_initial_successors() {
        let m = plain(corpus::figure1());
        let succ = system_successors(&m, &SystemConfig::initial(&m));
        let labels: Vec<Label> = succ.iter().map(|(l, _)| *l).collect();
        assert_eq!(
            labels,
            vec![Label::new(LabelKind::Push, 0), Label::new(LabelKind::Push, 1)]
        );
    }

    #[test]
    fn held_lock_blocks_other_thread() {
        let m = plain(MultiPdsSpec::new(
            "b",
            &["l1"],
            vec![
                PdsSpec::new("A", "a0").acq("a0", "a1", "l1"),
                PdsSpec::new("B", "b0").acq("b0", "b1", "l1"),
            ],
        ));
        let s0 = SystemConfig::initial(&m);
        let s1 = apply(&m, &s0, 0, 0).unwrap();
        let succ = system_successors(&m, &s1);
        assert!(succ.iter().all(|(l, _)| l.thread != 1));
    }

    #[test]
    fn comp1_matching_pairs() {
        let m = plain(corpus::figure1());
        let comp = Computation::from_labels(&m, &corpus::comp1_labels(&m)).unwrap();
        let mm = match_calls_returns(&comp);
        assert_eq!(mm.return_of(0, 0), Some(7));
        assert_eq!(mm.return_of(1, 2), Some(9));
        assert!(mm.unmatched(0).is_empty() && mm.unmatched(1).is_empty());
    }

    #[test]
    fn lone_push_is_unmatched_and_nesting_is_lifo() {
        let m = plain(MultiPdsSpec::new(
            "n",
            &[],
            vec![PdsSpec::new("T", "q0")
                .push("q0", "q1", "A")
                .push("q1", "q2", "B")
                .pop("q2", "B", "q3")
                .pop("q3", "A", "q4")],
        ));
        let one = Computation::from_transitions(&m, &[(0, 0)]).unwrap();
        assert_eq!(
            match_calls_returns(&one)
                .unmatched(0)
                .iter()
                .copied()
                .collect::<Vec<_>>(),
            vec![0]
        );
        let all = Computation::from_transitions(&m, &[(0, 0), (0, 1), (0, 2), (0, 3)]).unwrap();
        let mm = match_calls_returns(&all);
        assert_eq!(mm.pairs(0).collect::<Vec<_>>(), vec![(0, 3), (1, 2)]);
    }

    #[test]
    fn validate_rejects_tampered_steps() {
        let m = plain(corpus::figure1());
        let comp = Computation::from_labels(&m, &corpus::comp2_labels(&m)).unwrap();
        assert!(comp.validate(&m).is_ok());
        let mut steps = comp.steps().to_vec();
        steps.swap(1, 2);
        assert!(Computation::from_steps(&m, comp.start().clone(), steps).is_err());
    }
}
