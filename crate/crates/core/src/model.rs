//! Static model of a multi-threaded program: each thread is a pushdown
//! system whose only synchronization is a shared, finite set of locks.
//!
//! Two layers live here. [`MultiPdsSpec`] is the identifier-based
//! description a user (or the text front end) writes down; it may be
//! ill-formed and is checked by [`validate`]. [`Model`] is the compiled,
//! index-based form every analysis runs on. [`Model::compile`] succeeds
//! exactly when `validate` reports nothing.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

/// Maximum number of locks a model may declare (lock sets are bitmasks).
pub const MAX_LOCKS: usize = 64;

/// Index of a control state within its thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

/// Index of a stack symbol within its thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

/// Index of a lock within the model's lock set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockId(pub u8);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of locks, stored as a bitmask over [`LockId`]s.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockSet(u64);

impl LockSet {
    pub const EMPTY: LockSet = LockSet(0);

    pub fn from_bits(bits: u64) -> Self {
        LockSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, lock: LockId) -> bool {
        self.0 & (1 << lock.0) != 0
    }

    pub fn with(self, lock: LockId) -> Self {
        LockSet(self.0 | (1 << lock.0))
    }

    pub fn without(self, lock: LockId) -> Self {
        LockSet(self.0 & !(1 << lock.0))
    }

    pub fn union(self, other: LockSet) -> Self {
        LockSet(self.0 | other.0)
    }

    pub fn intersection(self, other: LockSet) -> Self {
        LockSet(self.0 & other.0)
    }

    pub fn difference(self, other: LockSet) -> Self {
        LockSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: LockSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// The set of all locks `0..count`.
    pub fn full(count: usize) -> Self {
        if count >= 64 {
            LockSet(u64::MAX)
        } else {
            LockSet((1u64 << count) - 1)
        }
    }

    pub fn iter(self) -> impl Iterator<Item = LockId> {
        (0..64u8).filter(move |i| self.0 & (1 << i) != 0).map(LockId)
    }
}

impl fmt::Debug for LockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|l| l.0)).finish()
    }
}

impl FromIterator<LockId> for LockSet {
    fn from_iter<I: IntoIterator<Item = LockId>>(iter: I) -> Self {
        iter.into_iter().fold(LockSet::EMPTY, LockSet::with)
    }
}

/// Whether locks are plain mutexes or reentrant (recursive) locks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LockMode {
    Plain,
    Reentrant,
}

/// One declared transition of a thread, by identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionDecl {
    Internal { from: String, to: String },
    Push { from: String, to: String, symbol: String },
    Pop { from: String, symbol: String, to: String },
    Acq { from: String, to: String, lock: String },
    Rel { from: String, lock: String, to: String },
}

impl fmt::Display for TransitionDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionDecl::Internal { from, to } => write!(f, "internal {from} {to}"),
            TransitionDecl::Push { from, to, symbol } => write!(f, "push {from} {to} {symbol}"),
            TransitionDecl::Pop { from, symbol, to } => write!(f, "pop {from} {symbol} {to}"),
            TransitionDecl::Acq { from, to, lock } => write!(f, "acq {from} {to} {lock}"),
            TransitionDecl::Rel { from, lock, to } => write!(f, "rel {from} {lock} {to}"),
        }
    }
}

/// A single thread: control states, stack alphabet, initial state and the
/// five transition families (kept in one list, distinguished by shape).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdsSpec {
    pub name: String,
    pub states: Vec<String>,
    pub stack_alphabet: Vec<String>,
    pub initial: String,
    pub transitions: Vec<TransitionDecl>,
}

impl PdsSpec {
    /// A thread with only its initial state declared.
    pub fn new(name: impl Into<String>, initial: impl Into<String>) -> Self {
        let initial = initial.into();
        PdsSpec {
            name: name.into(),
            states: vec![initial.clone()],
            stack_alphabet: Vec::new(),
            initial,
            transitions: Vec::new(),
        }
    }

    pub fn declare_state(&mut self, state: &str) -> &mut Self {
        if !self.states.iter().any(|s| s == state) {
            self.states.push(state.to_string());
        }
        self
    }

    pub fn declare_symbol(&mut self, symbol: &str) -> &mut Self {
        if !self.stack_alphabet.iter().any(|s| s == symbol) {
            self.stack_alphabet.push(symbol.to_string());
        }
        self
    }

    pub fn internal(mut self, from: &str, to: &str) -> Self {
        self.declare_state(from).declare_state(to);
        self.transitions.push(TransitionDecl::Internal {
            from: from.into(),
            to: to.into(),
        });
        self
    }

    pub fn push(mut self, from: &str, to: &str, symbol: &str) -> Self {
        self.declare_state(from).declare_state(to).declare_symbol(symbol);
        self.transitions.push(TransitionDecl::Push {
            from: from.into(),
            to: to.into(),
            symbol: symbol.into(),
        });
        self
    }

    pub fn pop(mut self, from: &str, symbol: &str, to: &str) -> Self {
        self.declare_state(from).declare_state(to).declare_symbol(symbol);
        self.transitions.push(TransitionDecl::Pop {
            from: from.into(),
            symbol: symbol.into(),
            to: to.into(),
        });
        self
    }

    pub fn acq(mut self, from: &str, to: &str, lock: &str) -> Self {
        self.declare_state(from).declare_state(to);
        self.transitions.push(TransitionDecl::Acq {
            from: from.into(),
            to: to.into(),
            lock: lock.into(),
        });
        self
    }

    pub fn rel(mut self, from: &str, lock: &str, to: &str) -> Self {
        self.declare_state(from).declare_state(to);
        self.transitions.push(TransitionDecl::Rel {
            from: from.into(),
            lock: lock.into(),
            to: to.into(),
        });
        self
    }
}

/// An n-tuple of threads communicating via a shared lock set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPdsSpec {
    pub name: String,
    pub locks: Vec<String>,
    pub threads: Vec<PdsSpec>,
    pub reentrant: bool,
}

impl MultiPdsSpec {
    pub fn new(name: impl Into<String>, locks: &[&str], threads: Vec<PdsSpec>) -> Self {
        MultiPdsSpec {
            name: name.into(),
            locks: locks.iter().map(|l| l.to_string()).collect(),
            threads,
            reentrant: false,
        }
    }

    pub fn reentrant(mut self, reentrant: bool) -> Self {
        self.reentrant = reentrant;
        self
    }
}

/// A pairwise reachability question: can thread `i` be in `q_i` while
/// thread `j` is in `q_j`?
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairQuery {
    pub i: usize,
    pub j: usize,
    pub q_i: String,
    pub q_j: String,
}

impl PairQuery {
    pub fn new(i: usize, q_i: impl Into<String>, j: usize, q_j: impl Into<String>) -> Self {
        PairQuery {
            i,
            j,
            q_i: q_i.into(),
            q_j: q_j.into(),
        }
    }
}

/// A well-formedness problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    NoThreads,
    TooManyLocks {
        count: usize,
    },
    DuplicateLock {
        lock: String,
    },
    DuplicateState {
        thread: usize,
        state: String,
    },
    DuplicateSymbol {
        thread: usize,
        symbol: String,
    },
    UndeclaredInitial {
        thread: usize,
        state: String,
    },
    UndeclaredState {
        thread: usize,
        state: String,
        transition: String,
    },
    UndeclaredSymbol {
        thread: usize,
        symbol: String,
        transition: String,
    },
    UndeclaredLock {
        thread: usize,
        lock: String,
        transition: String,
    },
    SharedState {
        state: String,
        first: usize,
        second: usize,
    },
    SharedSymbol {
        symbol: String,
        first: usize,
        second: usize,
    },
    QueryThreadOutOfRange {
        thread: usize,
    },
    QuerySameThread {
        thread: usize,
    },
    QueryUnknownState {
        thread: usize,
        state: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoThreads => write!(f, "system declares no threads"),
            Violation::TooManyLocks { count } => {
                write!(f, "{count} locks declared, at most {MAX_LOCKS} supported")
            }
            Violation::DuplicateLock { lock } => write!(f, "lock `{lock}` declared twice"),
            Violation::DuplicateState { thread, state } => {
                write!(f, "thread {thread}: state `{state}` declared twice")
            }
            Violation::DuplicateSymbol { thread, symbol } => {
                write!(f, "thread {thread}: stack symbol `{symbol}` declared twice")
            }
            Violation::UndeclaredInitial { thread, state } => {
                write!(f, "thread {thread}: initial state `{state}` is not declared")
            }
            Violation::UndeclaredState {
                thread,
                state,
                transition,
            } => {
                write!(f, "thread {thread}: `{transition}` uses undeclared state `{state}`")
            }
            Violation::UndeclaredSymbol {
                thread,
                symbol,
                transition,
            } => {
                write!(
                    f,
                    "thread {thread}: `{transition}` uses undeclared stack symbol `{symbol}`"
                )
            }
            Violation::UndeclaredLock {
                thread,
                lock,
                transition,
            } => {
                write!(f, "thread {thread}: `{transition}` uses undeclared lock `{lock}`")
            }
            Violation::SharedState { state, first, second } => {
                write!(
                    f,
                    "state `{state}` is declared by both thread {first} and thread {second}"
                )
            }
            Violation::SharedSymbol { symbol, first, second } => write!(
                f,
                "stack symbol `{symbol}` is declared by both thread {first} and thread {second}"
            ),
            Violation::QueryThreadOutOfRange { thread } => {
                write!(f, "query names thread {thread}, which does not exist")
            }
            Violation::QuerySameThread { thread } => {
                write!(f, "query names thread {thread} twice")
            }
            Violation::QueryUnknownState { thread, state } => {
                write!(f, "query names state `{state}`, which thread {thread} does not declare")
            }
        }
    }
}

/// Checks every well-formedness invariant of `spec`. The result is sorted
/// and empty iff the system is well-formed.
pub fn validate(spec: &MultiPdsSpec) -> Vec<Violation> {
    let mut out = BTreeSet::new();
    if spec.threads.is_empty() {
        out.insert(Violation::NoThreads);
    }
    if spec.locks.len() > MAX_LOCKS {
        out.insert(Violation::TooManyLocks {
            count: spec.locks.len(),
        });
    }
    let mut seen_locks = HashSet::new();
    for lock in &spec.locks {
        if !seen_locks.insert(lock.as_str()) {
            out.insert(Violation::DuplicateLock { lock: lock.clone() });
        }
    }

    let mut state_owner: HashMap<&str, usize> = HashMap::new();
    let mut symbol_owner: HashMap<&str, usize> = HashMap::new();
    for (t, thread) in spec.threads.iter().enumerate() {
        let mut states = HashSet::new();
        for s in &thread.states {
            if !states.insert(s.as_str()) {
                out.insert(Violation::DuplicateState {
                    thread: t,
                    state: s.clone(),
                });
                continue;
            }
            if let Some(&first) = state_owner.get(s.as_str()) {
                out.insert(Violation::SharedState {
                    state: s.clone(),
                    first,
                    second: t,
                });
            } else {
                state_owner.insert(s, t);
            }
        }
        let mut symbols = HashSet::new();
        for a in &thread.stack_alphabet {
            if !symbols.insert(a.as_str()) {
                out.insert(Violation::DuplicateSymbol {
                    thread: t,
                    symbol: a.clone(),
                });
                continue;
            }
            if let Some(&first) = symbol_owner.get(a.as_str()) {
                out.insert(Violation::SharedSymbol {
                    symbol: a.clone(),
                    first,
                    second: t,
                });
            } else {
                symbol_owner.insert(a, t);
            }
        }
        if !states.contains(thread.initial.as_str()) {
            out.insert(Violation::UndeclaredInitial {
                thread: t,
                state: thread.initial.clone(),
            });
        }
        for decl in &thread.transitions {
            let (from, to) = decl_endpoints(decl);
            for state in [from, to] {
                if !states.contains(state) {
                    out.insert(Violation::UndeclaredState {
                        thread: t,
                        state: state.to_string(),
                        transition: decl.to_string(),
                    });
                }
            }
            match decl {
                TransitionDecl::Push { symbol, .. } | TransitionDecl::Pop { symbol, .. } => {
                    if !symbols.contains(symbol.as_str()) {
                        out.insert(Violation::UndeclaredSymbol {
                            thread: t,
                            symbol: symbol.clone(),
                            transition: decl.to_string(),
                        });
                    }
                }
                TransitionDecl::Acq { lock, .. } | TransitionDecl::Rel { lock, .. } => {
                    if !seen_locks.contains(lock.as_str()) {
                        out.insert(Violation::UndeclaredLock {
                            thread: t,
                            lock: lock.clone(),
                            transition: decl.to_string(),
                        });
                    }
                }
                TransitionDecl::Internal { .. } => {}
            }
        }
    }
    out.into_iter().collect()
}

/// Checks that `query` names two distinct threads and states they declare.
pub fn validate_query(spec: &MultiPdsSpec, query: &PairQuery) -> Vec<Violation> {
    let mut out = Vec::new();
    for (t, q) in [(query.i, &query.q_i), (query.j, &query.q_j)] {
        match spec.threads.get(t) {
            None => out.push(Violation::QueryThreadOutOfRange { thread: t }),
            Some(thread) => {
                if !thread.states.iter().any(|s| s == q) {
                    out.push(Violation::QueryUnknownState {
                        thread: t,
                        state: q.clone(),
                    });
                }
            }
        }
    }
    if query.i == query.j {
        out.push(Violation::QuerySameThread { thread: query.i });
    }
    out
}

fn decl_endpoints(decl: &TransitionDecl) -> (&str, &str) {
    match decl {
        TransitionDecl::Internal { from, to }
        | TransitionDecl::Push { from, to, .. }
        | TransitionDecl::Pop { from, to, .. }
        | TransitionDecl::Acq { from, to, .. }
        | TransitionDecl::Rel { from, to, .. } => (from, to),
    }
}

/// A compiled transition. Variant order is the canonical family order used
/// for successor enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    Internal {
        from: StateId,
        to: StateId,
    },
    Push {
        from: StateId,
        to: StateId,
        symbol: SymbolId,
    },
    Pop {
        from: StateId,
        symbol: SymbolId,
        to: StateId,
    },
    Acq {
        from: StateId,
        to: StateId,
        lock: LockId,
    },
    Rel {
        from: StateId,
        lock: LockId,
        to: StateId,
    },
}

impl Transition {
    pub fn from(&self) -> StateId {
        match *self {
            Transition::Internal { from, .. }
            | Transition::Push { from, .. }
            | Transition::Pop { from, .. }
            | Transition::Acq { from, .. }
            | Transition::Rel { from, .. } => from,
        }
    }

    pub fn to(&self) -> StateId {
        match *self {
            Transition::Internal { to, .. }
            | Transition::Push { to, .. }
            | Transition::Pop { to, .. }
            | Transition::Acq { to, .. }
            | Transition::Rel { to, .. } => to,
        }
    }

    fn family_rank(&self) -> u8 {
        match self {
            Transition::Internal { .. } => 0,
            Transition::Push { .. } => 1,
            Transition::Pop { .. } => 2,
            Transition::Acq { .. } => 3,
            Transition::Rel { .. } => 4,
        }
    }
}

/// A validated thread in index form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thread {
    pub name: String,
    pub states: Vec<String>,
    pub symbols: Vec<String>,
    pub initial: StateId,
    /// All transitions, sorted by family then declaration order.
    pub transitions: Vec<Transition>,
    /// Per state, indices into `transitions` leaving that state.
    outgoing: Vec<Vec<usize>>,
}

impl Thread {
    fn from_parts(
        name: String,
        states: Vec<String>,
        symbols: Vec<String>,
        initial: StateId,
        mut transitions: Vec<Transition>,
    ) -> Self {
        let mut seen = HashSet::new();
        transitions.retain(|t| seen.insert(*t));
        transitions.sort_by_key(Transition::family_rank);
        let mut outgoing = vec![Vec::new(); states.len()];
        for (i, t) in transitions.iter().enumerate() {
            outgoing[t.from().index()].push(i);
        }
        Thread {
            name,
            states,
            symbols,
            initial,
            transitions,
            outgoing,
        }
    }

    /// Transitions leaving `state`, in canonical order.
    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = (usize, &Transition)> + '_ {
        self.outgoing[state.index()]
            .iter()
            .map(move |&i| (i, &self.transitions[i]))
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| StateId(i as u32))
    }

    pub fn symbol_id(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|s| s == name).map(|i| SymbolId(i as u32))
    }

    pub fn state_name(&self, state: StateId) -> &str {
        &self.states[state.index()]
    }

    pub fn symbol_name(&self, symbol: SymbolId) -> &str {
        &self.symbols[symbol.index()]
    }

    pub fn has_stack_moves(&self) -> bool {
        self.transitions
            .iter()
            .any(|t| matches!(t, Transition::Push { .. } | Transition::Pop { .. }))
    }
}

/// A validated multi-threaded model in index form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub name: String,
    pub locks: Vec<String>,
    pub threads: Vec<Thread>,
    pub mode: LockMode,
}

/// A validated [`PairQuery`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairTarget {
    pub i: usize,
    pub q_i: StateId,
    pub j: usize,
    pub q_j: StateId,
}

impl Model {
    /// Compiles a spec into index form, or returns its violations.
    pub fn compile(spec: &MultiPdsSpec) -> Result<Model, Vec<Violation>> {
        let violations = validate(spec);
        if !violations.is_empty() {
            return Err(violations);
        }
        let lock_ix: HashMap<&str, LockId> = spec
            .locks
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), LockId(i as u8)))
            .collect();
        let threads = spec
            .threads
            .iter()
            .map(|pds| {
                let st: HashMap<&str, StateId> = pds
                    .states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), StateId(i as u32)))
                    .collect();
                let sy: HashMap<&str, SymbolId> = pds
                    .stack_alphabet
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), SymbolId(i as u32)))
                    .collect();
                let transitions = pds
                    .transitions
                    .iter()
                    .map(|d| match d {
                        TransitionDecl::Internal { from, to } => Transition::Internal {
                            from: st[from.as_str()],
                            to: st[to.as_str()],
                        },
                        TransitionDecl::Push { from, to, symbol } => Transition::Push {
                            from: st[from.as_str()],
                            to: st[to.as_str()],
                            symbol: sy[symbol.as_str()],
                        },
                        TransitionDecl::Pop { from, symbol, to } => Transition::Pop {
                            from: st[from.as_str()],
                            symbol: sy[symbol.as_str()],
                            to: st[to.as_str()],
                        },
                        TransitionDecl::Acq { from, to, lock } => Transition::Acq {
                            from: st[from.as_str()],
                            to: st[to.as_str()],
                            lock: lock_ix[lock.as_str()],
                        },
                        TransitionDecl::Rel { from, lock, to } => Transition::Rel {
                            from: st[from.as_str()],
                            lock: lock_ix[lock.as_str()],
                            to: st[to.as_str()],
                        },
                    })
                    .collect();
                Thread::from_parts(
                    pds.name.clone(),
                    pds.states.clone(),
                    pds.stack_alphabet.clone(),
                    st[pds.initial.as_str()],
                    transitions,
                )
            })
            .collect();
        Ok(Model {
            name: spec.name.clone(),
            locks: spec.locks.clone(),
            threads,
            mode: if spec.reentrant {
                LockMode::Reentrant
            } else {
                LockMode::Plain
            },
        })
    }

    /// Converts back to the identifier form (transitions in canonical order).
    pub fn to_spec(&self) -> MultiPdsSpec {
        let threads = self
            .threads
            .iter()
            .map(|t| {
                let s = |q: StateId| t.state_name(q).to_string();
                let transitions = t
                    .transitions
                    .iter()
                    .map(|tr| match *tr {
                        Transition::Internal { from, to } => TransitionDecl::Internal {
                            from: s(from),
                            to: s(to),
                        },
                        Transition::Push { from, to, symbol } => TransitionDecl::Push {
                            from: s(from),
                            to: s(to),
                            symbol: t.symbol_name(symbol).to_string(),
                        },
                        Transition::Pop { from, symbol, to } => TransitionDecl::Pop {
                            from: s(from),
                            symbol: t.symbol_name(symbol).to_string(),
                            to: s(to),
                        },
                        Transition::Acq { from, to, lock } => TransitionDecl::Acq {
                            from: s(from),
                            to: s(to),
                            lock: self.lock_name(lock).to_string(),
                        },
                        Transition::Rel { from, lock, to } => TransitionDecl::Rel {
                            from: s(from),
                            lock: self.lock_name(lock).to_string(),
                            to: s(to),
                        },
                    })
                    .collect();
                PdsSpec {
                    name: t.name.clone(),
                    states: t.states.clone(),
                    stack_alphabet: t.symbols.clone(),
                    initial: t.state_name(t.initial).to_string(),
                    transitions,
                }
            })
            .collect();
        MultiPdsSpec {
            name: self.name.clone(),
            locks: self.locks.clone(),
            threads,
            reentrant: self.mode == LockMode::Reentrant,
        }
    }

    pub fn lock_count(&self) -> usize {
        self.locks.len()
    }

    pub fn lock_name(&self, lock: LockId) -> &str {
        &self.locks[lock.index()]
    }

    pub fn lock_id(&self, name: &str) -> Option<LockId> {
        self.locks.iter().position(|l| l == name).map(|i| LockId(i as u8))
    }

    pub fn thread_index(&self, name: &str) -> Option<usize> {
        self.threads.iter().position(|t| t.name == name)
    }

    pub fn all_locks(&self) -> LockSet {
        LockSet::full(self.locks.len())
    }

    /// The sub-system made of the listed threads, in the listed order, over
    /// the same lock set.
    pub fn project(&self, threads: &[usize]) -> Model {
        Model {
            name: self.name.clone(),
            locks: self.locks.clone(),
            threads: threads.iter().map(|&t| self.threads[t].clone()).collect(),
            mode: self.mode,
        }
    }

    /// Resolves a query against this model.
    pub fn resolve(&self, query: &PairQuery) -> Result<PairTarget, Vec<Violation>> {
        let mut out = Vec::new();
        let mut lookup = |t: usize, q: &str| match self.threads.get(t) {
            None => {
                out.push(Violation::QueryThreadOutOfRange { thread: t });
                None
            }
            Some(thread) => {
                let id = thread.state_id(q);
                if id.is_none() {
                    out.push(Violation::QueryUnknownState {
                        thread: t,
                        state: q.to_string(),
                    });
                }
                id
            }
        };
        let q_i = lookup(query.i, &query.q_i);
        let q_j = lookup(query.j, &query.q_j);
        if query.i == query.j {
            out.push(Violation::QuerySameThread { thread: query.i });
        }
        match (q_i, q_j) {
            (Some(q_i), Some(q_j)) if out.is_empty() => Ok(PairTarget {
                i: query.i,
                q_i,
                j: query.j,
                q_j,
            }),
            _ => Err(out),
        }
    }
}
