//! Two-counter machines and their encoding as a 2-thread system over
//! re-entrant locks.
//!
//! Thread 1 runs the machine; counter `i` is the number of times it holds
//! lock `l_i`. A zero test of counter `i` is a six-step handshake with
//! thread 2 through locks `r_i`, `t_i` and `l_i`; thread 2 can only begin
//! its half by taking `l_i`, which fails while thread 1 holds it. Two
//! initialization prefixes using `h` and `h'` hand `r_1, r_2` to thread 1
//! and `t_1, t_2` to thread 2 before the simulation starts.
//!
//! Generated state names are namespaced: machine state `q` becomes
//! `T1.q`, test states are `T1.(q,j,i)` and `T2.(j,i)`, thread 2's ready
//! state is `T2.q*`, and the prefixes use `T1.q0..T1.q4` and
//! `T2.q'0..T2.q'4`.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::explorer::{bounded_search, Bounds, Exploration, Outcome};
use crate::model::{LockId, Model, MultiPdsSpec, PairQuery, PdsSpec};
use crate::semantics::{Computation, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmOp {
    State,
    Inc(u8),
    Dec(u8),
    Zero(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CmTransition {
    pub op: CmOp,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterMachine {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub final_state: String,
    pub transitions: Vec<CmTransition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CmError {
    #[error("counter machine has no states")]
    NoStates,
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("undeclared state `{0}`")]
    UndeclaredState(String),
    #[error("counter {0} does not exist (counters are 1 and 2)")]
    BadCounter(u8),
    #[error("state name `{0}` is reserved by the encoding")]
    ReservedName(String),
    #[error("state name `{0}` must consist of letters, digits and `_`")]
    BadName(String),
}

const RESERVED: [&str; 11] = ["q0", "q1", "q2", "q3", "q4", "q'0", "q'1", "q'2", "q'3", "q'4", "q*"];

impl CounterMachine {
    pub fn new(name: &str, states: &[&str], initial: &str, final_state: &str) -> Self {
        CounterMachine {
            name: name.into(),
            states: states.iter().map(|s| s.to_string()).collect(),
            initial: initial.into(),
            final_state: final_state.into(),
            transitions: Vec::new(),
        }
    }

    pub fn add(mut self, op: CmOp, from: &str, to: &str) -> Self {
        self.transitions.push(CmTransition {
            op,
            from: from.into(),
            to: to.into(),
        });
        self
    }

    pub fn state(self, from: &str, to: &str) -> Self {
        self.add(CmOp::State, from, to)
    }

    pub fn inc(self, counter: u8, from: &str, to: &str) -> Self {
        self.add(CmOp::Inc(counter), from, to)
    }

    pub fn dec(self, counter: u8, from: &str, to: &str) -> Self {
        self.add(CmOp::Dec(counter), from, to)
    }

    pub fn zero(self, counter: u8, from: &str, to: &str) -> Self {
        self.add(CmOp::Zero(counter), from, to)
    }

    /// All problems with the machine, in declaration order.
    pub fn validate(&self) -> Vec<CmError> {
        let mut errors = Vec::new();
        if self.states.is_empty() {
            errors.push(CmError::NoStates);
        }
        let mut seen = HashSet::new();
        for s in &self.states {
            if !seen.insert(s.as_str()) {
                errors.push(CmError::DuplicateState(s.clone()));
            }
            if RESERVED.contains(&s.as_str()) {
                errors.push(CmError::ReservedName(s.clone()));
            } else if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                errors.push(CmError::BadName(s.clone()));
            }
        }
        let mut check = |s: &String| {
            if !seen.contains(s.as_str()) {
                errors.push(CmError::UndeclaredState(s.clone()));
            }
        };
        check(&self.initial);
        check(&self.final_state);
        for t in &self.transitions {
            check(&t.from);
            check(&t.to);
        }
        for t in &self.transitions {
            if let CmOp::Inc(c) | CmOp::Dec(c) | CmOp::Zero(c) = t.op {
                if c != 1 && c != 2 {
                    errors.push(CmError::BadCounter(c));
                }
            }
        }
        errors
    }

    fn index(&self, state: &str) -> usize {
        self.states.iter().position(|s| s == state).expect("validated machine")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CmConfig {
    /// Index into `CounterMachine::states`.
    pub state: usize,
    pub c1: u64,
    pub c2: u64,
}

impl CmConfig {
    fn counter(&self, i: u8) -> u64 {
        if i == 1 {
            self.c1
        } else {
            self.c2
        }
    }

    fn with_counter(mut self, i: u8, v: u64) -> Self {
        if i == 1 {
            self.c1 = v;
        } else {
            self.c2 = v;
        }
        self
    }
}

/// Successors of `c` in declaration order. The machine must be valid.
pub fn cm_step(m: &CounterMachine, c: &CmConfig) -> Vec<CmConfig> {
    m.transitions
        .iter()
        .filter(|t| m.index(&t.from) == c.state)
        .filter_map(|t| {
            let next = CmConfig {
                state: m.index(&t.to),
                ..*c
            };
            match t.op {
                CmOp::State => Some(next),
                CmOp::Inc(i) => Some(next.with_counter(i, c.counter(i) + 1)),
                CmOp::Dec(i) => (c.counter(i) > 0).then(|| next.with_counter(i, c.counter(i) - 1)),
                CmOp::Zero(i) => (c.counter(i) == 0).then_some(next),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CmOutcome {
    /// A shortest run from `(q_s,0,0)` to the final state.
    Halts(Vec<CmConfig>),
    NoHaltAtBound {
        exhausted: bool,
    },
}

impl CmOutcome {
    pub fn halts(&self) -> bool {
        matches!(self, CmOutcome::Halts(_))
    }
}

/// Breadth-first search for a halting run of at most `step_bound` steps
/// with counters at most `counter_bound`.
pub fn cm_halts_bounded(m: &CounterMachine, step_bound: usize, counter_bound: u64) -> CmOutcome {
    let start = CmConfig {
        state: m.index(&m.initial),
        c1: 0,
        c2: 0,
    };
    let fin = m.index(&m.final_state);
    let mut parent: HashMap<CmConfig, Option<CmConfig>> = HashMap::from([(start, None)]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut truncated = false;
    let mut hit = (start.state == fin).then_some(start);
    while let (None, Some((c, depth))) = (hit, queue.pop_front()) {
        for next in cm_step(m, &c) {
            if next.c1 > counter_bound || next.c2 > counter_bound {
                truncated = true;
                continue;
            }
            if parent.contains_key(&next) {
                continue;
            }
            if depth == step_bound {
                truncated = true;
                continue;
            }
            parent.insert(next, Some(c));
            if next.state == fin {
                hit = Some(next);
                break;
            }
            queue.push_back((next, depth + 1));
        }
    }
    match hit {
        Some(end) => {
            let mut run = vec![end];
            while let Some(Some(p)) = parent.get(run.last().unwrap()) {
                run.push(*p);
            }
            run.reverse();
            CmOutcome::Halts(run)
        }
        None => CmOutcome::NoHaltAtBound { exhausted: !truncated },
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Emit test states `(q,j,i)` for every machine state `q`, not only for
    /// targets of zero tests of counter `i`.
    pub full_test_states: bool,
}

/// The compiled 2-thread system and what is needed to read it back.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub spec: MultiPdsSpec,
    pub model: Model,
    /// Thread 1 in the final state, thread 2 ready.
    pub target: PairQuery,
    machine: CounterMachine,
    /// Machine state of each thread-1 state, if it is one.
    cm_state: Vec<Option<usize>>,
    init1: HashSet<u32>,
    init2: HashSet<u32>,
}

pub const LOCKS: [&str; 8] = ["h", "h'", "r1", "r2", "l1", "l2", "t1", "t2"];

fn t1(q: &str) -> String {
    format!("T1.{q}")
}

fn t1_test(q: &str, j: u8, i: u8) -> String {
    format!("T1.({q},{j},{i})")
}

fn t2_test(j: u8, i: u8) -> String {
    format!("T2.({j},{i})")
}

const READY: &str = "T2.q*";

pub fn compile_cm(m: &CounterMachine, options: &CompileOptions) -> Result<Reduction, Vec<CmError>> {
    let errors = m.validate();
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut p1 = PdsSpec::new("P1", "T1.q0");
    for j in 0..5 {
        p1.declare_state(&format!("T1.q{j}"));
    }
    for q in &m.states {
        p1.declare_state(&t1(q));
    }
    let mut tested: Vec<(u8, &str)> = Vec::new();
    for i in [1u8, 2] {
        if options.full_test_states {
            tested.extend(m.states.iter().map(|q| (i, q.as_str())));
        } else {
            for t in &m.transitions {
                if t.op == CmOp::Zero(i) && !tested.contains(&(i, t.to.as_str())) {
                    tested.push((i, t.to.as_str()));
                }
            }
        }
    }
    for &(i, q) in &tested {
        for j in 1..=5 {
            p1.declare_state(&t1_test(q, j, i));
        }
    }
    p1 = p1
        .acq("T1.q0", "T1.q1", "h'")
        .acq("T1.q1", "T1.q2", "r1")
        .acq("T1.q2", "T1.q3", "r2")
        .acq("T1.q3", "T1.q4", "h")
        .rel("T1.q4", "h'", &t1(&m.initial));
    for t in &m.transitions {
        let (from, to) = (t1(&t.from), t1(&t.to));
        p1 = match t.op {
            CmOp::State => p1.internal(&from, &to),
            CmOp::Inc(i) => p1.acq(&from, &to, &format!("l{i}")),
            CmOp::Dec(i) => p1.rel(&from, &format!("l{i}"), &to),
            CmOp::Zero(i) => p1.acq(&from, &t1_test(&t.to, 1, i), &format!("t{i}")),
        };
    }
    for &(i, q) in &tested {
        let (r, l, t) = (format!("r{i}"), format!("l{i}"), format!("t{i}"));
        p1 = p1
            .rel(&t1_test(q, 1, i), &r, &t1_test(q, 2, i))
            .acq(&t1_test(q, 2, i), &t1_test(q, 3, i), &l)
            .rel(&t1_test(q, 3, i), &t, &t1_test(q, 4, i))
            .acq(&t1_test(q, 4, i), &t1_test(q, 5, i), &r)
            .rel(&t1_test(q, 5, i), &l, &t1(q));
    }

    let mut p2 = PdsSpec::new("P2", "T2.q'0");
    for j in 0..5 {
        p2.declare_state(&format!("T2.q'{j}"));
    }
    p2.declare_state(READY);
    for i in [1u8, 2] {
        for j in 0..=5 {
            p2.declare_state(&t2_test(j, i));
        }
    }
    p2 = p2
        .acq("T2.q'0", "T2.q'1", "h")
        .acq("T2.q'1", "T2.q'2", "t1")
        .acq("T2.q'2", "T2.q'3", "t2")
        .rel("T2.q'3", "h", "T2.q'4")
        .acq("T2.q'4", READY, "h'");
    for i in [1u8, 2] {
        let (r, l, t) = (format!("r{i}"), format!("l{i}"), format!("t{i}"));
        p2 = p2
            .acq(READY, &t2_test(1, i), &l)
            .rel(&t2_test(1, i), &t, &t2_test(2, i))
            .acq(&t2_test(2, i), &t2_test(3, i), &r)
            .rel(&t2_test(3, i), &l, &t2_test(4, i))
            .acq(&t2_test(4, i), &t2_test(5, i), &t)
            .rel(&t2_test(5, i), &r, READY);
    }

    let spec = MultiPdsSpec::new(format!("{}_reduced", m.name), &LOCKS, vec![p1, p2]).reentrant(true);
    let model = Model::compile(&spec).expect("encoding of a valid machine is well-formed");
    let th1 = &model.threads[0];
    let cm_state = th1
        .states
        .iter()
        .map(|s| s.strip_prefix("T1.").and_then(|q| m.states.iter().position(|x| x == q)))
        .collect();
    let init1 = (0..5).map(|j| th1.state_id(&format!("T1.q{j}")).unwrap().0).collect();
    let th2 = &model.threads[1];
    let init2 = (0..5).map(|j| th2.state_id(&format!("T2.q'{j}")).unwrap().0).collect();
    Ok(Reduction {
        target: PairQuery::new(0, t1(&m.final_state), 1, READY),
        spec,
        model,
        machine: m.clone(),
        cm_state,
        init1,
        init2,
    })
}

impl Reduction {
    fn lock(&self, name: &str) -> LockId {
        self.model.lock_id(name).expect("encoding lock")
    }

    /// Whether both threads have finished their initialization prefixes.
    pub fn past_init(&self, cfg: &SystemConfig) -> bool {
        !self.init1.contains(&cfg.control(0).0) && !self.init2.contains(&cfg.control(1).0)
    }

    /// Checks the holdings of a configuration in which both prefixes have
    /// just completed: thread 1 holds exactly `h, r1, r2` once and thread 2
    /// exactly `h', t1, t2` once among the non-counter locks, and thread 2
    /// holds no counter lock.
    pub fn check_init_holdings(&self, cfg: &SystemConfig) -> Result<(), String> {
        let expect: [(usize, &[&str]); 2] = [(0, &["h", "r1", "r2"]), (1, &["h'", "t1", "t2"])];
        for (thread, names) in expect {
            for lock in LOCKS {
                let counter = lock.starts_with('l');
                if counter && thread == 0 {
                    continue;
                }
                let want = u32::from(names.contains(&lock));
                let got = cfg.threads[thread].held.count(self.lock(lock));
                if got != want {
                    return Err(format!(
                        "thread {} holds {lock} {got} times, expected {want}",
                        thread + 1
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reads a machine run off a computation: every thread-1 step that
    /// ends in a machine state contributes `(q, count of l1, count of l2)`.
    /// The records must start in `(q_s,0,0)`, follow the machine's step
    /// relation and end in `q_f`.
    pub fn project_run(&self, comp: &Computation) -> Result<Vec<CmConfig>, String> {
        let (l1, l2) = (self.lock("l1"), self.lock("l2"));
        let mut run = Vec::new();
        for k in 0..comp.len() {
            if comp.label(k).thread != 0 {
                continue;
            }
            let cfg = &comp.config(k + 1).threads[0];
            if let Some(q) = self.cm_state[cfg.state.index()] {
                run.push(CmConfig {
                    state: q,
                    c1: cfg.held.count(l1).into(),
                    c2: cfg.held.count(l2).into(),
                });
            }
        }
        let m = &self.machine;
        let start = CmConfig {
            state: m.index(&m.initial),
            c1: 0,
            c2: 0,
        };
        if run.first() != Some(&start) {
            return Err(format!("projected run does not start in {start:?}"));
        }
        for (k, pair) in run.windows(2).enumerate() {
            if !cm_step(m, &pair[0]).contains(&pair[1]) {
                return Err(format!(
                    "projected step {k} {:?} -> {:?} is not a machine step",
                    pair[0], pair[1]
                ));
            }
        }
        if run.last().map(|c| c.state) != Some(m.index(&m.final_state)) {
            return Err("projected run does not end in the final state".into());
        }
        Ok(run)
    }

    pub fn machine_state_name(&self, c: &CmConfig) -> &str {
        &self.machine.states[c.state]
    }
}

/// Bounds for both sides of [`verify_reduction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyBounds {
    pub cm_steps: usize,
    pub cm_counter: u64,
    pub explorer: Bounds,
}

impl Default for VerifyBounds {
    fn default() -> Self {
        VerifyBounds {
            cm_steps: 1000,
            cm_counter: 16,
            explorer: Bounds::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub machine: CmOutcome,
    pub system: Exploration,
    /// Machine run read back from the system's witness, when there is one.
    pub projection: Option<Result<Vec<CmConfig>, String>>,
}

impl VerifyReport {
    /// Both sides positive with a faithful projection, or both negative.
    pub fn agree(&self) -> bool {
        matches!(
            (&self.machine, &self.system.outcome, &self.projection),
            (CmOutcome::Halts(_), Outcome::Found(_), Some(Ok(_)))
                | (CmOutcome::NoHaltAtBound { .. }, Outcome::NotFound { .. }, _)
        )
    }
}

/// Runs the machine and its encoding side by side.
pub fn verify_reduction(
    m: &CounterMachine,
    options: &CompileOptions,
    bounds: &VerifyBounds,
) -> Result<VerifyReport, Vec<CmError>> {
    let red = compile_cm(m, options)?;
    let machine = cm_halts_bounded(m, bounds.cm_steps, bounds.cm_counter);
    let target = red.model.resolve(&red.target).expect("encoding target exists");
    let system = bounded_search(&red.model, &bounds.explorer, |c| {
        c.control(target.i) == target.q_i && c.control(target.j) == target.q_j
    });
    let projection = match &system.outcome {
        Outcome::Found(w) => Some(red.project_run(w)),
        Outcome::NotFound { .. } => None,
    };
    Ok(VerifyReport {
        machine,
        system,
        projection,
    })
}

/// The machine `inc1; inc1; dec1; dec1; zero1 -> q_f`.
pub fn halting_five() -> CounterMachine {
    CounterMachine::new("halting5", &["s", "a", "b", "c", "d", "f"], "s", "f")
        .inc(1, "s", "a")
        .inc(1, "a", "b")
        .dec(1, "b", "c")
        .dec(1, "c", "d")
        .zero(1, "d", "f")
}

/// A machine whose only zero test runs on a counter that is one.
pub fn nonzero_test() -> CounterMachine {
    CounterMachine::new("nonzero_test", &["s", "a", "f"], "s", "f")
        .inc(1, "s", "a")
        .zero(1, "a", "f")
}
