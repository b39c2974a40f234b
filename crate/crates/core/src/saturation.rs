//! Forward (post*) saturation for pushdown systems.
//!
//! A pushdown system is described implicitly through [`PushdownRules`]:
//! non-popping moves are independent of the stack top, popping moves read
//! it. Control states are discovered on demand from the initial state, so
//! only reachable control states are ever materialized.
//!
//! The result is a finite automaton over stack words. Configuration
//! `(p, w)` is reachable from `(initial, ε)` iff the automaton reads
//! `w` followed by an implicit bottom marker from `p` to its final state.
//! Every transition remembers the first rule application that created it,
//! which is enough to rebuild a concrete run for any accepted
//! configuration.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

/// A move that does not inspect the stack top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<S, G> {
    Internal(S),
    Push(S, G),
}

/// Implicit pushdown system.
pub trait PushdownRules {
    type State: Clone + Eq + Hash;
    type Symbol: Clone + Eq + Hash;
    /// Identifies the rule that produced a move; returned by witnesses.
    type Tag: Clone;

    fn initial(&self) -> Self::State;

    /// Internal and push moves available in `state`, in a fixed order.
    fn steps(&self, state: &Self::State) -> TaggedSteps<Self::State, Self::Symbol, Self::Tag>;

    /// Pop moves available in `state` with `top` on the stack.
    fn pops(&self, state: &Self::State, top: &Self::Symbol) -> Vec<(Self::State, Self::Tag)>;
}

/// Moves paired with the tag of the rule that produced them.
pub type TaggedSteps<S, G, T> = Vec<(Step<S, G>, T)>;

const BOTTOM: u32 = 0;
const EPS: u32 = u32::MAX;
const FINAL: u32 = 0;

#[derive(Clone, Copy, Debug)]
enum Node {
    Final,
    Control(u32),
    /// Intermediate state for pushes into (control, symbol).
    Mid,
}

#[derive(Clone, Debug)]
enum Origin<T> {
    Initial,
    Internal { tag: T, src: usize },
    PushHead,
    PushTail { tag: T, src: usize },
    Pop { tag: T, src: usize },
    Compose { eps: usize, src: usize },
}

#[derive(Clone, Debug)]
struct Edge<T> {
    from: u32,
    sym: u32,
    to: u32,
    origin: Origin<T>,
}

/// Saturated automaton produced by [`post_star`].
pub struct Saturation<S, G, T> {
    controls: Vec<S>,
    control_ix: HashMap<S, u32>,
    symbols: Vec<Option<G>>,
    symbol_ix: HashMap<G, u32>,
    nodes: Vec<Node>,
    node_of_control: Vec<u32>,
    mid_ix: HashMap<(u32, u32), u32>,
    edges: Vec<Edge<T>>,
    edge_ix: HashMap<(u32, u32, u32), usize>,
    /// Non-epsilon edges leaving each node.
    out: Vec<Vec<usize>>,
    /// Epsilon edges entering each node.
    eps_in: Vec<Vec<usize>>,
    rule_applications: usize,
}

struct Pending<T> {
    from: u32,
    sym: u32,
    to: u32,
    origin: Origin<T>,
}

/// Statistics of a saturation run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SaturationStats {
    pub control_states: usize,
    pub automaton_states: usize,
    pub transitions: usize,
    pub rule_applications: usize,
}

/// Runs post* saturation to a fixpoint.
pub fn post_star<R: PushdownRules>(rules: &R) -> Saturation<R::State, R::Symbol, R::Tag> {
    let mut sat = Saturation {
        controls: Vec::new(),
        control_ix: HashMap::new(),
        symbols: vec![None],
        symbol_ix: HashMap::new(),
        nodes: vec![Node::Final],
        node_of_control: Vec::new(),
        mid_ix: HashMap::new(),
        edges: Vec::new(),
        edge_ix: HashMap::new(),
        out: vec![Vec::new()],
        eps_in: vec![Vec::new()],
        rule_applications: 0,
    };
    let mut steps_cache: Vec<Option<TaggedSteps<u32, u32, R::Tag>>> = Vec::new();
    let mut pops_cache = HashMap::<(u32, u32), Vec<(u32, R::Tag)>>::new();

    let init = sat.intern_control(rules.initial());
    let mut work: VecDeque<Pending<R::Tag>> = VecDeque::new();
    work.push_back(Pending {
        from: sat.node_of_control[init as usize],
        sym: BOTTOM,
        to: FINAL,
        origin: Origin::Initial,
    });

    while let Some(p) = work.pop_front() {
        if sat.edge_ix.contains_key(&(p.from, p.sym, p.to)) {
            continue;
        }
        let e = sat.edges.len();
        sat.edge_ix.insert((p.from, p.sym, p.to), e);
        sat.edges.push(Edge {
            from: p.from,
            sym: p.sym,
            to: p.to,
            origin: p.origin,
        });
        let (from, sym, to) = (p.from, p.sym, p.to);

        if sym == EPS {
            sat.eps_in[to as usize].push(e);
            for &o in &sat.out[to as usize] {
                let oe = &sat.edges[o];
                work.push_back(Pending {
                    from,
                    sym: oe.sym,
                    to: oe.to,
                    origin: Origin::Compose { eps: e, src: o },
                });
            }
            continue;
        }

        sat.out[from as usize].push(e);
        for &eps in &sat.eps_in[from as usize] {
            work.push_back(Pending {
                from: sat.edges[eps].from,
                sym,
                to,
                origin: Origin::Compose { eps, src: e },
            });
        }

        let Node::Control(c) = sat.nodes[from as usize] else {
            continue;
        };
        if steps_cache.len() <= c as usize {
            steps_cache.resize_with(c as usize + 1, || None);
        }
        if steps_cache[c as usize].is_none() {
            let state = sat.controls[c as usize].clone();
            let steps = rules
                .steps(&state)
                .into_iter()
                .map(|(step, tag)| {
                    let step = match step {
                        Step::Internal(s) => Step::Internal(sat.intern_control(s)),
                        Step::Push(s, g) => {
                            let s = sat.intern_control(s);
                            let g = sat.intern_symbol(g);
                            Step::Push(s, g)
                        }
                    };
                    (step, tag)
                })
                .collect();
            steps_cache[c as usize] = Some(steps);
        }
        for (step, tag) in steps_cache[c as usize].as_ref().unwrap() {
            sat.rule_applications += 1;
            match *step {
                Step::Internal(target) => work.push_back(Pending {
                    from: sat.node_of_control[target as usize],
                    sym,
                    to,
                    origin: Origin::Internal {
                        tag: tag.clone(),
                        src: e,
                    },
                }),
                Step::Push(target, g) => {
                    let mid = sat.intern_mid(target, g);
                    work.push_back(Pending {
                        from: sat.node_of_control[target as usize],
                        sym: g,
                        to: mid,
                        origin: Origin::PushHead,
                    });
                    work.push_back(Pending {
                        from: mid,
                        sym,
                        to,
                        origin: Origin::PushTail {
                            tag: tag.clone(),
                            src: e,
                        },
                    });
                }
            }
        }
        if sym != BOTTOM {
            let pops = pops_cache.entry((c, sym)).or_insert_with(|| {
                let state = sat.controls[c as usize].clone();
                let top = sat.symbols[sym as usize].clone().expect("real symbol");
                rules
                    .pops(&state, &top)
                    .into_iter()
                    .map(|(s, tag)| (sat.intern_control(s), tag))
                    .collect()
            });
            for (target, tag) in pops.iter() {
                sat.rule_applications += 1;
                work.push_back(Pending {
                    from: sat.node_of_control[*target as usize],
                    sym: EPS,
                    to,
                    origin: Origin::Pop {
                        tag: tag.clone(),
                        src: e,
                    },
                });
            }
        }
    }
    sat
}

impl<S: Clone + Eq + Hash, G: Clone + Eq + Hash, T: Clone> Saturation<S, G, T> {
    fn new_node(&mut self, node: Node) -> u32 {
        self.nodes.push(node);
        self.out.push(Vec::new());
        self.eps_in.push(Vec::new());
        (self.nodes.len() - 1) as u32
    }

    fn intern_control(&mut self, s: S) -> u32 {
        if let Some(&c) = self.control_ix.get(&s) {
            return c;
        }
        let c = self.controls.len() as u32;
        self.controls.push(s.clone());
        self.control_ix.insert(s, c);
        let n = self.new_node(Node::Control(c));
        self.node_of_control.push(n);
        c
    }

    fn intern_symbol(&mut self, g: G) -> u32 {
        if let Some(&i) = self.symbol_ix.get(&g) {
            return i;
        }
        let i = self.symbols.len() as u32;
        self.symbols.push(Some(g.clone()));
        self.symbol_ix.insert(g, i);
        i
    }

    fn intern_mid(&mut self, control: u32, sym: u32) -> u32 {
        if let Some(&n) = self.mid_ix.get(&(control, sym)) {
            return n;
        }
        let n = self.new_node(Node::Mid);
        self.mid_ix.insert((control, sym), n);
        n
    }

    pub fn stats(&self) -> SaturationStats {
        SaturationStats {
            control_states: self.controls.len(),
            automaton_states: self.nodes.len(),
            transitions: self.edges.len(),
            rule_applications: self.rule_applications,
        }
    }

    /// Control states discovered while saturating (a superset of the
    /// reachable ones).
    pub fn discovered_controls(&self) -> &[S] {
        &self.controls
    }

    /// Control states occurring in some reachable configuration, in
    /// discovery order.
    pub fn reachable_controls(&self) -> impl Iterator<Item = &S> + '_ {
        self.controls
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.out[self.node_of_control[*c] as usize].is_empty())
            .map(|(_, s)| s)
    }

    pub fn is_reachable(&self, state: &S) -> bool {
        self.control_ix
            .get(state)
            .is_some_and(|&c| !self.out[self.node_of_control[c as usize] as usize].is_empty())
    }

    /// Whether `(state, stack)` is reachable; `stack` is listed top first.
    pub fn accepts(&self, state: &S, stack: &[G]) -> bool {
        let Some(&c) = self.control_ix.get(state) else {
            return false;
        };
        let mut word = Vec::with_capacity(stack.len() + 1);
        for g in stack {
            match self.symbol_ix.get(g) {
                Some(&i) => word.push(i),
                None => return false,
            }
        }
        word.push(BOTTOM);
        let mut current = vec![self.node_of_control[c as usize]];
        for sym in word {
            let mut next: Vec<u32> = current
                .iter()
                .flat_map(|&n| self.out[n as usize].iter())
                .map(|&e| &self.edges[e])
                .filter(|e| e.sym == sym)
                .map(|e| e.to)
                .collect();
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        current.contains(&FINAL)
    }

    /// All reachable stacks of `state` with at most `max_height` symbols,
    /// each listed top first.
    pub fn stacks_up_to(&self, state: &S, max_height: usize) -> Vec<Vec<G>> {
        let Some(&c) = self.control_ix.get(state) else {
            return Vec::new();
        };
        let mut found = std::collections::BTreeSet::new();
        let mut frontier: std::collections::BTreeSet<(u32, Vec<u32>)> =
            [(self.node_of_control[c as usize], Vec::new())].into_iter().collect();
        for _ in 0..=max_height {
            let mut next = std::collections::BTreeSet::new();
            for (node, word) in &frontier {
                for &e in &self.out[*node as usize] {
                    let edge = &self.edges[e];
                    if edge.sym == BOTTOM {
                        if edge.to == FINAL {
                            found.insert(word.clone());
                        }
                    } else if word.len() < max_height {
                        let mut w = word.clone();
                        w.push(edge.sym);
                        next.insert((edge.to, w));
                    }
                }
            }
            frontier = next;
        }
        found
            .into_iter()
            .map(|w| {
                w.into_iter()
                    .map(|i| self.symbols[i as usize].clone().expect("real symbol"))
                    .collect()
            })
            .collect()
    }

    /// A sequence of rule tags leading from the initial configuration to
    /// some configuration with control state `state`, or `None` if no such
    /// configuration is reachable.
    pub fn witness(&self, state: &S) -> Option<Vec<T>> {
        let &c = self.control_ix.get(state)?;
        let start = self.node_of_control[c as usize];
        let first = *self.out[start as usize].first()?;
        let mut path = vec![first];
        path.extend(self.path_to_final(self.edges[first].to));
        Some(self.unwind(path))
    }

    /// Shortest edge path from `node` to the final state.
    fn path_to_final(&self, node: u32) -> Vec<usize> {
        if node == FINAL {
            return Vec::new();
        }
        let mut via: HashMap<u32, usize> = HashMap::new();
        let mut queue = VecDeque::from([node]);
        let mut seen = std::collections::HashSet::from([node]);
        while let Some(n) = queue.pop_front() {
            for &e in &self.out[n as usize] {
                let to = self.edges[e].to;
                if seen.insert(to) {
                    via.insert(to, e);
                    if to == FINAL {
                        let mut path = Vec::new();
                        let mut cur = FINAL;
                        while cur != node {
                            let e = via[&cur];
                            path.push(e);
                            cur = self.edges[e].from;
                        }
                        path.reverse();
                        return path;
                    }
                    queue.push_back(to);
                }
            }
        }
        unreachable!("every automaton state reaches the final state")
    }

    /// Undoes rule applications on an accepting path until only the
    /// initial edge remains, collecting tags in execution order.
    fn unwind(&self, mut path: Vec<usize>) -> Vec<T> {
        let mut tags = Vec::new();
        loop {
            let head = path[0];
            match &self.edges[head].origin {
                Origin::Initial => {
                    debug_assert_eq!(path.len(), 1);
                    break;
                }
                Origin::Internal { tag, src } => {
                    tags.push(tag.clone());
                    path[0] = *src;
                }
                Origin::PushHead => {
                    let Origin::PushTail { tag, src } = &self.edges[path[1]].origin else {
                        unreachable!("push head is followed by its tail");
                    };
                    tags.push(tag.clone());
                    path.splice(0..2, [*src]);
                }
                Origin::PushTail { .. } => unreachable!("paths start at control states"),
                Origin::Pop { tag, src } => {
                    tags.push(tag.clone());
                    path[0] = *src;
                }
                Origin::Compose { eps, src } => {
                    path.splice(0..1, [*eps, *src]);
                }
            }
        }
        tags.reverse();
        tags
    }
}
