//! Bounded explicit-state search over the interleaving semantics.
//!
//! Exploration is breadth-first over full system configurations (stacks
//! included), in the canonical successor order, so results are
//! deterministic and witnesses are shortest. Configurations beyond the stack or
//! lock-count bound are pruned, and the search stops at a maximal
//! computation length; either kind of cut marks the result as truncated.
//! A search that is not truncated has seen every reachable configuration.

use std::collections::HashMap;

use crate::model::{Model, PairTarget};
use crate::semantics::{system_successors, Computation, Label, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub max_stack_depth: usize,
    /// Maximal computation length explored.
    pub max_steps: usize,
    /// Maximal re-entrant acquisition count of any lock.
    pub max_count: u32,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_stack_depth: 64,
            max_steps: 100_000,
            max_count: 16,
        }
    }
}

impl Bounds {
    fn admits(&self, cfg: &SystemConfig) -> bool {
        cfg.max_stack_height() <= self.max_stack_depth && cfg.max_count() <= self.max_count
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Found(Computation),
    /// `exhausted` is true when nothing was pruned, i.e. the goal is
    /// unreachable outright.
    NotFound {
        exhausted: bool,
    },
}

impl Outcome {
    pub fn is_found(&self) -> bool {
        matches!(self, Outcome::Found(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exploration {
    pub outcome: Outcome,
    /// Distinct configurations discovered.
    pub visited: usize,
}

struct Node {
    cfg: SystemConfig,
    parent: usize,
    label: Option<Label>,
    depth: usize,
}

struct Search<'a> {
    model: &'a Model,
    bounds: Bounds,
    nodes: Vec<Node>,
    index: HashMap<SystemConfig, usize>,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model, bounds: Bounds) -> Self {
        let start = SystemConfig::initial(model);
        let mut index = HashMap::new();
        index.insert(start.clone(), 0);
        Search {
            model,
            bounds,
            nodes: vec![Node {
                cfg: start,
                parent: 0,
                label: None,
                depth: 0,
            }],
            index,
            truncated: false,
        }
    }

    /// Runs BFS, calling `on_edge` for every explored transition, until
    /// `goal` holds for a discovered configuration.
    fn run(
        &mut self,
        mut goal: impl FnMut(&SystemConfig) -> bool,
        mut on_edge: impl FnMut(&SystemConfig, &Label, &SystemConfig),
    ) -> Option<usize> {
        if goal(&self.nodes[0].cfg) {
            return Some(0);
        }
        let mut next = 0;
        while next < self.nodes.len() {
            let current = next;
            next += 1;
            let depth = self.nodes[current].depth;
            let succs = system_successors(self.model, &self.nodes[current].cfg);
            for (label, cfg) in succs {
                assert!(cfg.locks_disjoint(), "two threads hold the same lock");
                if !self.bounds.admits(&cfg) {
                    self.truncated = true;
                    continue;
                }
                if depth == self.bounds.max_steps {
                    if !self.index.contains_key(&cfg) {
                        self.truncated = true;
                    }
                    continue;
                }
                on_edge(&self.nodes[current].cfg, &label, &cfg);
                if self.index.contains_key(&cfg) {
                    continue;
                }
                let id = self.nodes.len();
                self.index.insert(cfg.clone(), id);
                let hit = goal(&cfg);
                self.nodes.push(Node {
                    cfg,
                    parent: current,
                    label: Some(label),
                    depth: depth + 1,
                });
                if hit {
                    return Some(id);
                }
            }
        }
        None
    }

    fn computation(&self, mut id: usize) -> Computation {
        let mut steps = Vec::new();
        while id != 0 {
            let node = &self.nodes[id];
            steps.push((node.label.expect("non-root"), node.cfg.clone()));
            id = node.parent;
        }
        steps.reverse();
        Computation::from_steps_unchecked(self.nodes[0].cfg.clone(), steps)
    }

    fn outcome(&self, hit: Option<usize>) -> Exploration {
        let outcome = match hit {
            Some(id) => Outcome::Found(self.computation(id)),
            None => Outcome::NotFound {
                exhausted: !self.truncated,
            },
        };
        Exploration {
            outcome,
            visited: self.nodes.len(),
        }
    }
}

/// Shortest computation reaching a configuration satisfying `goal`.
pub fn bounded_search(model: &Model, bounds: &Bounds, goal: impl FnMut(&SystemConfig) -> bool) -> Exploration {
    let mut search = Search::new(model, *bounds);
    let hit = search.run(goal, |_, _, _| {});
    search.outcome(hit)
}

/// Searches for a configuration where thread `i` is in `q_i` and thread
/// `j` in `q_j`.
pub fn bounded_reach(model: &Model, target: &PairTarget, bounds: &Bounds) -> Exploration {
    bounded_search(model, bounds, |c| {
        c.control(target.i) == target.q_i && c.control(target.j) == target.q_j
    })
}

/// Summary of a full exploration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coverage {
    pub configs: Vec<SystemConfig>,
    pub exhausted: bool,
}

/// Explores every configuration within bounds, calling `on_edge` for each
/// explored transition. Configurations are returned in BFS order.
pub fn explore(model: &Model, bounds: &Bounds, on_edge: impl FnMut(&SystemConfig, &Label, &SystemConfig)) -> Coverage {
    let mut search = Search::new(model, *bounds);
    search.run(|_| false, on_edge);
    Coverage {
        exhausted: !search.truncated,
        configs: search.nodes.into_iter().map(|n| n.cfg).collect(),
    }
}

/// Configurations grouped by the length of their shortest computation.
pub fn layers(model: &Model, bounds: &Bounds) -> Vec<Vec<SystemConfig>> {
    let mut search = Search::new(model, *bounds);
    search.run(|_| false, |_, _, _| {});
    let mut out: Vec<Vec<SystemConfig>> = Vec::new();
    for node in search.nodes {
        if out.len() <= node.depth {
            out.resize_with(node.depth + 1, Vec::new);
        }
        out[node.depth].push(node.cfg);
    }
    out
}

/// Every computation of length at most `max_len`, in depth-first preorder
/// over the canonical successor order.
pub fn enumerate_traces(model: &Model, max_len: usize) -> Traces<'_> {
    let start = SystemConfig::initial(model);
    let root = if max_len > 0 {
        system_successors(model, &start)
    } else {
        Vec::new()
    };
    Traces {
        model,
        max_len,
        start,
        path: Vec::new(),
        frames: vec![(root, 0)],
        emitted_root: false,
    }
}

pub struct Traces<'a> {
    model: &'a Model,
    max_len: usize,
    start: SystemConfig,
    path: Vec<(Label, SystemConfig)>,
    /// `frames[d]` lists the successors of the configuration at depth `d`
    /// and the next one to visit.
    frames: Vec<(Vec<(Label, SystemConfig)>, usize)>,
    emitted_root: bool,
}

impl Iterator for Traces<'_> {
    type Item = Computation;

    fn next(&mut self) -> Option<Computation> {
        if !self.emitted_root {
            self.emitted_root = true;
            return Some(Computation::from_steps_unchecked(self.start.clone(), Vec::new()));
        }
        loop {
            let (succs, pos) = self.frames.last_mut()?;
            if *pos < succs.len() {
                let step = succs[*pos].clone();
                *pos += 1;
                let children = if self.path.len() + 1 < self.max_len {
                    system_successors(self.model, &step.1)
                } else {
                    Vec::new()
                };
                self.path.push(step);
                self.frames.push((children, 0));
                return Some(Computation::from_steps_unchecked(self.start.clone(), self.path.clone()));
            }
            self.frames.pop();
            self.path.pop();
        }
    }
}
