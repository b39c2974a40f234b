//! Pairwise reachability for two contextually locking threads.
//!
//! The two threads are run on a single shared stack. Each product control
//! state carries both control states and both locksets; lock moves become
//! internal moves guarded by the locksets, and a thread may only pop its own
//! symbol from the top of the shared stack. Runs of this product are
//! exactly the well-bracketed interleavings, and for contextual threads
//! those reach every reachable pair of control states.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::discipline::{
    check_contextual_static, classify, Bracketing, ContextualViolation, DisciplineError, StaticVerdict,
};
use crate::model::{LockMode, LockSet, Model, PairQuery, PairTarget, StateId, Transition, Violation};
use crate::saturation::{post_star, PushdownRules, Saturation, SaturationStats, Step};
use crate::semantics::Computation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub q0: StateId,
    pub h0: LockSet,
    pub q1: StateId,
    pub h1: LockSet,
}

impl ProductState {
    fn get(&self, t: usize) -> (StateId, LockSet) {
        if t == 0 {
            (self.q0, self.h0)
        } else {
            (self.q1, self.h1)
        }
    }

    fn set(mut self, t: usize, q: StateId, h: LockSet) -> Self {
        if t == 0 {
            self.q0 = q;
            self.h0 = h;
        } else {
            self.q1 = q;
            self.h1 = h;
        }
        self
    }
}

/// A symbol of the shared stack: the owning thread and its own symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductSymbol {
    pub thread: u8,
    pub symbol: crate::model::SymbolId,
}

/// The rule of a source thread that a product move translates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProductTag {
    pub thread: usize,
    pub transition: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("decision procedure requires non-reentrant locks")]
    Reentrant,
    #[error("the product needs exactly 2 threads, got {0}")]
    NotTwoThreads(usize),
    #[error("thread {thread} does not lock contextually: {violation}")]
    NonContextual {
        thread: usize,
        witness: Computation,
        violation: ContextualViolation,
    },
    #[error("invalid query: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Query(Vec<Violation>),
    #[error("internal invariant failed: {0}")]
    Invariant(String),
}

impl From<DisciplineError> for ReachError {
    fn from(e: DisciplineError) -> Self {
        match e {
            DisciplineError::Reentrant => ReachError::Reentrant,
            other => ReachError::Invariant(other.to_string()),
        }
    }
}

/// The product of a contextual 2-thread model.
#[derive(Clone, Debug)]
pub struct ProductPds {
    model: Model,
}

/// The worst-case number of product states, `|Q0|·|Q1|·4^ℓ`, saturating.
pub fn state_bound(model: &Model) -> u128 {
    let q: u128 = model.threads.iter().take(2).map(|t| t.states.len() as u128).product();
    let ell = model.lock_count() as u32;
    let pow = 4u128.checked_pow(ell).unwrap_or(u128::MAX);
    q.saturating_mul(pow)
}

/// Builds the product. Rejects re-entrant models, models without exactly
/// two threads and models with a non-contextual thread.
pub fn build_product(model: &Model) -> Result<ProductPds, ReachError> {
    if model.mode == LockMode::Reentrant {
        return Err(ReachError::Reentrant);
    }
    if model.threads.len() != 2 {
        return Err(ReachError::NotTwoThreads(model.threads.len()));
    }
    for thread in 0..2 {
        if let StaticVerdict::Violated { witness, violation } = check_contextual_static(model, thread)? {
            return Err(ReachError::NonContextual {
                thread,
                witness,
                violation,
            });
        }
    }
    Ok(ProductPds { model: model.clone() })
}

impl ProductPds {
    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Every product state in the state-set definition, reachable or not.
    pub fn all_states(&self) -> impl Iterator<Item = ProductState> + '_ {
        let sets = 1u64 << self.model.lock_count();
        let q0s = self.model.threads[0].states.len() as u32;
        let q1s = self.model.threads[1].states.len() as u32;
        (0..q0s).flat_map(move |q0| {
            (0..sets).flat_map(move |h0| {
                (0..q1s).flat_map(move |q1| {
                    (0..sets).map(move |h1| ProductState {
                        q0: StateId(q0),
                        h0: LockSet::from_bits(h0),
                        q1: StateId(q1),
                        h1: LockSet::from_bits(h1),
                    })
                })
            })
        })
    }

    /// Saturates the product from its initial configuration.
    pub fn saturate(self) -> Result<ProductAnalysis, ReachError> {
        let sat = post_star(&self);
        let materialized = sat.discovered_controls().len();
        let bound = state_bound(&self.model);
        if materialized as u128 > bound {
            return Err(ReachError::Invariant(format!(
                "{materialized} product states exceed the bound {bound}"
            )));
        }
        if let Some(s) = sat.reachable_controls().find(|s| !s.h0.intersection(s.h1).is_empty()) {
            return Err(ReachError::Invariant(format!(
                "reachable product state shares locks: {s:?}"
            )));
        }
        Ok(ProductAnalysis { product: self, sat })
    }
}

impl PushdownRules for ProductPds {
    type State = ProductState;
    type Symbol = ProductSymbol;
    type Tag = ProductTag;

    fn initial(&self) -> ProductState {
        ProductState {
            q0: self.model.threads[0].initial,
            h0: LockSet::EMPTY,
            q1: self.model.threads[1].initial,
            h1: LockSet::EMPTY,
        }
    }

    fn steps(&self, s: &ProductState) -> Vec<(Step<ProductState, ProductSymbol>, ProductTag)> {
        let mut out = Vec::new();
        let taken = s.h0.union(s.h1);
        for t in 0..2 {
            let (q, h) = s.get(t);
            for (ix, tr) in self.model.threads[t].outgoing(q) {
                let tag = ProductTag {
                    thread: t,
                    transition: ix,
                };
                let to = tr.to();
                let step = match *tr {
                    Transition::Internal { .. } => Step::Internal(s.set(t, to, h)),
                    Transition::Acq { lock, .. } if !taken.contains(lock) => Step::Internal(s.set(t, to, h.with(lock))),
                    Transition::Rel { lock, .. } if h.contains(lock) => Step::Internal(s.set(t, to, h.without(lock))),
                    Transition::Push { symbol, .. } => Step::Push(
                        s.set(t, to, h),
                        ProductSymbol {
                            thread: t as u8,
                            symbol,
                        },
                    ),
                    _ => continue,
                };
                out.push((step, tag));
            }
        }
        out
    }

    fn pops(&self, s: &ProductState, top: &ProductSymbol) -> Vec<(ProductState, ProductTag)> {
        let t = top.thread as usize;
        let (q, h) = s.get(t);
        self.model.threads[t]
            .outgoing(q)
            .filter_map(|(ix, tr)| match *tr {
                Transition::Pop { symbol, to, .. } if symbol == top.symbol => Some((
                    s.set(t, to, h),
                    ProductTag {
                        thread: t,
                        transition: ix,
                    },
                )),
                _ => None,
            })
            .collect()
    }
}

/// A saturated product, answering any number of pair queries.
pub struct ProductAnalysis {
    product: ProductPds,
    sat: Saturation<ProductState, ProductSymbol, ProductTag>,
}

impl ProductAnalysis {
    pub fn model(&self) -> &Model {
        &self.product.model
    }

    pub fn saturation(&self) -> &Saturation<ProductState, ProductSymbol, ProductTag> {
        &self.sat
    }

    pub fn stats(&self) -> SaturationStats {
        self.sat.stats()
    }

    pub fn state_bound(&self) -> u128 {
        state_bound(&self.product.model)
    }

    pub fn reachable_states(&self) -> impl Iterator<Item = &ProductState> + '_ {
        self.sat.reachable_controls()
    }

    /// All reachable pairs of control states.
    pub fn reachable_pairs(&self) -> BTreeSet<(StateId, StateId)> {
        self.reachable_states().map(|s| (s.q0, s.q1)).collect()
    }

    /// Decides whether `(q0, q1)` is reachable, with a witness computation
    /// of the 2-thread model when it is.
    pub fn decide(&self, q0: StateId, q1: StateId) -> Result<Decision, ReachError> {
        let Some(state) = self.reachable_states().find(|s| s.q0 == q0 && s.q1 == q1).copied() else {
            return Ok(Decision::Unreachable);
        };
        let tags = self
            .sat
            .witness(&state)
            .ok_or_else(|| ReachError::Invariant("reachable state has no witness".into()))?;
        let moves: Vec<(usize, usize)> = tags.iter().map(|t| (t.thread, t.transition)).collect();
        let witness = Computation::from_transitions(&self.product.model, &moves)
            .map_err(|e| ReachError::Invariant(format!("witness does not replay: {e}")))?;
        let end = witness.final_config();
        if end.control(0) != q0 || end.control(1) != q1 {
            return Err(ReachError::Invariant("witness ends in the wrong pair".into()));
        }
        if classify(&witness)? != Bracketing::WellBracketed {
            return Err(ReachError::Invariant("witness is not well-bracketed".into()));
        }
        Ok(Decision::Reachable { witness, state })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Reachable { witness: Computation, state: ProductState },
    Unreachable,
}

impl Decision {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Decision::Reachable { .. })
    }
}

/// Restricts the model to threads `i` and `j`, renumbered 0 and 1.
pub fn reduce_to_pair(model: &Model, target: &PairTarget) -> (Model, PairTarget) {
    if model.threads.len() == 2 && target.i == 0 && target.j == 1 {
        return (model.clone(), *target);
    }
    let pair = model.project(&[target.i, target.j]);
    (
        pair,
        PairTarget {
            i: 0,
            q_i: target.q_i,
            j: 1,
            q_j: target.q_j,
        },
    )
}

/// Answer to a pair query together with the reduced model it was decided
/// on and saturation statistics.
#[derive(Clone, Debug)]
pub struct ReachReport {
    /// The 2-thread model the witness belongs to.
    pub pair: Model,
    pub target: PairTarget,
    pub decision: Decision,
    pub stats: SaturationStats,
    pub state_bound: u128,
}

/// Decides a pair query. Models with more than two threads are first
/// reduced to the two queried threads.
pub fn pairwise_reach(model: &Model, query: &PairQuery) -> Result<ReachReport, ReachError> {
    if model.mode == LockMode::Reentrant {
        return Err(ReachError::Reentrant);
    }
    let target = model.resolve(query).map_err(ReachError::Query)?;
    let (pair, target) = reduce_to_pair(model, &target);
    let analysis = build_product(&pair)?.saturate()?;
    let decision = analysis.decide(target.q_i, target.q_j)?;
    Ok(ReachReport {
        stats: analysis.stats(),
        state_bound: analysis.state_bound(),
        pair,
        target,
        decision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::model::{MultiPdsSpec, PdsSpec};

    #[test]
    fn figure1_end_pair_is_reachable() {
        let m = Model::compile(&corpus::figure1()).unwrap();
        let r = pairwise_reach(&m, &corpus::figure1_query()).unwrap();
        let Decision::Reachable { witness, .. } = r.decision else {
            panic!("unreachable")
        };
        assert!(witness.validate(&m).is_ok());
        assert_eq!(witness.len(), 10);
    }

    #[test]
    fn initial_pair_has_empty_witness() {
        let m = Model::compile(&corpus::figure1()).unwrap();
        let r = pairwise_reach(&m, &PairQuery::new(0, "p0", 1, "p1")).unwrap();
        let Decision::Reachable { witness, .. } = r.decision else {
            panic!("unreachable")
        };
        assert!(witness.is_empty());
    }

    #[test]
    fn state_count_arithmetic() {
        let a = PdsSpec::new("A", "a0").internal("a0", "a1");
        let b = PdsSpec::new("B", "b0").internal("b0", "b1").internal("b1", "b2");
        let m = Model::compile(&MultiPdsSpec::new("s", &["x", "y"], vec![a, b])).unwrap();
        let p = build_product(&m).unwrap();
        assert_eq!(p.all_states().count(), 96);
        assert_eq!(state_bound(&m), 96);
    }

    #[test]
    fn rejects_reentrant_and_non_contextual() {
        let m = Model::compile(&corpus::figure1().reentrant(true)).unwrap();
        assert_eq!(build_product(&m).unwrap_err(), ReachError::Reentrant);
        let mut spec = corpus::figure3();
        spec.threads.push(PdsSpec::new("Q", "q0"));
        let m = Model::compile(&spec).unwrap();
        assert!(matches!(
            build_product(&m),
            Err(ReachError::NonContextual { thread: 0, .. })
        ));
    }

    #[test]
    fn reduce_identity_and_projection() {
        let m = Model::compile(&corpus::figure1()).unwrap();
        let t = m.resolve(&corpus::figure1_query()).unwrap();
        let (same, t2) = reduce_to_pair(&m, &t);
        assert_eq!(same, m);
        assert_eq!(t2, t);
    }
}
