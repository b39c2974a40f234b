//! Small hand-written models used as golden tests and in documentation.
//!
//! * [`figure1`]: two threads, each calling one procedure; `a` takes `l1`
//!   then `l2` and releases them in either order, `b` takes and drops `l1`.
//! * [`figure3`]: a single thread that releases, inside a call, a lock it
//!   held before the call. It does not lock contextually.
//! * [`figure4`]: two non-recursive threads passing three locks around in
//!   lock step, forever.

use crate::model::{Model, MultiPdsSpec, PairQuery, PdsSpec};
use crate::semantics::{Label, LabelKind};

pub fn figure1() -> MultiPdsSpec {
    let p0 = PdsSpec::new("P0", "p0")
        .push("p0", "a0", "ra")
        .acq("a0", "a1", "l1")
        .acq("a1", "a2", "l2")
        .rel("a2", "l2", "a3")
        .rel("a3", "l1", "a5")
        .rel("a2", "l1", "a4")
        .rel("a4", "l2", "a5")
        .pop("a5", "ra", "p0_ret");
    let p1 = PdsSpec::new("P1", "p1")
        .push("p1", "b0", "rb")
        .acq("b0", "b1", "l1")
        .rel("b1", "l1", "b2")
        .pop("b2", "rb", "p1_ret");
    MultiPdsSpec::new("figure1", &["l1", "l2"], vec![p0, p1])
}

/// Both threads after their procedure has returned.
pub fn figure1_query() -> PairQuery {
    PairQuery::new(0, "p0_ret", 1, "p1_ret")
}

pub fn figure3() -> MultiPdsSpec {
    let p2 = PdsSpec::new("P2", "m0")
        .acq("m0", "m1", "l2")
        .push("m1", "f0", "rf")
        .acq("f0", "f1", "l1")
        .rel("f1", "l2", "f2")
        .pop("f2", "rf", "m2")
        .rel("m2", "l1", "m3");
    MultiPdsSpec::new("figure3", &["l1", "l2"], vec![p2])
}

pub fn figure4() -> MultiPdsSpec {
    let p3 = PdsSpec::new("P3", "p3_0")
        .acq("p3_0", "p3_head", "l1")
        .acq("p3_head", "p3_2", "l2")
        .rel("p3_2", "l1", "p3_3")
        .acq("p3_3", "p3_4", "l3")
        .rel("p3_4", "l2", "p3_5")
        .acq("p3_5", "p3_6", "l1")
        .rel("p3_6", "l3", "p3_head");
    let p4 = PdsSpec::new("P4", "p4_0")
        .acq("p4_0", "p4_head", "l3")
        .acq("p4_head", "p4_2", "l1")
        .rel("p4_2", "l3", "p4_3")
        .acq("p4_3", "p4_4", "l2")
        .rel("p4_4", "l1", "p4_5")
        .acq("p4_5", "p4_6", "l3")
        .rel("p4_6", "l2", "p4_head");
    MultiPdsSpec::new("figure4", &["l1", "l2", "l3"], vec![p3, p4])
}

/// Both loop heads.
pub fn figure4_query() -> PairQuery {
    PairQuery::new(0, "p3_head", 1, "p4_head")
}

fn labels(model: &Model, word: &[(&str, usize)]) -> Vec<Label> {
    word.iter()
        .map(|&(kind, thread)| {
            let kind = match kind {
                "push" => LabelKind::Push,
                "pop" => LabelKind::Pop,
                "state" => LabelKind::State,
                other => {
                    let (op, lock) = other.split_once(' ').expect("`acq l` or `rel l`");
                    let lock = model.lock_id(lock).expect("declared lock");
                    if op == "acq" {
                        LabelKind::Acq(lock)
                    } else {
                        LabelKind::Rel(lock)
                    }
                }
            };
            Label::new(kind, thread)
        })
        .collect()
}

/// The non-well-bracketed computation of the first figure: thread 0
/// returns while thread 1's call is still open.
pub fn comp1_labels(model: &Model) -> Vec<Label> {
    labels(
        model,
        &[
            ("push", 0),
            ("acq l1", 0),
            ("push", 1),
            ("acq l2", 0),
            ("rel l1", 0),
            ("acq l1", 1),
            ("rel l2", 0),
            ("pop", 0),
            ("rel l1", 1),
            ("pop", 1),
        ],
    )
}

/// The well-bracketed computation of the first figure.
pub fn comp2_labels(model: &Model) -> Vec<Label> {
    labels(
        model,
        &[
            ("push", 0),
            ("acq l1", 0),
            ("push", 1),
            ("acq l2", 0),
            ("rel l1", 0),
            ("acq l1", 1),
            ("rel l1", 1),
            ("pop", 1),
            ("rel l2", 0),
            ("pop", 0),
        ],
    )
}

/// Comp1 after one reordering step.
pub fn comp1_reordered_labels(model: &Model) -> Vec<Label> {
    labels(
        model,
        &[
            ("push", 0),
            ("acq l1", 0),
            ("acq l2", 0),
            ("rel l1", 0),
            ("rel l2", 0),
            ("pop", 0),
            ("push", 1),
            ("acq l1", 1),
            ("rel l1", 1),
            ("pop", 1),
        ],
    )
}

/// The offending trace of the third figure.
pub fn figure3_trace(model: &Model) -> Vec<Label> {
    labels(
        model,
        &[("acq l2", 0), ("push", 0), ("acq l1", 0), ("rel l2", 0), ("pop", 0)],
    )
}
