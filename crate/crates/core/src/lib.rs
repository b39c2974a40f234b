//! Pairwise reachability for pushdown systems that share locks.
//!
//! Threads are pushdown systems that communicate only by acquiring and
//! releasing a common set of locks. When every thread locks contextually
//! (a procedure hands back exactly the locks it was given and never drops
//! a lock taken before the call), reachability of a pair of control states
//! is decidable with a single pushdown saturation over a product system.
//!
//! Modules, roughly bottom to top:
//!
//! * [`model`]: declarations, validation and the compiled [`model::Model`].
//! * [`semantics`]: configurations, the step relation, computations.
//! * [`discipline`]: contextual locking and well-bracketing.
//! * [`saturation`]: generic post* saturation with witnesses.
//! * [`reach`]: the pairwise decision procedure.
//! * [`explorer`]: bounded explicit-state search, used as an oracle.
//! * [`reentrant`]: two-counter machines encoded with re-entrant locks.

pub mod corpus;
pub mod discipline;
pub mod explorer;
pub mod model;
pub mod random;
pub mod reach;
pub mod reentrant;
pub mod saturation;
pub mod semantics;
