//! Denominator levels, canonical marking and translation, translational
//! equivalence classes and loop stacks.
//!
//! A class is generated from its canonical translation `T(P)` by choosing,
//! for each short ascent `m(A)m`, between the ascent and the marked segment
//! `m[A + m]m`. Class contributions are available by direct summation and by
//! a telescoping product over the short ascents.

mod class;
mod denominators;
mod marking;
mod stacks;

pub use class::{cont_class, cont_class_with, group_by_class, ClassRoute};
pub use denominators::{bisect_beta, verify_consistency, ConsistencyReport, DenominatorData, LevelRule, INFINITE_LEVEL};
pub use marking::{
    canonical_marking, canonical_translation, equivalence_class, is_short, short_loop_count, MarkedPath,
};
pub use stacks::{
    allowed_shift, check_stack_bound, decompose_stacks, factorized_cont, is_loop_stack, m_beta, reassemble,
    sample_stacks, stack_population, stack_stats, stack_stats_with, Anchor, LoopStack, StackBoundParams,
    StackBoundReport, StackStats,
};
