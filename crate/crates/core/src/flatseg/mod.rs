//! Conjugation of an operator whose potential has a flat piece into one
//! with strictly increasing diagonal: pair eliminations, their interpolated
//! covariant extension, the two-step pipeline on a box, and the accounting
//! of singular denominators on loop stacks of the result.

mod blocks;
mod pipeline;
mod sing4;
mod staged;

pub use blocks::{build_u2, interpolate, polar_unitary, star_offsets, step1_block, step2_block, FlatWindow, LocalBlock, Zone};
pub use pipeline::{
    covariance_defect, f1_second_order, f1_value, flatseg_report, local_stage, slope_scan, step1, step2,
    FlatsegReport, SlopeScan, DEFAULT_C1,
};
pub use sing4::{h2_compatible, sing4_accounting, stacks_of, RandomPaths, Sing4Report, Sing4Stack};
pub use staged::{EliminationPair, Stage, StagedOperator, DEFAULT_DELTA_RES, TOP_ORDER};
