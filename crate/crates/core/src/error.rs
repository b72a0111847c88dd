use crate::lattice::Site;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {x} lies within {tol} of a singularity of f")]
    SingularArgument { x: f64, tol: f64 },
    #[error("site {0} sits on a singularity of the potential")]
    SingularSite(Site),
    #[error("resonant site {0}: |V_n - V_0| below threshold")]
    ResonantSite(Site),
    #[error("f is not one-to-one on the probed preimage interval near x = {x}")]
    NotOneToOne { x: f64 },
    #[error("malformed path string at position {pos}: {msg}")]
    MalformedString { pos: usize, msg: String },
    #[error("jump {from} -> {to} exceeds the range of order {order}")]
    RangeViolation { from: Site, to: Site, order: u32 },
    #[error("no visit with index {0}")]
    BadPosition(usize),
    #[error("translation changed the level of coordinate {0}")]
    LevelShift(Site),
    #[error("path is not translation-canonical: {0}")]
    NotCanonical(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("degenerate elimination pair at {anchor} + {offset}: D = {d}")]
    DegeneratePair { anchor: Site, offset: Site, d: f64 },
    #[error("polar interpolation singular at phase {x}")]
    InterpolationSingular { x: f64 },
    #[error("frequency check failed: {0}")]
    Frequency(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
