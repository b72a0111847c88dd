//! Truncated operators, a dense Jacobi eigensolver, and checks of series
//! output against actual spectra.

mod checks;
mod eigen;
mod truncated;

pub use checks::{
    completeness_check, envelope_holds, halving_check, ids_check, invert_lambda, lambda_at, localization_profile,
    match_series_to_spectrum, translated_vector, window_projection_check, CompletenessReport, HalvingReport,
    IdsPoint, IdsReport, LocalizationFit, MatchReport, WindowReport,
};
pub use eigen::{jacobi_eigen, EigenSystem, HermitianMatrix, DEFAULT_DIM_CAP};
pub use truncated::{build_truncated, TruncatedOperator};
