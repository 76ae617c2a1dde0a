//! Exponent-lattice series algebra, extraction of the H and base-trace
//! series, the predicted small-t expansion and fits of measured traces.

mod extract;
mod fit;
pub mod series;

pub use extract::{
    extract_base_trace_series, extract_h_series, predict_heat_expansion, ExpansionJson,
    ExpansionTerm, HeatExpansion, DEFAULT_TRUNCATION, H0_GATE,
};
pub use fit::{
    fit_trace_curve, FitReport, FitTerm, FreeExponent, FreeExponentEstimate, MAX_FIT_COND,
};
pub use series::{
    krein_factor, series_add, series_inverse, series_mul, FractionalSeries, LatticeExponent,
    SeriesJson, SeriesTerm, TermKey, Variable,
};
