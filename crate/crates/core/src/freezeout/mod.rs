//! Freezeout estimators: the effective-inverse-temperature method (fit a
//! Boltzmann parameter from original vs rescaled energy histograms, then
//! invert B(s)), and the polyline quasi-freezeout point fitted to slicing
//! traces.

mod beta;
mod polyline;

pub use beta::{
    default_x_grid, estimate_beta_eff, estimate_beta_eff_with, freezeout_point, recommended_bins,
    scan_x, scan_x_with, BetaFit, ScanOutcome, DEFAULT_R2_MIN,
};
pub use polyline::{
    classify_frozen, fit_polyline, fit_polyline_with, PolylineFit, DEFAULT_SLOPE_THRESHOLD_DEG,
};
