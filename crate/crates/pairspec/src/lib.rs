//! Simulation and analysis of the joint spectral and polarization
//! correlations of photon pairs from a pulsed two-path downconversion
//! source.
//!
//! The forward model is a two-dimensional Gaussian joint spectrum per decay
//! path ([`GaussianJointModel`]), superposed coherently with a relative phase
//! into wavelength-resolved coincidence rates ([`simulate`]). On top of that
//! sit the inverse problems ([`analysis`]): closed-form sinusoid fits of
//! polarizer scans, damped least-squares model fits of count maps, and
//! visibility / maximum-angle / entanglement-entropy maps. Virtual spectral
//! filtering ([`vfilter`]) weights a measured or simulated scan cube by
//! per-arm transmission profiles to predict the visibility and pair-rate
//! tradeoff of physical filters, and picks a bandwidth under a configurable
//! figure of merit.
//!
//! The `pairspec` binary exposes the pipeline as `simulate`, `fit`, `maps`,
//! and `vfilter` subcommands; all artifacts are CSV with JSON sidecars
//! ([`io`]).

pub mod analysis;
pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod polarization;
pub mod simulate;
pub mod vfilter;

pub use analysis::{
    entropy_map, fit_gaussian2d, fit_sinusoid, visibility_gamma_maps, GaussianFit, PolarizerScan,
    ScanSample, VisibilityFit,
};
pub use error::{Error, Result};
pub use model::{
    path_amplitudes, Arm, GaussianJointModel, MapKind, MapMetadata, SpectralMap, WavelengthGrid,
};
pub use polarization::{AnalyzerSetting, TwoPathState};
pub use simulate::{count_cube, rate_cube, rate_map, sample_counts, ScanCube, SourceConfig};
pub use vfilter::{
    correct_fourphoton, filtered_scan, optimize_filter, tradeoff_curve, FigureOfMerit,
    FilterProfile, TradeoffCurve, TradeoffPoint,
};
