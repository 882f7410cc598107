//! Detection of mean-shift regions in noisy responses observed on the unit
//! sphere in `R^d`.
//!
//! A change region is a spherical cap where the mean response differs from
//! the background. The single-region estimator maximizes a CUSUM contrast
//! over caps via directional projection scans; the multi-region detector
//! draws random outer scan discs, maximizes a local CUSUM inside each,
//! screens candidates with a residual-sum-of-squares test against two
//! thresholds, and keeps a greedy disjoint subset.
//!
//! The crate also ships the preprocessing used for gridded geophysical data
//! (grid snapping, MST-neighbour robust scale), a seeded Monte Carlo harness
//! for convergence-rate experiments, and exact brute-force oracles at small
//! n for validation.
//!
//! All numeric code is generic over the scalar type ([`Scalar`]); concrete
//! `f64` aliases live at the crate root.

pub mod bitset;
pub mod error;
pub mod multi;
pub mod oracle;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod single;
pub mod sphere;
pub mod stats;

pub use bitset::Bitset;
pub use error::{CrispError, Result};
pub use scalar::Scalar;

pub use sphere::{
    cap_area, disc_gap, discs_intersect, empirical_count, empirical_loss, geodesic,
    sample_outer_discs, sample_uniform_sphere, sphere_area, Disc, LabeledDataset, UnitVector,
};

pub use stats::{
    cusum, cusum_threshold, local_cusum, num_outer_discs, rate_cusum_threshold, rate_lambda, rss,
    rss_threshold_chi2, rss_threshold_lm, LambdaTRule, RssRule, Sided, ThresholdConfig,
};

pub use single::{
    detect_single, parameter_error, refine_perturb, scan_direction, InnerConstraints,
    RegionEstimate, SearchBudget,
};

pub use multi::{
    detect_multi, match_regions, padded_matched_max_loss, scan_outer, select_disjoint,
    DedupMode, DetectorConfig, MatchReport, MultiRegionResult, OuterCount, OuterScanLog,
    RejectReason, ScanOutcome, ScanResult,
};

pub use preprocess::{
    build_mst, from_lat_lon, robust_scale, snap_to_grid, standardize, to_lat_lon, GeoGrid,
    NeighborGraph,
};

pub use sim::{
    adjusted_rand_index, fit_loglog_slope, generate, generate_seeded, run_monte_carlo,
    DetectorSpec, GeneratedData, MetricSummary, MonteCarloCell, MonteCarloReport, RegionSpec,
    SimDesign,
};

pub use oracle::{
    enumerate_disc_subsets, enumerate_disc_subsets_d2, enumerate_disc_subsets_d3,
    oracle_argmax_cusum, shatters, OracleArgmax, SubsetFamily,
};

/// Concrete `f64` aliases for the main domain types.
pub type UnitVector64 = UnitVector<f64>;
pub type Disc64 = Disc<f64>;
pub type Dataset64 = LabeledDataset<f64>;
pub type RegionEstimate64 = RegionEstimate<f64>;
pub type DetectorConfig64 = DetectorConfig<f64>;
pub type SimDesign64 = SimDesign<f64>;
