//! Numerical thermodynamic formalism for symbolic and piecewise interval
//! dynamics: transfer operators, topological pressure, conformal and
//! equilibrium measures with the weak Gibbs property, hyperbolic and zooming
//! time detection, contracting skew-product attractors, and large-deviation
//! rate functions — all checkable against exactly solvable instances.

pub mod error;
pub mod gibbs;
pub mod ldp;
pub mod maps;
pub mod measure;
pub mod potential;
pub mod skew;
pub mod symbolic;
pub mod transfer;

pub use error::{Error, Result};
pub use gibbs::{
    cesaro_compare, density_bounds, envelope_report, gibbs_report, gibbs_scan, jacobian_check,
    DensityBounds, EnvelopeCheck, GibbsReport, GibbsSample, MapGibbsContext, ScanRow,
};
pub use ldp::{
    deviation_prob_bruteforce, deviation_prob_exact, empirical_rate, gap_tail, glue_segments,
    katok_entropy, max_cycle_mean, pressure_curve, GapTail, GlueResult, KatokEstimate, RateCurve,
    RateFit, RateValue, RationalObservable,
};
pub use maps::{
    estimate_expansion_constant, hyperbolic_times, hyperbolic_times_direct, iterate_orbit,
    make_map, verify_star, zooming_times, DeformedModel, GibbsTimeSeries, MapKind, OrbitTrace,
    PiecewiseMap, StarReport, ZoomSequence,
};
pub use measure::{conformal_measure, equilibrium_measure, CylinderMeasure};
pub use potential::{birkhoff_sum, BirkhoffValue, Potential};
pub use skew::{
    attractor_gibbs_report, cohomology_tail, cohomology_u, induce_base_potential, lift_measure,
    pressure_equality_check, AttractorGibbsReport, FiberPotential, InducedPotential,
    LiftedMeasure, PressureEqualityReport, SkewSystem,
};
pub use symbolic::{
    cylinder_diameter, dynamical_ball_cylinder, prefix_length_for_radius, SftSystem, Symbol, Word,
};
pub use transfer::{
    check_pressure_gap, coboundary_transform, cover_pressure, cover_sum, perron, pressure,
    relative_pressure_subshift, transfer_matrix, GapReport, PressureEstimate, PressureMode,
    SpectralData, SubShift, TransferMatrix, SPECTRAL_TOL,
};
