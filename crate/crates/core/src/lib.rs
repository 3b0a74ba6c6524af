//! Numerical laboratory for partially hyperbolic torus diffeomorphisms:
//! a linear Anosov automorphism on T^3 and its derived-from-Anosov
//! perturbation, with Lyapunov spectra, invariant splittings, hyperbolic
//! times, periodic-orbit search and shadowing, and physical-measure
//! estimation.

pub mod cocycle;
pub mod error;
pub mod hyperbolic;
pub mod intlin;
pub mod maps;
pub mod measure;
pub mod periodic;
pub mod torus;

pub use cocycle::{
    contraction_series, estimate_splitting, ftle, BenettinAccumulator, ContractionSeries,
    ContractionStream, FtleReport, SplittingFrame,
};
pub use error::{Error, Result};
pub use hyperbolic::{
    check_contraction_at_ht, detect_hyperbolic_times, expansion_time, pliss_density,
    tail_distribution, ExpansionTime, ExpansionTimeRecord, HyperbolicTimeReport, TailCurve,
};
pub use maps::{
    eigen_data, validate_mane_spec, AnosovSpec, EigenData, ManeDASpec, ManeValidation, MapSpec,
};
pub use measure::{
    basin_map, birkhoff, center_exponent_of_cluster, character_correlation_oracle,
    cluster_measures, clt_variance, clt_variance_of_series, correlation,
    correlation_vanishing_time, dictionary, fit_decay, green_kubo_oracle, parameter_sweep,
    stream_rng, BasinParams, BasinReport, BirkhoffParams, CltReport, CorrelationParams,
    CorrelationSeries, EmpiricalMeasure, EnsembleMode, Observable, ObservableKind, SweepKind,
    SweepParams, SweepPoint, SweepReport,
};
pub use periodic::{
    find_periodic, quasi_hyperbolic_recurrence, refine_cycle, refine_periodic, shadow_to_periodic,
    shadowing_constant, skeleton_candidates, unstable_disk, PeriodicOrbit,
    QuasiHyperbolicSegment, ShadowResult, SkeletonCandidate, SkeletonParams,
};
pub use torus::TorusPoint;
