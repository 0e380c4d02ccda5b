//! Numerical laboratory for finite-time blow-up in radial quasilinear
//! Keller–Segel systems with nonlinear diffusion and sensitivity.

pub mod config;
pub mod energetics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod initdata;
pub mod motility;
pub mod quadrature;
pub mod regime;
pub mod report;
pub mod solver;

pub use energetics::{
    compute_dissipation, compute_energy_terms, compute_fields, energy_record, fit_f_d_scaling,
    odi_blowup_bound, verify_energy_identity, EnergyRecord, EnergyTerms, OdiBound, OdiParams,
};
pub use error::{Error, Result};
pub use config::{parse_config, ExperimentConfig};
pub use experiment::{prepare, refinement_study, run_experiment, sweep_eta, RunArtifacts, RunOptions, RunReport};
pub use grid::{Grading, RadialField, RadialGrid};
pub use initdata::{choose_parameters, InitialDataSpec, ParameterOverrides};
pub use motility::{ModelParams, MotilityKind, MotilityModel};
pub use regime::{
    certify_admissibility, classify, classify_general, classify_model, scan_region,
    AdmissibilityCertificate, GrowthConstants, Regime, RegimeVerdict, RegionGrid,
};
pub use report::{fmt_f64, to_json_string, CsvTable};
pub use solver::{envelope_monitor, Outcome, RunSummary, SolverConfig, StateSnapshot};
