//! Rare annual event modelling: covariates from daily weather, Firth
//! logistic regression with AICc forward selection, parametric bootstrap,
//! and Monte Carlo projection of event frequency, return periods and wait
//! times under scenario forcings.

pub mod bootstrap;
pub mod config;
pub mod error;
pub mod features;
pub mod firth;
pub mod io;
pub mod pipeline;
pub mod projection;
pub mod report;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};

pub use bootstrap::{parametric_bootstrap, percentile_ci, BootstrapEnsemble, PercentileInterval, SampleMode};
pub use config::RunConfig;
pub use features::{FeatureTable, ScalingMode};
pub use firth::{fit_firth, DesignMatrix, FirthOptions, FittedModel};
pub use pipeline::{render_pipeline, run_pipeline, Manifest, Stage};
pub use projection::{simulate_summary, ProbabilityFan, SimulationSummary};
pub use selection::{forward_stepwise, SelectionOptions, SelectionPath};
