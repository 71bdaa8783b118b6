//! Mixtures of generalized hyperbolic factor analyzers for data with
//! values missing at random.
//!
//! The estimator alternates two conditional-maximization cycles, classifies
//! rows by posterior membership and fills missing cells with conditional
//! means. Supporting modules cover the Bessel function of the third kind,
//! the generalized inverse Gaussian and generalized hyperbolic laws,
//! incomplete-data handling, initialization, evaluation metrics and
//! simulation.

pub mod aecm;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod ghd;
pub mod gig;
pub mod init;
pub mod linalg;
pub mod model;
pub mod selection;
pub mod simulate;
pub mod special;

pub use aecm::{
    aitken_limit, aitken_stop, classify, estep_cycle1, estep_cycle2, fit, fit_from, impute, observed_loglik,
    AitkenVariant, EStepCache, FitConfig, FitResult,
};
pub use data::{apply_mar, pattern_of, read_csv, write_csv, DataMatrix, MarPattern, MarSpec, ObservedPattern};
pub use error::{Error, Result};
pub use evaluation::{ari, awe, bic, err, imputation_mse, n_free_params, SelectionScore};
pub use ghd::{ghd_logpdf, ghd_sample, mahalanobis_sq, GhdParams};
pub use gig::{gig_logpdf, gig_moments, gig_sample, GigAltParams, GigMoments, GigParams};
pub use init::{init_params, kmeans, mean_impute, InitConfig};
pub use model::MghfaModel;
pub use selection::{fit_grid, GridReport};
pub use simulate::{simulate_mghfa, table1_model, SimSpec};
pub use special::{dlogk_dorder, log_bessel_k, BesselEval};
