//! Bayesian model averaging over fixed-effects regression designs.

mod enumerate;
pub mod gprior;
mod mcmc;
pub mod model;
mod posterior;
mod result;
mod rolling;
mod space;

use serde::{Deserialize, Serialize};

pub use enumerate::{enumerate_bma, ENUMERATION_CAP};
pub use gprior::{fixed_g_log_bf, hyper_g_log_bf, GPriorKind, GPriorSpec, Shrinkage};
pub use mcmc::mcmc_bma;
pub use model::{heredity_valid, log_model_prior, ModelId, ModelPrior, MAX_VARS};
pub use posterior::{coefficient_posterior, trapezoid, CoefficientPosterior, GRID_POINTS};
pub use result::{BmaResult, Diagnostics, ModelEntry, VariableSummary};
pub use rolling::{rolling_bma, rolling_start_years, RollingWindow};
pub use space::{log_marginal_likelihood, ModelSpace, OlsFit};

use crate::error::Result;
use crate::panel::PanelDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Mcmc,
    Enumerate,
}

/// Priors and sampler settings shared by every BMA entry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmaConfig {
    pub g_prior: GPriorKind,
    /// Overrides the UIP-matched hyper-g parameter.
    pub hyper_a: Option<f64>,
    pub model_prior: ModelPrior,
    pub heredity: bool,
    pub sampler: Sampler,
    /// Total chain length, burn-in included.
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
}

impl Default for BmaConfig {
    fn default() -> Self {
        BmaConfig {
            g_prior: GPriorKind::HyperUip,
            hyper_a: None,
            model_prior: ModelPrior::BetaBinomial,
            heredity: true,
            sampler: Sampler::Mcmc,
            iters: 200_000,
            burnin: 20_000,
            seed: 0,
        }
    }
}

/// Runs the sampler selected in `cfg`.
pub fn run_bma(design: &PanelDesign, cfg: &BmaConfig) -> Result<BmaResult> {
    match cfg.sampler {
        Sampler::Mcmc => mcmc_bma(design, cfg),
        Sampler::Enumerate => enumerate_bma(design, cfg),
    }
}
