use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::gprior::{GPriorSpec, Shrinkage};
use super::model::{ModelId, ModelPrior};
use super::space::{ModelSpace, OlsFit};
use super::Sampler;

/// Models below this normalized probability are dropped from the ledger.
pub(crate) const KEEP_FLOOR: f64 = 1e-14;
/// Models below this normalized probability do not enter the moments.
const MOMENT_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub pip: f64,
    pub post_mean_uncond: f64,
    pub post_sd_uncond: f64,
    /// `None` when no model with positive mass includes the variable.
    pub post_mean_cond: Option<f64>,
    pub post_sd_cond: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model: ModelId,
    pub size: usize,
    pub log_posterior: f64,
    pub prob: f64,
    /// Post-burn-in visit count; `None` for enumeration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visits: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    pub sampler: Sampler,
    /// Distinct models whose evidence was computed.
    pub models_evaluated: usize,
    /// Models given zero mass: heredity-invalid or rank-deficient.
    pub zero_mass_models: usize,
    pub singular_models: usize,
    pub iterations: usize,
    pub burnin: usize,
    pub accepted: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    pub distinct_visited: usize,
    /// Occupied (sampler) or positive-mass (enumeration) models that break
    /// strong heredity. Zero whenever heredity is enforced.
    pub heredity_violations: usize,
    /// Inclusion frequencies of the post-burn-in chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_pip: Option<Vec<f64>>,
    /// Correlation of analytic and visit-frequency probabilities over the
    /// top models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_model_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaResult {
    pub variables: Vec<VariableSummary>,
    pub prior: GPriorSpec,
    pub model_prior: ModelPrior,
    pub heredity: bool,
    pub n_obs: usize,
    /// Models with non-negligible mass, most probable first.
    pub models: Vec<ModelEntry>,
    pub diagnostics: Diagnostics,
}

impl BmaResult {
    pub fn pip(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.pip).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSummary> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// Conditional posterior mean and variance of each included coefficient.
pub(crate) fn conditional_moments(space: &ModelSpace, fit: &OlsFit, shr: &Shrinkage) -> Vec<(usize, f64, f64)> {
    let n = space.n_obs() as f64;
    let resid = (shr.mean_t - fit.r2 * shr.mean_t2).max(0.0) * space.yty() / (n - 3.0);
    let var_t = shr.var_t();
    fit.columns
        .iter()
        .zip(fit.beta.iter().zip(&fit.vdiag))
        .map(|(&j, (&b, &v))| (j, shr.mean_t * b, resid * v + var_t * b * b))
        .collect()
}

/// Normalizes `(model, log posterior, visits)` triples and computes PIPs and
/// coefficient moments. `candidates` must be in a deterministic order.
pub(crate) fn assemble(
    space: &ModelSpace,
    candidates: &[(ModelId, f64, Option<u64>)],
    diagnostics: Diagnostics,
) -> Result<BmaResult> {
    let k = space.n_vars();
    if space.n_obs() <= 3 {
        return Err(Error::Input("model averaging needs at least 4 observations".into()));
    }
    let max = candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Input("no model carries positive posterior mass".into()));
    }
    let total: f64 = candidates.iter().map(|c| (c.1 - max).exp()).sum();
    let log_norm = max + total.ln();

    let mut pip = vec![0.0; k];
    for (m, lp, _) in candidates {
        let p = (lp - log_norm).exp();
        for j in m.columns() {
            pip[j] += p;
        }
    }

    let heavy: Vec<(ModelId, f64)> = candidates
        .iter()
        .map(|(m, lp, _)| (*m, (lp - log_norm).exp()))
        .filter(|(_, p)| *p >= MOMENT_FLOOR)
        .collect();
    let contributions: Vec<Vec<(usize, f64, f64)>> = heavy
        .par_iter()
        .map(|(m, _)| {
            let fit = space.fit(*m)?;
            let shr = space.shrinkage(&fit)?;
            Ok(conditional_moments(space, &fit, &shr))
        })
        .collect::<Result<_>>()?;
    let mut m1 = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    for ((_, p), moments) in heavy.iter().zip(&contributions) {
        for &(j, mean, var) in moments {
            m1[j] += p * mean;
            m2[j] += p * (var + mean * mean);
        }
    }

    let variables = (0..k)
        .map(|j| {
            let pip_j = pip[j].min(1.0);
            let sd_u = (m2[j] - m1[j] * m1[j]).max(0.0).sqrt();
            let (mean_c, sd_c) = if pip_j > 0.0 {
                let mc = m1[j] / pip_j;
                (Some(mc), Some((m2[j] / pip_j - mc * mc).max(0.0).sqrt()))
            } else {
                (None, None)
            };
            VariableSummary {
                name: space.design.var_meta[j].name.clone(),
                pip: pip_j,
                post_mean_uncond: m1[j],
                post_sd_uncond: sd_u,
                post_mean_cond: mean_c,
                post_sd_cond: sd_c,
            }
        })
        .collect();

    let mut models: Vec<ModelEntry> = candidates
        .iter()
        .map(|(m, lp, visits)| ModelEntry {
            model: *m,
            size: m.size(),
            log_posterior: *lp,
            prob: (lp - log_norm).exp(),
            visits: *visits,
        })
        .filter(|e| e.prob >= KEEP_FLOOR)
        .collect();
    models.sort_by(|a, b| b.prob.total_cmp(&a.prob).then(a.model.cmp(&b.model)));

    Ok(BmaResult {
        variables,
        prior: space.prior,
        model_prior: space.model_prior,
        heredity: space.heredity,
        n_obs: space.n_obs(),
        models,
        diagnostics,
    })
}
