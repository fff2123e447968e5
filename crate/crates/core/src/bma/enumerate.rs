use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::PanelDesign;

use super::model::{heredity_valid, ModelId};
use super::result::{assemble, BmaResult, Diagnostics};
use super::space::ModelSpace;
use super::{BmaConfig, Sampler};

/// Largest candidate count the full enumeration accepts.
pub const ENUMERATION_CAP: usize = 20;
const WARN_ABOVE: usize = 16;

/// Exact model averaging over every admissible subset of the candidates.
pub fn enumerate_bma(design: &PanelDesign, cfg: &BmaConfig) -> Result<BmaResult> {
    let k = design.n_vars();
    if k > ENUMERATION_CAP {
        return Err(Error::Capacity { k, cap: ENUMERATION_CAP });
    }
    if k > WARN_ABOVE {
        log::warn!("enumerating 2^{k} models");
    }
    let space = ModelSpace::new(design, cfg)?;
    let log_post: Vec<Option<f64>> = (0..1u32 << k)
        .into_par_iter()
        .map(|m| space.log_posterior(ModelId(m)))
        .collect::<Result<_>>()?;

    let inadmissible = (0..1u32 << k).filter(|&m| !space.admissible(ModelId(m))).count();
    let zero = log_post.iter().filter(|lp| lp.is_none()).count();
    let candidates: Vec<_> = log_post
        .iter()
        .enumerate()
        .filter_map(|(m, lp)| lp.map(|lp| (ModelId(m as u32), lp, None)))
        .collect();
    let diagnostics = Diagnostics {
        sampler: Sampler::Enumerate,
        models_evaluated: log_post.len(),
        zero_mass_models: zero,
        singular_models: zero - inadmissible,
        distinct_visited: candidates.len(),
        heredity_violations: candidates
            .iter()
            .filter(|(m, ..)| !heredity_valid(*m, &design.var_meta))
            .count(),
        ..Default::default()
    };
    assemble(&space, &candidates, diagnostics)
}
