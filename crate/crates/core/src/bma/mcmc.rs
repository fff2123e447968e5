use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::panel::PanelDesign;

use super::model::{heredity_valid, ModelId};
use super::result::{assemble, BmaResult, Diagnostics};
use super::space::ModelSpace;
use super::{BmaConfig, Sampler};

/// Models compared in the analytic-vs-frequency diagnostic.
const TOP_MODELS: usize = 50;

/// Birth-death sampler over the model space. PIPs and moments use the
/// analytic posterior odds of the visited models; visit frequencies are kept
/// as a diagnostic.
pub fn mcmc_bma(design: &PanelDesign, cfg: &BmaConfig) -> Result<BmaResult> {
    if cfg.iters <= cfg.burnin {
        return Err(Error::Input(format!(
            "iterations ({}) must exceed burn-in ({})",
            cfg.iters, cfg.burnin
        )));
    }
    let space = ModelSpace::new(design, cfg)?;
    let k = space.n_vars();
    if k == 0 {
        return Err(Error::Input("design has no candidate columns".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache: HashMap<ModelId, Option<f64>> = HashMap::new();
    let mut eval = |m: ModelId| -> Result<Option<f64>> {
        if let Some(v) = cache.get(&m) {
            return Ok(*v);
        }
        let v = space.log_posterior(m)?;
        cache.insert(m, v);
        Ok(v)
    };

    let mut current = ModelId::NULL;
    let mut current_lp = eval(current)?.ok_or_else(|| Error::Input("null model has no mass".into()))?;
    let mut visits: HashMap<ModelId, u64> = HashMap::new();
    // every state the chain occupied, burn-in included
    let mut occupied: HashSet<ModelId> = HashSet::from([current]);
    let mut accepted_after_burnin = 0usize;
    for it in 0..cfg.iters {
        let j = rng.random_range(0..k);
        let u: f64 = rng.random();
        let proposal = current.toggle(j);
        if let Some(lp) = eval(proposal)? {
            if u.ln() < lp - current_lp {
                current = proposal;
                current_lp = lp;
                occupied.insert(current);
                if it >= cfg.burnin {
                    accepted_after_burnin += 1;
                }
            }
        }
        if it >= cfg.burnin {
            *visits.entry(current).or_default() += 1;
        }
    }
    let kept = cfg.iters - cfg.burnin;
    if accepted_after_burnin == 0 {
        return Err(Error::MixingFailure { iterations: kept });
    }

    let mut visited: Vec<(ModelId, u64)> = visits.into_iter().collect();
    visited.sort_by_key(|(m, _)| *m);
    let candidates: Vec<_> = visited
        .iter()
        .map(|(m, c)| (*m, cache[m].expect("visited models have mass"), Some(*c)))
        .collect();

    let mut freq_pip = vec![0.0; k];
    for (m, c) in &visited {
        for j in m.columns() {
            freq_pip[j] += *c as f64 / kept as f64;
        }
    }
    let zero = cache.values().filter(|v| v.is_none()).count();
    let singular = cache
        .iter()
        .filter(|(m, v)| v.is_none() && space.admissible(**m))
        .count();
    let diagnostics = Diagnostics {
        sampler: Sampler::Mcmc,
        models_evaluated: cache.len(),
        zero_mass_models: zero,
        singular_models: singular,
        iterations: cfg.iters,
        burnin: cfg.burnin,
        accepted: accepted_after_burnin,
        acceptance_rate: Some(accepted_after_burnin as f64 / kept as f64),
        distinct_visited: visited.len(),
        heredity_violations: occupied
            .iter()
            .filter(|m| !heredity_valid(**m, &design.var_meta))
            .count(),
        frequency_pip: Some(freq_pip),
        top_model_correlation: None,
    };
    let mut result = assemble(&space, &candidates, diagnostics)?;
    result.diagnostics.top_model_correlation = top_model_correlation(&result.models, kept);
    Ok(result)
}

fn top_model_correlation(models: &[super::ModelEntry], kept: usize) -> Option<f64> {
    let top = &models[..models.len().min(TOP_MODELS)];
    if top.len() < 2 {
        return None;
    }
    let a: Vec<f64> = top.iter().map(|m| m.prob).collect();
    let b: Vec<f64> = top.iter().map(|m| m.visits.unwrap_or(0) as f64 / kept as f64).collect();
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bma::{enumerate_bma, GPriorKind};
    use crate::panel::{ColumnKind, VarMeta};

    fn design(seed: u64, n: usize) -> PanelDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..6).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n)
            .map(|i| 0.4 * x[0][i] - 0.2 * x[2][i] + 0.3 * x[4][i] + 0.5 * (rng.random::<f64>() - 0.5))
            .collect();
        let mut meta: Vec<VarMeta> = (0..5).map(|j| VarMeta::new(format!("x{j}"), ColumnKind::FirmControl)).collect();
        meta.push(VarMeta::interaction("x0_x_x1", 0, 1));
        let years = (0..n).map(|i| 2015 + (i % 4) as i32).collect();
        PanelDesign::from_columns(y, x, meta, years).unwrap()
    }

    fn cfg(seed: u64) -> BmaConfig {
        BmaConfig {
            g_prior: GPriorKind::Uip,
            iters: 20_000,
            burnin: 2_000,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let d = design(1, 150);
        let a = mcmc_bma(&d, &cfg(7)).unwrap();
        let b = mcmc_bma(&d, &cfg(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn agrees_with_enumeration_and_respects_heredity() {
        let d = design(2, 150);
        let m = mcmc_bma(&d, &cfg(11)).unwrap();
        let e = enumerate_bma(&d, &cfg(0)).unwrap();
        for (a, b) in m.variables.iter().zip(&e.variables) {
            assert!((a.pip - b.pip).abs() < 0.01, "{}: {} vs {}", a.name, a.pip, b.pip);
        }
        assert!(m.models.iter().all(|e| heredity_valid(e.model, &d.var_meta)));
        assert!(m.diagnostics.acceptance_rate.unwrap() > 0.0);
    }

    #[test]
    fn burnin_must_be_shorter_than_chain() {
        let d = design(3, 50);
        let c = BmaConfig { iters: 10, burnin: 10, ..cfg(1) };
        assert!(matches!(mcmc_bma(&d, &c), Err(Error::Input(_))));
    }
}
