use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::panel::{build_design, drop_incomplete, window, DesignOptions, DropReport, PanelDataset};

use super::posterior::{coefficient_posterior, CoefficientPosterior};
use super::result::BmaResult;
use super::{run_bma, BmaConfig};

#[derive(Debug, Clone, Serialize)]
pub struct RollingWindow {
    pub start_year: i32,
    pub end_year: i32,
    pub n_obs: usize,
    pub seed: u64,
    pub drops: DropReport,
    /// Posterior of the focal share coefficient.
    pub focal: CoefficientPosterior,
    pub result: BmaResult,
}

/// Every start year whose window fits inside the data's year span.
pub fn rolling_start_years(dataset: &PanelDataset, window_len: i32) -> Result<Vec<i32>> {
    let (lo, hi) = dataset
        .year_range()
        .ok_or_else(|| Error::Input("dataset has no rows".into()))?;
    if window_len < 1 || hi - lo + 1 < window_len {
        return Err(Error::Input(format!(
            "window of {window_len} years does not fit in {lo}..={hi}"
        )));
    }
    Ok((lo..=hi - window_len + 1).collect())
}

/// Chain seed for the window starting at `start_year`.
pub(crate) fn window_seed(base: u64, start_year: i32) -> u64 {
    base ^ (start_year as i64 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Model averaging on consecutive windows of `window_len` years, one per
/// start year, in the order given.
pub fn rolling_bma(
    dataset: &PanelDataset,
    clusters: &ClusterAssignment,
    opts: &DesignOptions,
    window_len: i32,
    start_years: &[i32],
    cfg: &BmaConfig,
) -> Result<Vec<RollingWindow>> {
    let required = opts.required_variables();
    start_years
        .par_iter()
        .map(|&start| {
            let end = start + window_len - 1;
            let rows = window(dataset, start, window_len)?;
            let (rows, drops) = drop_incomplete(&rows, &required)?;
            if rows.is_empty() {
                return Err(Error::EmptyWindow { start, end });
            }
            let design = build_design(&rows, clusters, opts)?;
            let seed = window_seed(cfg.seed, start);
            let result = run_bma(&design, &BmaConfig { seed, ..cfg.clone() })?;
            let focal = coefficient_posterior(&result, &design, opts.focal.variable())?;
            Ok(RollingWindow {
                start_year: start,
                end_year: end,
                n_obs: design.n_obs,
                seed,
                drops,
                focal,
                result,
            })
        })
        .collect()
}
