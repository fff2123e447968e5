use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bma::BmaResult;
use crate::panel::{ColumnKind, PanelDesign};

use super::GroundTruth;

const PIP_DETECTED: f64 = 0.9;
const PIP_NULL: f64 = 0.5;
/// Multiple of the coefficient's OLS standard error a planted effect must
/// exceed to count as detectable.
const DETECT_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Nonzero and above the detectability threshold: PIP > 0.9 with the
    /// planted sign.
    Detect,
    /// Planted zero: PIP < 0.5.
    Exclude,
    /// Nonzero but below the threshold, or not attributable to one planted
    /// cluster. Reported without a verdict.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub variable: String,
    pub true_beta: Option<f64>,
    pub threshold: f64,
    pub expectation: Expectation,
    pub pip: f64,
    pub post_mean: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, variable: &str) -> Option<&RecoveryRow> {
        self.rows.iter().find(|r| r.variable == variable)
    }
}

fn column_sd(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Planted coefficient of each design column, as seen through the design's
/// reference-cluster coding. `None` when an indicator cannot be tied to a
/// single planted cluster.
fn planted_coefficients(design: &PanelDesign, truth: &GroundTruth) -> Vec<Option<f64>> {
    let focal = truth.focal.variable();
    let focal_beta = match &truth.focal_ramp {
        Some(r) => r.iter().sum::<f64>() / r.len() as f64,
        None => truth.beta.get(focal).copied().unwrap_or(0.0),
    };
    let mut by_tech: HashMap<String, Vec<usize>> = HashMap::new();
    for (c, t) in truth.cluster_techs.iter().enumerate() {
        by_tech.entry(format!("cluster_{t}")).or_default().push(c);
    }
    let reference = design
        .reference_cluster
        .as_ref()
        .and_then(|r| by_tech.get(&format!("cluster_{r}")))
        .filter(|v| v.len() == 1)
        .map(|v| v[0]);
    let planted = |name: &str| by_tech.get(name).filter(|v| v.len() == 1).map(|v| v[0]);

    design
        .var_meta
        .iter()
        .map(|m| match m.kind {
            ColumnKind::FocalShare => Some(focal_beta + truth.focal_interactions[reference?]),
            ColumnKind::FirmControl | ColumnKind::MacroControl => {
                Some(truth.beta.get(&m.name).copied().unwrap_or(0.0))
            }
            ColumnKind::ClusterIndicator => {
                let c = planted(&m.name)?;
                Some(truth.cluster_effects[c] - truth.cluster_effects[reference?])
            }
            ColumnKind::Interaction => {
                let (_, parent) = m.heredity_parents?;
                let c = planted(&design.var_meta[parent].name)?;
                Some(truth.focal_interactions[c] - truth.focal_interactions[reference?])
            }
        })
        .collect()
}

/// Compares BMA output against the planted coefficients.
///
/// A planted coefficient counts as detectable when it exceeds three OLS
/// standard errors of a lone regressor, `noise_sd / (√n · sd(x))`.
pub fn planted_recovery_report(design: &PanelDesign, truth: &GroundTruth, bma: &BmaResult) -> RecoveryReport {
    let n = design.n_obs as f64;
    let planted = planted_coefficients(design, truth);
    let by_name: BTreeMap<&str, usize> = bma.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let rows = design
        .var_meta
        .iter()
        .enumerate()
        .filter_map(|(j, m)| {
            let v = &bma.variables[*by_name.get(m.name.as_str())?];
            let sd = column_sd(&design.x[j]);
            let threshold = DETECT_SE * truth.noise_sd / (n.sqrt() * sd);
            let expectation = match planted[j] {
                Some(0.0) => Expectation::Exclude,
                Some(b) if b.abs() >= threshold => Expectation::Detect,
                _ => Expectation::None,
            };
            let pass = match expectation {
                Expectation::Detect => {
                    let b = planted[j].unwrap_or(0.0);
                    v.pip > PIP_DETECTED && v.post_mean_uncond.signum() == b.signum()
                }
                Expectation::Exclude => v.pip < PIP_NULL,
                Expectation::None => true,
            };
            Some(RecoveryRow {
                variable: m.name.clone(),
                true_beta: planted[j],
                threshold,
                expectation,
                pip: v.pip,
                post_mean: v.post_mean_uncond,
                pass,
            })
        })
        .collect();
    RecoveryReport { rows }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let pairs = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&m| pairs(m)).sum();
    let sa: f64 = rows.values().map(|&m| pairs(m)).sum();
    let sb: f64 = cols.values().map(|&m| pairs(m)).sum();
    let total = pairs(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both labelings trivial (all one cluster or all singletons)
        return 1.0;
    }
    (index - expected) / (max - expected)
}
