//! Descriptive summaries: cluster ROA trajectories, trends, LOESS curves
//! and regional comparisons.

mod loess;
mod regional;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::panel::PanelDataset;

pub use loess::{loess, LoessPoint, DEFAULT_SPAN};
pub use regional::{
    country_means, group_of, regional_means, AveragingUnit, CountryRow, Group, Region, RegionMap, RegionalRow,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterYear {
    pub year: i32,
    pub mean_roa: f64,
    pub se_mean: f64,
    pub n_firms: usize,
    /// Only one observation: the standard error is reported as 0.
    pub single: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTrajectory {
    pub cluster: usize,
    pub label: String,
    pub points: Vec<ClusterYear>,
}

impl ClusterTrajectory {
    pub fn at(&self, year: i32) -> Option<&ClusterYear> {
        self.points.iter().find(|p| p.year == year)
    }
}

/// Firm-year `(cluster, year, roa)` triples for labeled firms with ROA.
pub(crate) fn labeled_roa(dataset: &PanelDataset, assignment: &ClusterAssignment) -> Vec<(usize, usize, f64)> {
    let labels: HashMap<&str, usize> = assignment
        .firm_ids
        .iter()
        .map(String::as_str)
        .zip(assignment.labels.iter().copied())
        .collect();
    dataset
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let c = *labels.get(r.firm_id.as_str())?;
            let roa = dataset.value(r, "roa").filter(|v| v.is_finite())?;
            Some((i, c, roa))
        })
        .collect()
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Annual mean ROA and its standard error per cluster.
pub fn cluster_roa_trajectories(dataset: &PanelDataset, assignment: &ClusterAssignment) -> Vec<ClusterTrajectory> {
    let mut by_cluster: Vec<BTreeMap<i32, Vec<f64>>> = vec![BTreeMap::new(); assignment.k];
    for (i, c, roa) in labeled_roa(dataset, assignment) {
        by_cluster[c].entry(dataset.rows[i].year).or_default().push(roa);
    }
    let names = assignment.cluster_names();
    by_cluster
        .into_iter()
        .enumerate()
        .filter_map(|(c, years)| {
            if years.is_empty() {
                log::warn!("cluster {c} ({}) has no ROA observations", names[c]);
                return None;
            }
            let points = years
                .into_iter()
                .map(|(year, v)| {
                    let (mean, sd) = mean_sd(&v);
                    ClusterYear {
                        year,
                        mean_roa: mean,
                        se_mean: sd / (v.len() as f64).sqrt(),
                        n_firms: v.len(),
                        single: v.len() == 1,
                    }
                })
                .collect();
            Some(ClusterTrajectory {
                cluster: c,
                label: names[c].clone(),
                points,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendDelta {
    pub from_year: i32,
    pub to_year: i32,
    pub total: f64,
    pub yearly: f64,
}

/// Change in mean ROA between two years, in total and per year.
pub fn trend_delta(traj: &ClusterTrajectory, from_year: i32, to_year: i32) -> Result<TrendDelta> {
    if from_year == to_year {
        return Err(Error::Range(format!("trend needs two distinct years, got {from_year} twice")));
    }
    let get = |y: i32| {
        traj.at(y)
            .map(|p| p.mean_roa)
            .ok_or_else(|| Error::Range(format!("cluster {} has no observations in {y}", traj.label)))
    };
    let total = get(to_year)? - get(from_year)?;
    Ok(TrendDelta {
        from_year,
        to_year,
        total,
        yearly: total / (to_year - from_year) as f64,
    })
}
