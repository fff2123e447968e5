//! Portfolio-trajectory clustering: multivariate DTW distances, average-linkage
//! agglomeration, dendrogram cuts, validity indices and cluster labeling.

mod assign;
mod dtw;
mod linkage;
mod validity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::tech::{Technology, TechVector};

pub use assign::{assign_clusters, cut, dominant_technology, medoids};
pub use dtw::{distance_matrix, dtw_distance, dtw_series, DtwOptions};
pub use linkage::{hac_average_linkage, Dendrogram, Merge};
pub use validity::{davies_bouldin, silhouette, validity_scan, ValidityScore};

const SHARE_SUM_TOL: f64 = 1e-9;

/// Per-firm multivariate series of technology shares.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareTrajectory {
    pub firm_id: String,
    pub years: Vec<i32>,
    pub shares: Vec<TechVector>,
}

impl ShareTrajectory {
    pub fn new(firm_id: impl Into<String>, years: Vec<i32>, shares: Vec<TechVector>) -> Result<Self> {
        let firm_id = firm_id.into();
        if years.len() != shares.len() {
            return Err(Error::Input(format!("{firm_id}: years and shares differ in length")));
        }
        if years.len() < 2 {
            return Err(Error::Input(format!("{firm_id}: trajectory needs at least 2 years")));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!("{firm_id}: years must be strictly increasing")));
        }
        for (y, s) in years.iter().zip(&shares) {
            let sum: f64 = s.iter().sum();
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > SHARE_SUM_TOL {
                return Err(Error::Input(format!("{firm_id}: shares in {y} are not a distribution")));
            }
        }
        Ok(ShareTrajectory { firm_id, years, shares })
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// Time-mean share vector.
    pub fn mean_shares(&self) -> TechVector {
        let mut m = [0.0; crate::tech::N_TECH];
        for s in &self.shares {
            for (acc, v) in m.iter_mut().zip(s) {
                *acc += v;
            }
        }
        let n = self.shares.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Builds one trajectory per firm from derived rows with defined shares.
/// Firms observed in fewer than two years are skipped. Output is sorted by
/// firm id.
pub fn trajectories_from_panel(dataset: &PanelDataset) -> Vec<ShareTrajectory> {
    let mut by_firm: std::collections::BTreeMap<&str, Vec<(i32, TechVector)>> = Default::default();
    for row in &dataset.rows {
        if let Some(shares) = row.derived.as_ref().and_then(|d| d.tech_shares) {
            by_firm.entry(row.firm_id.as_str()).or_default().push((row.year, shares));
        }
    }
    by_firm
        .into_iter()
        .filter_map(|(firm, mut obs)| {
            obs.sort_by_key(|(y, _)| *y);
            let (years, shares) = obs.into_iter().unzip();
            ShareTrajectory::new(firm, years, shares).ok()
        })
        .collect()
}

/// Dense symmetric distance matrix with firm identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps a row-major `n × n` matrix after checking symmetry, a zero
    /// diagonal and finiteness.
    pub fn from_rows(ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if data.len() != n * n {
            return Err(Error::Input(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::Input(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() {
                    return Err(Error::Input(format!("non-finite distance at ({i}, {j})")));
                }
                if v != data[j * n + i] {
                    return Err(Error::Input(format!("asymmetric distance at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { ids, n, data })
    }

    pub(crate) fn from_parts_unchecked(ids: Vec<String>, data: Vec<f64>) -> Self {
        let n = ids.len();
        DistanceMatrix { ids, n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Dominant technology of a cluster: arg-max of the mean share vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantTech {
    pub tech: Technology,
    pub share: f64,
    /// Another technology reached the same mean share.
    pub tie: bool,
}

/// Hard partition of firms into `k` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub firm_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub k: usize,
    /// Medoid firm index per cluster; empty when the assignment was loaded
    /// from a clusters file.
    pub medoids: Vec<usize>,
    pub dominant: Vec<DominantTech>,
}

impl ClusterAssignment {
    pub fn label_of(&self, firm_id: &str) -> Option<usize> {
        self.firm_ids.iter().position(|f| f == firm_id).map(|i| self.labels[i])
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Display name per cluster: the dominant technology, suffixed with the
    /// cluster index when several clusters share it.
    pub fn cluster_names(&self) -> Vec<String> {
        let base: Vec<String> = (0..self.k)
            .map(|c| match self.dominant.get(c) {
                Some(d) => d.tech.name().to_string(),
                None => format!("c{c}"),
            })
            .collect();
        (0..self.k)
            .map(|c| {
                if base.iter().filter(|b| **b == base[c]).count() > 1 {
                    format!("{}_{c}", base[c])
                } else {
                    base[c].clone()
                }
            })
            .collect()
    }

    /// Map from firm id to cluster index.
    pub fn label_map(&self) -> std::collections::HashMap<String, usize> {
        self.firm_ids.iter().cloned().zip(self.labels.iter().copied()).collect()
    }
}
