use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cut, medoids, Dendrogram, DistanceMatrix};

fn cluster_count(labels: &[usize], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::Input(format!("{} labels for {n} points", labels.len())));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::UndefinedScore(format!("needs at least 2 clusters, got {k}")));
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(c) = sizes.iter().position(|s| *s == 0) {
        return Err(Error::UndefinedScore(format!("cluster {c} is empty")));
    }
    Ok(k)
}

/// Mean silhouette width. Points in singleton clusters score 0.
pub fn silhouette(m: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let n = m.len();
    let k = cluster_count(labels, n)?;
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[labels[j]] += m.get(i, j);
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Davies–Bouldin index with medoids in place of centroids: scatter is the
/// mean member distance to the medoid, separation the medoid distance.
pub fn davies_bouldin(m: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let n = m.len();
    let k = cluster_count(labels, n)?;
    let med = medoids(m, labels, k)?;
    let scatter: Vec<f64> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            members.iter().map(|&i| m.get(i, med[c])).sum::<f64>() / members.len() as f64
        })
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if j == i {
                continue;
            }
            let sep = m.get(med[i], med[j]);
            if sep == 0.0 {
                return Err(Error::DegenerateSeparation { a: i.min(j), b: i.max(j) });
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityScore {
    pub k: usize,
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Silhouette and Davies–Bouldin for every cut in `k_min..=k_max` that the
/// dendrogram admits.
pub fn validity_scan(m: &DistanceMatrix, d: &Dendrogram, k_min: usize, k_max: usize) -> Vec<ValidityScore> {
    let hi = k_max.min(m.len());
    (k_min.max(2)..=hi)
        .map(|k| {
            let labels = match cut(d, k) {
                Ok(l) => l,
                Err(e) => {
                    return ValidityScore {
                        k,
                        silhouette: None,
                        davies_bouldin: None,
                        note: Some(e.to_string()),
                    }
                }
            };
            let s = silhouette(m, &labels);
            let db = davies_bouldin(m, &labels);
            let note = match (&s, &db) {
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            ValidityScore {
                k,
                silhouette: s.ok(),
                davies_bouldin: db.ok(),
                note,
            }
        })
        .collect()
}
