use crate::error::{Error, Result};
use crate::tech::{Technology, N_TECH};

use super::{ClusterAssignment, Dendrogram, DistanceMatrix, DominantTech, ShareTrajectory};

const TIE_TOL: f64 = 1e-12;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Cuts the dendrogram into `k` clusters by undoing its last `k - 1` merges.
/// Clusters are numbered in order of their smallest leaf index.
pub fn cut(d: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = d.n_leaves();
    if k < 1 || k > n {
        return Err(Error::Input(format!("k = {k} outside 1..={n}")));
    }
    // parent over all 2n-1 nodes; node n+s is created by merge s
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for (s, m) in d.merges.iter().take(n - k).enumerate() {
        let new = n + s;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = new;
        parent[r] = new;
    }
    let mut root_label = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        let next = root_label.len();
        labels.push(*root_label.entry(root).or_insert(next));
    }
    Ok(labels)
}

/// Per-cluster medoid: the member with the smallest total distance to the
/// other members; ties go to the smallest index.
pub fn medoids(m: &DistanceMatrix, labels: &[usize], k: usize) -> Result<Vec<usize>> {
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            let mut best: Option<(f64, usize)> = None;
            for &i in &members {
                let total: f64 = members.iter().map(|&j| m.get(i, j)).sum();
                if best.is_none_or(|(bt, _)| total < bt) {
                    best = Some((total, i));
                }
            }
            best.map(|(_, i)| i).ok_or_else(|| Error::Labeling(format!("cluster {c} is empty")))
        })
        .collect()
}

/// Labels each cluster by the arg-max of its members' averaged time-mean
/// share vectors. Exact ties go to the earlier technology in canonical order.
pub fn dominant_technology(labels: &[usize], k: usize, trajectories: &[ShareTrajectory]) -> Result<Vec<DominantTech>> {
    if labels.len() != trajectories.len() {
        return Err(Error::Labeling("labels and trajectories differ in length".into()));
    }
    (0..k)
        .map(|c| {
            let mut sum = [0.0; N_TECH];
            let mut count = 0usize;
            for (t, _) in trajectories.iter().zip(labels).filter(|(_, l)| **l == c) {
                for (acc, v) in sum.iter_mut().zip(t.mean_shares()) {
                    *acc += v;
                }
                count += 1;
            }
            if count == 0 {
                return Err(Error::Labeling(format!("cluster {c} is empty")));
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
            let mut best = 0;
            for i in 1..N_TECH {
                if mean[i] > mean[best] {
                    best = i;
                }
            }
            let tie = (0..N_TECH).any(|i| i != best && (mean[i] - mean[best]).abs() <= TIE_TOL);
            Ok(DominantTech {
                tech: Technology::ALL[best],
                share: mean[best],
                tie,
            })
        })
        .collect()
}

/// Cuts at `k`, then attaches medoids and dominant-technology labels.
/// `trajectories` must be in the same order as the matrix rows.
pub fn assign_clusters(m: &DistanceMatrix, d: &Dendrogram, k: usize, trajectories: &[ShareTrajectory]) -> Result<ClusterAssignment> {
    let labels = cut(d, k)?;
    let medoids = medoids(m, &labels, k)?;
    let dominant = dominant_technology(&labels, k, trajectories)?;
    Ok(ClusterAssignment {
        firm_ids: m.ids.clone(),
        labels,
        k,
        medoids,
        dominant,
    })
}
