use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DistanceMatrix;

/// One agglomeration step. Leaves are nodes `0..n`; the cluster created by
/// merge `s` is node `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaves: Vec<String>,
    /// Indices of merges whose height is below the previous merge height.
    pub inversions: Vec<usize>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }
}

/// Average-linkage (UPGMA) agglomerative clustering.
///
/// Each step merges the pair of active clusters with the smallest mean
/// cross-pair distance; ties go to the lexicographically smallest
/// `(min node id, max node id)`. Distances to the merged cluster follow the
/// Lance–Williams update `(|A| d(A,C) + |B| d(B,C)) / (|A| + |B|)`.
pub fn hac_average_linkage(m: &DistanceMatrix) -> Result<Dendrogram> {
    let n = m.len();
    if n == 0 {
        return Err(Error::Input("cannot cluster an empty matrix".into()));
    }
    if let Some(i) = m.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite distance at ({}, {})", i / n, i % n)));
    }

    let mut d = m.as_slice().to_vec();
    let mut node = (0..n).collect::<Vec<usize>>();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut inversions = Vec::new();

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            let row = &d[a * n..(a + 1) * n];
            for &b in &active[ai + 1..] {
                let v = row[b];
                let key = (node[a].min(node[b]), node[a].max(node[b]));
                let better = match best {
                    None => true,
                    Some((bv, bk, _, _)) => v < bv || (v == bv && key < bk),
                };
                if better {
                    best = Some((v, key, a, b));
                }
            }
        }
        let (height, (left, right), a, b) = best.expect("at least two active clusters");
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for &c in &active {
            if c == a || c == b {
                continue;
            }
            let v = (sa * d[a * n + c] + sb * d[b * n + c]) / (sa + sb);
            d[a * n + c] = v;
            d[c * n + a] = v;
        }
        size[a] += size[b];
        node[a] = n + step;
        active.retain(|&c| c != b);

        if let Some(prev) = merges.last().map(|m: &Merge| m.height) {
            if height < prev {
                inversions.push(step);
            }
        }
        merges.push(Merge {
            left,
            right,
            height,
            size: size[a],
        });
    }
    if !inversions.is_empty() {
        log::warn!("average linkage produced {} height inversions", inversions.len());
    }
    Ok(Dendrogram {
        merges,
        leaves: m.ids.clone(),
        inversions,
    })
}
