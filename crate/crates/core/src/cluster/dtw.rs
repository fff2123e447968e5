use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DistanceMatrix, ShareTrajectory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DtwOptions {
    /// Sakoe–Chiba half-width; `None` leaves the alignment unconstrained.
    pub window: Option<usize>,
    /// Divide the cumulative cost by `len(a) + len(b)`.
    pub normalize: bool,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Classic symmetric DTW over arbitrary-dimension rows with Euclidean local
/// cost. Accepts series of any non-zero length.
pub fn dtw_series<T: AsRef<[f64]>>(a: &[T], b: &[T], opts: DtwOptions) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Input("DTW needs non-empty series".into()));
    }
    if let Some(w) = opts.window {
        if n.abs_diff(m) > w {
            return Err(Error::Window(format!(
                "band half-width {w} cannot align lengths {n} and {m}"
            )));
        }
    }
    let band = |i: usize, j: usize| opts.window.is_none_or(|w| i.abs_diff(j) <= w);

    // Rolling rows of the (n+1) × (m+1) cumulative-cost table.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            curr[j] = if band(i, j) {
                let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
                euclidean(a[i - 1].as_ref(), b[j - 1].as_ref()) + best
            } else {
                f64::INFINITY
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let cost = prev[m];
    Ok(if opts.normalize { cost / (n + m) as f64 } else { cost })
}

/// DTW distance between two firm share trajectories.
pub fn dtw_distance(a: &ShareTrajectory, b: &ShareTrajectory, opts: DtwOptions) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("trajectories need at least 2 observations".into()));
    }
    dtw_series(&a.shares, &b.shares, opts)
}

/// Pairwise DTW distances. Each unordered pair is evaluated once and written
/// to both triangles.
pub fn distance_matrix(trajectories: &[ShareTrajectory], opts: DtwOptions) -> Result<DistanceMatrix> {
    let n = trajectories.len();
    if n < 2 {
        return Err(Error::Input("distance matrix needs at least 2 trajectories".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            dtw_distance(&trajectories[i], &trajectories[j], opts).map_err(|e| {
                Error::Input(format!(
                    "pair ({}, {}): {e}",
                    trajectories[i].firm_id, trajectories[j].firm_id
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        data[i * n + j] = v;
        data[j * n + i] = v;
    }
    let ids = trajectories.iter().map(|t| t.firm_id.clone()).collect();
    Ok(DistanceMatrix::from_parts_unchecked(ids, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::N_TECH;

    fn unit(i: usize) -> [f64; N_TECH] {
        let mut v = [0.0; N_TECH];
        v[i] = 1.0;
        v
    }

    #[test]
    fn single_cell_recurrence() {
        let d = dtw_series(&[unit(0)], &[unit(1)], DtwOptions::default()).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scalar_warping_absorbs_repeats() {
        // a = [0,0,1] warps onto b = [0,1] at zero cost
        let a = [[0.0], [0.0], [1.0]];
        let b = [[0.0], [1.0]];
        assert_eq!(dtw_series(&a, &b, DtwOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn identical_trajectories_zero() {
        let t = ShareTrajectory::new("F", vec![2000, 2001, 2002], vec![unit(0), unit(1), unit(1)]).unwrap();
        assert_eq!(dtw_distance(&t, &t, DtwOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_band() {
        let a = [[0.0], [0.0], [1.0], [1.0]];
        let b = [[0.0], [1.0]];
        let err = dtw_series(
            &a,
            &b,
            DtwOptions {
                window: Some(1),
                normalize: false,
            },
        );
        assert!(matches!(err, Err(Error::Window(_))));
    }

    #[test]
    fn banded_never_below_unconstrained() {
        let a = [[0.0], [2.0], [3.0], [1.0], [0.5]];
        let b = [[1.0], [0.0], [2.5], [3.0], [0.0]];
        let free = dtw_series(&a, &b, DtwOptions::default()).unwrap();
        for w in 0..5 {
            let banded = dtw_series(
                &a,
                &b,
                DtwOptions {
                    window: Some(w),
                    normalize: false,
                },
            )
            .unwrap();
            assert!(banded >= free);
        }
    }

    #[test]
    fn short_trajectory_rejected() {
        assert!(ShareTrajectory::new("F", vec![2000], vec![unit(0)]).is_err());
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let t = |id: &str, rows: Vec<[f64; N_TECH]>| {
            let years = (0..rows.len() as i32).map(|y| 2000 + y).collect();
            ShareTrajectory::new(id, years, rows).unwrap()
        };
        let mut mixed = [0.0; N_TECH];
        mixed[0] = 0.3;
        mixed[6] = 0.7;
        let ts = vec![
            t("a", vec![unit(0), unit(0), unit(6)]),
            t("b", vec![unit(6), mixed, unit(6), unit(6)]),
            t("c", vec![mixed, unit(1)]),
        ];
        let m = distance_matrix(&ts, DtwOptions::default()).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
                if i != j {
                    assert_eq!(m.get(i, j), dtw_distance(&ts[i], &ts[j], DtwOptions::default()).unwrap());
                }
            }
        }
    }
}
