//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code it checks.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use techmix::panel::{ColumnKind, PanelDesign, VarMeta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum cost over every monotone warping path, enumerated by depth-first
/// search from (0, 0) to the last cell.
pub fn dtw_exhaustive(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + euclid(&a[i], &b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Average linkage recomputing every cluster-pair mean from the original
/// distances at each step. Returns `(left, right, height)` per merge, with
/// node ids following the leaves-then-merges numbering and ties broken on
/// `(min id, max id)`.
pub fn naive_average_linkage(d: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (ia, ma) = &clusters[a];
                let (ib, mb) = &clusters[b];
                let mut s = 0.0;
                for &p in ma {
                    for &q in mb {
                        s += d[p * n + q];
                    }
                }
                let v = s / (ma.len() * mb.len()) as f64;
                let key = ((*ia).min(*ib), (*ia).max(*ib));
                let better = match best {
                    None => true,
                    Some((bv, bk, _, _)) => v < bv || (v == bv && key < bk),
                };
                if better {
                    best = Some((v, key, a, b));
                }
            }
        }
        let (h, (l, r), a, b) = best.unwrap();
        out.push((l, r, h));
        let mut members = clusters[a].1.clone();
        members.extend(clusters[b].1.iter().copied());
        clusters.remove(b);
        clusters[a] = (n + step, members);
    }
    out
}

/// Composite Gauss–Legendre rule on `[lo, hi]` with `panels` panels of the
/// 10-point rule.
pub fn gauss_legendre_composite(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    const X: [f64; 5] = [
        0.148_874_338_981_631_2,
        0.433_395_394_129_247_2,
        0.679_409_568_299_024_4,
        0.865_063_366_688_984_5,
        0.973_906_528_517_171_7,
    ];
    const W: [f64; 5] = [
        0.295_524_224_714_752_9,
        0.269_266_719_309_996_4,
        0.219_086_362_515_982_1,
        0.149_451_349_150_580_6,
        0.066_671_344_308_688_1,
    ];
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let c = lo + (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            nodes.push((c - 0.5 * h * x, 0.5 * h * w));
            nodes.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    nodes
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    // Gaussian elimination with partial pivoting
    let k = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| r.iter().copied().chain([*v]).collect()).collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                let pivot = m[c].clone();
                m[r][c..].iter_mut().zip(&pivot[c..]).for_each(|(a, b)| *a -= f * b);
            }
        }
    }
    (0..k).map(|i| m[i][k] / m[i][i]).collect()
}

/// `log p(y | M) - log p(y | null)` for centered `y` and centered columns
/// `x`, with `β | σ² ~ N(0, g σ² (X'X)⁻¹)` and `p(σ²) ∝ 1/σ²`, by
/// direct quadrature over `log σ²` and every coefficient (`k ≤ 2`). The
/// likelihood uses `n - 1` degrees of freedom, the dimension left after
/// the intercept.
pub fn log_bf_by_quadrature(y: &[f64], x: &[Vec<f64>], g: f64) -> f64 {
    let n = y.len();
    let k = x.len();
    assert!((1..=2).contains(&k));
    let m = (n - 1) as f64;
    let xtx: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| x[a].iter().zip(&x[b]).map(|(p, q)| p * q).sum()).collect())
        .collect();
    let xty: Vec<f64> = (0..k).map(|a| x[a].iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let bhat = solve_small(&xtx, &xty);
    let det = if k == 1 { xtx[0][0] } else { xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0] };
    let inv_diag: Vec<f64> = if k == 1 {
        vec![1.0 / xtx[0][0]]
    } else {
        vec![xtx[1][1] / det, xtx[0][0] / det]
    };
    let rss = |b: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let f: f64 = (0..k).map(|j| x[j][i] * b[j]).sum();
                (y[i] - f).powi(2)
            })
            .sum()
    };
    let quad = |b: &[f64]| -> f64 {
        let mut q = 0.0;
        for a in 0..k {
            for c in 0..k {
                q += b[a] * xtx[a][c] * b[c];
            }
        }
        q
    };
    let two_pi = 2.0 * std::f64::consts::PI;

    // null: ∫ (2πσ²)^(-m/2) exp(-yty/2σ²) dσ²/σ², in s = log σ²
    let s0 = (yty / m).ln();
    let null_terms: Vec<f64> = gauss_legendre_composite(s0 - 12.0, s0 + 40.0, 60)
        .into_iter()
        .map(|(s, w)| w.ln() - 0.5 * m * (two_pi.ln() + s) - 0.5 * yty * (-s).exp())
        .collect();
    let log_null = log_sum_exp(&null_terms);

    // full model: ∫∫ likelihood × prior(β | σ²) dβ dσ²/σ²
    let shrink = g / (1.0 + g);
    let log_prior_norm = -0.5 * k as f64 * (two_pi * g).ln() + 0.5 * det.ln();
    let s_hat = (yty * (1.0 - shrink * (1.0 - rss(&bhat) / yty)) / m).ln();
    let mut terms = Vec::new();
    for (s, ws) in gauss_legendre_composite(s_hat - 12.0, s_hat + 40.0, 60) {
        let var = s.exp();
        // β integration box: conditional posterior centre ± 14 sd per axis
        let centre: Vec<f64> = bhat.iter().map(|b| shrink * b).collect();
        let sd: Vec<f64> = inv_diag.iter().map(|v| (shrink * var * v).sqrt()).collect();
        let axes: Vec<Vec<(f64, f64)>> = (0..k)
            .map(|j| gauss_legendre_composite(centre[j] - 14.0 * sd[j], centre[j] + 14.0 * sd[j], 12))
            .collect();
        let mut point = |b: &[f64], w: f64| {
            let ll = -0.5 * m * (two_pi.ln() + s) - 0.5 * rss(b) / var;
            let lp = log_prior_norm - 0.5 * k as f64 * s - 0.5 * quad(b) / (g * var);
            terms.push(ws.ln() + w.ln() + ll + lp);
        };
        if k == 1 {
            for &(b0, w0) in &axes[0] {
                point(&[b0], w0);
            }
        } else {
            for &(b0, w0) in &axes[0] {
                for &(b1, w1) in &axes[1] {
                    point(&[b0, b1], w0 * w1);
                }
            }
        }
    }
    log_sum_exp(&terms) - log_null
}

/// Hyper-g Bayes factor from the Gaussian hypergeometric series
/// `(a-2)/(k+a-2) · ₂F₁((n-1)/2, 1; (k+a)/2; R²)`, summed in log space.
pub fn hyper_g_log_bf_series(n: usize, k: usize, r2: f64, a: f64) -> f64 {
    let p = (n - 1) as f64 / 2.0;
    let c = (k as f64 + a) / 2.0;
    let mut log_term = 0.0f64;
    let mut peak = 0.0f64;
    let mut terms = vec![0.0];
    for j in 0..10_000_000 {
        let ratio = (p + j as f64) / (c + j as f64) * r2;
        log_term += ratio.ln();
        peak = peak.max(log_term);
        terms.push(log_term);
        // past the peak the terms shrink at least geometrically
        if ratio < 1.0 && log_term < peak - 60.0 {
            break;
        }
    }
    ((a - 2.0) / (k as f64 + a - 2.0)).ln() + log_sum_exp(&terms)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, lo, hi, fa, fm, fb, whole, tol, 30)
}

/// Hyper-g Bayes factor integrated over `g` directly: substituting
/// `g = e^u - 1` and integrating `p(g) BF(g) dg/du` by adaptive Simpson.
pub fn hyper_g_log_bf_simpson(n: usize, k: usize, r2: f64, a: f64) -> f64 {
    let (n1, kf) = ((n - 1) as f64, k as f64);
    let log_f = |u: f64| -> f64 {
        let g = u.exp_m1();
        let log_bf = 0.5 * (n1 - kf) * u - 0.5 * n1 * (1.0 + g * (1.0 - r2)).ln();
        let log_prior = ((a - 2.0) / 2.0).ln() - 0.5 * a * u;
        log_bf + log_prior + u // dg = e^u du
    };
    // peak of the integrand on a coarse grid, then integrate the rescaled
    // function over a range where it has decayed by e^-60
    let grid: Vec<f64> = (0..4000).map(|i| i as f64 * 0.05).collect();
    let peak = grid.iter().map(|&u| log_f(u)).fold(f64::NEG_INFINITY, f64::max);
    let hi = grid.iter().rev().find(|&&u| log_f(u) > peak - 60.0).copied().unwrap_or(200.0) + 1.0;
    let f = |u: f64| (log_f(u) - peak).exp();
    // coarse trapezoid sets the absolute tolerance; each grid cell is then
    // integrated adaptively
    let rough: f64 = grid
        .windows(2)
        .take_while(|w| w[0] < hi)
        .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1])))
        .sum();
    let cells: Vec<f64> = (0..).map(|i| 0.5 * i as f64).take_while(|&u| u < hi).chain([hi]).collect();
    let tol = 1e-12 * rough / cells.len() as f64;
    let total: f64 = cells.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol)).sum();
    peak + total.ln()
}

/// Random design with `k` plain columns over `years` equal year groups and
/// `y = Σ beta_j x_j + noise`.
pub fn random_design(seed: u64, n: usize, beta: &[f64], noise: f64, years: usize) -> PanelDesign {
    let mut r = rng(seed);
    let k = beta.len();
    let x: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.random::<f64>() - 0.5).collect()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| beta[j] * x[j][i]).sum::<f64>() + noise * (r.random::<f64>() - 0.5))
        .collect();
    let meta = (0..k).map(|j| VarMeta::new(format!("x{j}"), ColumnKind::FirmControl)).collect();
    let yr = (0..n).map(|i| 2000 + (i % years) as i32).collect();
    PanelDesign::from_columns(y, x, meta, yr).unwrap()
}

/// Four planted clusters (wind, solar, gas, coal) of `per_cluster` firms
/// each, leading shares in [0.79, 0.97].
pub fn four_cluster_synth(seed: u64, per_cluster: usize, start_year: i32, end_year: i32) -> techmix::synth::SynthConfig {
    let mut cfg = techmix::synth::SynthConfig {
        seed,
        start_year,
        end_year,
        ..Default::default()
    };
    for c in &mut cfg.clusters {
        c.count = per_cluster;
        c.leading_share = (0.79, 0.97);
    }
    cfg.n_firms = 4 * per_cluster;
    cfg
}

/// Pipeline configuration around a synthetic panel.
pub fn run_config(synth: techmix::synth::SynthConfig) -> techmix::cli::RunConfig {
    techmix::cli::RunConfig {
        seed: synth.seed,
        synth: Some(synth),
        k: 4,
        ..Default::default()
    }
}
