use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::panel::PanelDesign;

use super::gprior::shrinkage_nodes;
use super::result::BmaResult;
use super::space::ModelSpace;

pub const GRID_POINTS: usize = 512;
/// Tail probability at which each mixture component's support is cut.
const TAIL: f64 = 1e-10;
/// Mixture components are taken in decreasing probability until this share
/// of the variable's inclusion mass is covered.
const COVERAGE: f64 = 1.0 - 1e-10;
const CHUNK: usize = 64;
/// Components lighter than this fraction of the inclusion mass are dropped.
const NEGLIGIBLE: f64 = 1e-14;

/// Marginal posterior of one coefficient: a continuous mixture on a grid
/// plus a point mass at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPosterior {
    pub name: String,
    pub pip: f64,
    pub post_mean_uncond: f64,
    pub post_sd_uncond: f64,
    pub post_mean_cond: Option<f64>,
    pub post_sd_cond: Option<f64>,
    pub ci90_low: f64,
    pub ci90_high: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub zero_mass: f64,
    /// Models entering the mixture.
    pub components: usize,
}

struct Component {
    weight: f64,
    loc: f64,
    scale: f64,
}

/// Mixture density, zero mass and equal-tailed 90% interval of `var`.
pub fn coefficient_posterior(result: &BmaResult, design: &PanelDesign, var: &str) -> Result<CoefficientPosterior> {
    let j = design.index_of(var).ok_or_else(|| Error::Catalogue(var.to_string()))?;
    let summary = result.variable(var).ok_or_else(|| Error::Catalogue(var.to_string()))?;
    let space = ModelSpace::with_prior(design, result.prior, result.model_prior, result.heredity)?;
    let n = design.n_obs;
    let nu = (n - 1) as f64;

    let containing: Vec<_> = result.models.iter().filter(|m| m.model.contains(j)).collect();
    let listed: f64 = containing.iter().map(|m| m.prob).sum();
    let mut chosen = Vec::new();
    let mut covered = 0.0;
    for m in containing {
        if covered >= COVERAGE * listed {
            break;
        }
        covered += m.prob;
        chosen.push(m);
    }
    let pip = summary.pip;
    let zero_mass = (1.0 - pip).clamp(0.0, 1.0);

    let mut components = Vec::new();
    if covered > 0.0 && pip > 0.0 {
        let parts: Vec<Vec<Component>> = chosen
            .par_iter()
            .map(|entry| {
                let fit = space.fit(entry.model)?;
                let pos = fit.columns.iter().position(|&c| c == j).expect("model contains var");
                let (b, v) = (fit.beta[pos], fit.vdiag[pos]);
                let w_model = entry.prob * pip / covered;
                let nodes = shrinkage_nodes(&result.prior, n, fit.columns.len(), fit.r2)?;
                Ok(nodes
                    .into_iter()
                    .map(|(w, t)| Component {
                        weight: w_model * w,
                        loc: t * b,
                        scale: (t * space.yty() * (1.0 - t * fit.r2).max(0.0) / nu * v).sqrt(),
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        components = parts.into_iter().flatten().collect();
        let floor = NEGLIGIBLE * pip;
        components.retain(|c| c.weight > floor);
    }

    let (grid, density) = if components.is_empty() {
        (linspace(-1.0, 1.0), vec![0.0; GRID_POINTS])
    } else {
        let q = StudentsT::new(0.0, 1.0, nu)
            .map_err(|e| Error::Input(e.to_string()))?
            .inverse_cdf(TAIL)
            .abs();
        choose_grid(&components, q, nu)
    };

    let (ci90_low, ci90_high) = credible_interval(&grid, &density, zero_mass);
    Ok(CoefficientPosterior {
        name: summary.name.clone(),
        pip,
        post_mean_uncond: summary.post_mean_uncond,
        post_sd_uncond: summary.post_sd_uncond,
        post_mean_cond: summary.post_mean_cond,
        post_sd_cond: summary.post_sd_cond,
        ci90_low,
        ci90_high,
        grid,
        density,
        zero_mass,
        components: chosen.len(),
    })
}

/// Relative trapezoid mass error accepted without further work.
const MASS_TOL: f64 = 1e-12;
/// Components lighter than this share of the mixture, in total, do not
/// shape a graded grid.
const UNRESOLVED_SHARE: f64 = 1e-9;
/// Half-width, in component scales, of the bump each component adds to the
/// resolution floor of a graded grid.
const BUMP_WIDTH: f64 = 4.0;
/// Exponent of the smooth maximum combining the bumps.
const SMOOTH_MAX_POWER: i32 = 4;
/// Share of a graded grid's points laid out by the resolution floor.
const FLOOR_SHARE: f64 = 0.2;
/// Resolution of the table the point density is integrated on.
const AUX_POINTS: usize = 4 * GRID_POINTS;
/// Secant steps polishing the balance of a graded grid.
const POLISH_STEPS: usize = 6;
/// Largest log-ratio between convex and concave point densities.
const MAX_BALANCE: f64 = 3.0;

/// Abscissae and mixture density.
///
/// A uniform grid keeps the trapezoid rule spectrally accurate for every
/// component it resolves and is used whenever its mass is right. Mixtures
/// whose scales differ too much for 512 uniform points get a graded grid
/// with point density close to `|f''|^(1/3)`, which minimizes the summed
/// local trapezoid errors `h^3 f'' / 12`. Those errors are positive where
/// the mixture is convex and negative where it is concave, so the density
/// of one kind of region relative to the other is tuned until they cancel
/// against the mixture's analytic mass.
fn choose_grid(components: &[Component], q: f64, nu: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = components.iter().map(|c| c.loc - q * c.scale).fold(f64::INFINITY, f64::min);
    let hi = components.iter().map(|c| c.loc + q * c.scale).fold(f64::NEG_INFINITY, f64::max);
    let grid = if hi > lo { linspace(lo, hi) } else { linspace(lo - 1.0, lo + 1.0) };
    let density = mixture_density(components, &grid, nu);
    let mass: f64 = components.iter().map(|c| c.weight).sum();
    let uniform_err = trapezoid(&grid, &density) - mass;
    if !(hi > lo) || uniform_err.abs() <= MASS_TOL * mass {
        return (grid, density);
    }
    let Some(table) = GradedTable::new(components, q, nu, lo, hi) else {
        return (grid, density);
    };

    let mut best = (uniform_err.abs(), grid, density);
    let mut eval = |tau: f64| -> f64 {
        let grid = table.grid(tau);
        let density = mixture_density(components, &grid, nu);
        let err = trapezoid(&grid, &density) - mass;
        if err.abs() < best.0 {
            best = (err.abs(), grid, density);
        }
        err
    };
    let clamp = |t: f64| t.clamp(-MAX_BALANCE, MAX_BALANCE);
    let (mut t1, mut e1) = (table.balance, eval(table.balance));
    // nudge toward whichever kind of region is overweighted
    let (mut t0, mut e0) = (t1, e1);
    t1 = clamp(t1 + if e1 > 0.0 { 0.1 } else { -0.1 });
    e1 = eval(t1);
    for _ in 0..POLISH_STEPS {
        if e1.abs() <= MASS_TOL * mass || e1 == e0 {
            break;
        }
        let next = clamp(t1 - e1 * (t1 - t0) / (e1 - e0));
        if next == t1 {
            break;
        }
        (t0, e0) = (t1, e1);
        t1 = next;
        e1 = eval(t1);
    }
    (best.1, best.2)
}

/// Point-density table behind a graded grid.
struct GradedTable {
    x: Vec<f64>,
    /// Point density before balancing.
    base: Vec<f64>,
    /// Whether the mixture is convex at each table point.
    convex: Vec<bool>,
    /// Log-ratio of convex to concave point density that cancels the
    /// leading trapezoid error.
    balance: f64,
}

impl GradedTable {
    fn new(components: &[Component], q: f64, nu: f64, lo: f64, hi: f64) -> Option<Self> {
        let kernels = design_kernels(components);
        if kernels.is_empty() {
            return None;
        }
        let x = stepped_grid(&kernels, q, lo, hi);
        let m = 0.5 * (nu + 1.0);
        let norm = (ln_gamma(m) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()).exp();
        let mut floor = Vec::with_capacity(x.len());
        let mut curv = Vec::with_capacity(x.len());
        for &xi in &x {
            let (mut p, mut f2) = (0.0, 0.0);
            for &(loc, s, w) in &kernels {
                let z = (xi - loc) / s;
                p += ((-0.5 * z * z / (BUMP_WIDTH * BUMP_WIDTH)).exp() / s).powi(SMOOTH_MAX_POWER);
                // second derivative of the Student-t density
                let u = 1.0 + z * z / nu;
                let g2 = -(2.0 * m / nu) * (u.powf(-m - 1.0) - (m + 1.0) * (2.0 * z * z / nu) * u.powf(-m - 2.0));
                f2 += w * norm * g2 / (s * s * s);
            }
            floor.push(p.powf(1.0 / SMOOTH_MAX_POWER as f64) + 1.0 / (hi - lo));
            curv.push(f2);
        }
        let integrate = |f: &dyn Fn(usize) -> f64| -> f64 {
            (1..x.len()).map(|i| 0.5 * (x[i] - x[i - 1]) * (f(i) + f(i - 1))).sum()
        };
        let root: Vec<f64> = curv.iter().map(|c: &f64| c.abs().cbrt()).collect();
        let (root_mass, floor_mass) = (integrate(&|i| root[i]), integrate(&|i| floor[i]));
        if !(root_mass > 0.0) {
            return None;
        }
        let mix = FLOOR_SHARE / (1.0 - FLOOR_SHARE) * root_mass / floor_mass;
        let base: Vec<f64> = root.iter().zip(&floor).map(|(r, f)| r + mix * f).collect();
        let convex: Vec<bool> = curv.iter().map(|&c| c > 0.0).collect();
        // the error is proportional to integral of f'' / density^2; scaling
        // convex density by exp(t) and concave by exp(-t) zeroes it at
        // exp(4t) = convex part / concave part
        let part = |want: bool| integrate(&|i| if convex[i] == want { curv[i].abs() / (base[i] * base[i]) } else { 0.0 });
        let (up, down) = (part(true), part(false));
        let balance = if up > 0.0 && down > 0.0 { (0.25 * (up / down).ln()).clamp(-MAX_BALANCE, MAX_BALANCE) } else { 0.0 };
        Some(GradedTable { x, base, convex, balance })
    }

    /// `GRID_POINTS` abscissae equidistributed against the base density
    /// scaled by `exp(tau)` in convex regions and `exp(-tau)` elsewhere.
    fn grid(&self, tau: f64) -> Vec<f64> {
        let lambda: Vec<f64> = self
            .base
            .iter()
            .zip(&self.convex)
            .map(|(b, &up)| b * if up { tau.exp() } else { (-tau).exp() })
            .collect();
        let x = &self.x;
        let mut cum = vec![0.0; x.len()];
        for i in 1..x.len() {
            cum[i] = cum[i - 1] + 0.5 * (x[i] - x[i - 1]) * (lambda[i] + lambda[i - 1]);
        }
        let mass = cum[cum.len() - 1];
        let mut grid = Vec::with_capacity(GRID_POINTS);
        grid.push(x[0]);
        let mut k = 1;
        for i in 1..GRID_POINTS - 1 {
            let target = mass * i as f64 / (GRID_POINTS - 1) as f64;
            while k + 1 < cum.len() && cum[k] < target {
                k += 1;
            }
            // the density is linear within a table cell, so its cumulative
            // is quadratic and inverts in closed form
            let (x0, h) = (x[k - 1], x[k] - x[k - 1]);
            let (l0, l1) = (lambda[k - 1], lambda[k]);
            let r = target - cum[k - 1];
            let slope = (l1 - l0) / h;
            let dx = 2.0 * r / (l0 + (l0 * l0 + 2.0 * slope * r).max(0.0).sqrt());
            grid.push((x0 + dx).clamp(x0, x[k]));
        }
        grid.push(x[x.len() - 1]);
        grid
    }
}

/// Components that shape a graded grid, as `(loc, scale, weight)`: the
/// lightest ones are left out and near-identical ones are pooled.
fn design_kernels(components: &[Component]) -> Vec<(f64, f64, f64)> {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by(|&a, &b| components[a].weight.total_cmp(&components[b].weight).then(a.cmp(&b)));
    let mut skipped = 0.0;
    // pooled by scale (eighths of an octave) and location (quarter scales)
    let mut pools: BTreeMap<(i64, i64), (f64, f64, f64)> = BTreeMap::new();
    for i in order {
        let c = &components[i];
        if skipped + c.weight < UNRESOLVED_SHARE * total || !(c.scale > 0.0) {
            skipped += c.weight;
            continue;
        }
        let level = (8.0 * c.scale.log2()).floor();
        let quantum = 0.25 * (level / 8.0).exp2();
        let key = (level as i64, (c.loc / quantum).floor() as i64);
        let e = pools.entry(key).or_default();
        e.0 += c.weight * c.loc;
        e.1 += c.weight * c.scale;
        e.2 += c.weight;
    }
    pools.into_values().map(|(wl, ws, w)| (wl / w, ws / w, w)).collect()
}

/// Fine table over `[lo, hi]` whose spacing is proportional to the
/// narrowest kernel covering each stretch.
fn stepped_grid(kernels: &[(f64, f64, f64)], q: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut events: Vec<(f64, bool, f64)> = Vec::with_capacity(2 * kernels.len());
    for &(m, s, _) in kernels {
        events.push(((m - q * s).max(lo), true, s));
        events.push(((m + q * s).min(hi), false, s));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut active: BTreeMap<u64, usize> = BTreeMap::new();
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let mut prev = lo;
    for (x, open, s) in events {
        if x > prev {
            // positive floats order like their bit patterns
            let rate = active.keys().next().map_or(1.0 / (hi - lo), |&b| 1.0 / f64::from_bits(b));
            pieces.push((prev, x, rate));
            prev = x;
        }
        let key = s.to_bits();
        if open {
            *active.entry(key).or_default() += 1;
        } else if let Some(n) = active.get_mut(&key) {
            *n -= 1;
            if *n == 0 {
                active.remove(&key);
            }
        }
    }
    if hi > prev {
        pieces.push((prev, hi, 1.0 / (hi - lo)));
    }
    let mass: f64 = pieces.iter().map(|(a, b, r)| (b - a) * r).sum();
    let mut out = Vec::with_capacity(AUX_POINTS + pieces.len() + 1);
    out.push(lo);
    for (a, b, r) in pieces {
        let n = (((b - a) * r / mass) * AUX_POINTS as f64).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|i| a + (b - a) * i as f64 / n as f64));
    }
    out
}

fn linspace(lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| lo + step * i as f64).collect()
}

fn mixture_density(components: &[Component], grid: &[f64], nu: f64) -> Vec<f64> {
    let log_c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln();
    // fixed chunks keep the floating-point summation order independent of
    // the thread count
    let partial: Vec<Vec<f64>> = components
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            for c in chunk {
                let norm = c.weight * (log_c - c.scale.ln()).exp();
                for (a, x) in acc.iter_mut().zip(grid) {
                    let z = (x - c.loc) / c.scale;
                    *a += norm * (-0.5 * (nu + 1.0) * (z * z / nu).ln_1p()).exp();
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; grid.len()];
    for p in partial {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Trapezoid integral of `density` over `grid`.
pub fn trapezoid(grid: &[f64], density: &[f64]) -> f64 {
    grid.windows(2)
        .zip(density.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

/// Equal-tailed 90% interval of the continuous part plus a jump of
/// `zero_mass` at zero.
fn credible_interval(grid: &[f64], density: &[f64], zero_mass: f64) -> (f64, f64) {
    let mut cum = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cum[i] = cum[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (density[i] + density[i - 1]);
    }
    let cont_at = |x: f64| -> f64 {
        if x <= grid[0] {
            return 0.0;
        }
        if x >= grid[grid.len() - 1] {
            return cum[cum.len() - 1];
        }
        let i = grid.partition_point(|g| *g <= x) - 1;
        let f = (x - grid[i]) / (grid[i + 1] - grid[i]);
        cum[i] + f * (cum[i + 1] - cum[i])
    };
    let invert = |target: f64| -> f64 {
        let i = cum.partition_point(|c| *c < target);
        if i == 0 {
            return grid[0];
        }
        if i >= cum.len() {
            return grid[grid.len() - 1];
        }
        let span = cum[i] - cum[i - 1];
        let f = if span > 0.0 { (target - cum[i - 1]) / span } else { 0.0 };
        grid[i - 1] + f * (grid[i] - grid[i - 1])
    };
    let below_zero = cont_at(0.0);
    let quantile = |p: f64| -> f64 {
        if p <= below_zero {
            invert(p)
        } else if p <= below_zero + zero_mass {
            0.0
        } else {
            invert(p - zero_mass)
        }
    };
    (quantile(0.05), quantile(0.95))
}
