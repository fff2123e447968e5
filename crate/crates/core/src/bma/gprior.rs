//! Zellner g-prior evidence and shrinkage.
//!
//! With a flat prior on the intercept (absorbed by demeaning) and on
//! `log σ²`, and `β | σ², g ~ N(0, g σ² (X'X)⁻¹)`, the Bayes factor of a
//! `k`-regressor model against the null model is
//!
//! ```text
//! log BF(g) = (n - 1 - k)/2 · log(1 + g) - (n - 1)/2 · log(1 + g (1 - R²))
//! ```
//!
//! Under the hyper-g prior `p(g) = (a - 2)/2 · (1 + g)^(-a/2)` the fixed-g
//! factor is integrated over `g`. The integral is taken in `s = log(1 + g)`,
//! where the shrinkage factor is `t = g / (1 + g) = 1 - e^(-s)` and the
//! integrand is log-concave:
//!
//! ```text
//! h(s) = (a - 2)/2 · exp(-c s) · (1 - R² t)^(-(n - 1)/2),   c = (a - 2)/2 + k/2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{adaptive_gk, adaptive_gk_semi_infinite, gauss_legendre};

const QUAD_REL_TOL: f64 = 1e-12;
const NODE_COUNT: usize = 32;
/// Log-density drop that bounds the shrinkage-posterior node interval.
const NODE_SPAN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GPriorKind {
    /// Unit information prior, `g = n`.
    Uip,
    /// Benchmark prior, `g = max(n, K²)`.
    Bric,
    /// Hyper-g prior whose prior mean shrinkage matches the UIP.
    HyperUip,
}

impl std::str::FromStr for GPriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "uip" => Ok(GPriorKind::Uip),
            "bric" => Ok(GPriorKind::Bric),
            "hyper_uip" | "hyperuip" | "hyper" => Ok(GPriorKind::HyperUip),
            other => Err(Error::Config(format!("unknown g-prior `{other}`"))),
        }
    }
}

impl GPriorKind {
    pub fn name(self) -> &'static str {
        match self {
            GPriorKind::Uip => "uip",
            GPriorKind::Bric => "bric",
            GPriorKind::HyperUip => "hyper_uip",
        }
    }
}

/// A g-prior resolved against a design size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GPriorSpec {
    Fixed { kind: GPriorKind, g: f64 },
    Hyper { a: f64 },
}

impl GPriorSpec {
    /// Resolves `kind` for `n` observations and `k_total` candidates.
    /// `hyper_a` overrides the UIP-matched hyper-parameter `2 + 2/n`.
    pub fn resolve(kind: GPriorKind, n: usize, k_total: usize, hyper_a: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("g-prior needs n > 0".into()));
        }
        let n = n as f64;
        Ok(match kind {
            GPriorKind::Uip => GPriorSpec::Fixed { kind, g: n },
            GPriorKind::Bric => GPriorSpec::Fixed {
                kind,
                g: n.max((k_total * k_total) as f64),
            },
            GPriorKind::HyperUip => {
                let a = hyper_a.unwrap_or(2.0 + 2.0 / n);
                if !(a > 2.0) || !a.is_finite() {
                    return Err(Error::Config(format!("hyper-g parameter must exceed 2, got {a}")));
                }
                GPriorSpec::Hyper { a }
            }
        })
    }

    pub fn kind(&self) -> GPriorKind {
        match self {
            GPriorSpec::Fixed { kind, .. } => *kind,
            GPriorSpec::Hyper { .. } => GPriorKind::HyperUip,
        }
    }
}

/// Log Bayes factor against the null model under a fixed g.
pub fn fixed_g_log_bf(n: usize, k: usize, r2: f64, g: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let n1 = (n - 1) as f64;
    0.5 * (n1 - k as f64) * g.ln_1p() - 0.5 * n1 * (g * (1.0 - r2)).ln_1p()
}

/// Posterior summary of the shrinkage factor `t = g / (1 + g)` for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shrinkage {
    pub log_bf: f64,
    pub mean_t: f64,
    pub mean_t2: f64,
}

impl Shrinkage {
    pub fn fixed(n: usize, k: usize, r2: f64, g: f64) -> Self {
        let t = g / (1.0 + g);
        Shrinkage {
            log_bf: fixed_g_log_bf(n, k, r2, g),
            mean_t: t,
            mean_t2: t * t,
        }
    }

    pub fn var_t(&self) -> f64 {
        (self.mean_t2 - self.mean_t * self.mean_t).max(0.0)
    }
}

struct HyperIntegrand {
    log_norm: f64,
    c: f64,
    alpha: f64,
    r2: f64,
}

impl HyperIntegrand {
    fn new(n: usize, k: usize, r2: f64, a: f64) -> Self {
        HyperIntegrand {
            log_norm: (0.5 * (a - 2.0)).ln(),
            c: 0.5 * (a - 2.0) + 0.5 * k as f64,
            alpha: 0.5 * (n - 1) as f64,
            r2,
        }
    }

    #[inline]
    fn t(s: f64) -> f64 {
        -(-s).exp_m1()
    }

    #[inline]
    fn log_h(&self, s: f64) -> f64 {
        // 1 - R² t = (1 - R²) + R² e^(-s), which stays accurate as R² -> 1
        self.log_norm - self.c * s - self.alpha * ((1.0 - self.r2) + self.r2 * (-s).exp()).ln()
    }

    fn mode(&self) -> f64 {
        if self.alpha * self.r2 <= self.c {
            return 0.0;
        }
        let ratio = self.r2 * (self.alpha - self.c) / (self.c * (1.0 - self.r2));
        ratio.ln().max(0.0)
    }

    /// `∫ t^power · exp(log_h(s) - shift) ds` over `[0, ∞)`.
    fn moment(&self, power: i32, mode: f64, shift: f64) -> Result<f64> {
        let f = |s: f64| Self::t(s).powi(power) * (self.log_h(s) - shift).exp();
        let left = adaptive_gk(f, 0.0, mode, QUAD_REL_TOL, 0.0)?;
        let right = adaptive_gk_semi_infinite(f, mode, QUAD_REL_TOL, 0.0)?;
        Ok(left + right)
    }

    /// Solves `log_h(s) = level` on the monotone branch between `lo` and `hi`.
    fn crossing(&self, mut lo: f64, mut hi: f64, level: f64, increasing: bool) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let above = self.log_h(mid) >= level;
            if above == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn check_r2(r2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r2) {
        return Err(Error::SingularModel(format!(
            "R² = {r2} leaves no residual variance for the hyper-g integral"
        )));
    }
    Ok(())
}

/// Hyper-g evidence and posterior shrinkage moments by adaptive quadrature.
pub fn hyper_g_shrinkage(n: usize, k: usize, r2: f64, a: f64) -> Result<Shrinkage> {
    if k == 0 {
        // prior mean of t = g/(1+g) under the hyper-g density
        return Ok(Shrinkage {
            log_bf: 0.0,
            mean_t: 2.0 / a,
            mean_t2: 8.0 / (a * (a + 2.0)),
        });
    }
    check_r2(r2)?;
    let h = HyperIntegrand::new(n, k, r2, a);
    let mode = h.mode();
    let shift = h.log_h(mode);
    let z = h.moment(0, mode, shift)?;
    let m1 = h.moment(1, mode, shift)?;
    let m2 = h.moment(2, mode, shift)?;
    Ok(Shrinkage {
        log_bf: shift + z.ln(),
        mean_t: m1 / z,
        mean_t2: m2 / z,
    })
}

/// Log Bayes factor against the null model under a hyper-g prior.
pub fn hyper_g_log_bf(n: usize, k: usize, r2: f64, a: f64) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    check_r2(r2)?;
    let h = HyperIntegrand::new(n, k, r2, a);
    let mode = h.mode();
    let shift = h.log_h(mode);
    Ok(shift + h.moment(0, mode, shift)?.ln())
}

/// Log Bayes factor against the null model.
pub fn log_bf(spec: &GPriorSpec, n: usize, k: usize, r2: f64) -> Result<f64> {
    match *spec {
        GPriorSpec::Fixed { g, .. } => Ok(fixed_g_log_bf(n, k, r2, g)),
        GPriorSpec::Hyper { a } => hyper_g_log_bf(n, k, r2, a),
    }
}

/// Discrete approximation of the shrinkage posterior as `(weight, t)` pairs:
/// a Gauss–Legendre rule over the interval where the log-density is within
/// a fixed drop of its mode. Weights sum to 1.
pub fn shrinkage_nodes(spec: &GPriorSpec, n: usize, k: usize, r2: f64) -> Result<Vec<(f64, f64)>> {
    let a = match *spec {
        GPriorSpec::Fixed { g, .. } => return Ok(vec![(1.0, g / (1.0 + g))]),
        GPriorSpec::Hyper { a } => a,
    };
    check_r2(r2)?;
    let h = HyperIntegrand::new(n, k, r2, a);
    let mode = h.mode();
    let peak = h.log_h(mode);
    let level = peak - NODE_SPAN;
    let lo = if mode == 0.0 || h.log_h(0.0) >= level {
        0.0
    } else {
        h.crossing(0.0, mode, level, true)
    };
    let mut far = mode + 1.0;
    while h.log_h(far) >= level {
        far = mode + 2.0 * (far - mode);
    }
    let hi = h.crossing(mode, far, level, false);

    let (x, w) = gauss_legendre(NODE_COUNT);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut nodes: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let s = mid + half * xi;
            (wi * (h.log_h(s) - peak).exp(), HyperIntegrand::t(s))
        })
        .collect();
    let total: f64 = nodes.iter().map(|(w, _)| w).sum();
    nodes.iter_mut().for_each(|(w, _)| *w /= total);
    Ok(nodes)
}

/// Evidence and shrinkage moments for a model of size `k` with fit `r2`.
pub fn shrinkage(spec: &GPriorSpec, n: usize, k: usize, r2: f64) -> Result<Shrinkage> {
    match *spec {
        GPriorSpec::Fixed { g, .. } => Ok(Shrinkage::fixed(n, k, r2, g)),
        GPriorSpec::Hyper { a } => hyper_g_shrinkage(n, k, r2, a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_values() {
        assert_eq!(
            GPriorSpec::resolve(GPriorKind::Uip, 500, 20, None).unwrap(),
            GPriorSpec::Fixed {
                kind: GPriorKind::Uip,
                g: 500.0
            }
        );
        assert_eq!(
            GPriorSpec::resolve(GPriorKind::Bric, 100, 20, None).unwrap(),
            GPriorSpec::Fixed {
                kind: GPriorKind::Bric,
                g: 400.0
            }
        );
        match GPriorSpec::resolve(GPriorKind::HyperUip, 500, 20, None).unwrap() {
            GPriorSpec::Hyper { a } => assert!((a - 2.004).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(GPriorSpec::resolve(GPriorKind::HyperUip, 500, 20, Some(1.5)).is_err());
    }

    #[test]
    fn null_and_perfect_fit() {
        assert_eq!(fixed_g_log_bf(50, 0, 0.0, 50.0), 0.0);
        let g: f64 = 30.0;
        let expected = 0.5 * 48.0 * (1.0 + g).ln();
        assert!((fixed_g_log_bf(50, 1, 1.0, g) - expected).abs() < 1e-12);
        assert_eq!(hyper_g_log_bf(50, 0, 0.3, 2.04).unwrap(), 0.0);
    }

    #[test]
    fn hyper_matches_its_prior_mean_at_k0() {
        let s = hyper_g_shrinkage(100, 0, 0.0, 2.02).unwrap();
        assert!((s.mean_t - 2.0 / 2.02).abs() < 1e-15);
    }

    #[test]
    fn hyper_handles_large_n_without_overflow() {
        let s = hyper_g_shrinkage(5000, 3, 0.9, 2.0 + 2.0 / 5000.0).unwrap();
        assert!(s.log_bf.is_finite() && s.log_bf > 1000.0);
        assert!(s.mean_t > 0.99 && s.mean_t < 1.0);
    }

    #[test]
    fn nodes_reproduce_mean_shrinkage() {
        let spec = GPriorSpec::Hyper { a: 2.0 + 2.0 / 60.0 };
        for (k, r2) in [(1, 0.05), (2, 0.4), (5, 0.8)] {
            let exact = hyper_g_shrinkage(60, k, r2, 2.0 + 2.0 / 60.0).unwrap();
            let nodes = shrinkage_nodes(&spec, 60, k, r2).unwrap();
            let mean: f64 = nodes.iter().map(|(w, t)| w * t).sum();
            assert!((mean - exact.mean_t).abs() < 1e-6, "k={k} r2={r2}: {mean} vs {}", exact.mean_t);
        }
    }
}
