use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_SPAN: f64 = 0.75;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoessPoint {
    pub x: f64,
    pub fit: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Equivalent-kernel weights `l(x0)` of the local linear fit at `x0`, so
/// that the fitted value is `l · y`.
fn kernel(x: &[f64], x0: f64, q: usize) -> Result<Vec<f64>> {
    let mut d: Vec<f64> = x.iter().map(|v| (v - x0).abs()).collect();
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let h = sorted[q - 1];
    if !(h > 0.0) {
        return Err(Error::Span(format!("the {q} nearest points all sit at x = {x0}")));
    }
    for v in d.iter_mut() {
        let u = *v / h;
        *v = if u < 1.0 { (1.0 - u * u * u).powi(3) } else { 0.0 };
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (w, xi) in d.iter().zip(x) {
        let dx = xi - x0;
        s0 += w;
        s1 += w * dx;
        s2 += w * dx * dx;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 1e-12 * s0 * s2) {
        return Err(Error::Span(format!("fewer than two distinct x values carry weight near x = {x0}")));
    }
    Ok(d.iter()
        .zip(x)
        .map(|(w, xi)| w * (s2 - s1 * (xi - x0)) / det)
        .collect())
}

/// Local linear LOESS with tricube weights over the `ceil(span · n)` nearest
/// neighbours, evaluated at `at`, with a pointwise 95% band.
pub fn loess(x: &[f64], y: &[f64], span: f64, at: &[f64]) -> Result<Vec<LoessPoint>> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Input(format!("{n} x values but {} y values", y.len())));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::Span(format!("span must lie in (0, 1], got {span}")));
    }
    if n < 3 {
        return Err(Error::Input(format!("LOESS needs at least 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite LOESS input".into()));
    }
    let q = ((span * n as f64).ceil() as usize).min(n);
    if q < 2 {
        return Err(Error::Span(format!("span {span} covers only {q} of {n} points")));
    }

    // residual scale from the fit at the data points; points sharing an x
    // share a kernel
    let mut kernels: HashMap<u64, Vec<f64>> = HashMap::new();
    let (mut rss, mut delta1) = (0.0, 0.0);
    for i in 0..n {
        let l = match kernels.entry(x[i].to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(kernel(x, x[i], q)?),
        };
        let fit: f64 = l.iter().zip(y).map(|(a, b)| a * b).sum();
        rss += (y[i] - fit).powi(2);
        let norm2: f64 = l.iter().map(|v| v * v).sum();
        delta1 += 1.0 - 2.0 * l[i] + norm2;
    }
    let sigma = if delta1 > 0.0 { (rss / delta1).sqrt() } else { 0.0 };

    at.iter()
        .map(|&x0| {
            let l = match kernels.get(&x0.to_bits()) {
                Some(l) => l.clone(),
                None => kernel(x, x0, q)?,
            };
            let fit: f64 = l.iter().zip(y).map(|(a, b)| a * b).sum();
            let se = sigma * l.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(LoessPoint {
                x: x0,
                fit,
                se,
                lo: fit - Z95 * se,
                hi: fit + Z95 * se,
            })
        })
        .collect()
}
