use std::fmt;

use serde::{Deserialize, Serialize};

use crate::panel::VarMeta;

/// Maximum number of candidate columns a model bitmask can address.
pub const MAX_VARS: usize = 32;

/// Inclusion bitmask over the candidate columns; bit `j` set means column
/// `j` is in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u32);

impl ModelId {
    pub const NULL: ModelId = ModelId(0);

    pub fn from_columns(cols: &[usize]) -> Self {
        ModelId(cols.iter().fold(0u32, |m, &c| m | (1 << c)))
    }

    #[inline]
    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    #[inline]
    pub fn toggle(self, j: usize) -> Self {
        ModelId(self.0 ^ (1 << j))
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn columns(self) -> Vec<usize> {
        (0..MAX_VARS).filter(|&j| self.contains(j)).collect()
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

/// Prior over the model space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPrior {
    /// Every model equally likely.
    Uniform,
    /// Uniform over model sizes, uniform within each size.
    BetaBinomial,
}

impl std::str::FromStr for ModelPrior {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "uniform" => Ok(ModelPrior::Uniform),
            "beta_binomial" | "betabinomial" => Ok(ModelPrior::BetaBinomial),
            other => Err(crate::Error::Config(format!("unknown model prior `{other}`"))),
        }
    }
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Log prior probability of `model` among `k_total` candidates.
pub fn log_model_prior(model: ModelId, k_total: usize, kind: ModelPrior) -> f64 {
    let size = model.size();
    debug_assert!(size <= k_total);
    match kind {
        ModelPrior::Uniform => -(k_total as f64) * std::f64::consts::LN_2,
        ModelPrior::BetaBinomial => -((k_total + 1) as f64).ln() - ln_choose(k_total, size),
    }
}

/// Strong heredity: every included interaction has both parents included.
pub fn heredity_valid(model: ModelId, meta: &[VarMeta]) -> bool {
    meta.iter().enumerate().all(|(j, m)| match m.heredity_parents {
        Some((a, b)) if model.contains(j) => model.contains(a) && model.contains(b),
        _ => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::ColumnKind;

    #[test]
    fn beta_binomial_values() {
        let p = log_model_prior(ModelId::from_columns(&[1]), 3, ModelPrior::BetaBinomial).exp();
        assert!((p - 1.0 / 12.0).abs() < 1e-15);
        let p0 = log_model_prior(ModelId::NULL, 20, ModelPrior::BetaBinomial).exp();
        assert!((p0 - 1.0 / 21.0).abs() < 1e-15);
        let u = log_model_prior(ModelId(0b101), 20, ModelPrior::Uniform).exp();
        assert!((u - 2f64.powi(-20)).abs() < 1e-22);
    }

    #[test]
    fn heredity_rules() {
        let meta = vec![
            VarMeta::new("share", ColumnKind::FocalShare),
            VarMeta::new("cluster", ColumnKind::ClusterIndicator),
            VarMeta::interaction("share_x_cluster", 0, 1),
            VarMeta::new("size", ColumnKind::FirmControl),
        ];
        assert!(!heredity_valid(ModelId::from_columns(&[2]), &meta));
        assert!(!heredity_valid(ModelId::from_columns(&[0, 2]), &meta));
        assert!(heredity_valid(ModelId::from_columns(&[0, 1, 2]), &meta));
        assert!(heredity_valid(ModelId::from_columns(&[0, 3]), &meta));
        assert!(heredity_valid(ModelId::NULL, &meta));
    }

    #[test]
    fn bit_helpers() {
        let m = ModelId::from_columns(&[0, 3, 31]);
        assert_eq!(m.size(), 3);
        assert_eq!(m.columns(), vec![0, 3, 31]);
        assert!(!m.toggle(3).contains(3));
    }
}
