//! Generation technologies and per-technology vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const N_TECH: usize = 8;

/// Generation technology. The declaration order is the canonical order used
/// for share vectors and for tie-breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Solar,
    Wind,
    Biomass,
    Hydro,
    Nuclear,
    Oil,
    Gas,
    Coal,
}

impl Technology {
    pub const ALL: [Technology; N_TECH] = [
        Technology::Solar,
        Technology::Wind,
        Technology::Biomass,
        Technology::Hydro,
        Technology::Nuclear,
        Technology::Oil,
        Technology::Gas,
        Technology::Coal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::Solar => "solar",
            Technology::Wind => "wind",
            Technology::Biomass => "biomass",
            Technology::Hydro => "hydro",
            Technology::Nuclear => "nuclear",
            Technology::Oil => "oil",
            Technology::Gas => "gas",
            Technology::Coal => "coal",
        }
    }

    pub fn is_renewable(self) -> bool {
        matches!(self, Technology::Wind | Technology::Solar)
    }

    pub fn is_fossil(self) -> bool {
        matches!(self, Technology::Coal | Technology::Gas | Technology::Oil)
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let tech = match lower.as_str() {
            "solar" | "solar_pv" | "pv" => Technology::Solar,
            "wind" => Technology::Wind,
            "biomass" => Technology::Biomass,
            "hydro" | "hydropower" => Technology::Hydro,
            "nuclear" => Technology::Nuclear,
            "oil" => Technology::Oil,
            "gas" => Technology::Gas,
            "coal" => Technology::Coal,
            _ => return Err(Error::Input(format!("unknown technology `{s}`"))),
        };
        Ok(tech)
    }
}

/// Capacity-share vector over [`Technology::ALL`].
pub type TechVector = [f64; N_TECH];

/// Normalizes capacities to shares. Returns `None` when total capacity is zero.
pub fn shares_from_capacity(capacity: &TechVector) -> Option<TechVector> {
    let total: f64 = capacity.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut shares = [0.0; N_TECH];
    for (s, c) in shares.iter_mut().zip(capacity) {
        *s = c / total;
    }
    Some(shares)
}

pub fn renewable_share(shares: &TechVector) -> f64 {
    shares[Technology::Wind.index()] + shares[Technology::Solar.index()]
}

pub fn fossil_share(shares: &TechVector) -> f64 {
    shares[Technology::Coal.index()] + shares[Technology::Gas.index()] + shares[Technology::Oil.index()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_order() {
        assert_eq!("Hydropower".parse::<Technology>().unwrap(), Technology::Hydro);
        assert!("peat".parse::<Technology>().is_err());
        let names: Vec<_> = Technology::ALL.iter().map(|t| t.name()).collect();
        assert_eq!(names, ["solar", "wind", "biomass", "hydro", "nuclear", "oil", "gas", "coal"]);
    }

    #[test]
    fn zero_capacity_has_no_shares() {
        assert!(shares_from_capacity(&[0.0; N_TECH]).is_none());
    }
}
