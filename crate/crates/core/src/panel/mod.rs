//! Firm-year panel: ingest, variable construction, missing-data policy,
//! year-demeaning, windowing and regression design.

mod demean;
mod derive;
mod design;
mod filter;
mod ingest;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tech::{Technology, TechVector};

pub use demean::demean_by_year;
pub use derive::derive_variables;
pub use design::{build_design, ColumnKind, DesignOptions, PanelDesign, VarMeta};
pub use filter::{drop_incomplete, retain_labeled, window, DropReport};
pub use ingest::{ingest_panel, ingest_panel_from_readers};

/// Built-in variables of the catalogue; macro controls are added per dataset.
pub const BASE_VARIABLES: [&str; 7] = ["roa", "roe", "leverage", "size", "sales_growth", "renewable_share", "fossil_share"];

/// One firm-year row of the input panel.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmYearRecord {
    pub firm_id: String,
    pub year: i32,
    pub country: String,
    pub net_income: f64,
    pub total_assets: f64,
    pub total_equity: f64,
    pub total_debt: f64,
    pub sales: f64,
    /// `None` when no capacity rows matched this firm-year.
    pub capacity_mw: Option<TechVector>,
    pub macro_values: BTreeMap<String, f64>,
    /// Line number in the financials file (header is line 1).
    pub line: usize,
    pub incomplete: bool,
    pub derived: Option<DerivedRow>,
}

/// Variables derived from one record. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DerivedRow {
    pub roa: Option<f64>,
    pub roe: Option<f64>,
    pub leverage: Option<f64>,
    pub size: Option<f64>,
    pub sales_growth: Option<f64>,
    pub renewable_share: Option<f64>,
    pub fossil_share: Option<f64>,
    pub tech_shares: Option<TechVector>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelDataset {
    pub rows: Vec<FirmYearRecord>,
    pub macro_names: Vec<String>,
}

/// Focal regressor of a specification. Renewable and fossil shares are
/// estimated in separate specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Focal {
    Renewable,
    Fossil,
}

impl Focal {
    pub fn variable(self) -> &'static str {
        match self {
            Focal::Renewable => "renewable_share",
            Focal::Fossil => "fossil_share",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Focal::Renewable => "renewable",
            Focal::Fossil => "fossil",
        }
    }
}

impl std::str::FromStr for Focal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "renewable" => Ok(Focal::Renewable),
            "fossil" => Ok(Focal::Fossil),
            other => Err(Error::Config(format!("unknown specification `{other}`"))),
        }
    }
}

impl PanelDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All variable names this dataset can resolve.
    pub fn catalogue(&self) -> Vec<String> {
        let mut names: Vec<String> = BASE_VARIABLES.iter().map(|s| s.to_string()).collect();
        names.extend(Technology::ALL.iter().map(|t| format!("share_{}", t.name())));
        names.extend(self.macro_names.iter().cloned());
        names
    }

    pub fn has_variable(&self, name: &str) -> bool {
        BASE_VARIABLES.contains(&name)
            || share_tech(name).is_some()
            || self.macro_names.iter().any(|m| m == name)
    }

    /// Value of a catalogue variable for one row; `None` if missing.
    pub fn value(&self, row: &FirmYearRecord, name: &str) -> Option<f64> {
        if let Some(v) = row.macro_values.get(name) {
            return Some(*v);
        }
        let d = row.derived.as_ref()?;
        match name {
            "roa" => d.roa,
            "roe" => d.roe,
            "leverage" => d.leverage,
            "size" => d.size,
            "sales_growth" => d.sales_growth,
            "renewable_share" => d.renewable_share,
            "fossil_share" => d.fossil_share,
            other => share_tech(other).and_then(|t| d.tech_shares.map(|s| s[t.index()])),
        }
    }

    /// Year span covered by the rows.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.rows.iter().map(|r| r.year).min()?;
        let max = self.rows.iter().map(|r| r.year).max()?;
        Some((min, max))
    }
}

fn share_tech(name: &str) -> Option<Technology> {
    name.strip_prefix("share_").and_then(|t| t.parse().ok())
}
