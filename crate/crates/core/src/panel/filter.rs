use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};

use super::PanelDataset;

/// Rows removed by [`drop_incomplete`], counted per missing variable.
/// A row missing several variables is counted under each of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropReport {
    pub input_rows: usize,
    pub retained_rows: usize,
    pub missing: BTreeMap<String, usize>,
}

/// Keeps only rows where every required variable is present and finite.
pub fn drop_incomplete(dataset: &PanelDataset, required: &[&str]) -> Result<(PanelDataset, DropReport)> {
    for name in required {
        if !dataset.has_variable(name) {
            return Err(Error::Config(format!("unknown variable `{name}` in required list")));
        }
    }
    let mut report = DropReport {
        input_rows: dataset.len(),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(dataset.len());
    for row in &dataset.rows {
        let mut keep = true;
        for name in required {
            let ok = dataset.value(row, name).is_some_and(f64::is_finite);
            if !ok {
                keep = false;
                *report.missing.entry(name.to_string()).or_default() += 1;
            }
        }
        if keep {
            rows.push(row.clone());
        }
    }
    report.retained_rows = rows.len();
    Ok((
        PanelDataset {
            rows,
            macro_names: dataset.macro_names.clone(),
        },
        report,
    ))
}

/// Keeps rows of firms that carry a cluster label. Returns the number of
/// rows removed.
pub fn retain_labeled(dataset: &PanelDataset, clusters: &ClusterAssignment) -> (PanelDataset, usize) {
    let labeled: HashSet<&str> = clusters.firm_ids.iter().map(String::as_str).collect();
    let rows: Vec<_> = dataset
        .rows
        .iter()
        .filter(|r| labeled.contains(r.firm_id.as_str()))
        .cloned()
        .collect();
    let removed = dataset.len() - rows.len();
    (
        PanelDataset {
            rows,
            macro_names: dataset.macro_names.clone(),
        },
        removed,
    )
}

/// Rows with `start_year <= year <= start_year + length_years - 1`.
pub fn window(dataset: &PanelDataset, start_year: i32, length_years: i32) -> Result<PanelDataset> {
    if length_years < 1 {
        return Err(Error::Input(format!("window length must be at least 1, got {length_years}")));
    }
    let end = start_year + length_years - 1;
    let rows: Vec<_> = dataset
        .rows
        .iter()
        .filter(|r| r.year >= start_year && r.year <= end)
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyWindow { start: start_year, end });
    }
    Ok(PanelDataset {
        rows,
        macro_names: dataset.macro_names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::panel::{derive_variables, FirmYearRecord};
    use crate::tech::N_TECH;

    fn panel(years: std::ops::RangeInclusive<i32>) -> PanelDataset {
        let rows = years
            .enumerate()
            .map(|(i, year)| {
                let mut cap = [0.0; N_TECH];
                cap[1] = 10.0;
                FirmYearRecord {
                    firm_id: "F1".into(),
                    year,
                    country: "DE".into(),
                    net_income: 1.0,
                    total_assets: 10.0,
                    total_equity: 5.0,
                    // every fifth row has a missing leverage (non-finite debt)
                    total_debt: if i % 5 == 4 { f64::NAN } else { 5.0 },
                    sales: 10.0 + i as f64,
                    capacity_mw: Some(cap),
                    macro_values: BTreeMap::new(),
                    line: i + 2,
                    incomplete: false,
                    derived: None,
                }
            })
            .collect();
        derive_variables(PanelDataset {
            rows,
            macro_names: vec![],
        })
    }

    #[test]
    fn drops_missing_leverage() {
        let ds = panel(2014..=2023);
        let (kept, report) = drop_incomplete(&ds, &["leverage"]).unwrap();
        assert_eq!(kept.len(), 8);
        assert_eq!(report.missing.get("leverage"), Some(&2));
    }

    #[test]
    fn empty_requirement_is_identity() {
        let ds = panel(2014..=2023);
        let (kept, report) = drop_incomplete(&ds, &[]).unwrap();
        let lines = |d: &PanelDataset| d.rows.iter().map(|r| r.line).collect::<Vec<_>>();
        assert_eq!(lines(&kept), lines(&ds));
        assert!(report.missing.is_empty());
    }

    #[test]
    fn non_finite_values_dropped_and_idempotent() {
        let mut ds = panel(2014..=2016);
        ds.rows[1].derived.as_mut().unwrap().roa = Some(f64::INFINITY);
        let (once, _) = drop_incomplete(&ds, &["roa", "sales_growth"]).unwrap();
        assert_eq!(once.rows.iter().map(|r| r.year).collect::<Vec<_>>(), vec![2016]);
        let (twice, _) = drop_incomplete(&once, &["roa", "sales_growth"]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_variable_is_config_error() {
        let ds = panel(2014..=2015);
        assert!(matches!(drop_incomplete(&ds, &["tobin_q"]), Err(Error::Config(_))));
    }

    #[test]
    fn window_bounds() {
        let ds = panel(2014..=2023);
        let years = |w: &PanelDataset| w.rows.iter().map(|r| r.year).collect::<Vec<_>>();
        assert_eq!(years(&window(&ds, 2014, 6).unwrap()), (2014..=2019).collect::<Vec<_>>());
        assert_eq!(years(&window(&ds, 2018, 6).unwrap()), (2018..=2023).collect::<Vec<_>>());
        assert_eq!(years(&window(&ds, 2020, 1).unwrap()), vec![2020]);
        assert!(matches!(
            window(&ds, 2030, 6),
            Err(Error::EmptyWindow { start: 2030, end: 2035 })
        ));
    }
}
