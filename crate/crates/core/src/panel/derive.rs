use std::collections::HashMap;

use crate::tech::{fossil_share, renewable_share, shares_from_capacity};

use super::{DerivedRow, PanelDataset};

/// Attaches financial ratios and technology shares to every record.
///
/// Rows with non-positive total assets or zero total capacity are flagged
/// incomplete; the affected variables are left missing.
pub fn derive_variables(mut dataset: PanelDataset) -> PanelDataset {
    let prior_sales: HashMap<(String, i32), f64> = dataset
        .rows
        .iter()
        .map(|r| ((r.firm_id.clone(), r.year), r.sales))
        .collect();

    for row in &mut dataset.rows {
        let mut d = DerivedRow::default();
        let assets_ok = row.total_assets > 0.0 && row.total_assets.is_finite();
        if assets_ok {
            d.roa = Some(row.net_income / row.total_assets);
            d.leverage = Some(row.total_debt / row.total_assets);
            d.size = Some(row.total_assets.ln());
        } else {
            row.incomplete = true;
        }
        if row.total_equity != 0.0 {
            d.roe = Some(row.net_income / row.total_equity);
        }
        if let Some(prev) = prior_sales.get(&(row.firm_id.clone(), row.year - 1)) {
            if *prev != 0.0 {
                d.sales_growth = Some((row.sales - prev) / prev);
            }
        }
        match row.capacity_mw.as_ref().and_then(shares_from_capacity) {
            Some(shares) => {
                d.renewable_share = Some(renewable_share(&shares));
                d.fossil_share = Some(fossil_share(&shares));
                d.tech_shares = Some(shares);
            }
            None => row.incomplete = true,
        }
        row.derived = Some(d);
    }
    dataset
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::panel::FirmYearRecord;
    use crate::tech::{Technology, N_TECH};

    fn record(firm: &str, year: i32, ni: f64, ta: f64, sales: f64, cap: Option<[f64; N_TECH]>) -> FirmYearRecord {
        FirmYearRecord {
            firm_id: firm.into(),
            year,
            country: "DE".into(),
            net_income: ni,
            total_assets: ta,
            total_equity: 40.0,
            total_debt: 60.0,
            sales,
            capacity_mw: cap,
            macro_values: BTreeMap::new(),
            line: 0,
            incomplete: false,
            derived: None,
        }
    }

    fn cap(pairs: &[(Technology, f64)]) -> Option<[f64; N_TECH]> {
        let mut c = [0.0; N_TECH];
        for (t, v) in pairs {
            c[t.index()] = *v;
        }
        Some(c)
    }

    #[test]
    fn ratio_definitions() {
        let ds = PanelDataset {
            rows: vec![
                record("F1", 2020, 5.0, 100.0, 100.0, cap(&[(Technology::Wind, 50.0), (Technology::Gas, 50.0)])),
                record("F1", 2021, 5.0, 100.0, 110.0, cap(&[(Technology::Wind, 1.0)])),
            ],
            macro_names: vec![],
        };
        let ds = derive_variables(ds);
        let d0 = ds.rows[0].derived.as_ref().unwrap();
        assert_eq!(d0.roa, Some(0.05));
        assert_eq!(d0.leverage, Some(0.6));
        assert_eq!(d0.size, Some(100f64.ln()));
        assert_eq!(d0.roe, Some(5.0 / 40.0));
        assert_eq!(d0.sales_growth, None);
        let s = d0.tech_shares.unwrap();
        assert_eq!(s[Technology::Wind.index()], 0.5);
        assert_eq!(s[Technology::Gas.index()], 0.5);
        assert_eq!(d0.renewable_share, Some(0.5));
        assert_eq!(d0.fossil_share, Some(0.5));

        let d1 = ds.rows[1].derived.as_ref().unwrap();
        assert!((d1.sales_growth.unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn degenerate_rows_flagged() {
        let mut r = record("F1", 2020, 5.0, 0.0, 1.0, cap(&[]));
        r.total_equity = 0.0;
        let ds = derive_variables(PanelDataset {
            rows: vec![r],
            macro_names: vec![],
        });
        let row = &ds.rows[0];
        assert!(row.incomplete);
        let d = row.derived.as_ref().unwrap();
        assert!(d.roa.is_none() && d.roe.is_none() && d.tech_shares.is_none());
    }
}
