use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tech::{Technology, N_TECH};

use super::{FirmYearRecord, PanelDataset};

const FINANCIAL_COLUMNS: [&str; 8] = [
    "firm_id",
    "year",
    "country",
    "net_income",
    "total_assets",
    "total_equity",
    "total_debt",
    "sales",
];

/// Reads the three panel CSV files and left-joins capacities and macro
/// controls onto the financial firm-years.
pub fn ingest_panel(financials: &Path, capacities: &Path, macro_file: &Path) -> Result<PanelDataset> {
    let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
    ingest_panel_from_readers(open(financials)?, open(capacities)?, open(macro_file)?)
}

pub fn ingest_panel_from_readers<A: Read, B: Read, C: Read>(financials: A, capacities: B, macro_file: C) -> Result<PanelDataset> {
    let capacity = read_capacities(capacities)?;
    let (macro_names, macros) = read_macro(macro_file)?;
    let mut rows = read_financials(financials)?;

    for row in &mut rows {
        match capacity.get(&(row.firm_id.clone(), row.year)) {
            Some(c) => row.capacity_mw = Some(*c),
            None => row.incomplete = true,
        }
        if let Some(values) = macros.get(&(row.country.clone(), row.year)) {
            row.macro_values = values.clone();
        }
        if row.macro_values.len() < macro_names.len() {
            row.incomplete = true;
        }
    }
    Ok(PanelDataset { rows, macro_names })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r)
}

fn column_index(headers: &csv::StringRecord, file: &str, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
        file: file.to_string(),
        column: name.to_string(),
    })
}

fn parse_f64(file: &str, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        message: format!("column `{column}`: cannot parse `{raw}` as a number"),
    })
}

fn parse_year(file: &str, line: usize, raw: &str) -> Result<i32> {
    raw.parse::<i32>().map_err(|_| Error::Parse {
        file: file.to_string(),
        line,
        message: format!("column `year`: cannot parse `{raw}` as an integer year"),
    })
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

fn read_financials<R: Read>(r: R) -> Result<Vec<FirmYearRecord>> {
    const FILE: &str = "financials.csv";
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = FINANCIAL_COLUMNS
        .iter()
        .map(|c| column_index(&headers, FILE, c))
        .collect::<Result<_>>()?;

    let mut seen: HashMap<(String, i32), usize> = HashMap::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, i + 2);
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let firm_id = field(0).to_string();
        if firm_id.is_empty() {
            return Err(Error::Parse {
                file: FILE.into(),
                line,
                message: "empty firm_id".into(),
            });
        }
        let year = parse_year(FILE, line, field(1))?;
        let num = |k: usize| parse_f64(FILE, line, FINANCIAL_COLUMNS[k], field(k));
        let record = FirmYearRecord {
            firm_id: firm_id.clone(),
            year,
            country: field(2).to_ascii_uppercase(),
            net_income: num(3)?,
            total_assets: num(4)?,
            total_equity: num(5)?,
            total_debt: num(6)?,
            sales: num(7)?,
            capacity_mw: None,
            macro_values: BTreeMap::new(),
            line,
            incomplete: false,
            derived: None,
        };
        if let Some(first) = seen.insert((firm_id.clone(), year), line) {
            return Err(Error::Duplicate {
                firm_id,
                year,
                first_line: first,
                second_line: line,
            });
        }
        rows.push(record);
    }
    Ok(rows)
}

fn read_capacities<R: Read>(r: R) -> Result<HashMap<(String, i32), [f64; N_TECH]>> {
    const FILE: &str = "capacities.csv";
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let firm = column_index(&headers, FILE, "firm_id")?;
    let year = column_index(&headers, FILE, "year")?;
    let tech = column_index(&headers, FILE, "technology")?;
    let cap = column_index(&headers, FILE, "capacity_mw")?;

    let mut out: HashMap<(String, i32), [f64; N_TECH]> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, i + 2);
        let y = parse_year(FILE, line, rec.get(year).unwrap_or(""))?;
        let t: Technology = rec.get(tech).unwrap_or("").parse().map_err(|e: Error| Error::Parse {
            file: FILE.into(),
            line,
            message: e.to_string(),
        })?;
        let mw = parse_f64(FILE, line, "capacity_mw", rec.get(cap).unwrap_or(""))?;
        if !mw.is_finite() || mw < 0.0 {
            return Err(Error::Parse {
                file: FILE.into(),
                line,
                message: format!("capacity_mw must be finite and non-negative, got {mw}"),
            });
        }
        let key = (rec.get(firm).unwrap_or("").to_string(), y);
        out.entry(key).or_insert([0.0; N_TECH])[t.index()] += mw;
    }
    Ok(out)
}

type MacroTable = HashMap<(String, i32), BTreeMap<String, f64>>;

fn read_macro<R: Read>(r: R) -> Result<(Vec<String>, MacroTable)> {
    const FILE: &str = "macro.csv";
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let country = column_index(&headers, FILE, "country")?;
    let year = column_index(&headers, FILE, "year")?;
    let value_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != country && *i != year)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut table = MacroTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line_of(&rec, i + 2);
        let y = parse_year(FILE, line, rec.get(year).unwrap_or(""))?;
        let mut values = BTreeMap::new();
        for (c, name) in &value_cols {
            let raw = rec.get(*c).unwrap_or("");
            if raw.is_empty() {
                continue;
            }
            values.insert(name.clone(), parse_f64(FILE, line, name, raw)?);
        }
        let key = (rec.get(country).unwrap_or("").to_ascii_uppercase(), y);
        if table.insert(key.clone(), values).is_some() {
            return Err(Error::Parse {
                file: FILE.into(),
                line,
                message: format!("duplicate country-year ({}, {})", key.0, key.1),
            });
        }
    }
    Ok((value_cols.into_iter().map(|(_, n)| n).collect(), table))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIN: &str = "firm_id,year,country,net_income,total_assets,total_equity,total_debt,sales
F1,2020,DE,5,100,40,60,100
F1,2021,DE,6,110,45,65,110
F2,2020,FR,-1,50,20,30,40
";
    const CAP: &str = "firm_id,year,technology,capacity_mw
F1,2020,wind,50
F1,2020,gas,30
F1,2020,gas,20
F1,2021,wind,60
F2,2020,coal,10
";
    const MAC: &str = "country,year,gdp_growth
DE,2020,0.01
DE,2021,0.02
FR,2020,-0.01
";

    fn ingest(fin: &str, cap: &str, mac: &str) -> Result<PanelDataset> {
        ingest_panel_from_readers(fin.as_bytes(), cap.as_bytes(), mac.as_bytes())
    }

    #[test]
    fn joins_three_files() {
        let ds = ingest(FIN, CAP, MAC).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.rows.iter().all(|r| r.capacity_mw.is_some() && !r.incomplete));
        let gas = ds.rows[0].capacity_mw.unwrap()[Technology::Gas.index()];
        assert_eq!(gas, 50.0);
        assert_eq!(ds.macro_names, vec!["gdp_growth"]);
        assert_eq!(ds.rows[2].macro_values["gdp_growth"], -0.01);
    }

    #[test]
    fn unmatched_capacity_is_retained_incomplete() {
        let cap = "firm_id,year,technology,capacity_mw\nF1,2020,wind,50\n";
        let ds = ingest(FIN, cap, MAC).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.rows[1].capacity_mw.is_none());
        assert!(ds.rows[1].incomplete);
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let fin = format!("{FIN}F1,2020,DE,1,1,1,1,1\n");
        match ingest(&fin, CAP, MAC) {
            Err(Error::Duplicate {
                firm_id,
                year,
                first_line,
                second_line,
            }) => {
                assert_eq!((firm_id.as_str(), year), ("F1", 2020));
                assert_eq!((first_line, second_line), (2, 5));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let fin = "firm_id,year,country,net_income,total_assets,total_equity,sales\n";
        match ingest(fin, CAP, MAC) {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "total_debt"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn parse_failure_reports_line() {
        let fin = format!("{FIN}F3,20x1,DE,1,1,1,1,1\n");
        match ingest(&fin, CAP, MAC) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let missing = Path::new("/nonexistent/financials.csv");
        let err = ingest_panel(missing, missing, missing).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
