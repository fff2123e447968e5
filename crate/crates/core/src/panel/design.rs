use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::tech::Technology;

use super::{demean_by_year, Focal, PanelDataset};

/// Sum-of-squares ratio below which a demeaned column counts as constant.
const CONSTANT_TOL: f64 = 1e-20;
/// Residual-variance ratio below which a column counts as collinear with
/// the columns before it.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    FocalShare,
    FirmControl,
    MacroControl,
    ClusterIndicator,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Main-effect columns an interaction requires under strong heredity.
    pub heredity_parents: Option<(usize, usize)>,
}

impl VarMeta {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        VarMeta {
            name: name.into(),
            kind,
            heredity_parents: None,
        }
    }

    pub fn interaction(name: impl Into<String>, a: usize, b: usize) -> Self {
        VarMeta {
            name: name.into(),
            kind: ColumnKind::Interaction,
            heredity_parents: Some((a, b)),
        }
    }
}

/// Year-demeaned outcome and candidate regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDesign {
    pub y: Vec<f64>,
    /// Column-major: `x[j][i]` is regressor `j` at row `i`.
    pub x: Vec<Vec<f64>>,
    pub var_meta: Vec<VarMeta>,
    pub n_obs: usize,
    pub year_index: Vec<i32>,
    pub outcome: String,
    pub reference_cluster: Option<String>,
}

impl PanelDesign {
    /// Demeans `y` and every column by year and validates the result.
    pub fn from_columns(y: Vec<f64>, columns: Vec<Vec<f64>>, var_meta: Vec<VarMeta>, years: Vec<i32>) -> Result<Self> {
        let n = y.len();
        if years.len() != n {
            return Err(Error::Input("year index length differs from outcome length".into()));
        }
        if columns.len() != var_meta.len() {
            return Err(Error::Input("column count differs from metadata count".into()));
        }
        for (c, m) in columns.iter().zip(&var_meta) {
            if c.len() != n {
                return Err(Error::Design {
                    column: m.name.clone(),
                    reason: format!("length {} differs from n = {n}", c.len()),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Design {
                    column: m.name.clone(),
                    reason: "non-finite value".into(),
                });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("outcome contains non-finite values".into()));
        }
        let design = PanelDesign {
            y: demean_by_year(&y, &years),
            x: columns.iter().map(|c| demean_by_year(c, &years)).collect(),
            var_meta,
            n_obs: n,
            year_index: years,
            outcome: "y".into(),
            reference_cluster: None,
        };
        design.validate(&columns)?;
        Ok(design)
    }

    pub fn n_vars(&self) -> usize {
        self.x.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.var_meta.iter().position(|m| m.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.var_meta.iter().map(|m| m.name.clone()).collect()
    }

    fn validate(&self, raw: &[Vec<f64>]) -> Result<()> {
        let k = self.n_vars();
        for (j, m) in self.var_meta.iter().enumerate() {
            match (m.kind, m.heredity_parents) {
                (ColumnKind::Interaction, Some((a, b))) => {
                    if a >= k || b >= k || a == j || b == j || a == b {
                        return Err(Error::Design {
                            column: m.name.clone(),
                            reason: format!("invalid heredity parents ({a}, {b})"),
                        });
                    }
                }
                (ColumnKind::Interaction, None) => {
                    return Err(Error::Design {
                        column: m.name.clone(),
                        reason: "interaction without heredity parents".into(),
                    })
                }
                (_, Some(_)) => {
                    return Err(Error::Design {
                        column: m.name.clone(),
                        reason: "only interactions may list heredity parents".into(),
                    })
                }
                _ => {}
            }
        }

        let ss: Vec<f64> = self.x.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
        for (j, m) in self.var_meta.iter().enumerate() {
            let raw_ss: f64 = raw[j].iter().map(|v| v * v).sum();
            if ss[j] == 0.0 || ss[j] <= CONSTANT_TOL * raw_ss {
                return Err(Error::Design {
                    column: m.name.clone(),
                    reason: "constant after year-demeaning".into(),
                });
            }
        }

        // Incremental Cholesky of the correlation matrix: a tiny pivot means
        // the column is (nearly) spanned by the columns before it.
        let scale: Vec<f64> = ss.iter().map(|s| s.sqrt()).collect();
        let mut l = vec![vec![0.0; k]; k];
        for j in 0..k {
            for i in 0..=j {
                let mut g: f64 = self.x[i].iter().zip(&self.x[j]).map(|(a, b)| a * b).sum::<f64>() / (scale[i] * scale[j]);
                g -= l[i][..i].iter().zip(&l[j][..i]).map(|(a, b)| a * b).sum::<f64>();
                if i < j {
                    l[j][i] = g / l[i][i];
                } else {
                    if g <= COLLINEAR_TOL {
                        return Err(Error::Design {
                            column: self.var_meta[j].name.clone(),
                            reason: "collinear with preceding columns after year-demeaning".into(),
                        });
                    }
                    l[j][j] = g.sqrt();
                }
            }
        }
        Ok(())
    }
}

/// Column configuration for [`build_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub outcome: String,
    pub focal: Focal,
    pub firm_controls: Vec<String>,
    pub macro_controls: Vec<String>,
    pub include_interactions: bool,
    pub reference: Technology,
}

impl DesignOptions {
    pub fn new(focal: Focal) -> Self {
        DesignOptions {
            outcome: "roa".into(),
            focal,
            firm_controls: vec!["leverage".into(), "size".into(), "sales_growth".into()],
            macro_controls: vec![],
            include_interactions: true,
            reference: Technology::Gas,
        }
    }

    /// Variables every row must carry for the design.
    pub fn required_variables(&self) -> Vec<&str> {
        let mut v = vec![self.outcome.as_str(), self.focal.variable()];
        v.extend(self.firm_controls.iter().map(String::as_str));
        v.extend(self.macro_controls.iter().map(String::as_str));
        v
    }
}

/// Indicator column names for each cluster, with the reference cluster
/// (first cluster dominated by the reference technology, else the largest)
/// mapped to `None`.
pub(crate) fn cluster_column_names(assignment: &ClusterAssignment, reference: Technology) -> (Vec<Option<String>>, usize) {
    let k = assignment.k;
    let mut sizes = vec![0usize; k];
    for &l in &assignment.labels {
        sizes[l] += 1;
    }
    let reference_idx = (0..k)
        .find(|&c| assignment.dominant.get(c).map(|d| d.tech) == Some(reference))
        .unwrap_or_else(|| {
            let largest = (0..k).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
            log::warn!("no cluster dominated by {reference}; using cluster {largest} as reference");
            largest
        });

    let base: Vec<String> = (0..k)
        .map(|c| match assignment.dominant.get(c) {
            Some(d) => d.tech.name().to_string(),
            None => format!("c{c}"),
        })
        .collect();
    let names = (0..k)
        .map(|c| {
            if c == reference_idx {
                return None;
            }
            let dup = base.iter().filter(|b| **b == base[c]).count() > 1;
            Some(if dup {
                format!("cluster_{}_{c}", base[c])
            } else {
                format!("cluster_{}", base[c])
            })
        })
        .collect();
    (names, reference_idx)
}

/// Builds the year-demeaned regression design for one specification.
///
/// Columns: focal share, firm controls, macro controls, one indicator per
/// non-reference cluster and, optionally, focal × indicator interactions.
pub fn build_design(dataset: &PanelDataset, clusters: &ClusterAssignment, opts: &DesignOptions) -> Result<PanelDesign> {
    for name in opts.required_variables() {
        if !dataset.has_variable(name) {
            return Err(Error::Catalogue(name.to_string()));
        }
    }
    let label_of: HashMap<&str, usize> = clusters
        .firm_ids
        .iter()
        .zip(&clusters.labels)
        .map(|(f, l)| (f.as_str(), *l))
        .collect();
    let (cluster_names, reference_idx) = cluster_column_names(clusters, opts.reference);

    let focal = opts.focal.variable();
    let mut meta = vec![VarMeta::new(focal, ColumnKind::FocalShare)];
    meta.extend(opts.firm_controls.iter().map(|c| VarMeta::new(c.clone(), ColumnKind::FirmControl)));
    meta.extend(opts.macro_controls.iter().map(|c| VarMeta::new(c.clone(), ColumnKind::MacroControl)));
    let numeric: Vec<String> = meta.iter().map(|m| m.name.clone()).collect();
    let indicator_clusters: Vec<(usize, String)> = cluster_names
        .iter()
        .enumerate()
        .filter_map(|(c, n)| n.clone().map(|n| (c, n)))
        .collect();
    let first_indicator = meta.len();
    meta.extend(indicator_clusters.iter().map(|(_, n)| VarMeta::new(n.clone(), ColumnKind::ClusterIndicator)));
    if opts.include_interactions {
        for (i, (_, n)) in indicator_clusters.iter().enumerate() {
            meta.push(VarMeta::interaction(format!("{focal}_x_{n}"), 0, first_indicator + i));
        }
    }

    let n = dataset.len();
    let mut y = Vec::with_capacity(n);
    let mut years = Vec::with_capacity(n);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); meta.len()];
    for row in &dataset.rows {
        let label = *label_of
            .get(row.firm_id.as_str())
            .ok_or_else(|| Error::Labeling(format!("firm `{}` has no cluster label", row.firm_id)))?;
        let get = |name: &str| {
            dataset.value(row, name).filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Input(format!(
                    "row for ({}, {}) lacks `{name}`; run drop_incomplete first",
                    row.firm_id, row.year
                ))
            })
        };
        y.push(get(&opts.outcome)?);
        years.push(row.year);
        for (j, name) in numeric.iter().enumerate() {
            cols[j].push(get(name)?);
        }
        let focal_value = cols[0][cols[0].len() - 1];
        for (i, (c, _)) in indicator_clusters.iter().enumerate() {
            let ind = if label == *c { 1.0 } else { 0.0 };
            cols[first_indicator + i].push(ind);
            if opts.include_interactions {
                cols[first_indicator + indicator_clusters.len() + i].push(ind * focal_value);
            }
        }
    }
    if n == 0 {
        return Err(Error::Input("design requires at least one row".into()));
    }

    let mut design = PanelDesign::from_columns(y, cols, meta, years)?;
    design.outcome = opts.outcome.clone();
    design.reference_cluster = Some(
        clusters
            .dominant
            .get(reference_idx)
            .map(|d| d.tech.name().to_string())
            .unwrap_or_else(|| format!("c{reference_idx}")),
    );
    Ok(design)
}
