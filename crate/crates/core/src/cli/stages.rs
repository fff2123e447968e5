//! Pipeline stages and the files each one writes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bma::{
    coefficient_posterior, rolling_bma, rolling_start_years, run_bma, BmaResult, CoefficientPosterior, Diagnostics,
    GPriorSpec, ModelEntry, ModelPrior, VariableSummary,
};
use crate::cluster::{
    assign_clusters, distance_matrix, hac_average_linkage, trajectories_from_panel, validity_scan, ClusterAssignment,
    DominantTech, ValidityScore,
};
use crate::describe::{
    cluster_roa_trajectories, country_means, labeled_roa, loess, regional_means, trend_delta, RegionMap,
};
use crate::error::{Error, Result};
use crate::panel::{
    build_design, derive_variables, drop_incomplete, ingest_panel, retain_labeled, DropReport, Focal, PanelDataset,
};
use crate::synth::{generate_panel, SynthPanel};
use crate::tech::Technology;

use super::config::{RunConfig, SpecChoice};

pub const CLUSTERS_FILE: &str = "clusters.csv";
const TOP_MODELS: usize = 50;

/// The panel named by the configuration, with the generated files when the
/// input is synthetic.
pub fn load_panel(cfg: &RunConfig) -> Result<(PanelDataset, Option<SynthPanel>)> {
    match (&cfg.synth, &cfg.financials, &cfg.capacities, &cfg.macro_data) {
        (Some(s), ..) => {
            let p = generate_panel(s)?;
            Ok((p.dataset.clone(), Some(p)))
        }
        (None, Some(f), Some(c), Some(m)) => Ok((derive_variables(ingest_panel(f, c, m)?), None)),
        _ => Err(Error::Config("no input files and no synth table".into())),
    }
}

/// Writes the generated CSVs and `ground_truth.json`.
pub fn write_synth(dir: &Path, panel: &SynthPanel) -> Result<Vec<String>> {
    panel.files.write(dir)?;
    write_json(&dir.join("ground_truth.json"), &panel.truth)?;
    Ok(["financials.csv", "capacities.csv", "macro.csv", "ground_truth.json"]
        .map(String::from)
        .to_vec())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn require(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::Dependency(p))
    }
}

#[derive(Debug, Clone)]
pub struct ClusterOutput {
    pub assignment: ClusterAssignment,
    pub validity: Vec<ValidityScore>,
    pub inversions: Vec<usize>,
}

pub fn cluster_stage(cfg: &RunConfig, dataset: &PanelDataset) -> Result<ClusterOutput> {
    let trajectories = trajectories_from_panel(dataset);
    if trajectories.len() < cfg.k {
        return Err(Error::Input(format!(
            "{} firms with capacity data cannot form {} clusters",
            trajectories.len(),
            cfg.k
        )));
    }
    let m = distance_matrix(&trajectories, cfg.dtw_options())?;
    let d = hac_average_linkage(&m)?;
    if !d.inversions.is_empty() {
        log::warn!("dendrogram has {} height inversions", d.inversions.len());
    }
    let assignment = assign_clusters(&m, &d, cfg.k, &trajectories)?;
    for (c, dom) in assignment.dominant.iter().enumerate() {
        if dom.tie {
            log::warn!("cluster {c} has tied dominant technologies; labeled {}", dom.tech);
        }
    }
    let validity = validity_scan(&m, &d, 2, cfg.validity_k_max);
    Ok(ClusterOutput {
        assignment,
        validity,
        inversions: d.inversions,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRow {
    firm_id: String,
    cluster_index: usize,
    cluster_label: String,
    dominant_tech: Technology,
    /// Mean share of the dominant technology across the cluster.
    leading_share: f64,
    tie: bool,
    medoid: bool,
}

#[derive(Serialize)]
struct ValidityFile<'a> {
    k: usize,
    dtw_window: Option<usize>,
    dtw_normalize: bool,
    dominant: &'a [DominantTech],
    medoids: Vec<&'a str>,
    inversions: &'a [usize],
    scores: &'a [ValidityScore],
}

pub fn write_clusters(dir: &Path, cfg: &RunConfig, out: &ClusterOutput) -> Result<Vec<String>> {
    let a = &out.assignment;
    let names = a.cluster_names();
    let rows: Vec<ClusterRow> = a
        .firm_ids
        .iter()
        .zip(&a.labels)
        .enumerate()
        .map(|(i, (f, &c))| ClusterRow {
            firm_id: f.clone(),
            cluster_index: c,
            cluster_label: names[c].clone(),
            dominant_tech: a.dominant[c].tech,
            leading_share: a.dominant[c].share,
            tie: a.dominant[c].tie,
            medoid: a.medoids.get(c) == Some(&i),
        })
        .collect();
    write_csv(&dir.join(CLUSTERS_FILE), &rows)?;
    write_json(
        &dir.join("validity.json"),
        &ValidityFile {
            k: a.k,
            dtw_window: cfg.dtw_window,
            dtw_normalize: cfg.dtw_normalize,
            dominant: &a.dominant,
            medoids: a.medoids.iter().map(|&i| a.firm_ids[i].as_str()).collect(),
            inversions: &out.inversions,
            scores: &out.validity,
        },
    )?;
    Ok(vec![CLUSTERS_FILE.into(), "validity.json".into()])
}

/// Reads the assignment written by [`write_clusters`] from `dir`.
pub fn read_clusters(dir: &Path) -> Result<ClusterAssignment> {
    let path = require(dir, CLUSTERS_FILE)?;
    let mut a = ClusterAssignment {
        firm_ids: Vec::new(),
        labels: Vec::new(),
        k: 0,
        medoids: Vec::new(),
        dominant: Vec::new(),
    };
    let mut dominant: BTreeMap<usize, DominantTech> = BTreeMap::new();
    let mut medoids: BTreeMap<usize, usize> = BTreeMap::new();
    for row in csv::Reader::from_path(&path)?.deserialize::<ClusterRow>() {
        let row = row?;
        dominant.insert(
            row.cluster_index,
            DominantTech {
                tech: row.dominant_tech,
                share: row.leading_share,
                tie: row.tie,
            },
        );
        if row.medoid {
            medoids.insert(row.cluster_index, a.firm_ids.len());
        }
        a.firm_ids.push(row.firm_id);
        a.labels.push(row.cluster_index);
    }
    a.k = dominant.keys().next_back().map_or(0, |c| c + 1);
    if dominant.len() != a.k {
        return Err(Error::Labeling(format!("{} lists clusters with gaps", path.display())));
    }
    a.dominant = dominant.into_values().collect();
    if medoids.len() == a.k {
        a.medoids = medoids.into_values().collect();
    }
    Ok(a)
}

/// File name for a per-specification output.
pub fn spec_file(stem: &str, ext: &str, choice: SpecChoice, focal: Focal) -> String {
    match choice {
        SpecChoice::Both => format!("{stem}_{}.{ext}", focal.name()),
        _ => format!("{stem}.{ext}"),
    }
}

/// Full-sample model averaging for one specification.
#[derive(Debug, Clone, Serialize)]
pub struct BmaOutput {
    pub spec: Focal,
    pub outcome: String,
    pub n_obs: usize,
    pub reference_cluster: Option<String>,
    pub dropped_unlabeled: usize,
    pub drops: DropReport,
    pub seed: u64,
    pub prior: GPriorSpec,
    pub model_prior: ModelPrior,
    pub heredity: bool,
    pub variables: Vec<VariableSummary>,
    pub posteriors: Vec<CoefficientPosterior>,
    pub top_models: Vec<ModelEntry>,
    pub n_models: usize,
    pub diagnostics: Diagnostics,
}

/// Runs BMA on the labeled, complete rows. Returns the summary and the
/// full result.
pub fn bma_stage(
    cfg: &RunConfig,
    dataset: &PanelDataset,
    clusters: &ClusterAssignment,
    focal: Focal,
) -> Result<(BmaOutput, BmaResult)> {
    let opts = cfg.design_options(focal);
    let (labeled, dropped_unlabeled) = retain_labeled(dataset, clusters);
    let (rows, drops) = drop_incomplete(&labeled, &opts.required_variables())?;
    let design = build_design(&rows, clusters, &opts)?;
    let bma_cfg = cfg.bma_config();
    let result = run_bma(&design, &bma_cfg)?;
    let posteriors = result
        .variables
        .iter()
        .map(|v| coefficient_posterior(&result, &design, &v.name))
        .collect::<Result<Vec<_>>>()?;
    let out = BmaOutput {
        spec: focal,
        outcome: cfg.outcome.clone(),
        n_obs: design.n_obs,
        reference_cluster: design.reference_cluster.clone(),
        dropped_unlabeled,
        drops,
        seed: bma_cfg.seed,
        prior: result.prior,
        model_prior: result.model_prior,
        heredity: result.heredity,
        variables: result.variables.clone(),
        posteriors,
        top_models: result.models.iter().take(TOP_MODELS).cloned().collect(),
        n_models: result.models.len(),
        diagnostics: result.diagnostics.clone(),
    };
    Ok((out, result))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingRow {
    pub start_year: i32,
    pub end_year: i32,
    pub variable: String,
    pub post_mean: f64,
    pub ci90_low: f64,
    pub ci90_high: f64,
    pub pip: f64,
    pub n_obs: usize,
    pub seed: u64,
}

/// Focal-coefficient posterior in each rolling window.
pub fn rolling_stage(
    cfg: &RunConfig,
    dataset: &PanelDataset,
    clusters: &ClusterAssignment,
    focal: Focal,
) -> Result<Vec<RollingRow>> {
    let (labeled, _) = retain_labeled(dataset, clusters);
    let starts: Vec<i32> = rolling_start_years(&labeled, cfg.window_len)?
        .into_iter()
        .filter(|s| cfg.rolling_start.is_none_or(|lo| *s >= lo) && cfg.rolling_end.is_none_or(|hi| *s <= hi))
        .collect();
    if starts.is_empty() {
        return Err(Error::Config("no rolling window start year inside the configured range".into()));
    }
    let windows = rolling_bma(
        &labeled,
        clusters,
        &cfg.design_options(focal),
        cfg.window_len,
        &starts,
        &cfg.bma_config(),
    )?;
    Ok(windows
        .into_iter()
        .map(|w| RollingRow {
            start_year: w.start_year,
            end_year: w.end_year,
            variable: w.focal.name.clone(),
            post_mean: w.focal.post_mean_uncond,
            ci90_low: w.focal.ci90_low,
            ci90_high: w.focal.ci90_high,
            pip: w.focal.pip,
            n_obs: w.n_obs,
            seed: w.seed,
        })
        .collect())
}

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    cluster: usize,
    label: &'a str,
    year: i32,
    mean_roa: f64,
    se_mean: f64,
    n_firms: usize,
}

#[derive(Serialize)]
struct TrendRow<'a> {
    cluster: usize,
    label: &'a str,
    from_year: i32,
    to_year: i32,
    total: f64,
    yearly: f64,
}

#[derive(Serialize)]
struct LoessRow<'a> {
    cluster: usize,
    label: &'a str,
    x: f64,
    fit: f64,
    se: f64,
    lo: f64,
    hi: f64,
}

/// Trajectories, trends, LOESS curves and regional and country means.
pub fn describe_stage(
    dir: &Path,
    cfg: &RunConfig,
    dataset: &PanelDataset,
    clusters: &ClusterAssignment,
) -> Result<Vec<String>> {
    let trajectories = cluster_roa_trajectories(dataset, clusters);
    let mut traj_rows = Vec::new();
    let mut trend_rows = Vec::new();
    for t in &trajectories {
        traj_rows.extend(t.points.iter().map(|p| TrajectoryRow {
            cluster: t.cluster,
            label: &t.label,
            year: p.year,
            mean_roa: p.mean_roa,
            se_mean: p.se_mean,
            n_firms: p.n_firms,
        }));
        let from = cfg.trend_from.unwrap_or(t.points[0].year);
        let to = cfg.trend_to.unwrap_or(t.points[t.points.len() - 1].year);
        match trend_delta(t, from, to) {
            Ok(d) => trend_rows.push(TrendRow {
                cluster: t.cluster,
                label: &t.label,
                from_year: d.from_year,
                to_year: d.to_year,
                total: d.total,
                yearly: d.yearly,
            }),
            Err(e) => log::warn!("no trend for cluster {}: {e}", t.label),
        }
    }
    write_csv(&dir.join("trajectories.csv"), &traj_rows)?;
    write_csv(&dir.join("trends.csv"), &trend_rows)?;

    let names = clusters.cluster_names();
    let mut per_cluster: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); clusters.k];
    for (i, c, roa) in labeled_roa(dataset, clusters) {
        per_cluster[c].0.push(dataset.rows[i].year as f64);
        per_cluster[c].1.push(roa);
    }
    let mut loess_rows = Vec::new();
    for (c, (x, y)) in per_cluster.iter().enumerate() {
        let mut at = x.clone();
        at.sort_by(f64::total_cmp);
        at.dedup();
        match loess(x, y, cfg.loess_span, &at) {
            Ok(points) => loess_rows.extend(points.into_iter().map(|p| LoessRow {
                cluster: c,
                label: &names[c],
                x: p.x,
                fit: p.fit,
                se: p.se,
                lo: p.lo,
                hi: p.hi,
            })),
            Err(e) => log::warn!("no LOESS curve for cluster {}: {e}", names[c]),
        }
    }
    write_csv(&dir.join("loess.csv"), &loess_rows)?;

    let map = match &cfg.region_map {
        Some(p) => RegionMap::from_csv(p)?,
        None => RegionMap::default(),
    };
    write_csv(
        &dir.join("regional.csv"),
        &regional_means(dataset, clusters, &map, cfg.averaging_unit)?,
    )?;
    write_csv(
        &dir.join("countries.csv"),
        &country_means(dataset, clusters, &map, cfg.averaging_unit)?,
    )?;
    Ok(["trajectories.csv", "trends.csv", "loess.csv", "regional.csv", "countries.csv"]
        .map(String::from)
        .to_vec())
}

pub(crate) fn write_bma(dir: &Path, name: &str, out: &BmaOutput) -> Result<()> {
    write_json(&dir.join(name), out)
}

pub(crate) fn write_rolling(dir: &Path, name: &str, rows: &[RollingRow]) -> Result<()> {
    write_csv(&dir.join(name), rows)
}

pub(crate) fn write_manifest_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
