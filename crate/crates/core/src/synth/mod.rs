//! Seeded synthetic firm panels with planted clusters and coefficients.

mod recovery;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{derive_variables, ingest_panel_from_readers, Focal, PanelDataset};
use crate::tech::{fossil_share, renewable_share, Technology, TechVector, N_TECH};

pub use recovery::{adjusted_rand_index, planted_recovery_report, RecoveryReport, RecoveryRow};

/// One planted cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub count: usize,
    pub tech: Technology,
    /// Bounds of the dominant technology's share in every year.
    pub leading_share: (f64, f64),
    /// Additive ROA effect of membership.
    #[serde(default)]
    pub roa_effect: f64,
    /// Coefficient on focal share × membership.
    #[serde(default)]
    pub focal_interaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_firms: usize,
    pub start_year: i32,
    pub end_year: i32,
    pub clusters: Vec<ClusterSpec>,
    /// True coefficients keyed by variable name: `renewable_share`,
    /// `fossil_share`, `leverage`, `size`, `sales_growth` or a macro name.
    pub beta: BTreeMap<String, f64>,
    /// Share variable that `focal_ramp` and cluster interactions act on.
    pub focal: Focal,
    /// Per-year focal coefficient, one entry per year; replaces the focal
    /// entry of `beta`.
    pub focal_ramp: Option<Vec<f64>>,
    pub noise_sd: f64,
    pub year_effect_sd: f64,
    /// Standard deviation of the yearly step of each share random walk.
    pub share_step: f64,
    pub countries: Vec<String>,
    pub macro_names: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let clusters = [Technology::Wind, Technology::Solar, Technology::Gas, Technology::Coal]
            .into_iter()
            .map(|tech| ClusterSpec {
                count: 50,
                tech,
                leading_share: (0.79, 0.97),
                roa_effect: 0.0,
                focal_interaction: 0.0,
            })
            .collect();
        SynthConfig {
            n_firms: 200,
            start_year: 2014,
            end_year: 2023,
            clusters,
            beta: BTreeMap::new(),
            focal: Focal::Renewable,
            focal_ramp: None,
            noise_sd: 0.01,
            year_effect_sd: 0.01,
            share_step: 0.02,
            countries: ["DE", "FR", "NL", "ES", "IT", "PL", "CZ", "SE", "DK", "GB"]
                .map(String::from)
                .to_vec(),
            macro_names: vec!["gdp_growth".into(), "inflation".into()],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start_year..=self.end_year
    }

    pub fn n_years(&self) -> usize {
        (self.end_year - self.start_year + 1).max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.clusters.is_empty() {
            return fail("at least one cluster is required".into());
        }
        let total: usize = self.clusters.iter().map(|c| c.count).sum();
        if total != self.n_firms {
            return fail(format!("cluster counts sum to {total}, n_firms is {}", self.n_firms));
        }
        if self.end_year <= self.start_year {
            return fail(format!("year range {}..={} needs two years", self.start_year, self.end_year));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            let (lo, hi) = c.leading_share;
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return fail(format!("cluster {i}: leading share range ({lo}, {hi}) is not inside [0, 1]"));
            }
            if lo <= 1.0 / N_TECH as f64 {
                return fail(format!("cluster {i}: a leading share of {lo} cannot dominate {N_TECH} technologies"));
            }
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return fail(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if self.year_effect_sd < 0.0 || self.share_step < 0.0 {
            return fail("year_effect_sd and share_step must be non-negative".into());
        }
        if let Some(r) = &self.focal_ramp {
            if r.len() != self.n_years() {
                return fail(format!("focal_ramp has {} entries for {} years", r.len(), self.n_years()));
            }
        }
        if self.countries.is_empty() {
            return fail("at least one country is required".into());
        }
        let known = ["renewable_share", "fossil_share", "leverage", "size", "sales_growth"];
        for name in self.beta.keys() {
            if !known.contains(&name.as_str()) && !self.macro_names.contains(name) {
                return fail(format!("beta given for unknown variable `{name}`"));
            }
        }
        Ok(())
    }

    /// Focal coefficient in `year`.
    pub fn focal_beta(&self, year: i32) -> f64 {
        match &self.focal_ramp {
            Some(r) => r[(year - self.start_year) as usize],
            None => self.beta.get(self.focal.variable()).copied().unwrap_or(0.0),
        }
    }
}

/// Planted structure of a generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub focal: Focal,
    pub beta: BTreeMap<String, f64>,
    pub focal_ramp: Option<Vec<f64>>,
    pub noise_sd: f64,
    pub cluster_techs: Vec<Technology>,
    pub cluster_effects: Vec<f64>,
    pub focal_interactions: Vec<f64>,
    /// Planted cluster index per firm.
    pub firm_clusters: BTreeMap<String, usize>,
    pub year_effects: BTreeMap<i32, f64>,
}

/// The three input CSV files as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub financials: String,
    pub capacities: String,
    pub macro_data: String,
}

impl SynthFiles {
    /// Writes `financials.csv`, `capacities.csv` and `macro.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("financials.csv", &self.financials),
            ("capacities.csv", &self.capacities),
            ("macro.csv", &self.macro_data),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthPanel {
    pub dataset: PanelDataset,
    pub truth: GroundTruth,
    pub files: SynthFiles,
}

struct FirmPath {
    id: String,
    country: String,
    cluster: usize,
    /// Per year: (shares, total capacity, total assets, leverage, sales, roa).
    years: Vec<(TechVector, f64, f64, f64, f64, f64)>,
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

/// Share vector with `lead` on technology `tech` and the rest split by
/// `weights`, blended toward uniform wherever a secondary share would
/// reach the leading one.
fn compose_shares(tech: Technology, lead: f64, weights: &[f64; N_TECH]) -> TechVector {
    let others: Vec<usize> = (0..N_TECH).filter(|&i| i != tech.index()).collect();
    let total: f64 = others.iter().map(|&i| weights[i]).sum();
    let m = (N_TECH - 1) as f64;
    let w: Vec<f64> = others
        .iter()
        .map(|&i| if total > 0.0 { weights[i] / total } else { 1.0 / m })
        .collect();
    let rest = 1.0 - lead;
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    let cap = 0.99 * lead / rest.max(f64::MIN_POSITIVE);
    let lambda = if rest > 0.0 && w_max > cap {
        ((w_max - cap) / (w_max - 1.0 / m)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut s = [0.0; N_TECH];
    s[tech.index()] = lead;
    for (&i, wi) in others.iter().zip(&w) {
        s[i] = rest * ((1.0 - lambda) * wi + lambda / m);
    }
    s
}

fn simulate_firm(cfg: &SynthConfig, firm: usize, cluster: usize, year_effects: &[f64], macros: &[Vec<Vec<f64>>]) -> FirmPath {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(firm as u64 + 1);
    let spec = &cfg.clusters[cluster];
    let (lo, hi) = spec.leading_share;
    let country_idx = rng.random_range(0..cfg.countries.len());
    let step = normal(cfg.share_step);
    let noise = normal(cfg.noise_sd);
    let unit = normal(1.0);

    let mut lead = lo + (hi - lo) * rng.random::<f64>();
    let mut weights = [0.0; N_TECH];
    weights.iter_mut().for_each(|w| *w = rng.random::<f64>());
    let mut log_capacity = 5.0 + unit.sample(&mut rng);
    let mut log_assets = 6.0 + unit.sample(&mut rng);
    let mut leverage = 0.2 + 0.5 * rng.random::<f64>();
    let mut sales = log_assets.exp() * (0.3 + 0.7 * rng.random::<f64>());

    let mut years = Vec::with_capacity(cfg.n_years());
    for (t, year) in cfg.years().enumerate() {
        if t > 0 {
            lead = (lead + step.sample(&mut rng)).clamp(lo, hi);
            for w in weights.iter_mut() {
                *w = (*w + step.sample(&mut rng)).max(0.0);
            }
            log_capacity += 0.05 * unit.sample(&mut rng);
            log_assets += 0.05 * unit.sample(&mut rng);
            leverage = (leverage + 0.02 * unit.sample(&mut rng)).clamp(0.05, 0.95);
            sales *= 1.0 + 0.03 + 0.1 * unit.sample(&mut rng).clamp(-5.0, 5.0);
        }
        let shares = compose_shares(spec.tech, lead, &weights);
        let focal = match cfg.focal {
            Focal::Renewable => renewable_share(&shares),
            Focal::Fossil => fossil_share(&shares),
        };
        let prev_sales = years.last().map(|y: &(TechVector, f64, f64, f64, f64, f64)| y.4);
        let growth = prev_sales.map_or(0.0, |p| (sales - p) / p);
        let mut roa = year_effects[t] + spec.roa_effect + (cfg.focal_beta(year) + spec.focal_interaction) * focal;
        for (name, b) in &cfg.beta {
            let x = match name.as_str() {
                "renewable_share" | "fossil_share" if name == cfg.focal.variable() => continue,
                "renewable_share" => renewable_share(&shares),
                "fossil_share" => fossil_share(&shares),
                "leverage" => leverage,
                "size" => log_assets,
                "sales_growth" => growth,
                m => {
                    let j = cfg.macro_names.iter().position(|n| n == m).expect("validated");
                    macros[j][country_idx][t]
                }
            };
            roa += b * x;
        }
        roa += noise.sample(&mut rng);
        years.push((shares, log_capacity.exp(), log_assets.exp(), leverage, sales, roa));
    }
    FirmPath {
        id: format!("F{firm:05}"),
        country: cfg.countries[country_idx].to_ascii_uppercase(),
        cluster,
        years,
    }
}

/// Generates a panel, serializes it to the ingest CSV schemas and reads it
/// back, so the returned dataset is exactly what ingesting the files yields.
pub fn generate_panel(cfg: &SynthConfig) -> Result<SynthPanel> {
    cfg.validate()?;
    let n_years = cfg.n_years();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ye = normal(cfg.year_effect_sd);
    let year_effects: Vec<f64> = (0..n_years).map(|_| 0.05 + ye.sample(&mut rng)).collect();
    let macro_noise = normal(0.01);
    let macros: Vec<Vec<Vec<f64>>> = cfg
        .macro_names
        .iter()
        .map(|_| {
            cfg.countries
                .iter()
                .map(|_| {
                    let mut level = 0.02 + macro_noise.sample(&mut rng);
                    (0..n_years)
                        .map(|_| {
                            level += macro_noise.sample(&mut rng);
                            level
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut planted = Vec::with_capacity(cfg.n_firms);
    for (c, spec) in cfg.clusters.iter().enumerate() {
        planted.extend(std::iter::repeat_n(c, spec.count));
    }
    let firms: Vec<FirmPath> = planted
        .par_iter()
        .enumerate()
        .map(|(i, &c)| simulate_firm(cfg, i, c, &year_effects, &macros))
        .collect();

    let files = serialize(cfg, &firms, &macros);
    let dataset = derive_variables(ingest_panel_from_readers(
        files.financials.as_bytes(),
        files.capacities.as_bytes(),
        files.macro_data.as_bytes(),
    )?);
    let truth = GroundTruth {
        seed: cfg.seed,
        focal: cfg.focal,
        beta: cfg.beta.clone(),
        focal_ramp: cfg.focal_ramp.clone(),
        noise_sd: cfg.noise_sd,
        cluster_techs: cfg.clusters.iter().map(|c| c.tech).collect(),
        cluster_effects: cfg.clusters.iter().map(|c| c.roa_effect).collect(),
        focal_interactions: cfg.clusters.iter().map(|c| c.focal_interaction).collect(),
        firm_clusters: firms.iter().map(|f| (f.id.clone(), f.cluster)).collect(),
        year_effects: cfg.years().zip(year_effects).collect(),
    };
    Ok(SynthPanel { dataset, truth, files })
}

fn serialize(cfg: &SynthConfig, firms: &[FirmPath], macros: &[Vec<Vec<f64>>]) -> SynthFiles {
    let mut fin = String::from("firm_id,year,country,net_income,total_assets,total_equity,total_debt,sales\n");
    let mut cap = String::from("firm_id,year,technology,capacity_mw\n");
    for f in firms {
        for (year, (shares, capacity, assets, leverage, sales, roa)) in cfg.years().zip(&f.years) {
            let debt = leverage * assets;
            let _ = writeln!(
                fin,
                "{},{year},{},{},{assets},{},{debt},{sales}",
                f.id,
                f.country,
                roa * assets,
                assets - debt
            );
            for t in Technology::ALL {
                let mw = shares[t.index()] * capacity;
                if mw > 0.0 {
                    let _ = writeln!(cap, "{},{year},{t},{mw}", f.id);
                }
            }
        }
    }
    let mut mac = String::from("country,year");
    for m in &cfg.macro_names {
        let _ = write!(mac, ",{m}");
    }
    mac.push('\n');
    for (c, country) in cfg.countries.iter().enumerate() {
        for (t, year) in cfg.years().enumerate() {
            let _ = write!(mac, "{},{year}", country.to_ascii_uppercase());
            for series in macros {
                let _ = write!(mac, ",{}", series[c][t]);
            }
            mac.push('\n');
        }
    }
    SynthFiles {
        financials: fin,
        capacities: cap,
        macro_data: mac,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_design, drop_incomplete, DesignOptions};

    fn small(seed: u64) -> SynthConfig {
        let mut cfg = SynthConfig {
            seed,
            ..Default::default()
        };
        cfg.clusters.iter_mut().for_each(|c| c.count = 10);
        cfg.n_firms = 40;
        cfg
    }

    #[test]
    fn shares_sum_to_one_and_stay_in_range() {
        let p = generate_panel(&small(1)).unwrap();
        let mut per_firm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in &p.dataset.rows {
            let s = row.derived.as_ref().unwrap().tech_shares.unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = p.truth.firm_clusters[&row.firm_id];
            let lead = s[p.truth.cluster_techs[c].index()];
            assert!(s.iter().all(|v| *v <= lead));
            per_firm.entry(&row.firm_id).or_default().push(lead);
        }
        for leads in per_firm.values() {
            let m = leads.iter().sum::<f64>() / leads.len() as f64;
            assert!((0.79 - 1e-12..=0.97 + 1e-12).contains(&m), "{m}");
        }
    }

    #[test]
    fn seeded_output_is_identical() {
        let a = generate_panel(&small(7)).unwrap();
        let b = generate_panel(&small(7)).unwrap();
        assert_eq!(a.files, b.files);
        let c = generate_panel(&small(8)).unwrap();
        assert_ne!(a.files, c.files);
    }

    #[test]
    fn config_errors() {
        let mut c = small(1);
        c.clusters[0].leading_share = (0.9, 0.8);
        assert!(matches!(generate_panel(&c), Err(Error::Config(_))));
        let mut c = small(1);
        c.clusters[0].leading_share = (0.1, 0.8);
        assert!(matches!(generate_panel(&c), Err(Error::Config(_))));
        let mut c = small(1);
        c.n_firms = 41;
        assert!(matches!(generate_panel(&c), Err(Error::Config(_))));
        let mut c = small(1);
        c.focal_ramp = Some(vec![0.0; 3]);
        assert!(matches!(generate_panel(&c), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_ols_recovers_beta() {
        let mut cfg = small(3);
        cfg.noise_sd = 1e-12;
        cfg.beta = [("renewable_share", 0.02), ("leverage", -0.05), ("size", 0.01), ("gdp_growth", 0.3)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let p = generate_panel(&cfg).unwrap();
        let mut opts = DesignOptions::new(Focal::Renewable);
        opts.firm_controls = vec!["leverage".into(), "size".into()];
        opts.macro_controls = vec!["gdp_growth".into()];
        opts.include_interactions = false;
        let (ds, _) = drop_incomplete(&p.dataset, &opts.required_variables()).unwrap();
        let a = crate::cluster::ClusterAssignment {
            firm_ids: p.truth.firm_clusters.keys().cloned().collect(),
            labels: p.truth.firm_clusters.values().copied().collect(),
            k: 4,
            medoids: vec![],
            dominant: p
                .truth
                .cluster_techs
                .iter()
                .map(|&tech| crate::cluster::DominantTech { tech, share: 0.9, tie: false })
                .collect(),
        };
        let d = build_design(&ds, &a, &opts).unwrap();
        let k = d.n_vars();
        let x = nalgebra::DMatrix::from_fn(d.n_obs, k, |i, j| d.x[j][i]);
        let y = nalgebra::DVector::from_column_slice(&d.y);
        let beta = (x.transpose() * &x).lu().solve(&(x.transpose() * y)).unwrap();
        for (name, want) in &cfg.beta {
            let j = d.index_of(name).unwrap();
            assert!((beta[j] - want).abs() < 1e-6, "{name}: {} vs {want}", beta[j]);
        }
        for j in d.names().iter().enumerate().filter(|(_, n)| n.starts_with("cluster_")).map(|(j, _)| j) {
            assert!(beta[j].abs() < 1e-6);
        }
    }
}
