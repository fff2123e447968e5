use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::tech::Technology;

use super::{labeled_roa, mean_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Northern,
    Western,
    Southern,
    Eastern,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Northern, Region::Western, Region::Southern, Region::Eastern];

    pub fn name(self) -> &'static str {
        match self {
            Region::Northern => "northern",
            Region::Western => "western",
            Region::Southern => "southern",
            Region::Eastern => "eastern",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = s.strip_suffix(" europe").unwrap_or(&s);
        match s {
            "northern" | "north" => Ok(Region::Northern),
            "western" | "west" => Ok(Region::Western),
            "southern" | "south" => Ok(Region::Southern),
            "eastern" | "east" => Ok(Region::Eastern),
            other => Err(Error::Mapping(format!("unknown region `{other}`"))),
        }
    }
}

/// Country (ISO 3166 alpha-2) to region, with optional plotting coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub regions: BTreeMap<String, Region>,
    pub coordinates: BTreeMap<String, (f64, f64)>,
}

const UN_EUROPE: [(Region, &[&str]); 4] = [
    (
        Region::Northern,
        &["AX", "DK", "EE", "FI", "FO", "GB", "GG", "IE", "IM", "IS", "JE", "LT", "LV", "NO", "SE", "SJ", "UK"],
    ),
    (Region::Western, &["AT", "BE", "CH", "DE", "FR", "LI", "LU", "MC", "NL"]),
    (
        Region::Southern,
        &["AD", "AL", "BA", "EL", "ES", "GI", "GR", "HR", "IT", "ME", "MK", "MT", "PT", "RS", "SI", "SM", "VA"],
    ),
    (Region::Eastern, &["BG", "BY", "CZ", "HU", "MD", "PL", "RO", "RU", "SK", "UA"]),
];

impl Default for RegionMap {
    /// United Nations geoscheme subregions of Europe.
    fn default() -> Self {
        let regions = UN_EUROPE
            .iter()
            .flat_map(|(r, cs)| cs.iter().map(move |c| (c.to_string(), *r)))
            .collect();
        RegionMap {
            regions,
            coordinates: BTreeMap::new(),
        }
    }
}

#[derive(Deserialize)]
struct MapRow {
    country: String,
    region: String,
    lat: Option<f64>,
    lon: Option<f64>,
}

impl RegionMap {
    /// Reads a `country,region[,lat,lon]` CSV.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut map = RegionMap {
            regions: BTreeMap::new(),
            coordinates: BTreeMap::new(),
        };
        for (i, row) in csv::Reader::from_reader(file).deserialize::<MapRow>().enumerate() {
            let row = row?;
            let country = row.country.trim().to_ascii_uppercase();
            let region = row.region.parse().map_err(|e: Error| Error::Parse {
                file: path.display().to_string(),
                line: i + 2,
                message: e.to_string(),
            })?;
            if let (Some(lat), Some(lon)) = (row.lat, row.lon) {
                map.coordinates.insert(country.clone(), (lat, lon));
            }
            map.regions.insert(country, region);
        }
        Ok(map)
    }

    pub fn region_of(&self, country: &str) -> Result<Region> {
        self.regions
            .get(country)
            .copied()
            .ok_or_else(|| Error::Mapping(format!("country `{country}` has no region")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Renewable,
    Fossil,
}

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::Renewable => "renewable",
            Group::Fossil => "fossil",
        }
    }
}

/// Comparison group of a cluster's dominant technology; `None` for
/// technologies in neither group.
pub fn group_of(tech: Technology) -> Option<Group> {
    if tech.is_renewable() {
        Some(Group::Renewable)
    } else if tech.is_fossil() {
        Some(Group::Fossil)
    } else {
        None
    }
}

/// Averaging unit for the group means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingUnit {
    /// Every firm-year counts once.
    #[default]
    FirmYear,
    /// Each firm's mean ROA counts once.
    Firm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionalRow {
    /// Region name, or `all` for the whole sample.
    pub region: String,
    pub group: Group,
    pub mean_roa: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub n_firms: usize,
    pub n_firm_years: usize,
}

struct Obs<'a> {
    firm: &'a str,
    country: &'a str,
    group: Group,
    roa: f64,
}

fn grouped_obs<'a>(dataset: &'a PanelDataset, assignment: &ClusterAssignment, map: &RegionMap) -> Result<Vec<Obs<'a>>> {
    let groups: Vec<Option<Group>> = (0..assignment.k)
        .map(|c| assignment.dominant.get(c).and_then(|d| group_of(d.tech)))
        .collect();
    let mut out = Vec::new();
    for (i, c, roa) in labeled_roa(dataset, assignment) {
        let row = &dataset.rows[i];
        map.region_of(&row.country)?;
        if let Some(group) = groups[c] {
            out.push(Obs {
                firm: &row.firm_id,
                country: &row.country,
                group,
                roa,
            });
        }
    }
    Ok(out)
}

fn summarize(obs: &[&Obs], unit: AveragingUnit) -> (Option<f64>, Option<(f64, f64)>, usize, usize) {
    let firms: BTreeSet<&str> = obs.iter().map(|o| o.firm).collect();
    let values: Vec<f64> = match unit {
        AveragingUnit::FirmYear => obs.iter().map(|o| o.roa).collect(),
        AveragingUnit::Firm => {
            let mut per: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for o in obs {
                let e = per.entry(o.firm).or_default();
                e.0 += o.roa;
                e.1 += 1;
            }
            per.values().map(|(s, n)| s / *n as f64).collect()
        }
    };
    if values.is_empty() {
        return (None, None, 0, 0);
    }
    let (mean, sd) = mean_sd(&values);
    let ci = (values.len() >= 2).then(|| {
        let t = StudentsT::new(0.0, 1.0, (values.len() - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        let half = t * sd / (values.len() as f64).sqrt();
        (mean - half, mean + half)
    });
    (Some(mean), ci, firms.len(), obs.len())
}

/// Mean ROA with a t-based 95% interval per region and group, followed by
/// the whole-sample pair.
pub fn regional_means(
    dataset: &PanelDataset,
    assignment: &ClusterAssignment,
    map: &RegionMap,
    unit: AveragingUnit,
) -> Result<Vec<RegionalRow>> {
    let obs = grouped_obs(dataset, assignment, map)?;
    let mut rows = Vec::new();
    let scopes = Region::ALL.iter().map(|r| Some(*r)).chain([None]);
    for region in scopes {
        for group in [Group::Renewable, Group::Fossil] {
            let members: Vec<&Obs> = obs
                .iter()
                .filter(|o| o.group == group)
                .filter(|o| region.is_none_or(|r| map.regions[o.country] == r))
                .collect();
            let (mean, ci, n_firms, n_firm_years) = summarize(&members, unit);
            rows.push(RegionalRow {
                region: region.map_or("all".to_string(), |r| r.name().to_string()),
                group,
                mean_roa: mean,
                ci95_low: ci.map(|c| c.0),
                ci95_high: ci.map(|c| c.1),
                n_firms,
                n_firm_years,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryRow {
    pub country: String,
    pub region: Region,
    pub renewable_mean_roa: Option<f64>,
    pub renewable_n_firm_years: usize,
    pub fossil_mean_roa: Option<f64>,
    pub fossil_n_firm_years: usize,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

/// Renewable and fossil mean ROA per country. Empty groups are `None`.
pub fn country_means(
    dataset: &PanelDataset,
    assignment: &ClusterAssignment,
    map: &RegionMap,
    unit: AveragingUnit,
) -> Result<Vec<CountryRow>> {
    let obs = grouped_obs(dataset, assignment, map)?;
    let mut by_country: BTreeMap<&str, Vec<&Obs>> = BTreeMap::new();
    for o in &obs {
        by_country.entry(o.country).or_default().push(o);
    }
    Ok(by_country
        .into_iter()
        .map(|(country, members)| {
            let pick = |g: Group| {
                let m: Vec<&Obs> = members.iter().copied().filter(|o| o.group == g).collect();
                let (mean, _, _, n) = summarize(&m, unit);
                (mean, n)
            };
            let (rm, rn) = pick(Group::Renewable);
            let (fm, fn_) = pick(Group::Fossil);
            let coords = map.coordinates.get(country);
            CountryRow {
                country: country.to_string(),
                region: map.regions[country],
                renewable_mean_roa: rm,
                renewable_n_firm_years: rn,
                fossil_mean_roa: fm,
                fossil_n_firm_years: fn_,
                lat: coords.map(|c| c.0),
                lon: coords.map(|c| c.1),
            }
        })
        .collect())
}
