use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bma::{BmaConfig, GPriorKind, ModelPrior, Sampler};
use crate::cluster::DtwOptions;
use crate::describe::{AveragingUnit, DEFAULT_SPAN};
use crate::error::{Error, Result};
use crate::panel::{DesignOptions, Focal};
use crate::synth::SynthConfig;
use crate::tech::Technology;

/// Which focal specifications to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecChoice {
    Renewable,
    Fossil,
    #[default]
    Both,
}

impl SpecChoice {
    pub fn focals(self) -> Vec<Focal> {
        match self {
            SpecChoice::Renewable => vec![Focal::Renewable],
            SpecChoice::Fossil => vec![Focal::Fossil],
            SpecChoice::Both => vec![Focal::Renewable, Focal::Fossil],
        }
    }
}

/// Pipeline configuration, read from a TOML file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub financials: Option<PathBuf>,
    pub capacities: Option<PathBuf>,
    pub macro_data: Option<PathBuf>,
    /// Generate the panel instead of reading files.
    pub synth: Option<SynthConfig>,

    pub outcome: String,
    pub spec: SpecChoice,
    pub firm_controls: Vec<String>,
    pub macro_controls: Vec<String>,
    pub interactions: bool,
    pub reference: Technology,

    pub k: usize,
    pub dtw_window: Option<usize>,
    pub dtw_normalize: bool,
    /// Largest cut scored in validity.json.
    pub validity_k_max: usize,

    pub g_prior: GPriorKind,
    pub hyper_a: Option<f64>,
    pub model_prior: ModelPrior,
    pub heredity: bool,
    pub sampler: Sampler,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,

    pub window_len: i32,
    pub rolling_start: Option<i32>,
    pub rolling_end: Option<i32>,

    pub region_map: Option<PathBuf>,
    pub averaging_unit: AveragingUnit,
    pub loess_span: f64,
    pub trend_from: Option<i32>,
    pub trend_to: Option<i32>,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bma = BmaConfig::default();
        let design = DesignOptions::new(Focal::Renewable);
        RunConfig {
            financials: None,
            capacities: None,
            macro_data: None,
            synth: None,
            outcome: design.outcome,
            spec: SpecChoice::Both,
            firm_controls: design.firm_controls,
            macro_controls: design.macro_controls,
            interactions: design.include_interactions,
            reference: design.reference,
            k: 8,
            dtw_window: None,
            dtw_normalize: false,
            validity_k_max: 12,
            g_prior: bma.g_prior,
            hyper_a: bma.hyper_a,
            model_prior: bma.model_prior,
            heredity: bma.heredity,
            sampler: bma.sampler,
            iters: bma.iters,
            burnin: bma.burnin,
            seed: bma.seed,
            window_len: 6,
            rolling_start: None,
            rolling_end: None,
            region_map: None,
            averaging_unit: AveragingUnit::FirmYear,
            loess_span: DEFAULT_SPAN,
            trend_from: None,
            trend_to: None,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Parses `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.financials,
            &mut cfg.capacities,
            &mut cfg.macro_data,
            &mut cfg.region_map,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.outcome.as_str(), "roa" | "roe") {
            return Err(Error::Config(format!("outcome must be roa or roe, got `{}`", self.outcome)));
        }
        let files = [&self.financials, &self.capacities, &self.macro_data];
        let given = files.iter().filter(|f| f.is_some()).count();
        match (&self.synth, given) {
            (Some(_), 0) | (None, 3) => {}
            (Some(_), _) => return Err(Error::Config("give either input files or a synth table, not both".into())),
            (None, _) => {
                return Err(Error::Config(
                    "financials, capacities and macro_data are all required without a synth table".into(),
                ))
            }
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.iters <= self.burnin {
            return Err(Error::Config(format!("iters ({}) must exceed burnin ({})", self.iters, self.burnin)));
        }
        if self.window_len < 1 {
            return Err(Error::Config(format!("window_len must be positive, got {}", self.window_len)));
        }
        if !(self.loess_span > 0.0 && self.loess_span <= 1.0) {
            return Err(Error::Config(format!("loess_span must lie in (0, 1], got {}", self.loess_span)));
        }
        Ok(())
    }

    /// Sets the chain seed and, for synthetic input, the generator seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(s) = &mut self.synth {
            s.seed = seed;
        }
    }

    pub fn bma_config(&self) -> BmaConfig {
        BmaConfig {
            g_prior: self.g_prior,
            hyper_a: self.hyper_a,
            model_prior: self.model_prior,
            heredity: self.heredity,
            sampler: self.sampler,
            iters: self.iters,
            burnin: self.burnin,
            seed: self.seed,
        }
    }

    /// Design columns for one focal specification. Both specifications use
    /// the same controls.
    pub fn design_options(&self, focal: Focal) -> DesignOptions {
        DesignOptions {
            outcome: self.outcome.clone(),
            focal,
            firm_controls: self.firm_controls.clone(),
            macro_controls: self.macro_controls.clone(),
            include_interactions: self.interactions,
            reference: self.reference,
        }
    }

    pub fn dtw_options(&self) -> DtwOptions {
        DtwOptions {
            window: self.dtw_window,
            normalize: self.dtw_normalize,
        }
    }
}
