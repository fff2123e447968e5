//! Command-line pipeline: one configuration file drives every stage.

mod config;
mod manifest;
mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bma::GPriorKind;
use crate::cluster::ClusterAssignment;
use crate::error::Error;
use crate::panel::PanelDataset;

pub use config::{RunConfig, SpecChoice};
pub use manifest::{create_run_dir, Manifest, PriorRecord, StageRecord, MANIFEST_FILE};
pub use stages::{
    bma_stage, cluster_stage, describe_stage, load_panel, read_clusters, rolling_stage, spec_file, write_clusters,
    write_synth, BmaOutput, ClusterOutput, RollingRow, CLUSTERS_FILE,
};

#[derive(Debug, Parser)]
#[command(name = "techmix", version, about = "Technology-portfolio clustering and model averaging for firm panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Parent directory for the new run directory. Defaults to `out_dir`
    /// from the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the chain seed and the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only report errors.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct Upstream {
    /// Run directory holding the upstream `clusters.csv`.
    #[arg(long)]
    pub from: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every stage in order.
    Run(Common),
    /// Write a synthetic panel and its ground truth.
    Synth(Common),
    /// Cluster firms on their technology-share trajectories.
    Cluster(Common),
    /// Full-sample model averaging per specification.
    Bma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        upstream: Upstream,
        /// g-prior: uip, bric or hyper_uip.
        #[arg(long)]
        prior: Option<GPriorKind>,
        /// renewable, fossil or both.
        #[arg(long, value_parser = parse_spec)]
        spec: Option<SpecChoice>,
    },
    /// Rolling-window model averaging of the focal coefficient.
    Rolling {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        upstream: Upstream,
    },
    /// Trajectories, trends, LOESS curves and regional means.
    Describe {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        upstream: Upstream,
    },
}

fn parse_spec(s: &str) -> Result<SpecChoice, String> {
    match s {
        "renewable" => Ok(SpecChoice::Renewable),
        "fossil" => Ok(SpecChoice::Fossil),
        "both" => Ok(SpecChoice::Both),
        _ => Err(format!("unknown spec `{s}`")),
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Synth(_) => "synth",
            Command::Cluster(_) => "cluster",
            Command::Bma { .. } => "bma",
            Command::Rolling { .. } => "rolling",
            Command::Describe { .. } => "describe",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Run(c) | Command::Synth(c) | Command::Cluster(c) => c,
            Command::Bma { common, .. } | Command::Rolling { common, .. } | Command::Describe { common, .. } => common,
        }
    }

    fn upstream(&self) -> Option<&Path> {
        match self {
            Command::Bma { upstream, .. } | Command::Rolling { upstream, .. } | Command::Describe { upstream, .. } => {
                Some(&upstream.from)
            }
            _ => None,
        }
    }
}

/// A failed invocation: the stage that failed, if any, and the run
/// directory holding partial outputs.
#[derive(Debug)]
pub struct CliError {
    pub stage: Option<String>,
    pub run_dir: Option<PathBuf>,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.stage {
            Some(s) => write!(f, "stage `{s}` failed: {}", self.error)?,
            None => write!(f, "{}", self.error)?,
        }
        if let Some(d) = &self.run_dir {
            write!(f, " (partial outputs in {})", d.display())?;
        }
        Ok(())
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError {
            stage: None,
            run_dir: None,
            error,
        }
    }
}

struct Runner<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Runner<'_> {
    /// Times `f` as stage `name`, records the files it reports and marks
    /// the manifest on failure.
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&Path) -> crate::Result<(T, Vec<String>)>,
    ) -> Result<T, (String, Error)> {
        log::info!("stage {name}");
        let t0 = Instant::now();
        let out = f(self.dir).and_then(|(v, files)| {
            self.manifest.add_files(self.dir, &files)?;
            Ok(v)
        });
        self.manifest.stages.push(StageRecord {
            name: name.into(),
            seconds: t0.elapsed().as_secs_f64(),
            ok: out.is_ok(),
        });
        out.map_err(|e| (name.to_string(), e))
    }
}

/// Loads and adjusts the configuration for `cmd`.
pub fn resolve_config(cmd: &Command) -> crate::Result<RunConfig> {
    let common = cmd.common();
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    if let Command::Bma { prior, spec, .. } = cmd {
        if let Some(p) = prior {
            cfg.g_prior = *p;
        }
        if let Some(s) = spec {
            cfg.spec = *s;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `cmd` in a new run directory and returns its path.
pub fn execute(cmd: &Command) -> Result<PathBuf, CliError> {
    let cfg = resolve_config(cmd)?;
    if let Some(up) = cmd.upstream() {
        if !up.is_dir() {
            return Err(Error::Dependency(up.to_path_buf()).into());
        }
    }
    let parent = cmd.common().out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let dir = create_run_dir(&parent)?;
    let mut runner = Runner {
        dir: &dir,
        manifest: Manifest::new(cmd.name(), &cfg, cmd.upstream().map(Path::to_path_buf)),
    };
    let result = run_stages(&mut runner, cmd, &cfg);
    if let Err((stage, e)) = &result {
        runner.manifest.fail(stage, e);
    }
    runner.manifest.write(&dir)?;
    match result {
        Ok(()) => Ok(dir),
        Err((stage, error)) => Err(CliError {
            stage: Some(stage),
            run_dir: Some(dir),
            error,
        }),
    }
}

fn run_stages(r: &mut Runner, cmd: &Command, cfg: &RunConfig) -> Result<(), (String, Error)> {
    let writes_synth = matches!(cmd, Command::Run(_) | Command::Synth(_));
    let ingest_name = if cfg.synth.is_some() { "synth" } else { "ingest" };
    let dataset: PanelDataset = r.stage(ingest_name, |dir| {
        let (dataset, synth) = load_panel(cfg)?;
        let files = match (&synth, writes_synth) {
            (Some(p), true) => write_synth(dir, p)?,
            _ => Vec::new(),
        };
        Ok((dataset, files))
    })?;
    if let Some(s) = &cfg.synth {
        r.manifest.seeds.insert("synth".into(), s.seed);
    }

    let clusters: ClusterAssignment = match cmd {
        Command::Synth(_) => {
            if cfg.synth.is_none() {
                let e = Error::Config("the synth command needs a [synth] table".into());
                return Err(("synth".into(), e));
            }
            return Ok(());
        }
        Command::Run(_) | Command::Cluster(_) => r.stage("cluster", |dir| {
            let out = cluster_stage(cfg, &dataset)?;
            let files = write_clusters(dir, cfg, &out)?;
            Ok((out.assignment, files))
        })?,
        _ => {
            let from = cmd.upstream().expect("stage commands read upstream artifacts");
            r.stage("load_clusters", |_| Ok((read_clusters(from)?, Vec::new())))?
        }
    };

    if matches!(cmd, Command::Run(_) | Command::Bma { .. }) {
        for focal in cfg.spec.focals() {
            let name = spec_file("bma_result", "json", cfg.spec, focal);
            r.manifest.seeds.insert(format!("bma_{}", focal.name()), cfg.seed);
            r.manifest.priors.push(PriorRecord {
                stage: "bma".into(),
                spec: focal.name().into(),
                g_prior: cfg.g_prior.name().into(),
                hyper_a: cfg.hyper_a,
                model_prior: format!("{:?}", cfg.model_prior).to_lowercase(),
            });
            r.stage(&format!("bma_{}", focal.name()), |dir| {
                let (out, _) = bma_stage(cfg, &dataset, &clusters, focal)?;
                stages::write_bma(dir, &name, &out)?;
                Ok(((), vec![name.clone()]))
            })?;
        }
    }
    if matches!(cmd, Command::Run(_) | Command::Rolling { .. }) {
        for focal in cfg.spec.focals() {
            let name = spec_file("rolling", "csv", cfg.spec, focal);
            let rows = r.stage(&format!("rolling_{}", focal.name()), |dir| {
                let rows = rolling_stage(cfg, &dataset, &clusters, focal)?;
                stages::write_rolling(dir, &name, &rows)?;
                Ok((rows, vec![name.clone()]))
            })?;
            for row in rows {
                r.manifest
                    .seeds
                    .insert(format!("rolling_{}_{}", focal.name(), row.start_year), row.seed);
            }
        }
    }
    if matches!(cmd, Command::Run(_) | Command::Describe { .. }) {
        r.stage("describe", |dir| Ok(((), describe_stage(dir, cfg, &dataset, &clusters)?)))?;
    }
    Ok(())
}

/// Entry point for the binary. Returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.command.common().quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli.command) {
        Ok(dir) => {
            if !cli.command.common().quiet {
                println!("{}", dir.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
