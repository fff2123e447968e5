use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = "k = 4\nseed = 3\niters = 4000\nburnin = 400\nspec = \"renewable\"\n\
[synth]\nseed = 3\n[synth.beta]\nrenewable_share = 0.02\n";

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
        Workspace { dir }
    }

    fn techmix(&self, args: &[&str]) -> Output {
        let config = self.dir.path().join("run.toml");
        let out = self.dir.path().join("runs");
        Command::new(env!("CARGO_BIN_EXE_techmix"))
            .args(args)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
    }

    fn run_dirs(&self) -> Vec<PathBuf> {
        let Ok(entries) = std::fs::read_dir(self.dir.path().join("runs")) else {
            return Vec::new();
        };
        let mut dirs: Vec<PathBuf> = entries.map(|e| e.unwrap().path()).collect();
        dirs.sort();
        dirs
    }
}

/// Run directory printed by a successful invocation.
fn created(out: &Output) -> PathBuf {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

#[test]
fn stdout_carries_only_the_run_directory() {
    let ws = Workspace::new();
    let dir = created(&ws.techmix(&["synth"]));
    assert!(dir.is_dir());
    assert_eq!(ws.run_dirs(), vec![dir]);
    let quiet = ws.techmix(&["synth", "--quiet"]);
    assert!(quiet.status.success());
    assert!(quiet.stdout.is_empty() && quiet.stderr.is_empty());
    assert_eq!(ws.run_dirs().len(), 2);
}

#[test]
fn synth_with_the_same_seed_writes_identical_files() {
    let ws = Workspace::new();
    let a = created(&ws.techmix(&["synth", "--seed", "7"]));
    let b = created(&ws.techmix(&["synth", "--seed", "7"]));
    assert_ne!(a, b);
    for f in ["financials.csv", "capacities.csv", "macro.csv", "ground_truth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = created(&ws.techmix(&["synth", "--seed", "8"]));
    assert_ne!(std::fs::read(a.join("financials.csv")).unwrap(), std::fs::read(c.join("financials.csv")).unwrap());
    assert_eq!(manifest(&a)["seeds"]["synth"], 7);
}

#[test]
fn chained_stages_match_a_full_run() {
    let ws = Workspace::new();
    let full = created(&ws.techmix(&["run"]));
    let clusters = created(&ws.techmix(&["cluster"]));
    let from = clusters.to_str().unwrap();
    let bma = created(&ws.techmix(&["bma", "--from", from]));
    let rolling = created(&ws.techmix(&["rolling", "--from", from]));
    for (dir, file) in [
        (&clusters, "clusters.csv"),
        (&bma, "bma_result.json"),
        (&rolling, "rolling.csv"),
    ] {
        assert_eq!(std::fs::read(full.join(file)).unwrap(), std::fs::read(dir.join(file)).unwrap(), "{file}");
    }
    let m = manifest(&bma);
    assert_eq!(m["upstream"], from);
    assert_eq!(m["status"], "ok");
}

#[test]
fn prior_override_is_recorded() {
    let ws = Workspace::new();
    let clusters = created(&ws.techmix(&["cluster"]));
    let bma = created(&ws.techmix(&["bma", "--from", clusters.to_str().unwrap(), "--prior", "bric"]));
    let priors = manifest(&bma)["priors"].as_array().unwrap().clone();
    assert_eq!(priors.len(), 1);
    assert_eq!(priors[0]["g_prior"], "bric");
    assert_eq!(priors[0]["spec"], "renewable");
}

#[test]
fn missing_upstream_is_a_dependency_error() {
    let ws = Workspace::new();
    let missing = ws.dir.path().join("nowhere");
    let out = ws.techmix(&["bma", "--from", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
    assert!(ws.run_dirs().is_empty());
}

#[test]
fn a_failing_stage_marks_the_manifest() {
    let ws = Workspace::new();
    let empty = ws.dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = ws.techmix(&["describe", "--from", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let dirs = ws.run_dirs();
    assert_eq!(dirs.len(), 1);
    let m = manifest(&dirs[0]);
    assert_eq!(m["status"], "FAILED");
    assert_eq!(m["failed_stage"], "load_clusters");
    assert!(m["error"].as_str().is_some_and(|e| !e.is_empty()));
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    let ws = Workspace::new();
    let out = ws.techmix(&["bma", "--from", ".", "--prior", "flat"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(ws.run_dirs().is_empty());
}
