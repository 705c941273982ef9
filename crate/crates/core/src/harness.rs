//! Monte Carlo sweeps over `(q, n)` grids.
//!
//! A sweep fixes one model, then for every grid cell runs `trials` independent
//! experiments: draw `n` hidden samples, pass them through the channel, learn,
//! and score. Trial `t` of cell `(qi, ni)` is seeded with
//! `derive_seed(master_seed, [qi, ni, t])`, so results do not depend on the
//! number of worker threads or on scheduling.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{self, BoundInputs};
use crate::channel::{derive_seed, rng_from_seed, sample_noisy_correlations, NoiseChannel};
use crate::error::{Error, Result};
use crate::moments::{estimate_moment, exact_moment};
use crate::predictive::{fit_distribution, sstv2};
use crate::structure::{chow_liu, missed_edges};
use crate::tree::{IsingTreeModel, ModelJson, TreeDistribution, TreeTopology};

/// Environment variable overriding the worker thread count.
pub const WORKERS_ENV: &str = "TREEISING_WORKERS";

/// Slack allowed before a moment error counts as exceeding its bound.
pub const MOMENT_BOUND_SLACK: f64 = 1e-12;

pub const CSV_HEADER: &str = "q,n,trials,failures,error_rate,stderr,mean_metric,bound_n_sufficient,bound_n_necessary";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Chain,
    /// Star centered at vertex 0.
    Star,
    /// Uniform labeled tree drawn from the model seed.
    Random,
}

/// How interaction strengths are laid out over the edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaRule {
    /// Every edge gets `beta`; requires `alpha == beta`.
    Constant,
    /// Edges in sorted order alternate `alpha, beta, alpha, ...`.
    #[default]
    Alternating,
    /// Each edge independently uniform on `[alpha, beta]` with a random sign.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Structure,
    Predictive,
    Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub tree: TreeKind,
    pub p: usize,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub theta_rule: ThetaRule,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<IsingTreeModel> {
        let mut rng = rng_from_seed(self.seed);
        let topology = match self.tree {
            TreeKind::Chain => TreeTopology::chain(self.p)?,
            TreeKind::Star => TreeTopology::star(self.p, 0)?,
            TreeKind::Random => TreeTopology::random(self.p, &mut rng)?,
        };
        let theta = (0..topology.edge_count())
            .map(|e| match self.theta_rule {
                ThetaRule::Constant => self.beta,
                ThetaRule::Alternating if e % 2 == 0 => self.alpha,
                ThetaRule::Alternating => self.beta,
                ThetaRule::Uniform => {
                    let magnitude = if self.alpha < self.beta { rng.gen_range(self.alpha..=self.beta) } else { self.beta };
                    if rng.gen::<bool>() { magnitude } else { -magnitude }
                }
            })
            .collect();
        IsingTreeModel::from_topology(topology, theta)
    }
}

/// Moment task settings: random even subsets scored per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub subsets: usize,
    pub max_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub q_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub task: Task,
    /// ssTV tolerance; required for the predictive task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Failure probability used for the bound overlay.
    pub delta: f64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses and validates; every error message names a line when one can be
    /// located.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            // serde_json appends its own " at line L column C"
            let msg = e.to_string();
            let msg = msg.rfind(" at line ").map_or(msg.as_str(), |k| &msg[..k]);
            Error::InvalidConfig(format!("line {}, column {}: {msg}", e.line(), e.column()))
        })?;
        cfg.validate().map_err(|(key, msg)| match key_line(text, key) {
            Some(line) => Error::InvalidConfig(format!("line {line}: {key}: {msg}")),
            None => Error::InvalidConfig(format!("{key}: {msg}")),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        self.validate().map_err(|(key, msg)| Error::InvalidConfig(format!("{key}: {msg}")))
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let m = &self.model;
        if m.p < 2 {
            return Err(("p", format!("need at least 2 vertices, got {}", m.p)));
        }
        if !(m.alpha > 0.0 && m.alpha <= m.beta && m.beta.is_finite()) {
            return Err(("alpha", format!("need 0 < alpha <= beta < inf, got {} and {}", m.alpha, m.beta)));
        }
        if m.theta_rule == ThetaRule::Constant && m.alpha != m.beta {
            return Err(("theta_rule", "constant layout needs alpha == beta".into()));
        }
        if self.q_grid.is_empty() {
            return Err(("q_grid", "grid is empty".into()));
        }
        if let Some(q) = self.q_grid.iter().find(|q| !(0.0..0.5).contains(*q)) {
            return Err(("q_grid", format!("crossover {q} outside [0, 0.5)")));
        }
        if self.n_grid.is_empty() {
            return Err(("n_grid", "grid is empty".into()));
        }
        if self.n_grid.contains(&0) {
            return Err(("n_grid", "sample counts must be positive".into()));
        }
        if self.trials == 0 {
            return Err(("trials", "need at least one trial".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(("delta", format!("{} outside (0, 1)", self.delta)));
        }
        match self.task {
            Task::Predictive => match self.eta {
                Some(eta) if eta > 0.0 && eta.is_finite() => {}
                Some(eta) => return Err(("eta", format!("must be positive, got {eta}"))),
                None => return Err(("task", "predictive task needs eta".into())),
            },
            Task::Moments => match &self.moments {
                Some(spec) if spec.subsets >= 1 && spec.max_size >= 2 => {}
                Some(_) => return Err(("moments", "need subsets >= 1 and max_size >= 2".into())),
                None => return Err(("task", "moments task needs a moments section".into())),
            },
            Task::Structure => {}
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }

    /// Structure sweep sized for a laptop: p = 15, 100 trials, 8 x 8 grid.
    pub fn desk_structure() -> Self {
        ExperimentConfig {
            model: ModelSpec {
                tree: TreeKind::Chain,
                p: 15,
                alpha: 0.2f64.atanh(),
                beta: 0.8f64.atanh(),
                theta_rule: ThetaRule::Alternating,
                seed: 1,
            },
            q_grid: (0..8).map(|k| k as f64 * 0.05).collect(),
            n_grid: (0..8).map(|k| 1000 << k).collect(),
            trials: 100,
            task: Task::Structure,
            eta: None,
            delta: 0.1,
            master_seed: 20_240_601,
            moments: None,
            output_path: None,
        }
    }

    /// Predictive sweep sized for a laptop: p = 15, eta = 0.05.
    pub fn desk_predictive() -> Self {
        ExperimentConfig {
            model: ModelSpec { alpha: 0.2, beta: 1.0, ..Self::desk_structure().model },
            task: Task::Predictive,
            eta: Some(0.05),
            ..Self::desk_structure()
        }
    }

    pub fn desk_moments() -> Self {
        ExperimentConfig {
            task: Task::Moments,
            moments: Some(MomentSpec { subsets: 8, max_size: 6 }),
            ..Self::desk_structure()
        }
    }

    /// Full-size structure sweep: p = 100. Takes hours on one core.
    pub fn full_structure() -> Self {
        ExperimentConfig {
            model: ModelSpec { p: 100, ..Self::desk_structure().model },
            q_grid: (0..10).map(|k| k as f64 * 0.04).collect(),
            n_grid: (0..12).map(|k| 1000 << k).collect(),
            ..Self::desk_structure()
        }
    }

    /// Full-size predictive sweep: p = 31, beta = 1, eta = 0.03.
    pub fn full_predictive() -> Self {
        ExperimentConfig {
            model: ModelSpec { p: 31, ..Self::desk_predictive().model },
            eta: Some(0.03),
            q_grid: (0..10).map(|k| k as f64 * 0.04).collect(),
            n_grid: (0..12).map(|k| 1000 << k).collect(),
            ..Self::desk_predictive()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk-structure" => Some(Self::desk_structure()),
            "desk-predictive" => Some(Self::desk_predictive()),
            "desk-moments" => Some(Self::desk_moments()),
            "full-structure" => Some(Self::full_structure()),
            "full-predictive" => Some(Self::full_predictive()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 5] =
        ["desk-structure", "desk-predictive", "desk-moments", "full-structure", "full-predictive"];
}

/// One `(q, n)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub q: f64,
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub error_rate: f64,
    pub stderr: f64,
    /// Structure: mean missed edges. Predictive: mean ssTV. Moments: mean of
    /// the per-trial largest moment error.
    pub mean_metric: f64,
    pub bound_n_sufficient: f64,
    pub bound_n_necessary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapResult {
    pub task: Task,
    pub q_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// Row-major over `(q, n)`.
    pub cells: Vec<CellResult>,
}

impl HeatmapResult {
    pub fn cell(&self, qi: usize, ni: usize) -> &CellResult {
        &self.cells[qi * self.n_grid.len() + ni]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            writeln!(
                out,
                "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.q, c.n, c.trials, c.failures, c.error_rate, c.stderr, c.mean_metric, c.bound_n_sufficient,
                c.bound_n_necessary
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Provenance written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub model: ModelJson,
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    failure: bool,
    metric: f64,
}

fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn bound_overlay(cfg: &ExperimentConfig, model: &IsingTreeModel, q: f64) -> (f64, f64) {
    let inputs = BoundInputs::new(model.vertex_count(), model.alpha(), model.beta(), q, cfg.delta)
        .with_eta(cfg.eta.unwrap_or(0.1));
    let pick = |r: Result<f64>| r.unwrap_or(f64::NAN);
    match cfg.task {
        Task::Structure => {
            (pick(bounds::n_sufficient_structure(&inputs)), pick(bounds::n_necessary_structure(&inputs)))
        }
        Task::Predictive | Task::Moments => {
            (pick(bounds::n_sufficient_predictive(&inputs)), pick(bounds::n_necessary_predictive(&inputs)))
        }
    }
}

fn random_even_subset<R: Rng>(p: usize, max_size: usize, rng: &mut R) -> Vec<usize> {
    let largest = max_size.min(p) / 2;
    let size = 2 * rng.gen_range(1..=largest);
    let mut vertices: Vec<usize> = (0..p).collect();
    vertices.partial_shuffle(rng, size);
    vertices.truncate(size);
    vertices
}

fn run_trial(cfg: &ExperimentConfig, model: &IsingTreeModel, q: f64, n: usize, seed: u64) -> Result<TrialOutcome> {
    let channel = NoiseChannel::new(q)?;
    let corr = sample_noisy_correlations(model, &channel, n, derive_seed(seed, &[0]), derive_seed(seed, &[1]))?;
    let learned = chow_liu(&corr)?;
    match cfg.task {
        Task::Structure => Ok(TrialOutcome {
            failure: &learned != model.topology(),
            metric: missed_edges(&learned, model.topology())? as f64,
        }),
        Task::Predictive => {
            let fitted = fit_distribution(&learned, &corr, q)?;
            let tv = sstv2(model, &fitted)?;
            Ok(TrialOutcome { failure: tv > cfg.eta.expect("validated"), metric: tv })
        }
        Task::Moments => {
            let spec = cfg.moments.as_ref().expect("validated");
            let fitted = fit_distribution(&learned, &corr, q)?;
            let tv = sstv2(model, &fitted)?;
            let mut rng = rng_from_seed(derive_seed(seed, &[2]));
            let mut worst = 0.0f64;
            let mut violated = false;
            for _ in 0..spec.subsets {
                let subset = random_even_subset(model.vertex_count(), spec.max_size, &mut rng);
                let err = (estimate_moment(&learned, &corr, q, &subset)? - exact_moment(model, &subset)?).abs();
                violated |= err > 2.0 * subset.len() as f64 * tv + MOMENT_BOUND_SLACK;
                worst = worst.max(err);
            }
            Ok(TrialOutcome { failure: violated, metric: worst })
        }
    }
}

/// Runs the sweep the config's task names. `workers` overrides both the
/// environment variable and the detected core count.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<HeatmapResult> {
    cfg.check()?;
    let model = cfg.model.build()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start workers: {e}")))?;
    let (nq, nn, trials) = (cfg.q_grid.len(), cfg.n_grid.len(), cfg.trials);
    let jobs: Vec<(usize, usize, usize)> =
        (0..nq).flat_map(|qi| (0..nn).flat_map(move |ni| (0..trials).map(move |t| (qi, ni, t)))).collect();
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(qi, ni, t)| {
                let seed = derive_seed(cfg.master_seed, &[qi as u64, ni as u64, t as u64]);
                run_trial(cfg, &model, cfg.q_grid[qi], cfg.n_grid[ni], seed)
            })
            .collect::<Result<_>>()
    })?;
    let mut cells = Vec::with_capacity(nq * nn);
    for (k, chunk) in outcomes.chunks(trials).enumerate() {
        let (q, n) = (cfg.q_grid[k / nn], cfg.n_grid[k % nn]);
        let failures = chunk.iter().filter(|o| o.failure).count();
        let rate = failures as f64 / trials as f64;
        let (sufficient, necessary) = bound_overlay(cfg, &model, q);
        cells.push(CellResult {
            q,
            n,
            trials,
            failures,
            error_rate: rate,
            stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
            mean_metric: chunk.iter().map(|o| o.metric).sum::<f64>() / trials as f64,
            bound_n_sufficient: sufficient,
            bound_n_necessary: necessary,
        });
    }
    Ok(HeatmapResult { task: cfg.task, q_grid: cfg.q_grid.clone(), n_grid: cfg.n_grid.clone(), cells })
}

fn require_task(cfg: &ExperimentConfig, task: Task) -> Result<()> {
    if cfg.task != task {
        return Err(Error::InvalidConfig(format!("expected task {task:?}, config has {:?}", cfg.task)));
    }
    Ok(())
}

/// Error rate of exact structure recovery per cell.
pub fn run_structure_sweep(cfg: &ExperimentConfig) -> Result<HeatmapResult> {
    require_task(cfg, Task::Structure)?;
    run_sweep(cfg, None)
}

/// Fraction of trials with ssTV above `eta` per cell.
pub fn run_predictive_sweep(cfg: &ExperimentConfig) -> Result<HeatmapResult> {
    require_task(cfg, Task::Predictive)?;
    run_sweep(cfg, None)
}

/// Fraction of trials where some moment error exceeded `2 |V'| ssTV`.
pub fn run_moments_sweep(cfg: &ExperimentConfig) -> Result<HeatmapResult> {
    require_task(cfg, Task::Moments)?;
    run_sweep(cfg, None)
}

/// Writes `heatmap.csv` and `manifest.json` into `dir`, creating it.
pub fn write_outputs(cfg: &ExperimentConfig, result: &HeatmapResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("heatmap.csv"), result.to_csv())?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: cfg.hash(),
        master_seed: cfg.master_seed,
        config: cfg.clone(),
        model: cfg.model.build()?.to_json(),
    };
    let mut file = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut file, &manifest).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(file)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(task: Task) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec { p: 5, ..ExperimentConfig::desk_structure().model },
            q_grid: vec![0.0, 0.2],
            n_grid: vec![50, 400],
            trials: 6,
            task,
            eta: Some(0.1),
            moments: Some(MomentSpec { subsets: 3, max_size: 4 }),
            ..ExperimentConfig::desk_structure()
        }
    }

    #[test]
    fn theta_layouts() {
        let spec = ModelSpec { tree: TreeKind::Chain, p: 4, alpha: 0.1, beta: 0.7, theta_rule: ThetaRule::Alternating, seed: 0 };
        assert_eq!(spec.build().unwrap().theta(), &[0.1, 0.7, 0.1]);
        let uniform = ModelSpec { theta_rule: ThetaRule::Uniform, tree: TreeKind::Random, p: 30, ..spec }.build().unwrap();
        assert!(uniform.theta().iter().all(|t| (0.1..=0.7).contains(&t.abs())));
        let star = ModelSpec { tree: TreeKind::Star, ..spec }.build().unwrap();
        assert_eq!(star.topology().edges(), &[(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn config_errors_name_lines() {
        let text = serde_json::to_string_pretty(&ExperimentConfig::desk_structure()).unwrap();
        let bad = text.replace("\"trials\": 100", "\"trials\": 0");
        let Err(Error::InvalidConfig(msg)) = ExperimentConfig::from_json_str(&bad) else { panic!() };
        assert!(msg.starts_with(&format!("line {}: trials", key_line(&bad, "trials").unwrap())), "{msg}");
        let Err(Error::InvalidConfig(msg)) = ExperimentConfig::from_json_str("{\n  \"model\": 3\n}") else { panic!() };
        assert!(msg.starts_with("line 2"), "{msg}");
        let unknown = text.replacen('{', "{\"colour\": 1,", 1);
        assert!(ExperimentConfig::from_json_str(&unknown).is_err());
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), ExperimentConfig::desk_structure());
    }

    #[test]
    fn task_fields_required() {
        let cfg = ExperimentConfig { eta: None, ..tiny(Task::Predictive) };
        assert!(cfg.check().is_err());
        let cfg = ExperimentConfig { moments: None, ..tiny(Task::Moments) };
        assert!(cfg.check().is_err());
        let cfg = ExperimentConfig { q_grid: vec![0.5], ..tiny(Task::Structure) };
        assert!(cfg.check().is_err());
    }

    #[test]
    fn sweep_is_worker_independent() {
        for task in [Task::Structure, Task::Predictive, Task::Moments] {
            let cfg = tiny(task);
            let one = run_sweep(&cfg, Some(1)).unwrap();
            let three = run_sweep(&cfg, Some(3)).unwrap();
            assert_eq!(one.to_csv(), three.to_csv());
            assert_eq!(one.cells.len(), 4);
        }
    }

    #[test]
    fn moment_bound_holds_in_small_sweep() {
        let result = run_sweep(&tiny(Task::Moments), Some(2)).unwrap();
        assert!(result.cells.iter().all(|c| c.failures == 0));
    }

    #[test]
    fn csv_layout() {
        let result = run_sweep(&tiny(Task::Structure), Some(1)).unwrap();
        let csv = result.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(first[1], "50");
    }

    #[test]
    fn wrong_task_rejected() {
        assert!(run_structure_sweep(&tiny(Task::Predictive)).is_err());
    }
}
