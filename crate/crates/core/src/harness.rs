//! Experiment configuration, orchestration, evaluation and reporting.
//!
//! Configuration is a TOML file deserialized into [`ExperimentConfig`].
//! Any field can be overridden from the environment with variables named
//! `SILP__<SECTION>__<FIELD>` (double underscores separate path segments,
//! case-insensitive), for example `SILP__TRAIN__EPOCHS=20` or
//! `SILP__SEEDS=[1,2]`. Values are parsed as TOML literals and fall back to
//! plain strings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ArmEnv, CollisionMode, EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::prm::{self, EdgeChecker, PairMode, Roadmap};
use crate::rl::agent::ActorPolicy;
use crate::rl::train::{seeded, stream};
use crate::rl::{train, EpochMetrics, Filter, Mode, TrainConfig};

/// Prefix of environment-variable overrides.
pub const ENV_PREFIX: &str = "SILP__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub eval_episodes: usize,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seeds: vec![0, 1, 2],
            eval_episodes: 200,
            env: EnvConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        self.env.validate()?;
        self.train.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Parses `text`, applies overrides from `vars` and validates.
    pub fn from_toml_with_overrides<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut tree: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        apply_overrides(&mut tree, vars)?;
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, std::env::vars())
    }

    /// Canonical TOML form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Sets `SILP__A__B=v` style overrides into a TOML tree.
pub fn apply_overrides<I, K, V>(tree: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (k, v) in vars {
        let Some(path) = k.as_ref().strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let keys: Vec<String> = path.split("__").map(str::to_lowercase).collect();
        if keys.iter().any(String::is_empty) {
            return Err(Error::Config(format!("malformed override `{}`", k.as_ref())));
        }
        let value = parse_literal(v.as_ref());
        let mut table = &mut *tree;
        for key in &keys[..keys.len() - 1] {
            let entry = table
                .entry(key.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{}` descends into a non-table", k.as_ref())))?;
        }
        table.insert(keys[keys.len() - 1].clone(), value);
    }
    Ok(())
}

fn parse_literal(v: &str) -> toml::Value {
    let wrapped = format!("x = {v}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("x").unwrap_or_else(|| toml::Value::String(v.into())),
        Err(_) => toml::Value::String(v.into()),
    }
}

/// Success rate of `policy` over `n_episodes` freshly sampled tasks.
///
/// An episode succeeds when the goal is reached; a collision ends it as a
/// failure. Zero episodes give 0.0.
pub fn evaluate_policy<P, R>(mut policy: P, env_cfg: &EnvConfig, n_episodes: usize, rng: &mut R) -> Result<f64>
where
    P: FnMut(&EnvState) -> Action,
    R: Rng + ?Sized,
{
    if n_episodes == 0 {
        warn!("evaluation with zero episodes; reporting 0.0");
        return Ok(0.0);
    }
    let mut env = ArmEnv::new(env_cfg.clone())?;
    let mut wins = 0;
    for _ in 0..n_episodes {
        let task = env.sample_task(rng)?;
        env.reset(task)?;
        while !env.is_over() {
            let s = env.state().expect("running").clone();
            let out = env.step(&policy(&s), CollisionMode::EarlyReset)?;
            if out.episode_over && out.transition.done && !out.transition.collision {
                wins += 1;
            }
        }
    }
    Ok(wins as f64 / n_episodes as f64)
}

pub fn evaluate_actor<R: Rng + ?Sized>(actor: &ActorPolicy, env_cfg: &EnvConfig, n: usize, rng: &mut R) -> Result<f64> {
    evaluate_policy(|s| actor.act(s), env_cfg, n, rng)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_success: f64,
    pub cumulative_collisions: usize,
    pub rows: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub seeds: Vec<SeedResult>,
    pub success_mean: f64,
    pub success_std: f64,
    pub collisions_mean: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub final_success: Vec<f64>,
    pub success_mean: f64,
    pub success_std: f64,
    pub cumulative_collisions: Vec<usize>,
    pub collisions_mean: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let rows: Vec<EpochMetrics> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.windows(2).any(|w| w[0].epoch >= w[1].epoch) {
        return Err(Error::Parse("metrics rows must be strictly increasing in epoch".into()));
    }
    if rows.iter().any(|r| !(0.0..=1.0).contains(&r.success_rate)) {
        return Err(Error::Parse("success_rate outside [0, 1]".into()));
    }
    Ok(rows)
}

fn save_csv(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(std::io::BufWriter::new(f), rows)
}

/// Trains and evaluates every seed of `cfg`. When `out_dir` is given,
/// per-seed metrics CSVs, actor checkpoints, `summary.json` and
/// `manifest.json` are written there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let mut manifest = Manifest::new("train", cfg);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        fs::write(dir.join("config.toml"), cfg.to_toml()?).map_err(|e| Error::io(dir, e))?;
        manifest.files.push("config.toml".into());
    }
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        info!("{}: training seed {seed}", cfg.name);
        let (trainer, rows) = train(cfg.env.clone(), cfg.train.clone(), seed, |m| {
            if m.epoch % 10 == 0 {
                info!("seed {seed} epoch {} train success {:.2}", m.epoch, m.success_rate);
            }
        })?;
        let actor = &trainer.agent.policy;
        let final_success = evaluate_actor(actor, &cfg.env, cfg.eval_episodes, &mut seeded(seed, stream::EVAL))?;
        info!("seed {seed}: evaluation success {final_success:.3}");
        if let Some(dir) = out_dir {
            let csv_name = format!("metrics_seed{seed}.csv");
            save_csv(&dir.join(&csv_name), &rows)?;
            let ckpt = format!("actor_seed{seed}.bin");
            fs::write(dir.join(&ckpt), actor.net.to_bytes()).map_err(|e| Error::io(dir.join(&ckpt), e))?;
            manifest.files.extend([csv_name, ckpt]);
        }
        seeds.push(SeedResult {
            seed,
            final_success,
            cumulative_collisions: rows.last().map_or(0, |r| r.cumulative_collisions),
            rows,
        });
    }
    let finals: Vec<f64> = seeds.iter().map(|s| s.final_success).collect();
    let (success_mean, success_std) = mean_std(&finals);
    let cols: Vec<f64> = seeds.iter().map(|s| s.cumulative_collisions as f64).collect();
    let record = RunRecord {
        name: cfg.name.clone(),
        success_mean,
        success_std,
        collisions_mean: mean_std(&cols).0,
        wall_seconds: start.elapsed().as_secs_f64(),
        seeds,
    };
    if let Some(dir) = out_dir {
        write_json(&dir.join("summary.json"), &record.summary())?;
        manifest.files.push("summary.json".into());
        manifest.write(dir)?;
    }
    Ok(record)
}

impl RunRecord {
    pub fn summary(&self) -> Summary {
        Summary {
            name: self.name.clone(),
            final_success: self.seeds.iter().map(|s| s.final_success).collect(),
            success_mean: self.success_mean,
            success_std: self.success_std,
            cumulative_collisions: self.seeds.iter().map(|s| s.cumulative_collisions).collect(),
            collisions_mean: self.collisions_mean,
            wall_seconds: self.wall_seconds,
        }
    }

    /// Across-seed variance of `filter_pass` per epoch, averaged over epochs
    /// `from..=to` (1-based, clipped to what was recorded).
    pub fn filter_pass_variance(&self, from: usize, to: usize) -> f64 {
        let epochs = self.seeds.iter().map(|s| s.rows.len()).min().unwrap_or(0);
        let (lo, hi) = (from.max(1), to.min(epochs));
        if lo > hi {
            return 0.0;
        }
        let mut total = 0.0;
        for e in lo..=hi {
            let xs: Vec<f64> = self.seeds.iter().map(|s| s.rows[e - 1].filter_pass as f64).collect();
            total += mean_std(&xs).1.powi(2);
        }
        total / (hi - lo + 1) as f64
    }
}

/// Loads an actor checkpoint written by [`run_experiment`].
pub fn load_actor(path: &Path, n_joints: usize) -> Result<ActorPolicy> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ActorPolicy::from_net(Mlp::from_bytes(&bytes)?, n_joints)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    CollisionTypes,
    Gp,
    Filters,
    DistanceSweep,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collision_types" => Ok(Suite::CollisionTypes),
            "gp" => Ok(Suite::Gp),
            "filters" => Ok(Suite::Filters),
            "distance_sweep" => Ok(Suite::DistanceSweep),
            _ => Err(Error::Config(format!(
                "unknown suite `{s}` (expected collision_types, gp, filters or distance_sweep)"
            ))),
        }
    }
}

/// One row of an ablation comparison table. Fields that do not apply to a
/// suite are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub suite: Suite,
    pub label: String,
    pub success_mean: Option<f64>,
    pub success_std: Option<f64>,
    pub collisions_mean: Option<f64>,
    pub filter_pass_variance: Option<f64>,
    pub d: Option<f64>,
    pub plan_success: Option<f64>,
    pub plan_steps: Option<f64>,
    pub seconds: f64,
}

impl AblationRow {
    fn from_record(suite: Suite, label: &str, rec: &RunRecord, filter_window: (usize, usize)) -> Self {
        AblationRow {
            suite,
            label: label.into(),
            success_mean: Some(rec.success_mean),
            success_std: Some(rec.success_std),
            collisions_mean: Some(rec.collisions_mean),
            filter_pass_variance: (suite == Suite::Filters)
                .then(|| rec.filter_pass_variance(filter_window.0, filter_window.1)),
            d: None,
            plan_success: None,
            plan_steps: None,
            seconds: rec.wall_seconds,
        }
    }
}

/// Variants of `base` run by a learning suite, with labels.
pub fn suite_variants(base: &ExperimentConfig, suite: Suite) -> Vec<(String, ExperimentConfig)> {
    let with = |label: String, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut c = base.clone();
        c.name = format!("{}-{label}", base.name);
        f(&mut c);
        (label, c)
    };
    match suite {
        Suite::CollisionTypes => {
            let mut out = Vec::new();
            for mode in [Mode::Plain, Mode::SilpPlus] {
                for ct in [CollisionMode::EarlyReset, CollisionMode::Skip, CollisionMode::Learn] {
                    let label = format!("{}-type{}", mode_label(mode), ct.index());
                    out.push(with(label, &|c| {
                        c.train.mode = mode;
                        c.train.collision_mode = ct;
                    }));
                }
            }
            out
        }
        Suite::Gp => [false, true]
            .into_iter()
            .map(|on| with(format!("gp-{}", if on { "on" } else { "off" }), &|c| c.train.gp_enabled = on))
            .collect(),
        Suite::Filters => [Filter::Reward, Filter::Q]
            .into_iter()
            .map(|f| {
                with(format!("filter-{}", if f == Filter::Reward { "reward" } else { "q" }), &|c| {
                    c.train.mode = Mode::SilpPlus;
                    c.train.learner.filter = f;
                })
            })
            .collect(),
        Suite::DistanceSweep => Vec::new(),
    }
}

fn mode_label(m: Mode) -> &'static str {
    match m {
        Mode::Plain => "plain",
        Mode::Demon => "demon",
        Mode::SilpPlus => "silp_plus",
    }
}

/// Neighbor distances of the distance sweep, in meters.
pub const DISTANCE_GRID: [f64; 7] = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40];

/// A recorded episode for offline planning studies.
#[derive(Debug, Clone)]
pub struct RecordedEpisode {
    pub nodes: Vec<EnvState>,
    pub goal: [f64; 2],
    pub obstacle: crate::geom::Aabb,
}

/// Episodes of a uniformly random policy on sampled tasks; the reset state
/// is included as the first node.
pub fn record_corpus(env_cfg: &EnvConfig, n: usize, mode: CollisionMode, seed: u64) -> Result<Vec<RecordedEpisode>> {
    let mut env = ArmEnv::new(env_cfg.clone())?;
    let mut rng = seeded(seed, stream::TASKS);
    let mut act_rng = seeded(seed, stream::AGENT);
    let nj = env_cfg.n_joints();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let task = env.sample_task(&mut rng)?;
        let (goal, obstacle) = (task.goal, task.obstacle);
        let s0 = env.reset(task)?;
        let mut policy = |_: &EnvState| Action::random(nj, &mut act_rng);
        let ep = prm::collect_episode(&mut policy, &mut env, mode, None, &mut rng)?;
        let mut nodes = vec![s0];
        nodes.extend(ep.free_nodes);
        out.push(RecordedEpisode { nodes, goal, obstacle });
    }
    Ok(out)
}

/// Planning statistics at one neighbor distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningStats {
    pub d: f64,
    /// Fraction of anchored plans that reached their target node.
    pub success: f64,
    /// Mean number of edges in successful plans.
    pub mean_steps: f64,
}

pub fn planning_stats(env_cfg: &EnvConfig, corpus: &[RecordedEpisode], d: f64) -> PlanningStats {
    let arm = env_cfg.arm();
    let checker = EdgeChecker {
        arm: &arm,
        inflate: env_cfg.inflate,
        step_size: env_cfg.step_size,
    };
    let mut rng = seeded(0, stream::TASKS);
    let (mut tried, mut ok, mut steps) = (0usize, 0usize, 0usize);
    for ep in corpus {
        let g = Roadmap::build(&ep.nodes, d, &ep.obstacle, &checker);
        for (s, t) in prm::select_start_goal(&g.nodes, ep.goal, 1, PairMode::Anchored, &mut rng) {
            tried += 1;
            let p = g.plan(s, t, g.len());
            if p.reached_goal {
                ok += 1;
                steps += p.path.len() - 1;
            }
        }
    }
    PlanningStats {
        d,
        success: if tried == 0 { 0.0 } else { ok as f64 / tried as f64 },
        mean_steps: if ok == 0 { 0.0 } else { steps as f64 / ok as f64 },
    }
}

/// Runs one ablation suite and writes `ablation_<suite>.csv` (plus each
/// variant's run directory) under `out_dir` when given.
pub fn ablation_suite(base: &ExperimentConfig, suite: Suite, out_dir: Option<&Path>) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    if suite == Suite::DistanceSweep {
        let start = Instant::now();
        let corpus = record_corpus(&base.env, 500, base.train.collision_mode, base.seeds[0])?;
        for d in DISTANCE_GRID {
            let st = planning_stats(&base.env, &corpus, d);
            rows.push(AblationRow {
                suite,
                label: format!("d={d:.2}"),
                success_mean: None,
                success_std: None,
                collisions_mean: None,
                filter_pass_variance: None,
                d: Some(d),
                plan_success: Some(st.success),
                plan_steps: Some(st.mean_steps),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    } else {
        let window = (50.min(base.train.epochs), base.train.epochs);
        for (label, cfg) in suite_variants(base, suite) {
            let dir: Option<PathBuf> = out_dir.map(|d| d.join(&label));
            let rec = run_experiment(&cfg, dir.as_deref())?;
            rows.push(AblationRow::from_record(suite, &label, &rec, window));
        }
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("ablation_{}.csv", suite_name(suite)));
        let mut w = csv::Writer::from_path(&path)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let mut manifest = Manifest::new(&format!("ablate --suite {}", suite_name(suite)), base);
        manifest.files.push(format!("ablation_{}.csv", suite_name(suite)));
        manifest.write(dir)?;
    }
    Ok(rows)
}

pub fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::CollisionTypes => "collision_types",
        Suite::Gp => "gp",
        Suite::Filters => "filters",
        Suite::DistanceSweep => "distance_sweep",
    }
}
