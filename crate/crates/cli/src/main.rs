//! Command-line entry point: training, evaluation, ablations and the
//! collision classifier.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use silp_core::collision_model::{self, ClassifierHyper, CollisionClassifier};
use silp_core::env::{CollisionMode, EnvConfig};
use silp_core::harness::{self, ExperimentConfig, Manifest, Suite};
use silp_core::prm::{self, EdgeChecker, PairMode, Roadmap};
use silp_core::rl::train::{seeded, stream};
use silp_core::rl::{Algo, Filter, Mode};

#[derive(Parser)]
#[command(name = "silp", version, about = "Self-imitation learning with experience-based roadmap planning on a planar arm")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every configured seed.
    Train(TrainArgs),
    /// Evaluate a saved actor checkpoint on freshly sampled tasks.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        /// Config supplying the environment (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run directory for eval.json (default: runs/eval).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an ablation suite: collision_types, gp, filters or distance_sweep.
    Ablate {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learned collision classifier.
    CollisionModel {
        #[command(subcommand)]
        cmd: CollisionCmd,
    },
    /// Record one random-policy episode and export its roadmap and plan as JSON.
    Roadmap {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run directory for roadmap.json (default: runs/roadmap).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = ["ddpg", "sac"])]
    variant: Option<String>,
    #[arg(long, value_parser = ["plain", "demon", "silp_plus"])]
    mode: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    collision_type: Option<u8>,
    #[arg(long)]
    gp: Option<OnOff>,
    #[arg(long, value_parser = ["reward", "q", "none"])]
    filter: Option<String>,
    /// Train this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory (default: runs/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CollisionCmd {
    /// Generate a labeled dataset CSV (dataset.csv in the run directory).
    Gen {
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the first 90% of a dataset; report metrics on the rest.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file with classifier hyperparameters.
        #[arg(long)]
        hyper: Option<PathBuf>,
        /// Run directory for model.bin and metrics.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics and ROC of a model on the held-out 10% of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Run directory for metrics.json and roc.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::from_toml_with_overrides("", std::env::vars())?),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(Some(&args.config))?;
    if let Some(v) = &args.variant {
        cfg.train.algo = v.parse::<Algo>()?;
    }
    if let Some(m) = &args.mode {
        cfg.train.mode = m.parse::<Mode>()?;
    }
    if let Some(c) = args.collision_type {
        cfg.train.collision_mode = CollisionMode::from_index(c).context("collision type")?;
    }
    if let Some(g) = args.gp {
        cfg.train.gp_enabled = matches!(g, OnOff::On);
    }
    if let Some(f) = &args.filter {
        cfg.train.learner.filter = f.parse::<Filter>()?;
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    cfg.validate()?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    let rec = harness::run_experiment(&cfg, Some(&dir))?;
    println!(
        "{}: success {:.3} +- {:.3} over {} seeds, mean cumulative collisions {:.0} ({})",
        rec.name,
        rec.success_mean,
        rec.success_std,
        rec.seeds.len(),
        rec.collisions_mean,
        dir.display()
    );
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Vec<collision_model::CollisionSample>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(collision_model::read_dataset_csv(std::io::BufReader::new(f))?)
}

fn run_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, files: &[&str]) -> Result<()> {
    let mut m = Manifest::new(command, cfg);
    m.files = files.iter().map(|f| f.to_string()).collect();
    m.write(dir)?;
    Ok(())
}

fn write_metrics(dir: &Path, m: &collision_model::ClassifierMetrics) -> Result<()> {
    harness::write_json(&dir.join("metrics.json"), m)?;
    let mut text = String::from("fpr,tpr\n");
    for (f, t) in &m.roc {
        text.push_str(&format!("{f},{t}\n"));
    }
    fs::write(dir.join("roc.csv"), text)?;
    Ok(())
}

fn collision(cmd: CollisionCmd) -> Result<()> {
    match cmd {
        CollisionCmd::Gen { n, seed, config, out } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            let cfg = load_config(config.as_deref())?;
            let dir = run_dir(&out)?;
            let data = collision_model::generate_dataset(&cfg.env, n, &mut seeded(seed, stream::TASKS));
            let path = dir.join("dataset.csv");
            let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            collision_model::write_dataset_csv(std::io::BufWriter::new(f), &data)?;
            write_manifest(dir, "collision-model gen", &cfg, &["dataset.csv"])?;
            let pos = data.iter().filter(|s| s.label).count();
            println!("wrote {n} samples ({pos} colliding) to {}", path.display());
        }
        CollisionCmd::Train { data, seed, hyper, out } => {
            let hyper: ClassifierHyper = match hyper {
                Some(p) => ClassifierHyper::from_toml(&fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => ClassifierHyper::default(),
            };
            let all = read_dataset(&data)?;
            let dir = run_dir(&out)?;
            let (tr, te) = collision_model::split(&all);
            let (model, hist) = collision_model::train(tr, &hyper, &mut seeded(seed, stream::INIT))?;
            fs::write(dir.join("model.bin"), model.to_bytes())?;
            let m = collision_model::evaluate(&model, te, 0.5);
            write_metrics(dir, &m)?;
            write_manifest(dir, "collision-model train", &ExperimentConfig::default(), &["model.bin", "metrics.json", "roc.csv"])?;
            println!(
                "trained {} epochs; held-out accuracy {:.4}, AUC {:.4}; model saved under {}",
                hist.len(),
                m.accuracy,
                m.auc,
                dir.display()
            );
        }
        CollisionCmd::Eval { model, data, threshold, out } => {
            let bytes = fs::read(&model).with_context(|| format!("reading {}", model.display()))?;
            let model = CollisionClassifier::from_bytes(&bytes)?;
            let all = read_dataset(&data)?;
            let dir = run_dir(&out)?;
            let (_, te) = collision_model::split(&all);
            let m = collision_model::evaluate(&model, te, threshold);
            println!(
                "accuracy {:.4} recall {:.4} precision {:.4} specificity {:.4} AUC {:.4}",
                m.accuracy, m.recall, m.precision, m.specificity, m.auc
            );
            write_metrics(dir, &m)?;
            write_manifest(dir, "collision-model eval", &ExperimentConfig::default(), &["metrics.json", "roc.csv"])?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport<'a> {
    checkpoint: &'a Path,
    episodes: usize,
    seed: u64,
    success_rate: f64,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Command::Train(args) => train(args)?,
        Command::Eval { checkpoint, episodes, config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let actor = harness::load_actor(&checkpoint, cfg.env.n_joints())?;
            let sr = harness::evaluate_actor(&actor, &cfg.env, episodes, &mut seeded(seed, stream::EVAL))?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join("eval"));
            let dir = run_dir(&dir)?;
            let report = EvalReport {
                checkpoint: &checkpoint,
                episodes,
                seed,
                success_rate: sr,
            };
            harness::write_json(&dir.join("eval.json"), &report)?;
            write_manifest(dir, "eval", &cfg, &["eval.json"])?;
            println!("success rate {sr:.4} over {episodes} episodes");
        }
        Command::Ablate { suite, config, out } => {
            let suite: Suite = suite.parse()?;
            let cfg = load_config(config.as_deref())?;
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("ablate-{}", harness::suite_name(suite))));
            let rows = harness::ablation_suite(&cfg, suite, Some(&dir))?;
            for r in rows {
                info!("{r:?}");
            }
            println!("wrote {}", dir.join(format!("ablation_{}.csv", harness::suite_name(suite))).display());
        }
        Command::CollisionModel { cmd } => collision(cmd)?,
        Command::Roadmap { config, seed, out } => {
            let dir = out.unwrap_or_else(|| PathBuf::from("runs").join("roadmap"));
            roadmap(config.as_deref(), seed, run_dir(&dir)?)?
        }
    }
    Ok(())
}

fn roadmap(config: Option<&Path>, seed: u64, dir: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let env: &EnvConfig = &cfg.env;
    let ep = harness::record_corpus(env, 1, cfg.train.collision_mode, seed)?.remove(0);
    let arm = env.arm();
    let checker = EdgeChecker {
        arm: &arm,
        inflate: env.inflate,
        step_size: env.step_size,
    };
    let g = Roadmap::build(&ep.nodes, cfg.train.neighbor_distance, &ep.obstacle, &checker);
    let pairs = prm::select_start_goal(&g.nodes, ep.goal, 1, PairMode::Anchored, &mut seeded(seed, stream::AGENT));
    let plan = pairs.first().map(|&(s, t)| g.plan(s, t, g.len()));
    let path = dir.join("roadmap.json");
    fs::write(&path, g.to_json(plan.as_ref())?).with_context(|| format!("writing {}", path.display()))?;
    write_manifest(dir, "roadmap", &cfg, &["roadmap.json"])?;
    println!("roadmap with {} nodes and {} edges written to {}", g.len(), g.edge_count(), path.display());
    Ok(())
}
