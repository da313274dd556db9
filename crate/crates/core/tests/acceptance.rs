//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every criterion is evaluated and
//! reported even when an earlier one fails. The process exits 0 after
//! reporting; set `SILP_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.
//! Criterion 11 trains eight extra seed runs and only executes with
//! `SILP_ACCEPTANCE_SLOW=1`; otherwise it is reported as SKIP.
//! `SILP_ACCEPTANCE_ONLY=8,9` restricts the run to the listed criteria.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use silp_core::arm::JointConfig;
use silp_core::collision_model::{self, ClassifierHyper};
use silp_core::env::{Action, CollisionMode, EnvConfig, EnvModel, EnvState, ACTION_SCALE};
use silp_core::geom::{self, Aabb, Point};
use silp_core::gp::{self, GpHyper, GpModel};
use silp_core::harness::{self, ExperimentConfig, RunRecord, DISTANCE_GRID};
use silp_core::nn::{Activation, Mlp};
use silp_core::prm::{self, Edge, EdgeChecker, PairMode, Roadmap, Termination};
use silp_core::rl::agent::{bc_loss_grad, critic_loss_grad, ddpg_actor_loss_grad, sac_actor_loss_grad};
use silp_core::rl::returns::{reward_filter, strict_mask};
use silp_core::rl::train::{seeded, stream};
use silp_core::rl::{Algo, Filter, Mode};
use silp_core::demo;

// pinned tolerances
const DEMO_TUPLES: usize = 1000;
const GRAPH_EPISODES: usize = 100;
const GRAD_REL_TOL: f64 = 1e-4;
const GP_DENSE_TOL: f64 = 1e-8;
const TREND_MARGIN: f64 = 0.10;
const SILP_FLOOR: f64 = 0.80;
const GP_COLLISION_RATIO: f64 = 0.7;
const GP_SUCCESS_GAP: f64 = 0.05;
const FILTER_SUCCESS_SLACK: f64 = 0.01;
const FILTER_EPOCHS: (usize, usize) = (50, 300);
const CORPUS_EPISODES: usize = 500;
const CLASSIFIER_SAMPLES: usize = 50_000;
const CLASSIFIER_ACCURACY: f64 = 0.97;
const CLASSIFIER_AUC: f64 = 0.99;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn far_box() -> Aabb {
    Aabb::from_center([10.0, 10.0], [0.2, 0.3])
}

// 1. replay exactness of generated demonstrations
fn demo_replay() -> Outcome {
    let cfg = EnvConfig::default();
    let model = EnvModel::from_config(&cfg);
    let arm = cfg.arm();
    let checker = EdgeChecker {
        arm: &arm,
        inflate: cfg.inflate,
        step_size: cfg.step_size,
    };
    let mut tuples = Vec::new();
    let mut seed = 0;
    while tuples.len() < DEMO_TUPLES {
        let corpus = harness::record_corpus(&cfg, 20, CollisionMode::Learn, seed).expect("corpus");
        let mut rng = seeded(seed, stream::AGENT);
        for ep in &corpus {
            let g = Roadmap::build(&ep.nodes, prm::DEFAULT_NEIGHBOR_DISTANCE, &ep.obstacle, &checker);
            for (s, t) in prm::select_start_goal(&g.nodes, ep.goal, 1, PairMode::Random, &mut rng) {
                let plan = g.plan(s, t, g.len());
                tuples.extend(demo::demonstrations(&model, &g.path_states(&plan)));
            }
        }
        seed += 1;
    }
    let mut inexact = 0;
    let mut out_of_range = 0;
    for t in &tuples {
        if model.transition(&t.s, &t.a) != t.s_next {
            inexact += 1;
        }
        if !t.a.in_range() {
            out_of_range += 1;
        }
    }
    verdict(
        inexact == 0 && out_of_range == 0,
        format!("{} tuples, {inexact} replay mismatches, {out_of_range} out-of-range actions", tuples.len()),
    )
}

// 2. InsertNodes arithmetic
fn insert_nodes() -> Outcome {
    let model = EnvModel::from_config(&EnvConfig::default());
    let s = model.state_at(JointConfig::zeros(3), far_box(), [0.0, 0.0]);
    let s2 = model.state_at(JointConfig::new(vec![0.5, 0.0, 0.0]), far_box(), [0.0, 0.0]);
    let ts = demo::demonstrations(&model, &[s, s2.clone()]);
    let increments: Vec<f64> = ts
        .iter()
        .map(|t| t.s_next.angles.angles()[0] - t.s.angles.angles()[0])
        .collect();
    let ok = ts.len() == 4
        && increments.iter().all(|&d| d == ACTION_SCALE)
        && ts.iter().all(|t| t.a == Action::new(vec![1.0, 0.0, 0.0]))
        && ts.last().map(|t| &t.s_next) == Some(&s2);
    verdict(ok, format!("{} tuples, increments {increments:?}", ts.len()))
}

// 3. edge soundness under an independent finer re-check
fn graph_soundness() -> Outcome {
    let cfg = EnvConfig::default();
    let arm = cfg.arm();
    let checker = EdgeChecker {
        arm: &arm,
        inflate: cfg.inflate,
        step_size: cfg.step_size,
    };
    let d = prm::DEFAULT_NEIGHBOR_DISTANCE;
    let corpus = harness::record_corpus(&cfg, GRAPH_EPISODES, CollisionMode::Learn, 7).expect("corpus");
    let (mut edges, mut too_long, mut colliding) = (0, 0, 0);
    for ep in &corpus {
        let g = Roadmap::build(&ep.nodes, d, &ep.obstacle, &checker);
        for (i, adj) in g.adjacency.iter().enumerate() {
            for e in adj.iter().filter(|e| e.to > i) {
                edges += 1;
                let (a, b) = (&g.nodes[i], &g.nodes[e.to]);
                if geom::distance(a.ee, b.ee) > d {
                    too_long += 1;
                }
                if !geom::edge_collision_free(&arm, &a.angles, &b.angles, &ep.obstacle, cfg.inflate, cfg.step_size / 10.0) {
                    colliding += 1;
                }
            }
        }
    }
    verdict(
        edges > 0 && too_long == 0 && colliding == 0,
        format!("{edges} edges over {GRAPH_EPISODES} episodes, {too_long} longer than d, {colliding} colliding at step_size/10"),
    )
}

// 4. planner on the hand-built detour graph
fn detour_planner() -> Outcome {
    // direct 1-4 is blocked by the obstacle; the only route is 1-2-3-4
    let pts: [Point; 5] = [[0.0, 0.0], [0.1, 0.0], [0.1, 0.1], [0.2, 0.1], [0.2, 0.0]];
    let nodes: Vec<EnvState> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| EnvState {
            angles: JointConfig::new(vec![i as f64 * 0.01, 0.0, 0.0]),
            ee: *p,
            obs: far_box(),
            goal: pts[4],
        })
        .collect();
    let mut adjacency = vec![Vec::new(); 5];
    for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 4)] {
        let length = geom::distance(pts[a], pts[b]);
        adjacency[a].push(Edge { to: b, length });
        adjacency[b].push(Edge { to: a, length });
    }
    let g = Roadmap { nodes, adjacency, d: 0.15 };

    fn simple_paths(g: &Roadmap, cur: usize, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == to {
            out.push(path.clone());
            return;
        }
        for e in &g.adjacency[cur] {
            if !path.contains(&e.to) {
                path.push(e.to);
                simple_paths(g, e.to, to, path, out);
                path.pop();
            }
        }
    }
    let mut all = Vec::new();
    simple_paths(&g, 0, 4, &mut vec![0], &mut all);
    let plan = g.plan(0, 4, g.len());
    verdict(
        all.len() == 1 && plan.path == all[0] && plan.termination == Termination::Goal,
        format!("enumeration {all:?}, planner {:?} ({:?})", plan.path, plan.termination),
    )
}

fn fd_grad(net: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let p = net.params();
    let h = 1e-6;
    let mut probe = net.clone();
    (0..p.len())
        .map(|i| {
            let mut q = p.clone();
            q[i] = p[i] + h;
            probe.set_params(&q).unwrap();
            let up = f(&probe);
            q[i] = p[i] - h;
            probe.set_params(&q).unwrap();
            let down = f(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

// 5. analytic gradients vs central differences
fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (sd, n, b) = (4, 3, 6);
    let tanh_net = |sizes: &[usize], out: Activation, rng: &mut ChaCha8Rng| Mlp::new(sizes, Activation::Tanh, out, rng);
    let s = rand_mat(b, sd, &mut rng);
    let a = rand_mat(b, n, &mut rng).mapv(|v| v * 0.9);
    let y = Array1::from_shape_fn(b, |_| rng.random_range(-2.0..2.0));
    let mut errs = BTreeMap::new();

    let critic = tanh_net(&[sd + n, 8, 1], Activation::Identity, &mut rng);
    let (_, g) = critic_loss_grad(&critic, s.view(), a.view(), &y);
    let fd = fd_grad(&critic, |c| critic_loss_grad(c, s.view(), a.view(), &y).0);
    errs.insert("critic", rel_err(&g.flatten(), &fd));

    let actor = tanh_net(&[sd, 8, n], Activation::Tanh, &mut rng);
    let (_, g) = ddpg_actor_loss_grad(&actor, &critic, s.view());
    let fd = fd_grad(&actor, |p| ddpg_actor_loss_grad(p, &critic, s.view()).0);
    errs.insert("deterministic actor", rel_err(&g.flatten(), &fd));

    let sac_actor = tanh_net(&[sd, 8, 2 * n], Activation::Identity, &mut rng);
    let critics = vec![critic.clone(), tanh_net(&[sd + n, 8, 1], Activation::Identity, &mut rng)];
    let eps = rand_mat(b, n, &mut rng);
    let (_, g, _) = sac_actor_loss_grad(&sac_actor, &critics, s.view(), eps.view(), 0.2);
    let fd = fd_grad(&sac_actor, |p| sac_actor_loss_grad(p, &critics, s.view(), eps.view(), 0.2).0);
    errs.insert("max-entropy actor", rel_err(&g.flatten(), &fd));

    let bc_net = tanh_net(&[4, 8, 3], Activation::Tanh, &mut rng);
    let mask: Vec<bool> = (0..b).map(|i| i % 3 != 0).collect();
    let (_, g) = bc_loss_grad(&bc_net, Algo::Ddpg, s.view(), a.view(), &mask, false);
    let fd = fd_grad(&bc_net, |p| bc_loss_grad(p, Algo::Ddpg, s.view(), a.view(), &mask, false).0);
    errs.insert("bc", rel_err(&g.flatten(), &fd));

    let worst = errs.values().copied().fold(0.0, f64::max);
    verdict(worst < GRAD_REL_TOL, format!("relative errors {errs:?}"))
}

// 6. GP posterior checks
fn gp_suite() -> Outcome {
    let hyper = GpHyper::default();
    let mut notes = Vec::new();
    let mut ok = true;

    // one observation: closed form
    let x1 = vec![0.1, -0.2, 0.3];
    let y1 = -0.7;
    let m = GpModel::fit(vec![x1.clone()], vec![y1], hyper).expect("fit");
    let xq = [0.3, 0.0, 0.1];
    let k1 = hyper.covariance(&x1, &xq);
    let denom = hyper.signal_var + hyper.noise_var;
    let (mean, var) = m.predict(&xq);
    let err1 = (mean - k1 * y1 / denom).abs().max((var - (hyper.signal_var - k1 * k1 / denom)).abs());
    ok &= err1 < 1e-12;
    notes.push(format!("1-point err {err1:.1e}"));

    // dense oracle at n = 20
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() - x[1] * x[2]).collect();
    let m = GpModel::fit(xs.clone(), ys.clone(), hyper).expect("fit");
    let k = nalgebra::DMatrix::from_fn(20, 20, |i, j| hyper.covariance(&xs[i], &xs[j]) + if i == j { hyper.noise_var } else { 0.0 });
    let kinv = k.try_inverse().expect("invertible");
    let yv = nalgebra::DVector::from_vec(ys);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let kq = nalgebra::DVector::from_fn(20, |i, _| hyper.covariance(&xs[i], &q));
        let mean_o = kq.dot(&(&kinv * &yv));
        let var_o = hyper.signal_var - kq.dot(&(&kinv * &kq));
        let (mean, var) = m.predict(&q);
        worst = worst.max((mean - mean_o).abs()).max((var - var_o).abs());
    }
    ok &= worst < GP_DENSE_TOL;
    notes.push(format!("dense n=20 err {worst:.1e}"));

    // prior far from data
    let (mean, var) = m.predict(&[50.0, 50.0, 50.0]);
    let prior_err = mean.abs().max((var - hyper.signal_var).abs());
    ok &= prior_err < 1e-9;
    notes.push(format!("far-field prior err {prior_err:.1e}"));

    // selection probabilities
    let means: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..1.0)).collect();
    let p = gp::selection_probabilities(&means);
    let sum: f64 = p.iter().sum();
    let valid = (sum - 1.0).abs() <= 1e-12 && p.iter().all(|x| (0.0..=1.0).contains(x));
    let uniform = gp::selection_probabilities(&[2.0; 5]).iter().all(|&x| x == 0.2);
    ok &= valid && uniform;
    notes.push(format!("probabilities sum {sum:.15}, uniform fallback {uniform}"));

    verdict(ok, notes.join("; "))
}

// 7. strict-inequality reward filter
fn filter_semantics() -> Outcome {
    let basic = strict_mask(&[0.5, 0.2, 0.1], &[0.2, 0.2, 0.3]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shift_ok = true;
    for _ in 0..200 {
        let l: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r: Vec<f64> = l.iter().map(|x| if rng.random_bool(0.3) { *x } else { rng.random_range(-5.0..5.0) }).collect();
        let c = rng.random_range(0.0..100.0_f64).round();
        let ls: Vec<f64> = l.iter().map(|x| x + c).collect();
        let rs: Vec<f64> = r.iter().map(|x| x + c).collect();
        shift_ok &= strict_mask(&l, &r) == strict_mask(&ls, &rs);
    }
    // policy reproducing the demo actions passes nothing through the full filter
    let cfg = EnvConfig::default();
    let model = EnvModel::from_config(&cfg);
    let task = silp_core::env::sample_task(&cfg, &mut rng).expect("task");
    let s = model.state_at(task.initial, task.obstacle, task.goal);
    let a = Action::new(vec![0.3, -0.2, 0.1]);
    let t = silp_core::env::Transition {
        s_next: model.transition(&s, &a),
        r: model.reward_of_action(&s, &a),
        s: s.clone(),
        a: a.clone(),
        done: false,
        collision: false,
    };
    let (mask, _, _) = reward_filter(&[&t], |ss: &[EnvState]| vec![a.clone(); ss.len()], &model, 0.99, false);
    let ok = basic == vec![true, false, false] && shift_ok && mask == vec![false];
    verdict(ok, format!("greater/equal/less -> {basic:?}, shift invariant {shift_ok}, identical policy mask {mask:?}"))
}

fn rl_base() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seeds = vec![0, 1, 2];
    cfg.eval_episodes = 200;
    cfg.train.epochs = 300;
    cfg.train.algo = Algo::Sac;
    cfg.train.learner.hidden = vec![64, 64];
    cfg
}

struct Runs {
    cache: BTreeMap<String, RunRecord>,
}

impl Runs {
    fn get(&mut self, name: &str, edit: impl FnOnce(&mut ExperimentConfig)) -> &RunRecord {
        if !self.cache.contains_key(name) {
            let mut cfg = rl_base();
            cfg.name = name.into();
            edit(&mut cfg);
            let t = Instant::now();
            let rec = harness::run_experiment(&cfg, None).expect("training run");
            println!(
                "  run {name}: success {:?}, cumulative collisions {:?} ({:.0}s)",
                rec.seeds.iter().map(|s| s.final_success).collect::<Vec<_>>(),
                rec.seeds.iter().map(|s| s.cumulative_collisions).collect::<Vec<_>>(),
                t.elapsed().as_secs_f64()
            );
            self.cache.insert(name.into(), rec);
        }
        &self.cache[name]
    }

    fn plain(&mut self, mode: CollisionMode) -> &RunRecord {
        self.get(&format!("sac-plain-type{}", mode.index()), |c| {
            c.train.mode = Mode::Plain;
            c.train.collision_mode = mode;
        })
    }

    fn silp(&mut self, mode: CollisionMode, filter: Filter, gp: bool) -> &RunRecord {
        self.get(&format!("sac-silp_plus-type{}-{filter:?}-gp{gp}", mode.index()), |c| {
            c.train.mode = Mode::SilpPlus;
            c.train.collision_mode = mode;
            c.train.learner.filter = filter;
            c.train.gp_enabled = gp;
        })
    }
}

// 8. silp_plus beats plain
fn learning_trend(runs: &mut Runs) -> Outcome {
    let plain = runs.plain(CollisionMode::Learn).success_mean;
    let silp = runs.silp(CollisionMode::Learn, Filter::Reward, false).success_mean;
    verdict(
        silp >= plain + TREND_MARGIN && silp >= SILP_FLOOR,
        format!("sac+silp_plus {silp:.3} vs plain sac {plain:.3} (need margin >= {TREND_MARGIN} and silp_plus >= {SILP_FLOOR})"),
    )
}

// 9. GP-guided recovery reduces collisions
fn gp_trend(runs: &mut Runs) -> Outcome {
    let off = runs.silp(CollisionMode::Learn, Filter::Reward, false).clone();
    let on = runs.silp(CollisionMode::Learn, Filter::Reward, true);
    let ratio = on.collisions_mean / off.collisions_mean.max(1.0);
    let gap = (on.success_mean - off.success_mean).abs();
    verdict(
        ratio <= GP_COLLISION_RATIO && gap <= GP_SUCCESS_GAP,
        format!(
            "collisions gp-on {:.0} vs gp-off {:.0} (ratio {ratio:.3}, need <= {GP_COLLISION_RATIO}); success {:.3} vs {:.3} (gap {gap:.3}, need <= {GP_SUCCESS_GAP})",
            on.collisions_mean, off.collisions_mean, on.success_mean, off.success_mean
        ),
    )
}

// 10. reward filter is steadier than the Q filter
fn filter_trend(runs: &mut Runs) -> Outcome {
    let (lo, hi) = FILTER_EPOCHS;
    let reward = runs.silp(CollisionMode::Learn, Filter::Reward, false).clone();
    let q = runs.silp(CollisionMode::Learn, Filter::Q, false);
    let (vr, vq) = (reward.filter_pass_variance(lo, hi), q.filter_pass_variance(lo, hi));
    verdict(
        vr < vq && reward.success_mean >= q.success_mean - FILTER_SUCCESS_SLACK,
        format!(
            "filter-pass variance over epochs {lo}-{hi}: reward {vr:.1} vs q {vq:.1}; success reward {:.3} vs q {:.3}",
            reward.success_mean, q.success_mean
        ),
    )
}

// 11. collision handling types
fn collision_types(runs: &mut Runs) -> Outcome {
    if std::env::var("SILP_ACCEPTANCE_SLOW").as_deref() != Ok("1") {
        return Outcome::Skip("slow criterion; set SILP_ACCEPTANCE_SLOW=1 to run".into());
    }
    let p2 = runs.plain(CollisionMode::Learn).success_mean;
    let p1 = runs.plain(CollisionMode::Skip).success_mean;
    let s2 = runs.silp(CollisionMode::Learn, Filter::Reward, false).success_mean;
    let s1 = runs.silp(CollisionMode::Skip, Filter::Reward, false).success_mean;
    verdict(
        p2 >= p1 && (s2 - s1) < (p2 - p1),
        format!("plain type-2 {p2:.3} vs type-1 {p1:.3}; silp_plus type-2 {s2:.3} vs type-1 {s1:.3}"),
    )
}

// 12. planning success vs neighbor distance
fn distance_sweep() -> Outcome {
    let cfg = EnvConfig::default();
    let corpus = harness::record_corpus(&cfg, CORPUS_EPISODES, CollisionMode::Learn, 0).expect("corpus");
    let stats: Vec<_> = DISTANCE_GRID.iter().map(|&d| harness::planning_stats(&cfg, &corpus, d)).collect();
    let sr_ok = stats.windows(2).all(|w| w[1].success >= w[0].success);
    let steps_ok = stats.windows(2).all(|w| w[1].mean_steps <= w[0].mean_steps);
    let table: Vec<String> = stats
        .iter()
        .map(|s| format!("d={:.2}: sr {:.3} steps {:.2}", s.d, s.success, s.mean_steps))
        .collect();
    verdict(sr_ok && steps_ok, table.join(", "))
}

// 13. learned collision classifier
fn classifier() -> Outcome {
    let cfg = EnvConfig::default();
    let data = collision_model::generate_dataset(&cfg, CLASSIFIER_SAMPLES, &mut seeded(0, stream::TASKS));
    let (train, test) = collision_model::split(&data);
    let (model, hist) = collision_model::train(train, &ClassifierHyper::default(), &mut seeded(0, stream::INIT)).expect("train");
    let m = collision_model::evaluate(&model, test, 0.5);
    verdict(
        m.accuracy >= CLASSIFIER_ACCURACY && m.auc >= CLASSIFIER_AUC,
        format!(
            "{} test samples, {} epochs: accuracy {:.4} (need {CLASSIFIER_ACCURACY}), AUC {:.4} (need {CLASSIFIER_AUC})",
            test.len(),
            hist.len(),
            m.accuracy,
            m.auc
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture or test filters are accepted and ignored
    let only: Option<Vec<usize>> = std::env::var("SILP_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut runs = Runs { cache: BTreeMap::new() };
    type Check<'a> = Box<dyn FnMut(&mut Runs) -> Outcome + 'a>;
    let criteria: Vec<(usize, &str, Check)> = vec![
        (1, "demonstration replay exactness", Box::new(|_| demo_replay())),
        (2, "InsertNodes arithmetic", Box::new(|_| insert_nodes())),
        (3, "roadmap edge soundness", Box::new(|_| graph_soundness())),
        (4, "planner on detour graph", Box::new(|_| detour_planner())),
        (5, "gradient suite", Box::new(|_| gradients())),
        (6, "GP suite", Box::new(|_| gp_suite())),
        (7, "reward-filter semantics", Box::new(|_| filter_semantics())),
        (8, "learning trend", Box::new(learning_trend)),
        (9, "GP exploration trend", Box::new(gp_trend)),
        (10, "filter ablation trend", Box::new(filter_trend)),
        (11, "collision-type ordering", Box::new(collision_types)),
        (12, "planning distance trend", Box::new(|_| distance_sweep())),
        (13, "collision classifier", Box::new(|_| classifier())),
    ];
    let (mut pass, mut fail, mut skip) = (0, 0, 0);
    for (id, name, mut check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let (tag, detail) = match check(&mut runs) {
            Outcome::Pass(d) => {
                pass += 1;
                ("PASS", d)
            }
            Outcome::Fail(d) => {
                fail += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => {
                skip += 1;
                ("SKIP", d)
            }
        };
        println!("criterion {id:>2} {tag} {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64());
    }
    println!("acceptance: {pass} passed, {fail} failed, {skip} skipped");
    if fail > 0 && std::env::var("SILP_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
