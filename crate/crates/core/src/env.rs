//! Goal-conditioned reaching environment for the planar arm.
//!
//! States carry joint angles, the end-effector position, the obstacle box and
//! the goal. The transition model is exact: joint angles move by
//! `ACTION_SCALE * a`, are clipped to the joint limits, and the rest of the
//! state follows from forward kinematics.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, JointConfig};
use crate::error::{Error, Result};
use crate::geom::{self, Aabb, Point};

/// Radians of joint motion per unit action.
pub const ACTION_SCALE: f64 = 0.125;
pub const COLLISION_REWARD: f64 = -10.0;
pub const SUCCESS_REWARD: f64 = 1.0;
const MAX_TASK_REJECTIONS: usize = 10_000;

/// How collisions during training are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum CollisionMode {
    /// Terminate the episode on collision.
    #[serde(rename = "type-0")]
    EarlyReset,
    /// Continue with a replacement action; collision transitions are discarded.
    #[serde(rename = "type-1")]
    Skip,
    /// Continue with a replacement action; collision transitions are kept.
    #[serde(rename = "type-2")]
    #[default]
    Learn,
}

impl CollisionMode {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(CollisionMode::EarlyReset),
            1 => Some(CollisionMode::Skip),
            2 => Some(CollisionMode::Learn),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            CollisionMode::EarlyReset => 0,
            CollisionMode::Skip => 1,
            CollisionMode::Learn => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub angles: JointConfig,
    pub ee: Point,
    pub obs: Aabb,
    pub goal: Point,
}

impl EnvState {
    /// Length of the flattened feature vector for an arm with `n_joints`.
    pub fn feature_len(n_joints: usize) -> usize {
        n_joints + 2 + 4 + 2
    }

    /// `(angles, ee, obs xmin/xmax/ymin/ymax, goal)`.
    pub fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(Self::feature_len(self.angles.len()));
        self.write_features(&mut f);
        f
    }

    pub fn write_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.angles.angles());
        out.extend_from_slice(&self.ee);
        out.extend_from_slice(&self.obs.to_features());
        out.extend_from_slice(&self.goal);
    }

    /// Inverse of [`EnvState::features`].
    pub fn from_features(f: &[f64], n_joints: usize) -> Result<Self> {
        let expected = Self::feature_len(n_joints);
        if f.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: f.len(),
            });
        }
        let n = n_joints;
        let obs = Aabb {
            min: [f[n + 2], f[n + 4]],
            max: [f[n + 3], f[n + 5]],
        };
        if !obs.is_valid() {
            return Err(Error::Parse("obstacle min exceeds max".into()));
        }
        Ok(EnvState {
            angles: JointConfig::new(f[..n].to_vec()),
            ee: [f[n], f[n + 1]],
            obs,
            goal: [f[n + 6], f[n + 7]],
        })
    }

    pub fn goal_distance(&self) -> f64 {
        geom::distance(self.ee, self.goal)
    }
}

/// Normalized joint-velocity command, each component in `[-1, 1]` when valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action(Vec<f64>);

impl Action {
    pub fn new(values: Vec<f64>) -> Self {
        Action(values)
    }

    pub fn zeros(n: usize) -> Self {
        Action(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn in_range(&self) -> bool {
        self.0.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn clamped(&self) -> Action {
        Action(self.0.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Action {
        Action((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: EnvState,
    pub a: Action,
    pub s_next: EnvState,
    pub r: f64,
    pub done: bool,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub initial: JointConfig,
    pub goal: Point,
    pub obstacle: Aabb,
    pub err: f64,
    pub max_steps: usize,
}

impl TaskSpec {
    /// `(d1, d2, d3)`: initial ee to obstacle center, initial ee to goal,
    /// obstacle center to goal.
    pub fn distances(&self, arm: &ArmModel) -> (f64, f64, f64) {
        let ee = arm.end_effector(&self.initial);
        let c = self.obstacle.center();
        (
            geom::distance(ee, c),
            geom::distance(ee, self.goal),
            geom::distance(c, self.goal),
        )
    }
}

/// Static environment settings, shared by every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub link_lengths: Vec<f64>,
    pub joint_limits: Vec<[f64; 2]>,
    /// Region that initial end-effector positions and goals must lie in.
    pub workspace: Aabb,
    /// Region that obstacle centers are sampled from.
    pub obstacle_region: Aabb,
    pub obstacle_size: [f64; 2],
    pub err: f64,
    pub max_steps: usize,
    pub collision_mode: CollisionMode,
    pub inflate: f64,
    pub step_size: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let arm = ArmModel::default();
        EnvConfig {
            link_lengths: arm.link_lengths,
            joint_limits: arm.joint_limits,
            workspace: Aabb::new([-0.9, -0.9], [0.9, 0.9]),
            obstacle_region: Aabb::new([0.35, -0.25], [0.55, 0.25]),
            obstacle_size: [0.2, 0.3],
            err: 0.05,
            max_steps: 50,
            collision_mode: CollisionMode::Learn,
            inflate: geom::DEFAULT_INFLATE,
            step_size: geom::DEFAULT_STEP_SIZE,
        }
    }
}

impl EnvConfig {
    pub fn arm(&self) -> ArmModel {
        ArmModel {
            link_lengths: self.link_lengths.clone(),
            joint_limits: self.joint_limits.clone(),
        }
    }

    pub fn n_joints(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.arm().validate()?;
        if !self.workspace.is_valid() || !self.obstacle_region.is_valid() {
            return Err(Error::Config("workspace and obstacle_region need min <= max".into()));
        }
        if self.obstacle_size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("obstacle_size must be positive".into()));
        }
        if !(self.err.is_finite() && self.err > 0.0) {
            return Err(Error::Config("err must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.inflate.is_finite() && self.inflate >= 0.0) {
            return Err(Error::Config("inflate must be non-negative".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        Ok(())
    }
}

/// Exact transition and reward model of the environment, usable without a
/// running episode.
#[derive(Debug, Clone)]
pub struct EnvModel {
    pub arm: ArmModel,
    pub err: f64,
    pub inflate: f64,
    pub step_size: f64,
}

impl EnvModel {
    pub fn from_config(cfg: &EnvConfig) -> Self {
        EnvModel {
            arm: cfg.arm(),
            err: cfg.err,
            inflate: cfg.inflate,
            step_size: cfg.step_size,
        }
    }

    pub fn state_at(&self, q: JointConfig, obs: Aabb, goal: Point) -> EnvState {
        let ee = self.arm.end_effector(&q);
        EnvState {
            angles: q,
            ee,
            obs,
            goal,
        }
    }

    /// `f_s`: apply `ACTION_SCALE * a` to the joints, clip to limits, recompute
    /// the end effector.
    pub fn transition(&self, s: &EnvState, a: &Action) -> EnvState {
        let mut angles: Vec<f64> = s
            .angles
            .angles()
            .iter()
            .zip(a.values())
            .map(|(q, u)| q + ACTION_SCALE * u)
            .collect();
        self.arm.clip(&mut angles);
        self.state_at(JointConfig::new(angles), s.obs, s.goal)
    }

    /// Whether moving from `s` to `s_next` touches the obstacle, checking
    /// the swept joint-space edge and both endpoints.
    pub fn in_collision(&self, s: &EnvState, s_next: &EnvState) -> bool {
        !geom::edge_collision_free(
            &self.arm,
            &s.angles,
            &s_next.angles,
            &s_next.obs,
            self.inflate,
            self.step_size,
        )
    }

    /// Reward and success flag for arriving at `s_next` from `s`.
    ///
    /// Exactly one of three cases applies: collision (`-10`), success
    /// (`+1`, done), or the negative goal distance. Whether a collision is
    /// terminal depends on the collision mode and is decided by
    /// [`ArmEnv::step`].
    pub fn reward(&self, s: &EnvState, s_next: &EnvState) -> (f64, bool) {
        if self.in_collision(s, s_next) {
            return (COLLISION_REWARD, false);
        }
        let dist = s_next.goal_distance();
        if dist < self.err {
            (SUCCESS_REWARD, true)
        } else {
            (-dist, false)
        }
    }

    /// `f_r(s, a) = reward(s, f_s(s, a))`.
    pub fn reward_of_action(&self, s: &EnvState, a: &Action) -> f64 {
        self.reward(s, &self.transition(s, a)).0
    }
}

/// Result of one [`ArmEnv::step`].
#[derive(Debug, Clone)]
pub struct StepResult {
    /// `s_next` is the attempted state; on collision the arm stays at `s`.
    pub transition: Transition,
    /// The episode has ended (success, early reset or step budget).
    pub episode_over: bool,
}

/// One running episode.
#[derive(Debug, Clone)]
pub struct ArmEnv {
    config: EnvConfig,
    model: EnvModel,
    task: Option<TaskSpec>,
    state: Option<EnvState>,
    steps: usize,
    over: bool,
}

impl ArmEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let model = EnvModel::from_config(&config);
        Ok(ArmEnv {
            config,
            model,
            task: None,
            state: None,
            steps: 0,
            over: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn task(&self) -> Option<&TaskSpec> {
        self.task.as_ref()
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_over(&self) -> bool {
        self.over
    }

    pub fn max_steps(&self) -> usize {
        self.task.as_ref().map_or(self.config.max_steps, |t| t.max_steps)
    }

    pub fn reset(&mut self, task: TaskSpec) -> Result<EnvState> {
        self.model.arm.check_limits(&task.initial)?;
        self.model.err = task.err;
        let s = self.model.state_at(task.initial.clone(), task.obstacle, task.goal);
        self.task = Some(task);
        self.state = Some(s.clone());
        self.steps = 0;
        self.over = false;
        Ok(s)
    }

    /// Applies `a` from the current state.
    ///
    /// On collision the arm does not move. Under [`CollisionMode::EarlyReset`]
    /// the episode ends; otherwise it continues from the pre-collision state.
    /// Every call, including colliding ones, consumes one step of the budget.
    pub fn step(&mut self, a: &Action, mode: CollisionMode) -> Result<StepResult> {
        let s = match (&self.state, self.over) {
            (Some(s), false) => s.clone(),
            _ => return Err(Error::Config("step called on a finished episode".into())),
        };
        debug_assert!(a.in_range(), "action outside [-1, 1]: {a:?}");
        let a = a.clamped();
        let s_next = self.model.transition(&s, &a);
        let (r, mut done) = self.model.reward(&s, &s_next);
        let collision = r == COLLISION_REWARD;
        // a collision is terminal only when it ends the episode
        done |= collision && mode == CollisionMode::EarlyReset;
        self.steps += 1;
        let budget_spent = self.steps >= self.max_steps();
        let episode_over = if collision {
            mode == CollisionMode::EarlyReset || budget_spent
        } else {
            self.state = Some(s_next.clone());
            done || budget_spent
        };
        self.over = episode_over;
        Ok(StepResult {
            transition: Transition {
                s,
                a,
                s_next,
                r,
                done,
                collision,
            },
            episode_over,
        })
    }

    pub fn sample_task<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TaskSpec> {
        sample_task(&self.config, rng)
    }
}

/// Rejection-samples a task with the initial end effector, obstacle center
/// and goal satisfying `d2 > d1 > d3`, a collision-free initial
/// configuration, and a goal that is the end effector of some collision-free
/// configuration.
pub fn sample_task<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Result<TaskSpec> {
    let arm = cfg.arm();
    let region = cfg.obstacle_region;
    for _ in 0..MAX_TASK_REJECTIONS {
        let center = [
            rng.random_range(region.min[0]..=region.max[0]),
            rng.random_range(region.min[1]..=region.max[1]),
        ];
        let obstacle = Aabb::from_center(center, cfg.obstacle_size);
        let initial = arm.random_config(rng);
        let goal_q = arm.random_config(rng);
        let ee = arm.end_effector(&initial);
        let goal = arm.end_effector(&goal_q);
        if !cfg.workspace.contains(ee) || !cfg.workspace.contains(goal) {
            continue;
        }
        let d1 = geom::distance(ee, center);
        let d2 = geom::distance(ee, goal);
        let d3 = geom::distance(center, goal);
        if !(d2 > d1 && d1 > d3) {
            continue;
        }
        if geom::config_in_collision(&arm, &initial, &obstacle, cfg.inflate)
            || geom::config_in_collision(&arm, &goal_q, &obstacle, cfg.inflate)
        {
            continue;
        }
        // the goal must not sit inside the inflated box either
        if obstacle.inflated(cfg.inflate + cfg.err).contains(goal) {
            continue;
        }
        return Ok(TaskSpec {
            initial,
            goal,
            obstacle,
            err: cfg.err,
            max_steps: cfg.max_steps,
        });
    }
    Err(Error::SamplingExhausted(MAX_TASK_REJECTIONS))
}

/// One row of an exported episode trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub q: Vec<f64>,
    pub ee: Point,
    pub r: f64,
    pub done: bool,
    pub collision: bool,
}

impl TraceRow {
    pub fn from_transition(episode: usize, step: usize, t: &Transition) -> Self {
        TraceRow {
            episode,
            step,
            q: t.s_next.angles.angles().to_vec(),
            ee: t.s_next.ee,
            r: t.r,
            done: t.done,
            collision: t.collision,
        }
    }
}

/// Writes `episode,step,q1..qn,ee_x,ee_y,r,done,collision` rows.
pub fn write_trace_csv<W: Write>(out: W, n_joints: usize, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "step".to_string()];
    header.extend((1..=n_joints).map(|i| format!("q{i}")));
    header.extend(["ee_x", "ee_y", "r", "done", "collision"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.episode.to_string(), row.step.to_string()];
        rec.extend(row.q.iter().map(|v| v.to_string()));
        rec.extend([
            row.ee[0].to_string(),
            row.ee[1].to_string(),
            row.r.to_string(),
            row.done.to_string(),
            row.collision.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

pub fn save_trace_csv(path: &Path, n_joints: usize, rows: &[TraceRow]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(f, n_joints, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_task() -> TaskSpec {
        TaskSpec {
            initial: JointConfig::new(vec![0.0, 0.0, 0.0]),
            goal: [0.0, 0.9],
            obstacle: Aabb::from_center([-0.6, -0.6], [0.2, 0.3]),
            err: 0.05,
            max_steps: 50,
        }
    }

    fn env() -> ArmEnv {
        ArmEnv::new(EnvConfig::default()).unwrap()
    }

    #[test]
    fn feature_layout() {
        let mut e = env();
        let s = e.reset(open_task()).unwrap();
        let f = s.features();
        assert_eq!(f.len(), 11);
        assert_eq!(EnvState::feature_len(3), 11);
        assert_eq!(EnvState::from_features(&f, 3).unwrap(), s);
    }

    #[test]
    fn zero_action_is_identity() {
        let mut e = env();
        let s = e.reset(open_task()).unwrap();
        let out = e.step(&Action::zeros(3), CollisionMode::Learn).unwrap();
        assert_eq!(out.transition.s_next.angles, s.angles);
        assert_eq!(out.transition.r, -s.goal_distance());
        assert!(!out.transition.collision);
    }

    #[test]
    fn unit_action_moves_one_eighth_radian() {
        let mut e = env();
        e.reset(open_task()).unwrap();
        let out = e.step(&Action::new(vec![1.0, 0.0, 0.0]), CollisionMode::Learn).unwrap();
        assert_eq!(out.transition.s_next.angles.angles(), &[0.125, 0.0, 0.0]);
    }

    #[test]
    fn collision_under_early_reset_terminates() {
        let mut e = env();
        let mut task = open_task();
        // box just above the straight arm, hit by rotating joint 1 upward
        task.obstacle = Aabb::from_center([0.6, 0.12], [0.2, 0.1]);
        e.reset(task).unwrap();
        let out = e.step(&Action::new(vec![1.0, 0.0, 0.0]), CollisionMode::EarlyReset).unwrap();
        assert!(out.transition.collision);
        assert_eq!(out.transition.r, COLLISION_REWARD);
        assert!(out.transition.done);
        assert!(out.episode_over);
        assert!(e.step(&Action::zeros(3), CollisionMode::EarlyReset).is_err());
    }

    #[test]
    fn collision_under_continuing_modes_is_not_terminal() {
        for mode in [CollisionMode::Skip, CollisionMode::Learn] {
            let mut e = env();
            let mut task = open_task();
            task.obstacle = Aabb::from_center([0.6, 0.12], [0.2, 0.1]);
            let s0 = e.reset(task).unwrap();
            let out = e.step(&Action::new(vec![1.0, 0.0, 0.0]), mode).unwrap();
            assert!(out.transition.collision);
            assert!(!out.transition.done);
            assert!(!out.episode_over);
            assert_eq!(e.state(), Some(&s0));
        }
    }

    #[test]
    fn collision_under_continue_modes_keeps_state() {
        for mode in [CollisionMode::Skip, CollisionMode::Learn] {
            let mut e = env();
            let mut task = open_task();
            task.obstacle = Aabb::from_center([0.6, 0.12], [0.2, 0.1]);
            let s0 = e.reset(task).unwrap();
            let out = e.step(&Action::new(vec![1.0, 0.0, 0.0]), mode).unwrap();
            assert!(out.transition.collision);
            assert!(!out.episode_over);
            assert_eq!(e.state().unwrap(), &s0);
            assert_eq!(e.steps(), 1);
        }
    }

    #[test]
    fn reward_cases() {
        let model = EnvModel::from_config(&EnvConfig::default());
        let s = model.state_at(JointConfig::new(vec![0.0, 0.0, 0.0]), open_task().obstacle, [0.94, 0.0]);
        let (r, done) = model.reward(&s, &s);
        assert_eq!((r, done), (SUCCESS_REWARD, true));
        let far = model.state_at(JointConfig::new(vec![0.0, 0.0, 0.0]), open_task().obstacle, [0.6, 0.0]);
        let (r, done) = model.reward(&far, &far);
        assert!((r + 0.3).abs() < 1e-12);
        assert!(!done);
        let hit = model.state_at(
            JointConfig::new(vec![0.0, 0.0, 0.0]),
            Aabb::from_center([0.45, 0.0], [0.2, 0.3]),
            [0.6, 0.0],
        );
        assert_eq!(model.reward(&hit, &hit), (COLLISION_REWARD, false));
    }

    #[test]
    fn reset_is_deterministic_and_consistent() {
        let mut e = env();
        let a = e.reset(open_task()).unwrap();
        let b = e.reset(open_task()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ee, e.model().arm.end_effector(&open_task().initial));
        assert_eq!(e.steps(), 0);
    }

    #[test]
    fn episode_respects_step_budget() {
        let mut e = env();
        let mut task = open_task();
        task.max_steps = 5;
        e.reset(task).unwrap();
        let mut n = 0;
        loop {
            n += 1;
            if e.step(&Action::new(vec![0.0, 0.1, 0.0]), CollisionMode::Learn).unwrap().episode_over {
                break;
            }
        }
        assert_eq!(n, 5);
    }

    #[test]
    fn sampled_tasks_satisfy_geometry() {
        let cfg = EnvConfig::default();
        let arm = cfg.arm();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let region = cfg.obstacle_region;
        let mut bins = [[0usize; 4]; 4];
        for _ in 0..1000 {
            let t = sample_task(&cfg, &mut rng).unwrap();
            let (d1, d2, d3) = t.distances(&arm);
            assert!(d2 > d1 && d1 > d3);
            assert!(!geom::config_in_collision(&arm, &t.initial, &t.obstacle, cfg.inflate));
            let c = t.obstacle.center();
            assert!(region.contains(c), "center {c:?} outside region");
            let bx = (((c[0] - region.min[0]) / (region.max[0] - region.min[0])) * 4.0).min(3.999) as usize;
            let by = (((c[1] - region.min[1]) / (region.max[1] - region.min[1])) * 4.0).min(3.999) as usize;
            bins[bx][by] += 1;
        }
        // every cell of a 4x4 histogram over the obstacle region is populated
        assert!(bins.iter().flatten().all(|&n| n > 0), "{bins:?}");
    }

    #[test]
    fn infeasible_workspace_reports_exhaustion() {
        let cfg = EnvConfig {
            workspace: Aabb::new([5.0, 5.0], [6.0, 6.0]),
            ..EnvConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_task(&cfg, &mut rng), Err(Error::SamplingExhausted(_))));
    }

    #[test]
    fn trace_csv_header() {
        let mut e = env();
        e.reset(open_task()).unwrap();
        let out = e.step(&Action::zeros(3), CollisionMode::Learn).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, 3, &[TraceRow::from_transition(0, 0, &out.transition)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,step,q1,q2,q3,ee_x,ee_y,r,done,collision\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn stored_transitions_replay_through_model(seed in any::<u64>(), actions in proptest::collection::vec(proptest::collection::vec(-1.0..=1.0f64, 3), 1..30)) {
                let cfg = EnvConfig::default();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut e = ArmEnv::new(cfg.clone()).unwrap();
                let task = e.sample_task(&mut rng).unwrap();
                e.reset(task).unwrap();
                for a in actions {
                    let out = e.step(&Action::new(a), CollisionMode::Learn).unwrap();
                    let t = &out.transition;
                    let mut q: Vec<f64> = t.s.angles.angles().iter().zip(t.a.values()).map(|(q, u)| q + ACTION_SCALE * u).collect();
                    cfg.arm().clip(&mut q);
                    let ee = cfg.arm().forward_kinematics(&JointConfig::new(q)).unwrap().ee;
                    prop_assert!((ee[0] - t.s_next.ee[0]).abs() <= 1e-12 && (ee[1] - t.s_next.ee[1]).abs() <= 1e-12);
                    let cases = [t.r == COLLISION_REWARD, t.r == SUCCESS_REWARD, t.r == -t.s_next.goal_distance()];
                    prop_assert_eq!(cases.iter().filter(|c| **c).count(), 1);
                    if t.collision { prop_assert_eq!(t.r, COLLISION_REWARD); }
                    if t.done && !t.collision { prop_assert_eq!(t.r, SUCCESS_REWARD); }
                    prop_assert!(e.steps() <= cfg.max_steps);
                    if out.episode_over { break; }
                }
            }
        }
    }
}
