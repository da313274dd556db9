//! Experience-based roadmap: nodes are the collision-free states visited in
//! one episode, edges join nodes whose end effectors are within `d` meters
//! and whose joint-space segment passes the subdivision check.
//!
//! Paths are extracted greedily: from the current node, every unvisited
//! neighbor `nn` is scored `dist(current, nn) + dist(nn, goal)` in task space
//! and the cheapest one is appended. There is no backtracking.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ArmEnv, CollisionMode, EnvState, Transition};
use crate::error::{Error, Result};
use crate::geom::{self, Aabb, Point};
use crate::gp::{self, GpHyper, GpModel};

/// Default neighbor distance in meters.
pub const DEFAULT_NEIGHBOR_DISTANCE: f64 = 0.15;

/// Anything that picks an action for a state during data collection.
pub trait Policy {
    fn act(&mut self, s: &EnvState) -> Action;
}

impl<F: FnMut(&EnvState) -> Action> Policy for F {
    fn act(&mut self, s: &EnvState) -> Action {
        self(s)
    }
}

/// Output of [`collect_episode`].
#[derive(Debug, Clone, Default)]
pub struct Episode {
    /// Transitions to be stored for training (per collision-mode rules).
    pub transitions: Vec<Transition>,
    /// Visited collision-free next states, in visiting order.
    pub free_nodes: Vec<EnvState>,
    pub collisions: usize,
    pub steps: usize,
    pub success: bool,
}

/// Rolls out one episode from the environment's current reset state.
///
/// After a collision, replacement actions are drawn (uniformly at random, or
/// from the reward-landscape GP when `gp` is given) until one is
/// collision-free or the step budget runs out. With a GP, the model is refit
/// on every attempted configuration of the episode and its reward each time a
/// collision happens.
pub fn collect_episode<P: Policy + ?Sized, R: Rng + ?Sized>(
    policy: &mut P,
    env: &mut ArmEnv,
    mode: CollisionMode,
    gp: Option<&GpHyper>,
    rng: &mut R,
) -> Result<Episode> {
    let mut ep = Episode::default();
    let n = env.config().n_joints();
    let arm = env.model().arm.clone();
    // (configuration, reward) pairs seen this episode, for the GP
    let mut seen: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut landscape: Option<GpModel> = None;
    let mut recovering = false;

    while !env.is_over() {
        let s = env.state().expect("episode in progress").clone();
        let a = if !recovering {
            policy.act(&s)
        } else if let Some(model) = &landscape {
            gp::guided_action(model, &arm, &s.angles, rng, gp.map_or(64, |h| h.n_samples))
        } else {
            Action::random(n, rng)
        };
        let out = env.step(&a, mode)?;
        let t = out.transition;
        ep.steps += 1;
        if gp.is_some() {
            seen.push((t.s_next.angles.angles().to_vec(), t.r));
        }
        if t.collision {
            ep.collisions += 1;
            recovering = mode != CollisionMode::EarlyReset;
            if let Some(h) = gp {
                let (x, y): (Vec<_>, Vec<_>) = seen.iter().cloned().unzip();
                landscape = Some(GpModel::fit(x, y, *h)?);
            }
            if mode != CollisionMode::Skip {
                ep.transitions.push(t);
            }
        } else {
            recovering = false;
            if t.done {
                ep.success = true;
            }
            ep.free_nodes.push(t.s_next.clone());
            ep.transitions.push(t);
        }
    }
    Ok(ep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    /// Task-space end-effector distance in meters.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roadmap {
    pub nodes: Vec<EnvState>,
    /// `adjacency[i]` lists edges out of node `i`, sorted by target index.
    pub adjacency: Vec<Vec<Edge>>,
    pub d: f64,
}

/// Parameters of the edge subdivision check.
#[derive(Debug, Clone)]
pub struct EdgeChecker<'a> {
    pub arm: &'a crate::arm::ArmModel,
    pub inflate: f64,
    pub step_size: f64,
}

impl EdgeChecker<'_> {
    pub fn edge_free(&self, a: &EnvState, b: &EnvState, obstacle: &Aabb) -> bool {
        geom::edge_collision_free(self.arm, &a.angles, &b.angles, obstacle, self.inflate, self.step_size)
    }
}

/// Drops exact duplicates, keeping first occurrences in order.
pub fn dedup_nodes(nodes: &[EnvState]) -> Vec<EnvState> {
    let mut out: Vec<EnvState> = Vec::with_capacity(nodes.len());
    for n in nodes {
        if !out.iter().any(|m| m == n) {
            out.push(n.clone());
        }
    }
    out
}

impl Roadmap {
    /// Builds the roadmap over `free_nodes`. Nodes are not collision checked;
    /// edges must be within `d` and collision-free.
    pub fn build(free_nodes: &[EnvState], d: f64, obstacle: &Aabb, checker: &EdgeChecker) -> Self {
        let nodes = dedup_nodes(free_nodes);
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let length = geom::distance(nodes[i].ee, nodes[j].ee);
                if length > d {
                    continue;
                }
                if !checker.edge_free(&nodes[i], &nodes[j], obstacle) {
                    continue;
                }
                adjacency[i].push(Edge { to: j, length });
                adjacency[j].push(Edge { to: i, length });
            }
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|e| e.to);
        }
        Roadmap { nodes, adjacency, d }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].iter().any(|e| e.to == j)
    }

    pub fn index_of(&self, s: &EnvState) -> Option<usize> {
        self.nodes.iter().position(|n| n == s)
    }

    /// Greedy path extraction from node `start` toward node `goal`, expanding
    /// at most `budget` nodes. Ties on cost go to the lowest node index.
    pub fn plan(&self, start: usize, goal: usize, budget: usize) -> PlanResult {
        let mut path = vec![start];
        let mut visited = vec![false; self.nodes.len()];
        visited[start] = true;
        if start == goal {
            return PlanResult {
                path,
                reached_goal: true,
                termination: Termination::Goal,
            };
        }
        let goal_ee = self.nodes[goal].ee;
        let mut current = start;
        let mut expansions = 0;
        loop {
            if expansions >= budget {
                return PlanResult {
                    path,
                    reached_goal: false,
                    termination: Termination::Timeout,
                };
            }
            expansions += 1;
            let mut best: Option<(f64, usize)> = None;
            for e in &self.adjacency[current] {
                if visited[e.to] {
                    continue;
                }
                let cost = e.length + geom::distance(self.nodes[e.to].ee, goal_ee);
                // adjacency is sorted by index, so strict < keeps the lowest on ties
                if best.is_none_or(|(c, _)| cost < c) {
                    best = Some((cost, e.to));
                }
            }
            let Some((_, next)) = best else {
                return PlanResult {
                    path,
                    reached_goal: false,
                    termination: Termination::NoNeighbors,
                };
            };
            visited[next] = true;
            path.push(next);
            current = next;
            if next == goal {
                return PlanResult {
                    path,
                    reached_goal: true,
                    termination: Termination::Goal,
                };
            }
        }
    }

    pub fn path_states(&self, plan: &PlanResult) -> Vec<EnvState> {
        plan.path.iter().map(|&i| self.nodes[i].clone()).collect()
    }

    /// JSON export: nodes with `q` and `ee`, undirected edge list, and
    /// optionally a path as node indices.
    pub fn to_json(&self, path: Option<&PlanResult>) -> Result<String> {
        let export = RoadmapExport {
            d: self.d,
            obstacle: self.nodes.first().map(|n| n.obs),
            goal: self.nodes.first().map(|n| n.goal),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeExport {
                    q: n.angles.angles().to_vec(),
                    ee: n.ee,
                })
                .collect(),
            edges: self
                .adjacency
                .iter()
                .enumerate()
                .flat_map(|(i, adj)| adj.iter().filter(move |e| e.to > i).map(move |e| (i, e.to)))
                .collect(),
            path: path.map(|p| p.path.clone()),
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub q: Vec<f64>,
    pub ee: Point,
}

/// On-disk form of a roadmap and an optional path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadmapExport {
    pub d: f64,
    pub obstacle: Option<Aabb>,
    pub goal: Option<Point>,
    pub nodes: Vec<NodeExport>,
    pub edges: Vec<(usize, usize)>,
    pub path: Option<Vec<usize>>,
}

impl RoadmapExport {
    /// Parses and validates an exported roadmap: indices in range, path
    /// steps along listed edges.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: RoadmapExport = serde_json::from_str(text)?;
        let n = r.nodes.len();
        if let Some(&(a, b)) = r.edges.iter().find(|(a, b)| *a >= n || *b >= n) {
            return Err(Error::Parse(format!("edge ({a}, {b}) references a missing node")));
        }
        if let Some(path) = &r.path {
            if path.iter().any(|&i| i >= n) {
                return Err(Error::Parse("path references a missing node".into()));
            }
            for w in path.windows(2) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                if !r.edges.contains(&(a, b)) {
                    return Err(Error::Parse(format!("path step {a} -> {b} is not an edge")));
                }
            }
        }
        Ok(r)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    Timeout,
    NoNeighbors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Node indices into the roadmap, start first.
    pub path: Vec<usize>,
    pub reached_goal: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Uniform random pairs of distinct nodes.
    Random,
    /// First visited node to the node nearest the episode goal.
    #[default]
    Anchored,
}

/// Start/goal node index pairs for planning. Empty when fewer than two
/// nodes exist.
pub fn select_start_goal<R: Rng + ?Sized>(
    nodes: &[EnvState],
    episode_goal: Point,
    n_pairs: usize,
    mode: PairMode,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    if nodes.len() < 2 {
        return Vec::new();
    }
    match mode {
        PairMode::Anchored => {
            let goal = nodes
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    geom::distance(a.ee, episode_goal).total_cmp(&geom::distance(b.ee, episode_goal))
                })
                .map(|(i, _)| i)
                .unwrap();
            vec![(0, goal)]
        }
        PairMode::Random => {
            let n = nodes.len();
            let all = n * (n - 1);
            let k = n_pairs.min(all);
            // ordered pairs (i, j), i != j, encoded as i * (n - 1) + offset
            index::sample(rng, all, k)
                .into_iter()
                .map(|code| {
                    let i = code / (n - 1);
                    let mut j = code % (n - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i, j)
                })
                .collect()
        }
    }
}
