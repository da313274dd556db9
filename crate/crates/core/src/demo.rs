//! Turning planned node sequences into demonstration transitions.
//!
//! Consecutive path nodes are usually farther apart than one action can move
//! the arm. The joint difference is converted to an action by the inverse
//! model; while that action leaves `[-1, 1]` it is halved, and the resulting
//! sub-action is applied repeatedly until the segment is covered.

use crate::buffer::TransitionBuffer;
use crate::env::{Action, EnvModel, EnvState, Transition, ACTION_SCALE};

/// Default demonstration buffer capacity.
pub const DEMO_CAPACITY: usize = 100_000;

pub type DemoBuffer = TransitionBuffer;

/// `(q' - q) / ACTION_SCALE`, unclamped.
pub fn inverse_action(s: &EnvState, s_next: &EnvState) -> Action {
    Action::new(
        s.angles
            .angles()
            .iter()
            .zip(s_next.angles.angles())
            .map(|(a, b)| (b - a) / ACTION_SCALE)
            .collect(),
    )
}

/// Number of halvings that bring `a` into range.
pub fn halvings(a: &Action) -> u32 {
    let mut m = a.max_abs();
    let mut h = 0;
    while m > 1.0 {
        m /= 2.0;
        h += 1;
    }
    h
}

/// Halves `a` until it is in range and applies it once from `s`.
///
/// Returns the landing state and the in-range sub-action.
pub fn insert_nodes(model: &EnvModel, s: &EnvState, a: &Action) -> (EnvState, Action) {
    debug_assert!(!a.in_range(), "insert_nodes called with an in-range action");
    let scale = 0.5f64.powi(halvings(a) as i32);
    let half = Action::new(a.values().iter().map(|v| v * scale).collect());
    (model.transition(s, &half), half)
}

/// Converts one segment `s -> s_next` into transitions appended to `out`.
/// Returns the state actually reached, which the caller uses as the start of
/// the next segment so that the chain stays continuous.
fn segment(model: &EnvModel, s: &EnvState, s_next: &EnvState, out: &mut Vec<Transition>) -> EnvState {
    let a = inverse_action(s, s_next);
    let reps = 1usize << halvings(&a);
    let mut cur = s.clone();
    for k in 0..reps {
        // recompute from the current state so rounding never accumulates
        let a_k = if k == 0 && reps > 1 {
            insert_nodes(model, &cur, &a).1
        } else if reps == 1 {
            a.clone()
        } else {
            let rem = inverse_action(&cur, s_next);
            let left = (reps - k) as f64;
            Action::new(rem.values().iter().map(|v| (v / left).clamp(-1.0, 1.0)).collect())
        };
        let next = model.transition(&cur, &a_k);
        let (r, done) = model.reward(&cur, &next);
        out.push(Transition {
            s: cur,
            a: a_k,
            s_next: next.clone(),
            r,
            done,
            collision: r == crate::env::COLLISION_REWARD,
        });
        cur = next;
        if done {
            break;
        }
    }
    cur
}

/// Demonstration transitions along `path` (states in visiting order).
///
/// Generation stops at the first terminal transition, so no demonstration
/// continues from a goal or collision state.
pub fn demonstrations(model: &EnvModel, path: &[EnvState]) -> Vec<Transition> {
    let mut out = Vec::new();
    if path.len() < 2 {
        return out;
    }
    let mut cur = path[0].clone();
    for target in &path[1..] {
        cur = segment(model, &cur, target, &mut out);
        if out.last().is_some_and(|t| t.done) {
            break;
        }
    }
    out
}

/// Pushes the demonstrations for `path` into `buffer`; returns how many.
pub fn generate_demonstrations(model: &EnvModel, path: &[EnvState], buffer: &mut DemoBuffer) -> usize {
    let demos = demonstrations(model, path);
    let n = demos.len();
    buffer.extend(demos);
    n
}
