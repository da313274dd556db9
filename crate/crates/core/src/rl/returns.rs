//! Model-evaluated one-step returns and the per-sample BC gates.

use crate::env::{Action, EnvModel, EnvState, Transition};

/// `mask[i] = lhs[i] > rhs[i]`.
pub fn strict_mask(lhs: &[f64], rhs: &[f64]) -> Vec<bool> {
    lhs.iter().zip(rhs).map(|(a, b)| a > b).collect()
}

/// One-step return of taking `a` in `s` and then following `policy`.
///
/// When `r_known` is given (a stored demonstration), it replaces the
/// model-evaluated first reward. With `truncate_on_done`, a terminal first
/// step contributes no lookahead.
pub fn one_step_return<P: Fn(&EnvState) -> Action>(
    model: &EnvModel,
    policy: P,
    s: &EnvState,
    a: &Action,
    r_known: Option<(f64, bool)>,
    gamma: f64,
    truncate_on_done: bool,
) -> f64 {
    let s1 = model.transition(s, a);
    let (r0, done) = r_known.unwrap_or_else(|| model.reward(s, &s1));
    if truncate_on_done && done {
        return r0;
    }
    r0 + gamma * model.reward_of_action(&s1, &policy(&s1))
}

/// Demo-versus-policy comparison of one-step returns.
///
/// `policy` maps a batch of states to deterministic actions; it is called
/// three times (for `s_i`, `s_next_i` and the policy's own successor).
/// Returns the mask and both return vectors.
pub fn reward_filter<P: Fn(&[EnvState]) -> Vec<Action>>(
    demos: &[&Transition],
    policy: P,
    model: &EnvModel,
    gamma: f64,
    truncate_on_done: bool,
) -> (Vec<bool>, Vec<f64>, Vec<f64>) {
    let s: Vec<EnvState> = demos.iter().map(|t| t.s.clone()).collect();
    let s_next: Vec<EnvState> = demos.iter().map(|t| t.s_next.clone()).collect();
    let pi_s = policy(&s);
    let pi_next = policy(&s_next);
    let s_hat: Vec<EnvState> = s.iter().zip(&pi_s).map(|(s, a)| model.transition(s, a)).collect();
    let pi_hat = policy(&s_hat);

    let mut r_demo = Vec::with_capacity(demos.len());
    let mut r_pi = Vec::with_capacity(demos.len());
    for i in 0..demos.len() {
        let t = demos[i];
        let mut rd = t.r;
        if !(truncate_on_done && t.done) {
            rd += gamma * model.reward_of_action(&t.s_next, &pi_next[i]);
        }
        let (r0, done0) = model.reward(&s[i], &s_hat[i]);
        let mut rp = r0;
        if !(truncate_on_done && done0) {
            rp += gamma * model.reward_of_action(&s_hat[i], &pi_hat[i]);
        }
        r_demo.push(rd);
        r_pi.push(rp);
    }
    (strict_mask(&r_demo, &r_pi), r_demo, r_pi)
}

/// Demo-versus-policy comparison of critic values.
pub fn q_filter<Q: Fn(&EnvState, &Action) -> f64>(
    demos: &[&Transition],
    policy_actions: &[Action],
    critic: Q,
) -> Vec<bool> {
    let q_demo: Vec<f64> = demos.iter().map(|t| critic(&t.s, &t.a)).collect();
    let q_pi: Vec<f64> = demos
        .iter()
        .zip(policy_actions)
        .map(|(t, a)| critic(&t.s, a))
        .collect();
    strict_mask(&q_demo, &q_pi)
}
