//! Independent references for small instances: dynamic programming, exact
//! forward propagation, an LP over history prefixes that is exact over all
//! history-dependent policies, and a grid search over Markov policies on
//! the original state space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{reject, Error, Result};
use crate::lp::{self, LpProblem, OccupationMeasure, Status};
use crate::mdp::Mdp;
use crate::policy::{HistoryPolicy, MarkovPolicy};

/// Default cap on the number of path-LP variables.
pub const DEFAULT_PATH_LP_LIMIT: u128 = 1_000_000;
/// Default cap on the number of Markov grid candidates.
pub const DEFAULT_GRID_LIMIT: u128 = 2_000_000;
/// Slack allowed when checking a grid candidate against the chance bound.
const CHANCE_SLACK: f64 = 1e-12;

/// Optimal unconstrained value from the initial state and a deterministic
/// optimal Markov policy (lowest action index among ties).
pub fn backward_induction(mdp: &Mdp) -> Result<(f64, MarkovPolicy)> {
    mdp.check()?;
    let (n, m, horizon) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut value = mdp.terminal_reward.clone();
    let mut choice = vec![vec![0usize; n]; horizon];
    for t in (0..horizon).rev() {
        let mut next = vec![0.0; n];
        for x in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..m {
                let q = mdp.reward(t, x, a) + dot(mdp.row(x, a), &value);
                if q > best {
                    best = q;
                    choice[t][x] = a;
                }
            }
            next[x] = best;
        }
        value = next;
    }
    let policy = MarkovPolicy::deterministic(horizon, n, m, |t, x| choice[t][x]);
    Ok((value[mdp.initial_state], policy))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact occupation measure of a Markov policy, by forward recursion.
pub fn forward_propagate(mdp: &Mdp, policy: &MarkovPolicy) -> Result<OccupationMeasure> {
    mdp.check()?;
    let (n, m, horizon) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    if policy.num_states() != n || policy.num_actions() != m || policy.horizon() != horizon {
        return reject("policy dimensions do not match the MDP");
    }
    let mut rho = OccupationMeasure::zeros(horizon, n, m);
    let mut dist = vec![0.0; n];
    dist[mdp.initial_state] = 1.0;
    for t in 0..horizon {
        let mut next = vec![0.0; n];
        for x in 0..n {
            if dist[x] == 0.0 {
                continue;
            }
            for (a, &pa) in policy.row(t, x).iter().enumerate() {
                let mass = dist[x] * pa;
                rho.set_stage(t, x, a, mass);
                if mass == 0.0 {
                    continue;
                }
                for (y, &p) in mdp.row(x, a).iter().enumerate() {
                    next[y] += mass * p;
                }
            }
        }
        dist = next;
    }
    for (x, v) in dist.into_iter().enumerate() {
        rho.set_terminal(x, v);
    }
    Ok(rho)
}

/// Smallest and largest achievable probability of visiting the alarm
/// region at least once, over all policies.
pub fn alarm_probability_range(mdp: &Mdp) -> Result<(f64, f64)> {
    mdp.check()?;
    let mask = mdp.alarm_mask();
    let solve = |minimize: bool| {
        let mut v = vec![0.0; mdp.num_states];
        for _ in 0..mdp.horizon {
            v = (0..mdp.num_states)
                .map(|x| {
                    let vals = (0..mdp.num_actions).map(|a| {
                        mdp.row(x, a)
                            .iter()
                            .enumerate()
                            .map(|(y, &p)| p * if mask[y] { 1.0 } else { v[y] })
                            .sum::<f64>()
                    });
                    if minimize {
                        vals.fold(f64::INFINITY, f64::min)
                    } else {
                        vals.fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .collect();
        }
        v[mdp.initial_state]
    };
    Ok((solve(true), solve(false)))
}

/// Exact alarm-count distribution and mean reward of a history policy,
/// by forward recursion over (state, policy statistic, alarm count).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRollout {
    /// Probability of exactly `k` alarm visits, `k = 0..=T`.
    pub alarm_count_pmf: Vec<f64>,
    pub mean_reward: f64,
}

pub fn exact_rollout(mdp: &Mdp, policy: &HistoryPolicy) -> Result<ExactRollout> {
    mdp.check()?;
    crate::mdp::check_policy_dims(mdp, policy)?;
    let (n, horizon) = (mdp.num_states, mdp.horizon);
    let levels = policy.num_statistics();
    let counts = horizon + 1;
    let mask = mdp.alarm_mask();
    let idx = |x: usize, s: usize, k: usize| (k * levels + s) * n + x;

    let mut dist = vec![0.0; n * levels * counts];
    dist[idx(mdp.initial_state, 0, 0)] = 1.0;
    let mut mean = 0.0;
    for t in 0..horizon {
        let mut next = vec![0.0; dist.len()];
        for k in 0..counts {
            for s in 0..levels {
                for x in 0..n {
                    let mass = dist[idx(x, s, k)];
                    if mass == 0.0 {
                        continue;
                    }
                    for (a, &pa) in policy.row_at(t, x, s).iter().enumerate() {
                        if pa == 0.0 {
                            continue;
                        }
                        mean += mass * pa * mdp.reward(t, x, a);
                        for (y, &p) in mdp.row(x, a).iter().enumerate() {
                            if p == 0.0 {
                                continue;
                            }
                            let k2 = (k + usize::from(mask[y])).min(horizon);
                            next[idx(y, policy.next_statistic(s, y), k2)] += mass * pa * p;
                        }
                    }
                }
            }
        }
        dist = next;
    }
    let mut pmf = vec![0.0; counts];
    for k in 0..counts {
        for s in 0..levels {
            for x in 0..n {
                let mass = dist[idx(x, s, k)];
                pmf[k] += mass;
                mean += mass * mdp.terminal_reward[x];
            }
        }
    }
    Ok(ExactRollout {
        alarm_count_pmf: pmf,
        mean_reward: mean,
    })
}

/// Exact optimum over history-dependent randomized policies of the
/// expected reward subject to `P(alarm count >= i) <= deltas[i - 1]`.
///
/// The variables are the joint probabilities of history prefixes and the
/// action taken after them; the kernel enters as fixed multipliers. A
/// single bound is the joint chance constraint on any alarm.
pub fn solve_path_lp(mdp: &Mdp, deltas: &[f64]) -> Result<f64> {
    solve_path_lp_with_limit(mdp, deltas, DEFAULT_PATH_LP_LIMIT)
}

pub fn solve_path_lp_with_limit(mdp: &Mdp, deltas: &[f64], limit: u128) -> Result<f64> {
    let lp = build_path_lp(mdp, deltas, limit)?;
    let sol = lp::solve(&lp)?;
    match sol.status {
        Status::Optimal => Ok(sol.objective),
        Status::Infeasible => Err(Error::Infeasible("path LP has no feasible point".into())),
        Status::Unbounded => Err(Error::Unbounded),
    }
}

struct Prefix {
    state: usize,
    alarms: usize,
    /// First of this prefix's action columns.
    col: usize,
}

/// Builds the history-prefix LP; see [`solve_path_lp`].
pub fn build_path_lp(mdp: &Mdp, deltas: &[f64], limit: u128) -> Result<LpProblem> {
    mdp.check()?;
    let (m, horizon) = (mdp.num_actions, mdp.horizon);
    if deltas.is_empty() || deltas.len() > horizon {
        return reject(format!("expected 1..={horizon} alarm bounds, got {}", deltas.len()));
    }
    if let Some(d) = deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return reject(format!("bound {d} is not a probability"));
    }
    let mask = mdp.alarm_mask();

    let mut objective: Vec<f64> = Vec::new();
    let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut chance = vec![Vec::new(); deltas.len()];

    let mut frontier = vec![Prefix {
        state: mdp.initial_state,
        alarms: usize::from(mask[mdp.initial_state]),
        col: 0,
    }];
    objective.extend((0..m).map(|a| mdp.reward(0, mdp.initial_state, a)));
    eq_rows.push(((0..m).map(|a| (a, 1.0)).collect(), 1.0));

    for t in 1..=horizon {
        let mut next = Vec::new();
        for node in &frontier {
            for a in 0..m {
                let parent = node.col + a;
                for (y, &p) in mdp.row(node.state, a).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let alarms = node.alarms + usize::from(mask[y]);
                    if t == horizon {
                        objective[parent] += p * mdp.terminal_reward[y];
                        for (i, row) in chance.iter_mut().enumerate() {
                            if alarms > i {
                                row.push((parent, p));
                            }
                        }
                        continue;
                    }
                    let col = objective.len();
                    if col as u128 + m as u128 > limit {
                        return Err(Error::ResourceLimit {
                            what: "path LP variables",
                            needed: col as u128 + m as u128,
                            limit,
                        });
                    }
                    objective.extend((0..m).map(|b| mdp.reward(t, y, b)));
                    let mut row: Vec<(usize, f64)> = (0..m).map(|b| (col + b, 1.0)).collect();
                    row.push((parent, -p));
                    eq_rows.push((row, 0.0));
                    next.push(Prefix { state: y, alarms, col });
                }
            }
        }
        frontier = next;
    }

    let mut lp = LpProblem::with_unit_box(objective.len());
    lp.objective = objective.into_iter().enumerate().filter(|e| e.1 != 0.0).collect();
    for (row, b) in eq_rows {
        lp.equalities.push_row(row, b);
    }
    for (row, &d) in chance.into_iter().zip(deltas) {
        lp.inequalities.push_row(merge(row), d);
    }
    Ok(lp)
}

fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

/// Result of a Markov-policy grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// Best value among feasible candidates, `None` if none is feasible.
    pub value: Option<f64>,
    /// Grid spacing is `1 / steps`.
    pub steps: usize,
    pub candidates: u128,
}

/// A reachable `(t, x)` where the successor distribution depends on the
/// action. `actions` holds one action per distinct transition row, the one
/// with the largest immediate reward (lowest index among ties).
struct DecisionPoint {
    t: usize,
    x: usize,
    actions: Vec<usize>,
}

fn decision_points(mdp: &Mdp) -> Vec<DecisionPoint> {
    let n = mdp.num_states;
    let mut reach = vec![false; n];
    reach[mdp.initial_state] = true;
    let mut points = Vec::new();
    for t in 0..mdp.horizon {
        let mut next = vec![false; n];
        for x in (0..n).filter(|&x| reach[x]) {
            let mut actions: Vec<usize> = Vec::new();
            for a in 0..mdp.num_actions {
                match actions.iter_mut().find(|b| mdp.row(x, **b) == mdp.row(x, a)) {
                    Some(b) if mdp.reward(t, x, a) > mdp.reward(t, x, *b) => *b = a,
                    Some(_) => {}
                    None => actions.push(a),
                }
                for (y, &p) in mdp.row(x, a).iter().enumerate() {
                    if p > 0.0 {
                        next[y] = true;
                    }
                }
            }
            if actions.len() > 1 {
                points.push(DecisionPoint { t, x, actions });
            }
        }
        reach = next;
    }
    points
}

/// Points of the simplex `{p in (1/steps) Z^k : sum p = 1, p >= 0}`.
fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k - 1, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, steps, steps, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

fn grid_size(points: &[DecisionPoint], steps: usize) -> u128 {
    points.iter().fold(1u128, |acc, p| {
        let k = p.actions.len() as u128;
        acc.saturating_mul(binomial(steps as u128 + k - 1, k - 1))
    })
}

/// Best grid-sampled Markov policy on the original MDP subject to the
/// joint chance constraint `P(any alarm) <= delta`.
///
/// Only decision points where the successor distribution depends on the
/// action are gridded; elsewhere the action with the largest immediate
/// reward is taken, which is optimal there. Each candidate is evaluated
/// exactly by enumerating its paths.
pub fn markov_grid_search(mdp: &Mdp, delta: f64, steps: usize) -> Result<GridOutcome> {
    markov_grid_search_with_limit(mdp, delta, steps, DEFAULT_GRID_LIMIT)
}

pub fn markov_grid_search_with_limit(mdp: &Mdp, delta: f64, steps: usize, limit: u128) -> Result<GridOutcome> {
    mdp.check()?;
    if steps == 0 {
        return reject("grid needs at least one step");
    }
    let points = decision_points(mdp);
    let size = grid_size(&points, steps);
    if size > limit {
        return Err(Error::ResourceLimit {
            what: "Markov grid candidates",
            needed: size,
            limit,
        });
    }
    Ok(run_grid(mdp, delta, steps, &points, size))
}

/// Grid search at the finest resolution up to `max_steps` whose candidate
/// count stays within `limit`.
pub fn markov_grid_search_adaptive(mdp: &Mdp, delta: f64, max_steps: usize, limit: u128) -> Result<GridOutcome> {
    mdp.check()?;
    let points = decision_points(mdp);
    let steps = (1..=max_steps.max(1))
        .rev()
        .find(|&s| grid_size(&points, s) <= limit)
        .ok_or(Error::ResourceLimit {
            what: "Markov grid candidates",
            needed: grid_size(&points, 1),
            limit,
        })?;
    let size = grid_size(&points, steps);
    Ok(run_grid(mdp, delta, steps, &points, size))
}

fn run_grid(mdp: &Mdp, delta: f64, steps: usize, points: &[DecisionPoint], size: u128) -> GridOutcome {
    let (n, m, horizon) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let grids: Vec<Vec<Vec<f64>>> = (1..=m).map(|k| if k > 1 { simplex_grid(k, steps) } else { Vec::new() }).collect();
    let mut base = vec![0.0; horizon * n * m];
    for t in 0..horizon {
        for x in 0..n {
            let best = (0..m).fold(0, |b, a| if mdp.reward(t, x, a) > mdp.reward(t, x, b) { a } else { b });
            base[(t * n + x) * m + best] = 1.0;
        }
    }
    let mask = mdp.alarm_mask();

    let value = (0..size)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |table, mut code| {
                for p in points {
                    let grid = &grids[p.actions.len() - 1];
                    let pick = &grid[(code % grid.len() as u128) as usize];
                    code /= grid.len() as u128;
                    let row = &mut table[(p.t * n + p.x) * m..(p.t * n + p.x + 1) * m];
                    row.fill(0.0);
                    for (&a, &q) in p.actions.iter().zip(pick) {
                        row[a] = q;
                    }
                }
                let (value, chance) = evaluate_markov(mdp, &mask, table);
                (chance <= delta + CHANCE_SLACK).then_some(value)
            },
        )
        .flatten()
        .reduce_with(f64::max);
    GridOutcome {
        value,
        steps,
        candidates: size,
    }
}

/// Expected reward and `P(any alarm)` of a Markov policy given as a flat
/// `[t][x][a]` table, by depth-first path enumeration.
fn evaluate_markov(mdp: &Mdp, mask: &[bool], table: &[f64]) -> (f64, f64) {
    fn walk(
        mdp: &Mdp,
        mask: &[bool],
        table: &[f64],
        t: usize,
        x: usize,
        alarmed: bool,
        prob: f64,
        acc: &mut (f64, f64),
    ) {
        let (n, m) = (mdp.num_states, mdp.num_actions);
        if t == mdp.horizon {
            acc.0 += prob * mdp.terminal_reward[x];
            if alarmed {
                acc.1 += prob;
            }
            return;
        }
        for a in 0..m {
            let pa = table[(t * n + x) * m + a];
            if pa == 0.0 {
                continue;
            }
            acc.0 += prob * pa * mdp.reward(t, x, a);
            for (y, &p) in mdp.row(x, a).iter().enumerate() {
                if p > 0.0 {
                    walk(mdp, mask, table, t + 1, y, alarmed || mask[y], prob * pa * p, acc);
                }
            }
        }
    }
    let mut acc = (0.0, 0.0);
    let x0 = mdp.initial_state;
    walk(mdp, mask, table, 0, x0, mask[x0], 1.0, &mut acc);
    acc
}

/// A seeded random instance for the equivalence suites.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub seed: u64,
    pub mdp: Mdp,
    /// Bound for the single joint chance constraint.
    pub delta: f64,
    /// Non-increasing bounds on `P(alarm count >= i)`, `i = 1..=T`.
    pub deltas: Vec<f64>,
}

/// Draws a random MDP with at most 4 states, 3 actions and horizon 4.
///
/// Every transition row has one or two successors, which keeps the
/// history-prefix LP small. The alarm region is a nonempty set of states
/// other than the initial state 0. `delta` is drawn between the smallest
/// and largest achievable alarm probability so the constraint usually
/// binds; `deltas` starts at `delta` and shrinks geometrically at a random
/// rate.
pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(2..=3);
    let horizon = rng.gen_range(2..=4);
    let transition = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let mut row = vec![0.0; n];
                    let first = rng.gen_range(0..n);
                    if rng.gen_bool(0.75) {
                        let mut second = rng.gen_range(0..n - 1);
                        if second >= first {
                            second += 1;
                        }
                        let p = (rng.gen_range(1..8) as f64) / 8.0;
                        row[first] = p;
                        row[second] = 1.0 - p;
                    } else {
                        row[first] = 1.0;
                    }
                    row
                })
                .collect()
        })
        .collect();
    let rewards = (0..horizon)
        .map(|_| (0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect()).collect())
        .collect();
    let terminal_reward = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
    let mut alarm_states: Vec<usize> = (1..n).filter(|_| rng.gen_bool(0.5)).collect();
    if alarm_states.is_empty() {
        alarm_states.push(rng.gen_range(1..n));
    }
    let mdp = Mdp {
        num_states: n,
        num_actions: m,
        horizon,
        transition,
        rewards,
        terminal_reward,
        alarm_states,
        initial_state: 0,
    };
    let (lo, hi) = alarm_probability_range(&mdp).expect("generated MDP is valid");
    let delta = lo + rng.gen_range(0.0..1.0) * (hi - lo);
    let mut deltas = Vec::with_capacity(horizon);
    let mut d = delta;
    for _ in 0..horizon {
        deltas.push(d);
        d *= rng.gen_range(0.3..1.0);
    }
    TinyInstance {
        seed,
        mdp,
        delta,
        deltas,
    }
}
