//! Finite-horizon MDPs with an alarm region.
//!
//! An [`Mdp`] is plain data so that malformed inputs can still be loaded and
//! reported on by [`validate_mdp`]. Every operation that consumes an `Mdp`
//! calls [`Mdp::check`] first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{reject, Error, Result};
use crate::policy::HistoryPolicy;

/// Tolerance on the row sums of the transition kernel.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default budget on the number of enumerated paths.
pub const DEFAULT_PATH_LIMIT: u128 = 10_000_000;

/// Finite-horizon MDP with alarm region and fixed initial state.
///
/// `transition[x][a][x']` is the time-invariant kernel, `rewards[t][x][a]`
/// holds the stage rewards for `t < horizon` and `terminal_reward[x]` the
/// reward collected at `t = horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub terminal_reward: Vec<f64>,
    pub alarm_states: Vec<usize>,
    pub initial_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub description: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "; {}: {} ({:e})", v.location, v.description, v.magnitude)?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, location: impl Into<String>, description: impl Into<String>, magnitude: f64) {
        self.0.push(Violation {
            location: location.into(),
            description: description.into(),
            magnitude,
        });
    }
}

/// Checks every structural and stochastic property of `mdp`.
///
/// Never fails: all problems end up in the report.
pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let mut out = Collector(Vec::new());
    let n = mdp.num_states;
    let m = mdp.num_actions;

    if n == 0 {
        out.push("num_states", "must be positive", 0.0);
    }
    if m == 0 {
        out.push("num_actions", "must be positive", 0.0);
    }
    if mdp.horizon == 0 {
        out.push("horizon", "must be positive", 0.0);
    }

    if mdp.transition.len() != n {
        out.push(
            "transition",
            format!("expected {n} state rows, found {}", mdp.transition.len()),
            mdp.transition.len().abs_diff(n) as f64,
        );
    }
    for (x, per_action) in mdp.transition.iter().enumerate() {
        if per_action.len() != m {
            out.push(
                format!("transition[{x}]"),
                format!("expected {m} action rows, found {}", per_action.len()),
                per_action.len().abs_diff(m) as f64,
            );
        }
        for (a, row) in per_action.iter().enumerate() {
            let loc = format!("transition[{x}][{a}]");
            if row.len() != n {
                out.push(
                    loc.clone(),
                    format!("expected {n} successor entries, found {}", row.len()),
                    row.len().abs_diff(n) as f64,
                );
            }
            let mut sum = 0.0;
            let mut finite = true;
            for (y, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    out.push(format!("{loc}[{y}]"), "non-finite probability", f64::NAN);
                    finite = false;
                } else if p < 0.0 {
                    out.push(format!("{loc}[{y}]"), "negative probability", -p);
                }
                sum += p;
            }
            if finite && (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(loc, format!("row sums to {sum}"), (sum - 1.0).abs());
            }
        }
    }

    if mdp.rewards.len() != mdp.horizon {
        out.push(
            "rewards",
            format!("expected {} stage tables, found {}", mdp.horizon, mdp.rewards.len()),
            mdp.rewards.len().abs_diff(mdp.horizon) as f64,
        );
    }
    for (t, table) in mdp.rewards.iter().enumerate() {
        if table.len() != n {
            out.push(
                format!("rewards[{t}]"),
                format!("expected {n} state rows, found {}", table.len()),
                table.len().abs_diff(n) as f64,
            );
        }
        for (x, row) in table.iter().enumerate() {
            if row.len() != m {
                out.push(
                    format!("rewards[{t}][{x}]"),
                    format!("expected {m} action entries, found {}", row.len()),
                    row.len().abs_diff(m) as f64,
                );
            }
            for (a, r) in row.iter().enumerate() {
                if !r.is_finite() {
                    out.push(format!("rewards[{t}][{x}][{a}]"), "non-finite reward", f64::NAN);
                }
            }
        }
    }
    if mdp.terminal_reward.len() != n {
        out.push(
            "terminal_reward",
            format!("expected {n} entries, found {}", mdp.terminal_reward.len()),
            mdp.terminal_reward.len().abs_diff(n) as f64,
        );
    }
    for (x, r) in mdp.terminal_reward.iter().enumerate() {
        if !r.is_finite() {
            out.push(format!("terminal_reward[{x}]"), "non-finite reward", f64::NAN);
        }
    }

    for (i, &s) in mdp.alarm_states.iter().enumerate() {
        if s >= n {
            out.push(
                format!("alarm_states[{i}]"),
                format!("state {s} out of range 0..{n}"),
                (s - n + 1) as f64,
            );
        }
    }
    if mdp.initial_state >= n {
        out.push(
            "initial_state",
            format!("state {} out of range 0..{n}", mdp.initial_state),
            (mdp.initial_state - n + 1) as f64,
        );
    }
    if mdp.alarm_states.contains(&mdp.initial_state) {
        out.push("initial_state", "initial state lies in the alarm region", 1.0);
    }

    ValidationReport::from_violations(out.0)
}

impl Mdp {
    /// Validates and returns `Err(InvalidMdp)` with the full report on failure.
    pub fn check(&self) -> Result<()> {
        let report = validate_mdp(self);
        if report.ok {
            Ok(())
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize, next: usize) -> f64 {
        self.transition[x][a][next]
    }

    #[inline]
    pub fn row(&self, x: usize, a: usize) -> &[f64] {
        &self.transition[x][a]
    }

    #[inline]
    pub fn reward(&self, t: usize, x: usize, a: usize) -> f64 {
        self.rewards[t][x][a]
    }

    /// Membership table for the alarm region.
    pub fn alarm_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_states];
        for &s in &self.alarm_states {
            if s < self.num_states {
                mask[s] = true;
            }
        }
        mask
    }

    /// Number of times `states` visits the alarm region.
    pub fn alarm_count(&self, states: &[usize]) -> usize {
        let mask = self.alarm_mask();
        states.iter().filter(|&&x| mask[x]).count()
    }

    /// Total reward of a state-action path.
    pub fn path_reward(&self, path: &Path) -> f64 {
        let stage: f64 = path
            .actions
            .iter()
            .enumerate()
            .map(|(t, &a)| self.reward(t, path.states[t], a))
            .sum();
        stage + self.terminal_reward[path.states[self.horizon]]
    }
}

/// A full trajectory: `horizon + 1` states and `horizon` actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Path {
    pub fn new(states: Vec<usize>, actions: Vec<usize>) -> Self {
        Self { states, actions }
    }
}

/// Exact probability of `path` when `policy` drives `mdp`.
pub fn path_probability(mdp: &Mdp, policy: &HistoryPolicy, path: &Path) -> Result<f64> {
    mdp.check()?;
    if path.states.len() != mdp.horizon + 1 || path.actions.len() != mdp.horizon {
        return reject(format!(
            "path has {} states and {} actions, expected {} and {}",
            path.states.len(),
            path.actions.len(),
            mdp.horizon + 1,
            mdp.horizon
        ));
    }
    if path.states[0] != mdp.initial_state {
        return reject(format!(
            "path starts at {} but the initial state is {}",
            path.states[0], mdp.initial_state
        ));
    }
    if let Some(&x) = path.states.iter().find(|&&x| x >= mdp.num_states) {
        return reject(format!("state {x} out of range"));
    }
    if let Some(&a) = path.actions.iter().find(|&&a| a >= mdp.num_actions) {
        return reject(format!("action {a} out of range"));
    }
    check_policy_dims(mdp, policy)?;

    let mut pol = policy.clone();
    pol.reset(path.states[0])?;
    let mut prob = 1.0;
    for t in 0..mdp.horizon {
        let (x, a, next) = (path.states[t], path.actions[t], path.states[t + 1]);
        prob *= pol.distribution()?[a] * mdp.prob(x, a, next);
        if prob == 0.0 {
            return Ok(0.0);
        }
        pol.observe(next)?;
    }
    Ok(prob)
}

pub(crate) fn check_policy_dims(mdp: &Mdp, policy: &HistoryPolicy) -> Result<()> {
    if policy.num_base_states() != mdp.num_states
        || policy.num_actions() != mdp.num_actions
        || policy.horizon() != mdp.horizon
    {
        return reject(format!(
            "policy dimensions (states {}, actions {}, horizon {}) do not match the MDP ({}, {}, {})",
            policy.num_base_states(),
            policy.num_actions(),
            policy.horizon(),
            mdp.num_states,
            mdp.num_actions,
            mdp.horizon
        ));
    }
    Ok(())
}

/// Visits every positive-probability path in depth-first order.
///
/// The callback receives the path, its probability and its alarm count.
/// Fails once more than `limit` complete paths have been produced.
pub fn enumerate_paths<F>(mdp: &Mdp, policy: &HistoryPolicy, limit: u128, mut visit: F) -> Result<u128>
where
    F: FnMut(&Path, f64, usize),
{
    mdp.check()?;
    check_policy_dims(mdp, policy)?;
    let mask = mdp.alarm_mask();
    let mut pol = policy.clone();
    pol.reset(mdp.initial_state)?;
    let mut path = Path {
        states: vec![mdp.initial_state],
        actions: Vec::with_capacity(mdp.horizon),
    };
    let mut count = 0u128;
    let alarms = usize::from(mask[mdp.initial_state]);
    walk(mdp, &mask, &pol, &mut path, 1.0, alarms, limit, &mut count, &mut visit)?;
    Ok(count)
}

#[allow(clippy::too_many_arguments)]
fn walk<F>(
    mdp: &Mdp,
    mask: &[bool],
    pol: &HistoryPolicy,
    path: &mut Path,
    prob: f64,
    alarms: usize,
    limit: u128,
    count: &mut u128,
    visit: &mut F,
) -> Result<()>
where
    F: FnMut(&Path, f64, usize),
{
    let t = path.actions.len();
    if t == mdp.horizon {
        *count += 1;
        if *count > limit {
            return Err(Error::ResourceLimit {
                what: "path enumeration",
                needed: *count,
                limit,
            });
        }
        visit(path, prob, alarms);
        return Ok(());
    }
    let x = path.states[t];
    let dist = pol.distribution()?.to_vec();
    for (a, &pa) in dist.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        for (next, &p) in mdp.row(x, a).iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let mut child = pol.clone();
            child.observe(next)?;
            path.actions.push(a);
            path.states.push(next);
            walk(
                mdp,
                mask,
                &child,
                path,
                prob * pa * p,
                alarms + usize::from(mask[next]),
                limit,
                count,
                visit,
            )?;
            path.actions.pop();
            path.states.pop();
        }
    }
    Ok(())
}

/// Exact distribution of the number of alarm visits, by path enumeration.
pub fn alarm_count_pmf(mdp: &Mdp, policy: &HistoryPolicy, limit: u128) -> Result<Vec<f64>> {
    let mut pmf = vec![0.0; mdp.horizon + 2];
    enumerate_paths(mdp, policy, limit, |_, p, k| pmf[k] += p)?;
    Ok(pmf)
}

/// Exact probability of visiting the alarm region at least `min_alarms` times.
pub fn alarm_event_probability(mdp: &Mdp, policy: &HistoryPolicy, min_alarms: usize) -> Result<f64> {
    alarm_event_probability_with_limit(mdp, policy, min_alarms, DEFAULT_PATH_LIMIT)
}

pub fn alarm_event_probability_with_limit(
    mdp: &Mdp,
    policy: &HistoryPolicy,
    min_alarms: usize,
    limit: u128,
) -> Result<f64> {
    let mut total = 0.0;
    enumerate_paths(mdp, policy, limit, |_, p, k| {
        if k >= min_alarms {
            total += p;
        }
    })?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::policy::MarkovPolicy;

    fn identity_mdp() -> Mdp {
        Mdp {
            num_states: 2,
            num_actions: 1,
            horizon: 1,
            transition: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            rewards: vec![vec![vec![0.0], vec![0.0]]],
            terminal_reward: vec![0.0, 0.0],
            alarm_states: vec![],
            initial_state: 0,
        }
    }

    #[test]
    fn identity_kernel_is_valid() {
        assert!(validate_mdp(&identity_mdp()).ok);
    }

    #[test]
    fn short_row_is_reported_with_magnitude() {
        let mut m = identity_mdp();
        m.transition[1][0] = vec![0.0, 0.9];
        let report = validate_mdp(&m);
        assert!(!report.ok);
        assert_eq!(report.violations.len(), 1);
        assert!((report.violations[0].magnitude - 0.1).abs() < 1e-12);
        assert_eq!(report.violations[0].location, "transition[1][0]");
    }

    #[test]
    fn every_problem_is_collected() {
        let mut m = identity_mdp();
        m.transition[0][0][0] = -0.5;
        m.transition[0][0][1] = 1.5;
        m.alarm_states = vec![0, 7];
        m.rewards.clear();
        let report = validate_mdp(&m);
        let descr: Vec<_> = report.violations.iter().map(|v| v.description.as_str()).collect();
        assert!(descr.contains(&"negative probability"));
        assert!(descr.iter().any(|d| d.contains("out of range")));
        assert!(descr.iter().any(|d| d.contains("stage tables")));
        assert!(descr.contains(&"initial state lies in the alarm region"));
    }

    #[test]
    fn ragged_input_does_not_panic() {
        let mut m = identity_mdp();
        m.transition[0] = vec![];
        m.rewards[0][1] = vec![];
        m.terminal_reward = vec![f64::INFINITY];
        let report = validate_mdp(&m);
        assert!(report.violations.len() >= 3);
    }

    #[test]
    fn builtin_level_walk_model_is_valid() {
        assert!(validate_mdp(&models::level_walk()).ok);
        assert!(validate_mdp(&models::counterexample()).ok);
    }

    #[test]
    fn json_round_trip_and_parse_location() {
        let m = models::counterexample();
        let back = Mdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let err = Mdp::from_json("{\n  \"num_states\": 2,\n  oops }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn deterministic_chain_has_unit_path_probability() {
        let m = Mdp {
            num_states: 3,
            num_actions: 2,
            horizon: 2,
            transition: vec![
                vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]],
                vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
                vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
            ],
            rewards: vec![vec![vec![0.0; 2]; 3]; 2],
            terminal_reward: vec![0.0; 3],
            alarm_states: vec![],
            initial_state: 0,
        };
        let mp = MarkovPolicy::deterministic(2, 3, 2, |_, _| 0);
        let pol = HistoryPolicy::memoryless(mp, &m).unwrap();
        let p = path_probability(&m, &pol, &Path::new(vec![0, 1, 2], vec![0, 0])).unwrap();
        assert_eq!(p, 1.0);
        let q = path_probability(&m, &pol, &Path::new(vec![0, 1, 1], vec![0, 0])).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn counterexample_path_probability() {
        use models::counterexample_states as s;
        let m = models::counterexample();
        let mp = MarkovPolicy::deterministic(3, m.num_states, 2, |_, _| models::RISKY);
        let pol = HistoryPolicy::memoryless(mp, &m).unwrap();
        let path = Path::new(vec![s::X0, s::X1, s::X2, s::X3_RISKY], vec![1, 1, 1]);
        let p = path_probability(&m, &pol, &path).unwrap();
        assert!((p - 3.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn path_probability_rejects_bad_dimensions() {
        let m = identity_mdp();
        let pol = HistoryPolicy::memoryless(MarkovPolicy::uniform(1, 2, 1), &m).unwrap();
        assert!(matches!(
            path_probability(&m, &pol, &Path::new(vec![0], vec![])),
            Err(Error::Rejected(_))
        ));
        assert!(matches!(
            path_probability(&m, &pol, &Path::new(vec![1, 1], vec![0])),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn zero_alarm_event_is_certain() {
        let m = models::counterexample();
        let pol = HistoryPolicy::memoryless(MarkovPolicy::uniform(3, m.num_states, 2), &m).unwrap();
        let p = alarm_event_probability(&m, &pol, 0).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        let m = models::level_walk();
        let pol = HistoryPolicy::memoryless(MarkovPolicy::uniform(15, 16, 3), &m).unwrap();
        let err = alarm_event_probability_with_limit(&m, &pol, 1, 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
    }
}
