//! Randomized Markov policies, policy extraction from occupation measures,
//! and the lift of augmented-space policies to history-dependent policies
//! on the original MDP.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentedMdp, IndexMap, Mode};
use crate::error::{reject, Result};
use crate::lp::OccupationMeasure;
use crate::mdp::Mdp;

/// Below this total mass a state is treated as unvisited by [`extract_policy`].
pub const MASS_EPS: f64 = 1e-12;
const ROW_TOL: f64 = 1e-12;

/// Time-indexed randomized decision table `pi_t(a | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPolicy {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl MarkovPolicy {
    /// Builds a policy from `tables[t][x][a]`, checking every row.
    pub fn new(tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let horizon = tables.len();
        if horizon == 0 {
            return reject("policy needs at least one decision epoch");
        }
        let num_states = tables[0].len();
        let num_actions = tables[0].first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return reject("policy tables are empty");
        }
        let mut probs = Vec::with_capacity(horizon * num_states * num_actions);
        for (t, table) in tables.into_iter().enumerate() {
            if table.len() != num_states {
                return reject(format!("policy table {t} has {} rows, expected {num_states}", table.len()));
            }
            for (x, row) in table.into_iter().enumerate() {
                check_row(&row, num_actions).map_err(|msg| {
                    crate::error::Error::Rejected(format!("policy row t={t} x={x}: {msg}"))
                })?;
                probs.extend(row);
            }
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            probs,
        })
    }

    pub fn from_fn<F>(horizon: usize, num_states: usize, num_actions: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let tables = (0..horizon)
            .map(|t| (0..num_states).map(|x| f(t, x)).collect())
            .collect();
        let policy = Self::new(tables)?;
        if policy.num_actions != num_actions {
            return reject(format!("policy rows have {} actions, expected {num_actions}", policy.num_actions));
        }
        Ok(policy)
    }

    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            horizon,
            num_states,
            num_actions,
            probs: vec![p; horizon * num_states * num_actions],
        }
    }

    pub fn deterministic<F>(horizon: usize, num_states: usize, num_actions: usize, choice: F) -> Self
    where
        F: Fn(usize, usize) -> usize,
    {
        let mut probs = vec![0.0; horizon * num_states * num_actions];
        for t in 0..horizon {
            for x in 0..num_states {
                probs[(t * num_states + x) * num_actions + choice(t, x)] = 1.0;
            }
        }
        Self {
            horizon,
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, t: usize, x: usize) -> &[f64] {
        let start = (t * self.num_states + x) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn tables(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.horizon)
            .map(|t| (0..self.num_states).map(|x| self.row(t, x).to_vec()).collect())
            .collect()
    }
}

fn check_row(row: &[f64], num_actions: usize) -> std::result::Result<(), String> {
    if row.len() != num_actions {
        return Err(format!("{} entries, expected {num_actions}", row.len()));
    }
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("invalid probability {p}"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Recovers a Markov policy on the augmented space by normalizing `rho`.
///
/// Rows with total mass at most [`MASS_EPS`] get the uniform distribution.
pub fn extract_policy(aug: &AugmentedMdp, rho: &OccupationMeasure) -> Result<MarkovPolicy> {
    extract_markov_policy(&aug.mdp, rho)
}

/// [`extract_policy`] for any MDP whose occupation measure is `rho`.
pub fn extract_markov_policy(mdp: &Mdp, rho: &OccupationMeasure) -> Result<MarkovPolicy> {
    let (n, m, horizon) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    if rho.num_states() != n || rho.num_actions() != m || rho.horizon() != horizon {
        return reject("occupation measure dimensions do not match the MDP");
    }
    let mut probs = Vec::with_capacity(horizon * n * m);
    for t in 0..horizon {
        for x in 0..n {
            let row: Vec<f64> = (0..m).map(|a| rho.stage(t, x, a).max(0.0)).collect();
            let total: f64 = row.iter().sum();
            if total > MASS_EPS {
                let mut normalized: Vec<f64> = row.iter().map(|v| v / total).collect();
                // Absorb the rounding residue so the row sums to one.
                let residue = 1.0 - normalized.iter().sum::<f64>();
                let k = argmax(&normalized);
                normalized[k] += residue;
                probs.extend(normalized);
            } else {
                probs.extend(std::iter::repeat_n(1.0 / m as f64, m));
            }
        }
    }
    Ok(MarkovPolicy {
        horizon,
        num_states: n,
        num_actions: m,
        probs,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The memory a [`HistoryPolicy`] keeps about the observed base states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracker {
    /// No memory: the inner policy lives on the base state space.
    Memoryless,
    /// Raised on the first entry into the alarm region.
    Flag,
    /// Counts entries into the alarm region, saturating at `cap`.
    Counter { cap: usize },
}

/// History-dependent policy realized as a Markov policy on an augmented
/// space plus a running alarm statistic.
///
/// One instance follows one trajectory; clones share the decision tables.
#[derive(Debug, Clone)]
pub struct HistoryPolicy {
    inner: Arc<MarkovPolicy>,
    tracker: Tracker,
    alarm: Arc<Vec<bool>>,
    num_base_states: usize,
    t: usize,
    state: usize,
    statistic: usize,
}

impl HistoryPolicy {
    /// Wraps a Markov policy on the base space of `mdp`.
    pub fn memoryless(mp: MarkovPolicy, mdp: &Mdp) -> Result<Self> {
        if mp.num_states != mdp.num_states || mp.num_actions != mdp.num_actions || mp.horizon != mdp.horizon {
            return reject("Markov policy dimensions do not match the MDP");
        }
        Ok(Self::build(mp, Tracker::Memoryless, mdp))
    }

    fn build(mp: MarkovPolicy, tracker: Tracker, base: &Mdp) -> Self {
        Self {
            inner: Arc::new(mp),
            tracker,
            alarm: Arc::new(base.alarm_mask()),
            num_base_states: base.num_states,
            t: 0,
            state: base.initial_state,
            statistic: 0,
        }
    }

    pub fn tracker(&self) -> Tracker {
        self.tracker
    }

    pub fn inner(&self) -> &MarkovPolicy {
        &self.inner
    }

    pub fn num_base_states(&self) -> usize {
        self.num_base_states
    }

    pub fn num_actions(&self) -> usize {
        self.inner.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.inner.horizon
    }

    /// Current time step.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Current alarm flag or counter value (0 when memoryless).
    pub fn statistic(&self) -> usize {
        self.statistic
    }

    /// Starts a new trajectory at `x0` with a cleared statistic.
    pub fn reset(&mut self, x0: usize) -> Result<()> {
        if x0 >= self.num_base_states {
            return reject(format!("observed state {x0} out of range"));
        }
        self.t = 0;
        self.state = x0;
        self.statistic = 0;
        Ok(())
    }

    /// Action distribution at the current time and history.
    #[inline]
    pub fn distribution(&self) -> Result<&[f64]> {
        if self.t >= self.inner.horizon {
            return reject(format!("no decision at t = {} (horizon {})", self.t, self.inner.horizon));
        }
        Ok(self.row_at(self.t, self.state, self.statistic))
    }

    /// Advances one step after observing the successor state.
    #[inline]
    pub fn observe(&mut self, next: usize) -> Result<()> {
        if next >= self.num_base_states {
            return reject(format!("observed state {next} out of range"));
        }
        self.t += 1;
        self.state = next;
        self.statistic = self.next_statistic(self.statistic, next);
        Ok(())
    }

    /// Statistic after observing `next` with statistic `statistic`.
    #[inline]
    pub fn next_statistic(&self, statistic: usize, next: usize) -> usize {
        if !self.alarm[next] {
            return statistic;
        }
        match self.tracker {
            Tracker::Memoryless => statistic,
            Tracker::Flag => 1,
            Tracker::Counter { cap } => (statistic + 1).min(cap),
        }
    }

    /// Number of values the statistic can take.
    pub fn num_statistics(&self) -> usize {
        match self.tracker {
            Tracker::Memoryless => 1,
            Tracker::Flag => 2,
            Tracker::Counter { cap } => cap + 1,
        }
    }

    /// Action distribution at time `t` in base state `x` with statistic
    /// `statistic`, without touching the trajectory state.
    #[inline]
    pub fn row_at(&self, t: usize, x: usize, statistic: usize) -> &[f64] {
        let idx = match self.tracker {
            Tracker::Memoryless => x,
            Tracker::Flag | Tracker::Counter { .. } => statistic * self.num_base_states + x,
        };
        self.inner.row(t, idx)
    }

    /// Replays `states` (x_0..x_t) from scratch and returns the action
    /// distribution after the last one.
    pub fn distribution_after(&self, states: &[usize]) -> Result<Vec<f64>> {
        let Some((&x0, rest)) = states.split_first() else {
            return reject("empty history");
        };
        let mut p = self.clone();
        p.reset(x0)?;
        for &x in rest {
            p.observe(x)?;
        }
        Ok(p.distribution()?.to_vec())
    }
}

/// Lifts a Markov policy on the augmented space to a history-dependent
/// policy on the base MDP.
pub fn lift_policy(mp: &MarkovPolicy, aug: &AugmentedMdp) -> Result<HistoryPolicy> {
    let a = &aug.mdp;
    if mp.num_states != a.num_states || mp.num_actions != a.num_actions || mp.horizon != a.horizon {
        return reject(format!(
            "policy ({} states, {} actions, horizon {}) does not match the augmented MDP ({}, {}, {})",
            mp.num_states, mp.num_actions, mp.horizon, a.num_states, a.num_actions, a.horizon
        ));
    }
    let tracker = match aug.mode {
        Mode::Binary => Tracker::Flag,
        Mode::Counting => Tracker::Counter {
            cap: aug.index_map.num_levels - 1,
        },
    };
    Ok(HistoryPolicy::build(mp.clone(), tracker, &aug.base))
}

/// Serialized policy: `{"mode", "horizon", "tables", "index_map"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub mode: PolicyMode,
    pub horizon: usize,
    pub tables: Vec<Vec<Vec<f64>>>,
    pub index_map: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    /// Tables indexed by base states.
    Base,
    Binary,
    Counting,
}

impl PolicyFile {
    pub fn augmented(mp: &MarkovPolicy, aug: &AugmentedMdp) -> Self {
        Self {
            mode: match aug.mode {
                Mode::Binary => PolicyMode::Binary,
                Mode::Counting => PolicyMode::Counting,
            },
            horizon: mp.horizon,
            tables: mp.tables(),
            index_map: aug.index_map.pairs(),
        }
    }

    pub fn base(mp: &MarkovPolicy) -> Self {
        Self {
            mode: PolicyMode::Base,
            horizon: mp.horizon,
            tables: mp.tables(),
            index_map: (0..mp.num_states).map(|x| (x, 0)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            crate::error::Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    /// Rebuilds the history-dependent policy for `base`.
    pub fn into_history_policy(self, base: &Mdp) -> Result<HistoryPolicy> {
        base.check()?;
        if self.horizon != base.horizon {
            return reject(format!("policy horizon {} does not match model horizon {}", self.horizon, base.horizon));
        }
        let mp = MarkovPolicy::new(self.tables)?;
        let levels = match self.mode {
            PolicyMode::Base => 1,
            PolicyMode::Binary => 2,
            PolicyMode::Counting => base.horizon + 1,
        };
        let map = IndexMap::new(base.num_states, levels);
        if self.index_map != map.pairs() {
            return reject("index_map does not match the model's augmented layout");
        }
        match self.mode {
            PolicyMode::Base => HistoryPolicy::memoryless(mp, base),
            PolicyMode::Binary => lift_policy(&mp, &crate::augment::augment_binary(base)?),
            PolicyMode::Counting => lift_policy(&mp, &crate::augment::augment_counting(base)?),
        }
    }
}
