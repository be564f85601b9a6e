//! Monte Carlo rollouts of a history policy.
//!
//! Trajectory `i` draws from its own ChaCha8 stream `(seed, i)`, so results
//! do not depend on how trajectories are scheduled across threads. Per
//! trajectory results are collected in index order and reduced serially,
//! which keeps floating-point sums bit-identical between runs.

use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{reject, Result};
use crate::mdp::{check_policy_dims, Mdp};
use crate::policy::HistoryPolicy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_trajectories: usize,
    pub seed: u64,
    pub record_paths: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_trajectories: 100_000,
            seed: 0,
            record_paths: false,
        }
    }
}

/// Mean state index at one time step, split by whether the trajectory
/// raised at least one alarm. `None` when the group is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMean {
    pub t: usize,
    pub alarm: Option<f64>,
    pub no_alarm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub num_trajectories: usize,
    /// Number of trajectories with exactly `k` alarm visits, `k = 0..=T`.
    pub alarm_counts: Vec<u64>,
    pub alarm_count_pmf: Vec<f64>,
    pub mean_reward: f64,
    pub paths: Option<Vec<Vec<usize>>>,
    pub conditional_means: Vec<ConditionalMean>,
}

struct Rollout {
    alarms: usize,
    reward: f64,
    states: Vec<usize>,
}

/// Inverse-CDF draw from `probs`; ties in the cumulative sum go to the
/// lowest index and a rounding shortfall goes to the last positive entry.
#[inline]
fn sample(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn rollout(mdp: &Mdp, mask: &[bool], policy: &HistoryPolicy, seed: u64, index: u64) -> Result<Rollout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut pol = policy.clone();
    let mut x = mdp.initial_state;
    pol.reset(x)?;
    let mut states = Vec::with_capacity(mdp.horizon + 1);
    states.push(x);
    let mut alarms = usize::from(mask[x]);
    let mut reward = 0.0;
    for t in 0..mdp.horizon {
        let a = sample(pol.distribution()?, rng.gen::<f64>());
        reward += mdp.reward(t, x, a);
        x = sample(mdp.row(x, a), rng.gen::<f64>());
        pol.observe(x)?;
        alarms += usize::from(mask[x]);
        states.push(x);
    }
    reward += mdp.terminal_reward[x];
    Ok(Rollout { alarms, reward, states })
}

/// Runs `cfg.num_trajectories` independent rollouts of `policy` on `mdp`.
pub fn simulate(mdp: &Mdp, policy: &HistoryPolicy, cfg: &SimConfig) -> Result<SimStats> {
    mdp.check()?;
    check_policy_dims(mdp, policy)?;
    if cfg.num_trajectories == 0 {
        return reject("need at least one trajectory");
    }
    let mask = mdp.alarm_mask();
    let rollouts: Vec<Rollout> = (0..cfg.num_trajectories as u64)
        .into_par_iter()
        .map(|i| rollout(mdp, &mask, policy, cfg.seed, i))
        .collect::<Result<_>>()?;

    let horizon = mdp.horizon;
    let n = cfg.num_trajectories;
    let mut alarm_counts = vec![0u64; horizon + 1];
    let mut reward_sum = 0.0;
    let mut sums = [vec![0.0; horizon + 1], vec![0.0; horizon + 1]];
    let mut group = [0usize; 2];
    for r in &rollouts {
        alarm_counts[r.alarms.min(horizon)] += 1;
        reward_sum += r.reward;
        let g = usize::from(r.alarms > 0);
        group[g] += 1;
        for (s, &x) in sums[g].iter_mut().zip(&r.states) {
            *s += x as f64;
        }
    }
    let mean_of = |g: usize, t: usize| (group[g] > 0).then(|| sums[g][t] / group[g] as f64);
    let conditional_means = (0..=horizon)
        .map(|t| ConditionalMean {
            t,
            alarm: mean_of(1, t),
            no_alarm: mean_of(0, t),
        })
        .collect();
    Ok(SimStats {
        num_trajectories: n,
        alarm_count_pmf: alarm_counts.iter().map(|&c| c as f64 / n as f64).collect(),
        alarm_counts,
        mean_reward: reward_sum / n as f64,
        paths: cfg
            .record_paths
            .then(|| rollouts.into_iter().map(|r| r.states).collect()),
        conditional_means,
    })
}

/// Fraction of trajectories with at least `i` alarm visits.
pub fn empirical_chance(stats: &SimStats, i: usize) -> f64 {
    let hits: u64 = stats.alarm_counts.iter().skip(i).sum();
    hits as f64 / stats.num_trajectories as f64
}

/// Half of the L1 distance between two distributions on `0..max(len)`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>()
}

/// `count,probability`
pub fn write_alarm_pmf(path: &FsPath, stats: &SimStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["count", "probability"])?;
    for (k, p) in stats.alarm_count_pmf.iter().enumerate() {
        w.write_record([k.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `trajectory,t,state`; only the header when paths were not recorded.
pub fn write_paths(path: &FsPath, stats: &SimStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trajectory", "t", "state"])?;
    for (i, states) in stats.paths.iter().flatten().enumerate() {
        for (t, x) in states.iter().enumerate() {
            w.write_record([i.to_string(), t.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,mean_alarm,mean_noalarm`; empty fields for empty groups.
pub fn write_conditional_means(path: &FsPath, stats: &SimStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "mean_alarm", "mean_noalarm"])?;
    let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &stats.conditional_means {
        w.write_record([c.t.to_string(), field(c.alarm), field(c.no_alarm)])?;
    }
    w.flush()?;
    Ok(())
}
