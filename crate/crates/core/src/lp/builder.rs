//! Occupation-measure linear programs for the augmented MDPs.
//!
//! Variables are the joint probabilities `rho_t(x, a)` of being in state
//! `x` and playing `a` at `t < T`, plus the terminal marginals `rho_T(x)`.
//! Flow conservation ties consecutive stages together and the chance
//! constraints become linear rows over the terminal marginals.

use serde::{Deserialize, Serialize};

use super::problem::LpProblem;
use crate::augment::{AugmentedMdp, Mode};
use crate::error::{reject, Result};
use crate::mdp::Mdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    /// `rho_t(x, a)` at `(t * num_states + x) * num_actions + a`.
    stage: Vec<f64>,
    terminal: Vec<f64>,
}

impl OccupationMeasure {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            stage: vec![0.0; horizon * num_states * num_actions],
            terminal: vec![0.0; num_states],
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
    pub fn stage(&self, t: usize, x: usize, a: usize) -> f64 {
        self.stage[(t * self.num_states + x) * self.num_actions + a]
    }

    #[inline]
    pub fn set_stage(&mut self, t: usize, x: usize, a: usize, v: f64) {
        self.stage[(t * self.num_states + x) * self.num_actions + a] = v;
    }

    #[inline]
    pub fn add_stage(&mut self, t: usize, x: usize, a: usize, v: f64) {
        self.stage[(t * self.num_states + x) * self.num_actions + a] += v;
    }

    #[inline]
    pub fn terminal(&self, x: usize) -> f64 {
        self.terminal[x]
    }

    pub fn set_terminal(&mut self, x: usize, v: f64) {
        self.terminal[x] = v;
    }

    pub fn terminal_marginal(&self) -> &[f64] {
        &self.terminal
    }

    /// State marginal `sum_a rho_t(x, a)` (or `rho_T(x)` at `t = T`).
    pub fn state_marginal(&self, t: usize) -> Vec<f64> {
        if t == self.horizon {
            return self.terminal.clone();
        }
        (0..self.num_states)
            .map(|x| (0..self.num_actions).map(|a| self.stage(t, x, a)).sum())
            .collect()
    }

    /// Total mass at each `t = 0..=T`.
    pub fn masses(&self) -> Vec<f64> {
        (0..=self.horizon).map(|t| self.state_marginal(t).iter().sum()).collect()
    }

    /// Largest absolute difference to `other` over all entries.
    pub fn max_abs_diff(&self, other: &OccupationMeasure) -> f64 {
        self.stage
            .iter()
            .zip(&other.stage)
            .chain(self.terminal.iter().zip(&other.terminal))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest violation of the initial-mass, flow-conservation and
    /// terminal-definition equations for `mdp`.
    pub fn flow_residual(&self, mdp: &Mdp) -> f64 {
        let (n, m) = (self.num_states, self.num_actions);
        let mut worst: f64 = 0.0;
        let init = self.state_marginal(0);
        for (x, v) in init.iter().enumerate() {
            let target = if x == mdp.initial_state { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        for t in 1..=self.horizon {
            let mut inflow = vec![0.0; n];
            for x in 0..n {
                for a in 0..m {
                    let r = self.stage(t - 1, x, a);
                    if r == 0.0 {
                        continue;
                    }
                    for (y, p) in mdp.row(x, a).iter().enumerate() {
                        inflow[y] += p * r;
                    }
                }
            }
            let here = self.state_marginal(t);
            for (h, f) in here.iter().zip(&inflow) {
                worst = worst.max((h - f).abs());
            }
        }
        worst
    }

    /// Probability mass of the terminal marginal on `states`.
    pub fn terminal_mass_on(&self, states: impl IntoIterator<Item = usize>) -> f64 {
        states.into_iter().map(|x| self.terminal[x]).sum()
    }
}

/// Column layout: t-major, then state, then action; terminal columns last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMap {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Stage { t: usize, state: usize, action: usize },
    Terminal { state: usize },
}

impl VariableMap {
    pub fn num_cols(&self) -> usize {
        (self.horizon * self.num_actions + 1) * self.num_states
    }

    #[inline]
    pub fn stage(&self, t: usize, x: usize, a: usize) -> usize {
        (t * self.num_states + x) * self.num_actions + a
    }

    #[inline]
    pub fn terminal(&self, x: usize) -> usize {
        self.horizon * self.num_states * self.num_actions + x
    }

    pub fn describe(&self, col: usize) -> Option<Variable> {
        let stage_cols = self.horizon * self.num_states * self.num_actions;
        if col < stage_cols {
            let a = col % self.num_actions;
            let rest = col / self.num_actions;
            Some(Variable::Stage {
                t: rest / self.num_states,
                state: rest % self.num_states,
                action: a,
            })
        } else if col < self.num_cols() {
            Some(Variable::Terminal {
                state: col - stage_cols,
            })
        } else {
            None
        }
    }
}

/// A built occupation-measure LP with the bookkeeping needed to read the
/// solution back.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationLp {
    pub lp: LpProblem,
    pub map: VariableMap,
    /// `(i, bound)` for the chance row `P(statistic >= i) <= bound`, in the
    /// order of the inequality rows.
    pub chance: Vec<(usize, f64)>,
}

impl OccupationLp {
    pub fn measure(&self, values: &[f64]) -> OccupationMeasure {
        let VariableMap {
            horizon,
            num_states,
            num_actions,
        } = self.map;
        let stage_cols = horizon * num_states * num_actions;
        OccupationMeasure {
            horizon,
            num_states,
            num_actions,
            stage: values[..stage_cols].to_vec(),
            terminal: values[stage_cols..stage_cols + num_states].to_vec(),
        }
    }
}

/// LP for the single joint chance constraint on the binary augmentation.
pub fn build_problem1_lp(aug: &AugmentedMdp, delta: f64) -> Result<OccupationLp> {
    if aug.mode != Mode::Binary {
        return reject("problem 1 needs the binary augmentation");
    }
    check_probability("delta", delta)?;
    let flagged: Vec<usize> = (0..aug.mdp.num_states).filter(|&i| aug.level(i) == 1).collect();
    build_occupation_lp(&aug.mdp, &[(1, flagged, delta)])
}

/// LP for the alarm-count constraints `P(Y_T >= i) <= deltas[i - 1]` on the
/// counting augmentation.
pub fn build_problem2_lp(aug: &AugmentedMdp, deltas: &[f64]) -> Result<OccupationLp> {
    if aug.mode != Mode::Counting {
        return reject("problem 2 needs the counting augmentation");
    }
    if deltas.len() != aug.mdp.horizon {
        return reject(format!(
            "expected {} alarm-count bounds, got {}",
            aug.mdp.horizon,
            deltas.len()
        ));
    }
    for (i, &d) in deltas.iter().enumerate() {
        check_probability(&format!("deltas[{i}]"), d)?;
    }
    let rows: Vec<(usize, Vec<usize>, f64)> = deltas
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let i = k + 1;
            let states = (0..aug.mdp.num_states).filter(|&s| aug.level(s) >= i).collect();
            (i, states, d)
        })
        .collect();
    build_occupation_lp(&aug.mdp, &rows)
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return reject(format!("{name} = {v} is not a probability"));
    }
    Ok(())
}

/// Generic occupation LP over `mdp` with chance rows
/// `sum_{x in states} rho_T(x) <= bound`.
pub fn build_occupation_lp(mdp: &Mdp, chance: &[(usize, Vec<usize>, f64)]) -> Result<OccupationLp> {
    mdp.check()?;
    let map = VariableMap {
        horizon: mdp.horizon,
        num_states: mdp.num_states,
        num_actions: mdp.num_actions,
    };
    let (n, m, horizon) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut lp = LpProblem::with_unit_box(map.num_cols());

    for t in 0..horizon {
        for x in 0..n {
            for a in 0..m {
                lp.objective.push((map.stage(t, x, a), mdp.reward(t, x, a)));
            }
        }
    }
    for x in 0..n {
        lp.objective.push((map.terminal(x), mdp.terminal_reward[x]));
    }
    lp.objective.retain(|e| e.1 != 0.0);

    // initial mass sits on the initial state; every other rho_0 is fixed at 0
    let x0 = mdp.initial_state;
    lp.equalities.push_row((0..m).map(|a| (map.stage(0, x0, a), 1.0)), 1.0);
    for x in (0..n).filter(|&x| x != x0) {
        for a in 0..m {
            lp.upper[map.stage(0, x, a)] = 0.0;
        }
    }

    // predecessors of each state: (from, action, probability)
    let mut into: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for x in 0..n {
        for a in 0..m {
            for (y, &p) in mdp.row(x, a).iter().enumerate() {
                if p != 0.0 {
                    into[y].push((x, a, p));
                }
            }
        }
    }
    for t in 1..=horizon {
        for y in 0..n {
            let own: Vec<(usize, f64)> = if t < horizon {
                (0..m).map(|a| (map.stage(t, y, a), 1.0)).collect()
            } else {
                vec![(map.terminal(y), 1.0)]
            };
            let inflow = into[y].iter().map(|&(x, a, p)| (map.stage(t - 1, x, a), -p));
            lp.equalities.push_row(own.into_iter().chain(inflow), 0.0);
        }
    }

    let mut rows = Vec::with_capacity(chance.len());
    for (i, states, bound) in chance {
        lp.inequalities
            .push_row(states.iter().map(|&x| (map.terminal(x), 1.0)), *bound);
        rows.push((*i, *bound));
    }
    Ok(OccupationLp { lp, map, chance: rows })
}

/// Expected total reward of the occupation measure `rho` on `aug`.
pub fn objective_value(aug: &AugmentedMdp, rho: &OccupationMeasure) -> Result<f64> {
    measure_value(&aug.mdp, rho)
}

/// [`objective_value`] for any MDP.
pub fn measure_value(mdp: &Mdp, rho: &OccupationMeasure) -> Result<f64> {
    if rho.num_states != mdp.num_states || rho.num_actions != mdp.num_actions || rho.horizon != mdp.horizon {
        return reject("occupation measure dimensions do not match the MDP");
    }
    let mut total = 0.0;
    for t in 0..mdp.horizon {
        for x in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                total += mdp.reward(t, x, a) * rho.stage(t, x, a);
            }
        }
    }
    for x in 0..mdp.num_states {
        total += mdp.terminal_reward[x] * rho.terminal[x];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{augment_binary, augment_counting};
    use crate::models;

    #[test]
    fn row_counts_match_layout() {
        let aug = augment_binary(&models::level_walk()).unwrap();
        let olp = build_problem1_lp(&aug, 0.5).unwrap();
        let s = aug.mdp.num_states;
        assert_eq!(olp.lp.num_cols, (15 * 3 + 1) * s);
        assert_eq!(olp.lp.equalities.num_rows(), s * 14 + 1 + s);
        assert_eq!(olp.lp.inequalities.num_rows(), 1);
        // the chance row covers exactly the flagged terminal columns
        let cols: Vec<usize> = olp.lp.inequalities.triplets.iter().map(|t| t.1).collect();
        assert_eq!(cols, (16..32).map(|x| olp.map.terminal(x)).collect::<Vec<_>>());
    }

    #[test]
    fn variable_map_is_a_bijection() {
        let map = VariableMap {
            horizon: 3,
            num_states: 4,
            num_actions: 2,
        };
        let mut seen = vec![false; map.num_cols()];
        for t in 0..3 {
            for x in 0..4 {
                for a in 0..2 {
                    let c = map.stage(t, x, a);
                    assert!(!seen[c]);
                    seen[c] = true;
                    assert_eq!(map.describe(c), Some(Variable::Stage { t, state: x, action: a }));
                }
            }
        }
        for x in 0..4 {
            let c = map.terminal(x);
            assert!(!seen[c]);
            seen[c] = true;
            assert_eq!(map.describe(c), Some(Variable::Terminal { state: x }));
        }
        assert!(seen.into_iter().all(|s| s));
        assert_eq!(map.describe(map.num_cols()), None);
    }

    #[test]
    fn mode_and_length_are_checked() {
        let base = models::counterexample();
        let bin = augment_binary(&base).unwrap();
        let cnt = augment_counting(&base).unwrap();
        assert!(build_problem1_lp(&cnt, 0.5).is_err());
        assert!(build_problem2_lp(&bin, &[0.5; 3]).is_err());
        assert!(build_problem2_lp(&cnt, &[0.5; 2]).is_err());
        assert!(build_problem1_lp(&bin, 1.5).is_err());
        assert!(build_problem2_lp(&cnt, &[0.5, 0.25, 0.125]).is_ok());
    }

    #[test]
    fn zero_rewards_give_zero_value() {
        let mut base = models::counterexample();
        base.terminal_reward = vec![0.0; 7];
        let aug = augment_binary(&base).unwrap();
        let mut rho = OccupationMeasure::zeros(3, 14, 2);
        rho.set_stage(0, 0, 0, 1.0);
        rho.set_terminal(5, 1.0);
        assert_eq!(objective_value(&aug, &rho).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_path_gives_path_reward() {
        // deterministic path 0 -> 1 -> 2 under action 0 with stage rewards t + x
        let m = Mdp {
            num_states: 3,
            num_actions: 1,
            horizon: 2,
            transition: vec![
                vec![vec![0.0, 1.0, 0.0]],
                vec![vec![0.0, 0.0, 1.0]],
                vec![vec![0.0, 0.0, 1.0]],
            ],
            rewards: (0..2).map(|t| (0..3).map(|x| vec![(t + x) as f64]).collect()).collect(),
            terminal_reward: vec![0.0, 0.0, 5.0],
            alarm_states: vec![],
            initial_state: 0,
        };
        let mut rho = OccupationMeasure::zeros(2, 3, 1);
        rho.set_stage(0, 0, 0, 1.0);
        rho.set_stage(1, 1, 0, 1.0);
        rho.set_terminal(2, 1.0);
        assert_eq!(rho.flow_residual(&m), 0.0);
        assert_eq!(measure_value(&m, &rho).unwrap(), 0.0 + 2.0 + 5.0);
    }
}
