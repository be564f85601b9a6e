//! Product of the state space with an alarm statistic.
//!
//! Binary mode appends a latched "alarm seen" flag, counting mode an alarm
//! counter in `0..=T`. The statistic is updated on every entry into the
//! alarm region, so the joint chance constraint on the base MDP becomes a
//! constraint on the terminal marginal of the augmented one.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::Mdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    Counting,
}

/// Layout of augmented indices: `index = y * num_base + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub num_base: usize,
    pub num_levels: usize,
}

impl IndexMap {
    pub fn new(num_base: usize, num_levels: usize) -> Self {
        Self { num_base, num_levels }
    }

    pub fn len(&self) -> usize {
        self.num_base * self.num_levels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.num_base && y < self.num_levels);
        y * self.num_base + x
    }

    #[inline]
    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index % self.num_base, index / self.num_base)
    }

    /// `(x, y)` for every augmented index in order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.len()).map(|i| self.pair(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedMdp {
    pub base: Mdp,
    pub mode: Mode,
    pub mdp: Mdp,
    pub index_map: IndexMap,
}

impl AugmentedMdp {
    /// Statistic component of an augmented state.
    pub fn level(&self, index: usize) -> usize {
        self.index_map.pair(index).1
    }

    pub fn base_state(&self, index: usize) -> usize {
        self.index_map.pair(index).0
    }
}

/// Augments with a latched alarm flag, `Y = {0, 1}`.
pub fn augment_binary(mdp: &Mdp) -> Result<AugmentedMdp> {
    augment(mdp, Mode::Binary, 2, |_| 1)
}

/// Augments with an alarm counter, `Y = {0, .., T}`.
pub fn augment_counting(mdp: &Mdp) -> Result<AugmentedMdp> {
    let top = mdp.horizon;
    augment(mdp, Mode::Counting, top + 1, move |y| (y + 1).min(top))
}

fn augment(mdp: &Mdp, mode: Mode, levels: usize, bump: impl Fn(usize) -> usize) -> Result<AugmentedMdp> {
    mdp.check()?;
    let n = mdp.num_states;
    let map = IndexMap::new(n, levels);
    let alarm = mdp.alarm_mask();
    let size = map.len();

    let mut transition = vec![vec![vec![0.0; size]; mdp.num_actions]; size];
    for (idx, per_action) in transition.iter_mut().enumerate() {
        let (x, y) = map.pair(idx);
        for (a, row) in per_action.iter_mut().enumerate() {
            for (next, &p) in mdp.row(x, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let y_next = if alarm[next] { bump(y) } else { y };
                row[map.index(next, y_next)] = p;
            }
        }
    }

    let rewards = mdp
        .rewards
        .iter()
        .map(|table| (0..size).map(|i| table[map.pair(i).0].clone()).collect())
        .collect();
    let terminal_reward = (0..size).map(|i| mdp.terminal_reward[map.pair(i).0]).collect();
    let alarm_states = (0..size).filter(|&i| alarm[map.pair(i).0]).collect();

    let augmented = Mdp {
        num_states: size,
        num_actions: mdp.num_actions,
        horizon: mdp.horizon,
        transition,
        rewards,
        terminal_reward,
        alarm_states,
        initial_state: map.index(mdp.initial_state, 0),
    };
    Ok(AugmentedMdp {
        base: mdp.clone(),
        mode,
        mdp: augmented,
        index_map: map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;
    use crate::models::{self, counterexample_states as s};

    fn no_alarm(mut m: Mdp) -> Mdp {
        m.alarm_states.clear();
        m
    }

    #[test]
    fn empty_alarm_region_copies_base_rows() {
        let base = no_alarm(models::level_walk());
        for aug in [augment_binary(&base).unwrap(), augment_counting(&base).unwrap()] {
            for x in 0..base.num_states {
                for a in 0..3 {
                    let row = aug.mdp.row(aug.index_map.index(x, 0), a);
                    assert_eq!(&row[..base.num_states], base.row(x, a));
                    assert!(row[base.num_states..].iter().all(|&p| p == 0.0));
                }
            }
        }
    }

    #[test]
    fn counterexample_first_step() {
        let aug = augment_binary(&models::counterexample()).unwrap();
        let m = &aug.index_map;
        let row = aug.mdp.row(m.index(s::X0, 0), 0);
        assert_eq!(row[m.index(s::X1_ALARM, 1)], 0.25);
        assert_eq!(row[m.index(s::X1, 0)], 0.75);
        assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 2);
        assert_eq!(aug.mdp.initial_state, m.index(s::X0, 0));
    }

    #[test]
    fn binary_flag_is_absorbing_and_valid() {
        let aug = augment_binary(&models::level_walk()).unwrap();
        assert!(validate_mdp(&aug.mdp).ok);
        assert_eq!(aug.mdp.num_states, 32);
        for x in 0..16 {
            for a in 0..3 {
                let row = aug.mdp.row(aug.index_map.index(x, 1), a);
                assert!(row[..16].iter().all(|&p| p == 0.0));
            }
        }
    }

    #[test]
    fn counting_dimensions_and_monotone_counter() {
        let base = models::level_walk();
        let aug = augment_counting(&base).unwrap();
        assert_eq!(aug.mdp.num_states, 256);
        assert!(validate_mdp(&aug.mdp).ok);
        for i in 0..aug.mdp.num_states {
            let y = aug.level(i);
            for a in 0..3 {
                for (j, &p) in aug.mdp.row(i, a).iter().enumerate() {
                    if p > 0.0 {
                        let y2 = aug.level(j);
                        assert!(y2 == y || y2 == (y + 1).min(15), "{y} -> {y2}");
                    }
                }
            }
        }
    }

    #[test]
    fn induced_rewards_and_alarm_region() {
        let base = models::level_walk();
        let aug = augment_binary(&base).unwrap();
        for i in 0..aug.mdp.num_states {
            let (x, _) = aug.index_map.pair(i);
            assert_eq!(aug.mdp.reward(4, i, 2), base.reward(4, x, 2));
            assert_eq!(aug.mdp.terminal_reward[i], base.terminal_reward[x]);
            assert_eq!(aug.mdp.alarm_states.contains(&i), base.alarm_states.contains(&x));
        }
    }

    #[test]
    fn always_alarming_chain_counts_to_horizon() {
        // state 0 -> 1 -> 1 -> ... with 1 in the alarm region
        let base = Mdp {
            num_states: 2,
            num_actions: 1,
            horizon: 4,
            transition: vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            rewards: vec![vec![vec![0.0]; 2]; 4],
            terminal_reward: vec![0.0; 2],
            alarm_states: vec![1],
            initial_state: 0,
        };
        let aug = augment_counting(&base).unwrap();
        let mut state = aug.mdp.initial_state;
        for _ in 0..4 {
            state = aug.mdp.row(state, 0).iter().position(|&p| p == 1.0).unwrap();
        }
        assert_eq!(aug.index_map.pair(state), (1, 4));
    }

    #[test]
    fn invalid_base_is_rejected() {
        let mut m = models::counterexample();
        m.alarm_states.push(0);
        assert!(augment_binary(&m).is_err());
        assert!(augment_counting(&m).is_err());
    }
}
