//! Built-in models, generated in code so the transcription is test-covered.

use crate::mdp::Mdp;

/// State indices of the history-dependence counterexample.
pub mod counterexample_states {
    pub const X0: usize = 0;
    pub const X1: usize = 1;
    pub const X1_ALARM: usize = 2;
    pub const X2: usize = 3;
    pub const X3: usize = 4;
    pub const X3_RISKY: usize = 5;
    pub const X3_RISKY_ALARM: usize = 6;
}

/// The safe action `a`.
pub const SAFE: usize = 0;
/// The risky action `a'`.
pub const RISKY: usize = 1;

/// Seven-state counterexample where Markov policies are strictly suboptimal.
///
/// The action only matters at `x2` (t = 2): the safe action reaches `x3`
/// (reward 1), the risky one splits evenly between `x3'` (reward 10) and the
/// alarming `x3a'` (reward 0). At t = 0 the chain moves to `x1` w.p. 3/4 and
/// to the alarming `x1a` w.p. 1/4; both lead to `x2`.
pub fn counterexample() -> Mdp {
    use counterexample_states::*;
    let n = 7;
    let mut transition = vec![vec![vec![0.0; n]; 2]; n];
    for a in 0..2 {
        transition[X0][a][X1] = 0.75;
        transition[X0][a][X1_ALARM] = 0.25;
        transition[X1][a][X2] = 1.0;
        transition[X1_ALARM][a][X2] = 1.0;
        for s in [X3, X3_RISKY, X3_RISKY_ALARM] {
            transition[s][a][s] = 1.0;
        }
    }
    transition[X2][SAFE][X3] = 1.0;
    transition[X2][RISKY][X3_RISKY] = 0.5;
    transition[X2][RISKY][X3_RISKY_ALARM] = 0.5;

    let mut terminal_reward = vec![0.0; n];
    terminal_reward[X3] = 1.0;
    terminal_reward[X3_RISKY] = 10.0;

    Mdp {
        num_states: n,
        num_actions: 2,
        horizon: 3,
        transition,
        rewards: vec![vec![vec![0.0; 2]; n]; 3],
        terminal_reward,
        alarm_states: vec![X1_ALARM, X3_RISKY_ALARM],
        initial_state: X0,
    }
}

pub const WALK_LEVELS: usize = 16;
pub const WALK_HORIZON: usize = 15;
pub const UP: usize = 0;
pub const STAY: usize = 1;
pub const DOWN: usize = 2;

/// Sixteen-level push-away-from-reference example.
///
/// Index `i` is the level `i + 1`; level 1 is the reference value and the
/// initial state. Levels 6..=16 form the alarm region and the reward is the
/// level itself at every step, including the terminal one. The intended
/// level-17 successor of the top level is folded back onto level 16; that
/// row is unreachable within the horizon from the initial state.
pub fn level_walk() -> Mdp {
    let n = WALK_LEVELS;
    let mut transition = vec![vec![vec![0.0; n]; 3]; n];
    // (up, stay, down) mass for the moves (+1, 0, -1)
    let interior = [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]];
    for x in 0..n {
        for a in [UP, STAY, DOWN] {
            let row = &mut transition[x][a];
            let up = (x + 1).min(n - 1);
            if x == 0 {
                let (p_up, p_stay) = if a == UP { (0.8, 0.2) } else { (0.2, 0.8) };
                row[up] += p_up;
                row[x] += p_stay;
            } else {
                let [pu, ps, pd] = interior[a];
                row[up] += pu;
                row[x] += ps;
                row[x - 1] += pd;
            }
        }
    }
    let level = |x: usize| (x + 1) as f64;
    let stage: Vec<Vec<f64>> = (0..n).map(|x| vec![level(x); 3]).collect();
    Mdp {
        num_states: n,
        num_actions: 3,
        horizon: WALK_HORIZON,
        transition,
        rewards: vec![stage; WALK_HORIZON],
        terminal_reward: (0..n).map(level).collect(),
        alarm_states: (5..n).collect(),
        initial_state: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::validate_mdp;

    #[test]
    fn level_walk_transcription() {
        let m = level_walk();
        assert!(validate_mdp(&m).ok);
        assert_eq!(m.row(0, UP)[1], 0.8);
        assert_eq!(m.row(0, UP)[0], 0.2);
        assert_eq!(m.row(0, DOWN)[1], 0.2);
        assert_eq!(m.row(0, DOWN)[0], 0.8);
        assert_eq!(m.row(4, DOWN)[3], 0.8);
        assert_eq!(m.row(4, STAY)[4], 0.8);
        assert_eq!(m.row(4, UP)[5], 0.8);
        assert_eq!(m.alarm_states.first(), Some(&5));
        assert_eq!(m.alarm_states.len(), 11);
        assert_eq!(m.reward(3, 7, DOWN), 8.0);
        assert_eq!(m.terminal_reward[15], 16.0);
    }

    #[test]
    fn counterexample_transcription() {
        use counterexample_states::*;
        let m = counterexample();
        assert!(validate_mdp(&m).ok);
        assert_eq!(m.row(X0, 0)[X1_ALARM], 0.25);
        assert_eq!(m.row(X2, RISKY)[X3_RISKY_ALARM], 0.5);
        assert_eq!(m.terminal_reward[X3_RISKY], 10.0);
    }
}
