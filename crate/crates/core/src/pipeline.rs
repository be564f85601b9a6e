//! End-to-end solution: augment, build the occupation LP, solve, extract the
//! augmented Markov policy and lift it to a history-dependent policy.

use crate::augment::{augment_binary, augment_counting, AugmentedMdp};
use crate::error::{Error, Result};
use crate::lp::{self, build_problem1_lp, build_problem2_lp, LpSolution, OccupationLp, OccupationMeasure, SolverConfig, Status};
use crate::mdp::Mdp;
use crate::oracle::backward_induction;
use crate::policy::{extract_policy, lift_policy, HistoryPolicy, MarkovPolicy};

#[derive(Debug, Clone)]
pub struct Solved {
    pub aug: AugmentedMdp,
    pub lp: OccupationLp,
    pub solution: LpSolution,
    pub rho: OccupationMeasure,
    /// Optimal Markov policy on the augmented space.
    pub markov: MarkovPolicy,
    /// The same policy acting on base-state histories.
    pub policy: HistoryPolicy,
    pub optimum: f64,
}

/// Maximizes the expected reward subject to `P(any alarm) <= delta`.
pub fn solve_problem1(base: &Mdp, delta: f64, cfg: &SolverConfig) -> Result<Solved> {
    let aug = augment_binary(base)?;
    let olp = build_problem1_lp(&aug, delta)?;
    finish(aug, olp, cfg, &[delta])
}

/// Maximizes the expected reward subject to `P(alarm count >= i) <= deltas[i - 1]`.
pub fn solve_problem2(base: &Mdp, deltas: &[f64], cfg: &SolverConfig) -> Result<Solved> {
    let aug = augment_counting(base)?;
    let olp = build_problem2_lp(&aug, deltas)?;
    finish(aug, olp, cfg, deltas)
}

fn finish(aug: AugmentedMdp, olp: OccupationLp, cfg: &SolverConfig, bounds: &[f64]) -> Result<Solved> {
    let solution = lp::solve_with(&olp.lp, cfg)?;
    match solution.status {
        Status::Optimal => {}
        Status::Infeasible => return Err(Error::Infeasible(infeasibility_report(&aug, bounds))),
        Status::Unbounded => return Err(Error::Unbounded),
    }
    let rho = olp.measure(&solution.values);
    let markov = extract_policy(&aug, &rho)?;
    let policy = lift_policy(&markov, &aug)?;
    let optimum = solution.objective;
    Ok(Solved {
        aug,
        lp: olp,
        solution,
        rho,
        markov,
        policy,
        optimum,
    })
}

/// Smallest achievable `P(statistic >= i)` on the augmented chain, over
/// all policies.
pub fn minimal_chance(aug: &AugmentedMdp, i: usize) -> Result<f64> {
    let mut m = aug.mdp.clone();
    for table in &mut m.rewards {
        for row in table.iter_mut() {
            row.fill(0.0);
        }
    }
    m.terminal_reward = (0..m.num_states)
        .map(|s| if aug.level(s) >= i { -1.0 } else { 0.0 })
        .collect();
    Ok(-backward_induction(&m)?.0)
}

fn infeasibility_report(aug: &AugmentedMdp, bounds: &[f64]) -> String {
    let mut parts = Vec::new();
    for (k, &d) in bounds.iter().enumerate() {
        let i = k + 1;
        match minimal_chance(aug, i) {
            Ok(p) if p > d => parts.push(format!(
                "P(alarms >= {i}) is at least {p:.6} under every policy but the bound is {d}"
            )),
            Ok(_) => {}
            Err(e) => parts.push(format!("could not evaluate P(alarms >= {i}): {e}")),
        }
    }
    if parts.is_empty() {
        "chance bounds are individually achievable but not jointly".to_string()
    } else {
        parts.join("; ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn counterexample_optimum_is_four() {
        let s = solve_problem1(&models::counterexample(), 0.5, &SolverConfig::default()).unwrap();
        assert!((s.optimum - 4.0).abs() < 1e-9);
        assert!(s.rho.flow_residual(&s.aug.mdp) < 1e-12);
    }

    #[test]
    fn infeasible_bound_is_explained() {
        let err = solve_problem1(&models::counterexample(), 0.1, &SolverConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(msg.contains("at least 0.250000"), "{msg}");
    }
}
