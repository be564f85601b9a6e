//! Product of a finite plant with a residual detector.
//!
//! The composed state is the plant state together with the detector state
//! (a grid level for CUSUM, nothing for chi-squared) and, when the nominal
//! output changes over time, the time index. The detector moves
//! deterministically, so composed kernels copy the plant's mass exactly.
//!
//! CUSUM convention: the level carried by the state at time `t + 1` is the
//! update computed from the level and plant state at time `t`, and a state
//! is in the alarm region when its level exceeds the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, ROW_SUM_TOL};
use crate::policy::MarkovPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePlant {
    pub plant_states: usize,
    pub actions: usize,
    /// `kernel[z][a][z']`.
    pub kernel: Vec<Vec<Vec<f64>>>,
    /// Scalar output `C z` of each plant state.
    pub outputs: Vec<f64>,
    /// Nominal output at `t = 0..=T`.
    pub nominal_outputs: Vec<f64>,
    pub initial_state: usize,
}

impl FinitePlant {
    pub fn horizon(&self) -> usize {
        self.nominal_outputs.len().saturating_sub(1)
    }

    pub fn residual(&self, z: usize, t: usize) -> f64 {
        self.outputs[z] - self.nominal_outputs[t]
    }

    fn time_varying(&self) -> bool {
        self.nominal_outputs.windows(2).any(|w| w[0] != w[1])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (nz, na) = (self.plant_states, self.actions);
        if nz == 0 || na == 0 {
            return bad("plant needs at least one state and one action".into());
        }
        if self.kernel.len() != nz || self.kernel.iter().any(|r| r.len() != na || r.iter().any(|p| p.len() != nz)) {
            return bad(format!("kernel must be {nz} x {na} x {nz}"));
        }
        for (z, per) in self.kernel.iter().enumerate() {
            for (a, row) in per.iter().enumerate() {
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return bad(format!("kernel row z={z} a={a} has an invalid entry"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return bad(format!("kernel row z={z} a={a} sums to {sum}"));
                }
            }
        }
        if self.outputs.len() != nz || self.outputs.iter().any(|y| !y.is_finite()) {
            return bad(format!("outputs must be {nz} finite values"));
        }
        if self.nominal_outputs.len() < 2 || self.nominal_outputs.iter().any(|y| !y.is_finite()) {
            return bad("nominal outputs must be T + 1 >= 2 finite values".into());
        }
        if self.initial_state >= nz {
            return bad(format!("initial plant state {} out of range", self.initial_state));
        }
        Ok(())
    }
}

/// How an updated CUSUM value is mapped onto the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    /// Nearest level, ties to the lower one.
    #[default]
    Nearest,
    /// Largest level not above the value.
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorSpec {
    Chi2 {
        threshold: f64,
    },
    Cusum {
        bias: f64,
        threshold: f64,
        /// Ascending levels starting at 0; the last one is the saturation level.
        grid: Vec<f64>,
        #[serde(default)]
        projection: Projection,
    },
}

impl DetectorSpec {
    /// Uniform CUSUM grid `0, spacing, 2 spacing, ..` up to `max_level`.
    pub fn uniform_cusum(bias: f64, threshold: f64, spacing: f64, max_level: f64) -> Self {
        let steps = (max_level / spacing).round() as usize;
        DetectorSpec::Cusum {
            bias,
            threshold,
            grid: (0..=steps).map(|k| k as f64 * spacing).collect(),
            projection: Projection::Nearest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            DetectorSpec::Chi2 { threshold } => {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return bad(format!("threshold must be positive, got {threshold}"));
                }
            }
            DetectorSpec::Cusum {
                bias, threshold, grid, ..
            } => {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return bad(format!("threshold must be positive, got {threshold}"));
                }
                if !(bias.is_finite() && *bias > 0.0) {
                    return bad(format!("bias must be positive, got {bias}"));
                }
                if grid.first() != Some(&0.0) {
                    return bad("CUSUM grid must start at 0".into());
                }
                if grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) || !w[1].is_finite()) {
                    return bad("CUSUM grid must be finite and strictly ascending".into());
                }
                if !grid.iter().any(|&g| g > 0.0 && g <= *threshold) {
                    return bad(format!(
                        "CUSUM grid has no level in (0, {threshold}]: the smallest positive level is {:?}, \
                         so every accumulated residual below the threshold collapses to 0 or jumps to an alarm",
                        grid.get(1)
                    ));
                }
                if !grid.iter().any(|&g| g > *threshold) {
                    return bad(format!(
                        "CUSUM grid tops out at {} which does not exceed the threshold {threshold}, so it can never alarm",
                        grid[grid.len() - 1]
                    ));
                }
            }
        }
        Ok(())
    }

    /// Bound on `|grid level - exact level|` after `steps` updates, valid
    /// while the exact level stays below the saturation level.
    pub fn level_error_bound(&self, steps: usize) -> f64 {
        match self {
            DetectorSpec::Chi2 { .. } => 0.0,
            DetectorSpec::Cusum { grid, projection, .. } => {
                let gap = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                let per_step = match projection {
                    Projection::Nearest => gap / 2.0,
                    Projection::Floor => gap,
                };
                steps as f64 * per_step
            }
        }
    }
}

/// True iff the squared residual strictly exceeds `threshold`.
pub fn chi2_alarm(z: usize, t: usize, plant: &FinitePlant, threshold: f64) -> bool {
    let r = plant.residual(z, t);
    r * r > threshold
}

/// Exact CUSUM update `max(0, level + |residual| - bias)`.
pub fn cusum_step(level: f64, residual: f64, bias: f64) -> f64 {
    (level + residual.abs() - bias).max(0.0)
}

/// Index of the grid level that `value` maps to; values above the top
/// level saturate.
pub fn project(value: f64, grid: &[f64], rule: Projection) -> usize {
    let top = grid.len() - 1;
    if value >= grid[top] {
        return top;
    }
    // largest k with grid[k] <= value
    let k = grid.partition_point(|&g| g <= value).saturating_sub(1);
    match rule {
        Projection::Floor => k,
        Projection::Nearest => {
            if grid[k + 1] - value < value - grid[k] {
                k + 1
            } else {
                k
            }
        }
    }
}

/// Time-invariant rewards on the plant: `stage[z][a]` and `terminal[z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantRewards {
    pub stage: Vec<Vec<f64>>,
    pub terminal: Vec<f64>,
}

/// Everything needed to compose a model, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub plant: FinitePlant,
    pub detector: DetectorSpec,
    pub rewards: PlantRewards,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedMdp {
    pub mdp: Mdp,
    pub num_plant_states: usize,
    /// Detector levels; a single 0 for chi-squared.
    pub levels: Vec<f64>,
    /// Whether the time index is part of the state.
    pub time_indexed: bool,
}

impl ComposedMdp {
    fn num_times(&self) -> usize {
        if self.time_indexed {
            self.mdp.horizon + 1
        } else {
            1
        }
    }

    pub fn index(&self, z: usize, level: usize, tau: usize) -> usize {
        (tau * self.levels.len() + level) * self.num_plant_states + z
    }

    /// `(plant state, level index, time index)` of a composed state.
    pub fn decode(&self, index: usize) -> (usize, usize, usize) {
        let z = index % self.num_plant_states;
        let rest = index / self.num_plant_states;
        (z, rest % self.levels.len(), rest / self.levels.len())
    }

    /// Plays the plant policy `pi_t(a | z)` regardless of the detector state.
    pub fn lift_plant_policy(&self, policy: &MarkovPolicy) -> Result<MarkovPolicy> {
        if policy.num_states() != self.num_plant_states
            || policy.num_actions() != self.mdp.num_actions
            || policy.horizon() != self.mdp.horizon
        {
            return Err(Error::Rejected("plant policy dimensions do not match".into()));
        }
        debug_assert_eq!(self.mdp.num_states, self.num_plant_states * self.levels.len() * self.num_times());
        MarkovPolicy::from_fn(self.mdp.horizon, self.mdp.num_states, self.mdp.num_actions, |t, x| {
            policy.row(t, self.decode(x).0).to_vec()
        })
    }
}

pub fn compose(plant: &FinitePlant, det: &DetectorSpec, rewards: &PlantRewards) -> Result<ComposedMdp> {
    plant.validate()?;
    det.validate()?;
    let (nz, na) = (plant.plant_states, plant.actions);
    if rewards.stage.len() != nz
        || rewards.stage.iter().any(|r| r.len() != na)
        || rewards.terminal.len() != nz
    {
        return Err(Error::Config(format!("rewards must be {nz} x {na} plus {nz} terminal values")));
    }
    let horizon = plant.horizon();
    let time_indexed = plant.time_varying();
    let levels = match det {
        DetectorSpec::Chi2 { .. } => vec![0.0],
        DetectorSpec::Cusum { grid, .. } => grid.clone(),
    };
    let shell = ComposedMdp {
        mdp: Mdp {
            num_states: 0,
            num_actions: na,
            horizon,
            transition: Vec::new(),
            rewards: Vec::new(),
            terminal_reward: Vec::new(),
            alarm_states: Vec::new(),
            initial_state: 0,
        },
        num_plant_states: nz,
        levels,
        time_indexed,
    };
    let times = shell.num_times();
    let size = nz * shell.levels.len() * times;
    // time used for the nominal output of a composed state
    let time_of = |tau: usize| if time_indexed { tau } else { 0 };

    let mut transition = vec![vec![vec![0.0; size]; na]; size];
    let mut alarm_states = Vec::new();
    for (x, per_action) in transition.iter_mut().enumerate() {
        let (z, l, tau) = shell.decode(x);
        let t = time_of(tau);
        let next_level = match det {
            DetectorSpec::Chi2 { .. } => 0,
            DetectorSpec::Cusum {
                bias, grid, projection, ..
            } => project(cusum_step(grid[l], plant.residual(z, t), *bias), grid, *projection),
        };
        let next_tau = if time_indexed { (tau + 1).min(horizon) } else { 0 };
        for (a, row) in per_action.iter_mut().enumerate() {
            for (z2, &p) in plant.kernel[z][a].iter().enumerate() {
                row[shell.index(z2, next_level, next_tau)] = p;
            }
        }
        let alarmed = match det {
            DetectorSpec::Chi2 { threshold } => chi2_alarm(z, t, plant, *threshold),
            DetectorSpec::Cusum { threshold, grid, .. } => grid[l] > *threshold,
        };
        if alarmed {
            alarm_states.push(x);
        }
    }
    let initial_state = shell.index(plant.initial_state, 0, 0);
    if alarm_states.contains(&initial_state) {
        return Err(Error::Config(format!(
            "the initial plant state {} already alarms at t = 0",
            plant.initial_state
        )));
    }
    let stage: Vec<Vec<f64>> = (0..size).map(|x| rewards.stage[shell.decode(x).0].clone()).collect();
    let mdp = Mdp {
        num_states: size,
        num_actions: na,
        horizon,
        transition,
        rewards: vec![stage; horizon],
        terminal_reward: (0..size).map(|x| rewards.terminal[shell.decode(x).0]).collect(),
        alarm_states,
        initial_state,
    };
    mdp.check()?;
    Ok(ComposedMdp { mdp, ..shell })
}

/// Probability that the detector alarms at least once when the plant is
/// driven by `policy`, computed by enumerating plant paths and running the
/// detector recursion without any grid. The alarm test is
/// `statistic > threshold + margin`.
pub fn direct_alarm_probability(
    plant: &FinitePlant,
    det: &DetectorSpec,
    policy: &MarkovPolicy,
    margin: f64,
) -> Result<f64> {
    plant.validate()?;
    det.validate()?;
    let horizon = plant.horizon();
    if policy.num_states() != plant.plant_states || policy.num_actions() != plant.actions || policy.horizon() != horizon
    {
        return Err(Error::Rejected("plant policy dimensions do not match".into()));
    }
    // Returns the alarm probability of the remaining path given that no
    // alarm has been seen so far.
    fn walk(plant: &FinitePlant, det: &DetectorSpec, policy: &MarkovPolicy, margin: f64, t: usize, z: usize, level: f64) -> f64 {
        let (alarm, next_level) = match det {
            DetectorSpec::Chi2 { threshold } => {
                let r = plant.residual(z, t);
                (r * r > threshold + margin, 0.0)
            }
            DetectorSpec::Cusum { bias, threshold, .. } => {
                (level > threshold + margin, cusum_step(level, plant.residual(z, t), *bias))
            }
        };
        if alarm {
            return 1.0;
        }
        if t == plant.horizon() {
            return 0.0;
        }
        let mut total = 0.0;
        for (a, &pa) in policy.row(t, z).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (z2, &p) in plant.kernel[z][a].iter().enumerate() {
                if p > 0.0 {
                    total += pa * p * walk(plant, det, policy, margin, t + 1, z2, next_level);
                }
            }
        }
        total
    }
    Ok(walk(plant, det, policy, margin, 0, plant.initial_state, 0.0))
}

/// Largest amount by which the grid level exceeds the declared error
/// bound, over every plant path reachable under some action sequence and
/// every step before the grid level saturates. Non-positive when the bound
/// holds.
pub fn projection_error_excess(plant: &FinitePlant, det: &DetectorSpec) -> Result<f64> {
    plant.validate()?;
    det.validate()?;
    let DetectorSpec::Cusum {
        bias, grid, projection, ..
    } = det
    else {
        return Ok(f64::NEG_INFINITY);
    };
    let top = grid.len() - 1;
    let mut worst = f64::NEG_INFINITY;
    let mut stack = vec![(0usize, plant.initial_state, 0.0f64, 0usize)];
    while let Some((t, z, exact, idx)) = stack.pop() {
        worst = worst.max((grid[idx] - exact).abs() - det.level_error_bound(t));
        if t == plant.horizon() || idx == top {
            continue;
        }
        let r = plant.residual(z, t);
        let next_exact = cusum_step(exact, r, *bias);
        let next_idx = project(cusum_step(grid[idx], r, *bias), grid, *projection);
        let mut seen = vec![false; plant.plant_states];
        for a in 0..plant.actions {
            for (z2, &p) in plant.kernel[z][a].iter().enumerate() {
                if p > 0.0 && !seen[z2] {
                    seen[z2] = true;
                    stack.push((t + 1, z2, next_exact, next_idx));
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(nominal: Vec<f64>) -> FinitePlant {
        FinitePlant {
            plant_states: 4,
            actions: 2,
            kernel: (0..4)
                .map(|z| {
                    let mut keep = vec![0.0; 4];
                    keep[z] = 0.5;
                    keep[(z + 1) % 4] += 0.5;
                    let mut back = vec![0.0; 4];
                    back[0] = 1.0;
                    vec![keep, back]
                })
                .collect(),
            outputs: vec![0.0, 0.5, 1.0, 1.5],
            nominal_outputs: nominal,
            initial_state: 0,
        }
    }

    fn rewards() -> PlantRewards {
        PlantRewards {
            stage: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]],
            terminal: vec![0.0, 1.0, 2.0, 3.0],
        }
    }

    #[test]
    fn chi2_is_strict() {
        let p = plant(vec![0.0; 4]);
        assert!(!chi2_alarm(0, 0, &p, 0.1));
        assert!(!chi2_alarm(2, 0, &p, 1.0));
        assert!(chi2_alarm(2, 0, &p, 1.0 - 1e-12));
    }

    #[test]
    fn cusum_arithmetic() {
        assert_eq!(cusum_step(0.0, 0.0, 1.0), 0.0);
        assert_eq!(cusum_step(2.0, 3.0, 1.0), 4.0);
        assert_eq!(cusum_step(2.0, -3.0, 1.0), 4.0);
    }

    #[test]
    fn projection_rules() {
        let g = [0.0, 0.5, 1.0];
        assert_eq!(project(0.25, &g, Projection::Nearest), 0);
        assert_eq!(project(0.26, &g, Projection::Nearest), 1);
        assert_eq!(project(0.49, &g, Projection::Floor), 0);
        assert_eq!(project(0.75, &g, Projection::Floor), 1);
        assert_eq!(project(7.0, &g, Projection::Nearest), 2);
    }

    #[test]
    fn three_step_grid_error_within_bound() {
        let spec = DetectorSpec::uniform_cusum(0.3, 5.0, 0.1, 10.0);
        let DetectorSpec::Cusum { grid, bias, .. } = &spec else { unreachable!() };
        let residuals = [0.87, 1.234, 0.611];
        let (mut exact, mut idx) = (0.0, 0);
        for r in residuals {
            exact = cusum_step(exact, r, *bias);
            idx = project(cusum_step(grid[idx], r, *bias), grid, Projection::Nearest);
        }
        assert!((grid[idx] - exact).abs() <= 0.15);
        assert!((grid[idx] - exact).abs() <= spec.level_error_bound(3) + 1e-12);
    }

    #[test]
    fn chi2_with_huge_threshold_never_alarms() {
        let c = compose(&plant(vec![0.0; 4]), &DetectorSpec::Chi2 { threshold: 100.0 }, &rewards()).unwrap();
        assert!(c.mdp.alarm_states.is_empty());
        assert_eq!(c.mdp.num_states, 4);
    }

    #[test]
    fn cusum_with_large_bias_stays_at_zero() {
        let spec = DetectorSpec::uniform_cusum(2.0, 1.0, 0.5, 2.0);
        let c = compose(&plant(vec![0.0; 4]), &spec, &rewards()).unwrap();
        assert_eq!(c.mdp.num_states, 4 * 5);
        let reach = crate::oracle::forward_propagate(&c.mdp, &MarkovPolicy::uniform(3, 20, 2)).unwrap();
        for t in 0..=3 {
            for (x, m) in reach.state_marginal(t).iter().enumerate() {
                if *m > 0.0 {
                    assert_eq!(c.decode(x).1, 0);
                }
            }
        }
    }

    #[test]
    fn time_varying_nominal_adds_time() {
        let c = compose(&plant(vec![0.0, 0.5, 0.5, 0.0]), &DetectorSpec::Chi2 { threshold: 0.5 }, &rewards()).unwrap();
        assert!(c.time_indexed);
        assert_eq!(c.mdp.num_states, 4 * 4);
        assert!(crate::mdp::validate_mdp(&c.mdp).ok);
        let cusum = DetectorSpec::uniform_cusum(0.2, 1.0, 0.5, 2.0);
        let c = compose(&plant(vec![0.0, 0.5, 0.5, 0.0]), &cusum, &rewards()).unwrap();
        assert_eq!(c.mdp.num_states, 4 * 5 * 4);
    }

    #[test]
    fn coarse_grid_is_a_configuration_error() {
        let spec = DetectorSpec::Cusum {
            bias: 0.1,
            threshold: 0.4,
            grid: vec![0.0, 0.5, 1.0],
            projection: Projection::Nearest,
        };
        let err = compose(&plant(vec![0.0; 4]), &spec, &rewards()).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("no level in (0, 0.4]"), "{err}");
    }

    #[test]
    fn exactly_representable_cusum_matches_direct_recursion() {
        // residuals and bias are multiples of 0.25, so a 0.25 grid is exact
        let spec = DetectorSpec::Cusum {
            bias: 0.25,
            threshold: 1.0,
            grid: (0..=12).map(|k| k as f64 * 0.25).collect(),
            projection: Projection::Nearest,
        };
        let p = plant(vec![0.0; 5]);
        let c = compose(&p, &spec, &rewards()).unwrap();
        let pol = MarkovPolicy::from_fn(4, 4, 2, |t, z| if (t + z) % 3 == 0 { vec![0.25, 0.75] } else { vec![1.0, 0.0] }).unwrap();
        let lifted = crate::policy::HistoryPolicy::memoryless(c.lift_plant_policy(&pol).unwrap(), &c.mdp).unwrap();
        let composed = crate::mdp::alarm_event_probability(&c.mdp, &lifted, 1).unwrap();
        let direct = direct_alarm_probability(&p, &spec, &pol, 0.0).unwrap();
        assert!((composed - direct).abs() < 1e-12, "{composed} vs {direct}");
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = DetectorSpec::uniform_cusum(0.2, 1.0, 0.5, 2.0);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"cusum\""));
        assert_eq!(serde_json::from_str::<DetectorSpec>(&text).unwrap(), spec);
    }
}
