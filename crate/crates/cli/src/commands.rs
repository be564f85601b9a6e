use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ccmdp::error::{Error, Result};
use ccmdp::lp::{self, LpProblem, OccupationMeasure, SolverConfig, Status};
use ccmdp::pipeline::{solve_problem1, solve_problem2, Solved};
use ccmdp::policy::{PolicyFile, PolicyMode};
use ccmdp::verify::{self, Suite};
use ccmdp::{augment_binary, augment_counting, detectors, models, sim, Mdp};
use serde::Serialize;

use crate::manifest::{write_atomic, write_text_atomic, Inputs, RunConfig, RunManifest, MANIFEST_FILE};

pub const SOLUTION_FILE: &str = "solution.json";
pub const POLICY_FILE: &str = "policy.json";
pub const ALARM_PMF_FILE: &str = "alarm_pmf.csv";
pub const PATHS_FILE: &str = "paths.csv";
pub const CONDITIONAL_MEANS_FILE: &str = "conditional_means.csv";

/// Loads `builtin:appendix`, `builtin:section5` or an MDP JSON file and
/// validates it.
pub fn load_model(spec: &str) -> Result<Mdp> {
    let mdp = match spec {
        "builtin:appendix" => models::counterexample(),
        "builtin:section5" => models::level_walk(),
        s if s.starts_with("builtin:") => {
            return Err(Error::Rejected(format!(
                "unknown built-in model {s:?}; expected builtin:appendix or builtin:section5"
            )))
        }
        path => {
            let text = read(path)?;
            Mdp::from_json(&text).map_err(|e| with_file(path, e))?
        }
    };
    mdp.check()?;
    Ok(mdp)
}

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{path}: {e}"))))
}

fn with_file(path: &str, e: Error) -> Error {
    match e {
        Error::Parse(msg) => Error::Parse(format!("{path}: {msg}")),
        other => other,
    }
}

/// Chance bounds for `problem` from `--delta` or `--deltas`.
///
/// `--deltas` takes a comma-separated list or `geometric:r`, which expands
/// to `r, r^2, .., r^T`.
pub fn chance_bounds(problem: u8, delta: Option<f64>, deltas: Option<&str>, horizon: usize) -> Result<Vec<f64>> {
    let list = match (delta, deltas) {
        (Some(_), Some(_)) => return Err(Error::Rejected("give either --delta or --deltas, not both".into())),
        (Some(d), None) => vec![d],
        (None, Some(s)) => parse_deltas(s, horizon)?,
        (None, None) => return Err(Error::Rejected("a chance bound is required (--delta or --deltas)".into())),
    };
    match problem {
        1 if list.len() == 1 => Ok(list),
        1 => Err(Error::Rejected(format!("problem 1 takes one bound, got {}", list.len()))),
        2 if list.len() == horizon => Ok(list),
        2 => Err(Error::Rejected(format!(
            "problem 2 takes one bound per alarm count 1..={horizon}, got {}",
            list.len()
        ))),
        p => Err(Error::Rejected(format!("unknown problem {p}; expected 1 or 2"))),
    }
}

fn parse_deltas(s: &str, horizon: usize) -> Result<Vec<f64>> {
    let bad = |part: &str| Error::Parse(format!("--deltas: cannot read {part:?} as a number"));
    if let Some(r) = s.strip_prefix("geometric:") {
        let r: f64 = r.trim().parse().map_err(|_| bad(r))?;
        return Ok((1..=horizon as i32).map(|i| r.powi(i)).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad(p)))
        .collect()
}

pub fn solver_config(tol: Option<f64>) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
        cfg.feasibility_tol = t;
        cfg.optimality_tol = t;
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    problem: u8,
    deltas: &'a [f64],
    status: Status,
    optimum: f64,
    iterations: usize,
    max_primal_residual: f64,
    augmentation: PolicyMode,
    /// Augmented index -> (base state, level).
    index_map: Vec<(usize, usize)>,
    occupation_measure: &'a OccupationMeasure,
}

fn solve_inner(model: &Mdp, problem: u8, deltas: &[f64], cfg: &SolverConfig) -> Result<Solved> {
    match problem {
        1 => solve_problem1(model, deltas[0], cfg),
        _ => solve_problem2(model, deltas, cfg),
    }
}

pub struct SolveArgs<'a> {
    pub model: &'a str,
    pub problem: u8,
    pub deltas: Vec<f64>,
    pub solver: SolverConfig,
    pub out: &'a Path,
}

pub fn solve(args: SolveArgs<'_>) -> Result<RunManifest> {
    let model = load_model(args.model)?;
    let start = Instant::now();
    let solved = solve_inner(&model, args.problem, &args.deltas, &args.solver)?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(args.out)?;
    let policy = PolicyFile::augmented(&solved.markov, &solved.aug);
    let solution = SolutionFile {
        problem: args.problem,
        deltas: &args.deltas,
        status: solved.solution.status,
        optimum: solved.optimum,
        iterations: solved.solution.iterations,
        max_primal_residual: solved.solution.max_primal_residual,
        augmentation: policy.mode,
        index_map: solved.aug.index_map.pairs(),
        occupation_measure: &solved.rho,
    };
    write_text_atomic(&args.out.join(SOLUTION_FILE), &serde_json::to_string(&solution)?)?;
    write_text_atomic(&args.out.join(POLICY_FILE), &policy.to_json()?)?;

    let mut m = RunManifest::new(
        "solve",
        Inputs {
            model: args.model.to_string(),
            policy: None,
        },
        RunConfig {
            problem: Some(args.problem),
            deltas: Some(args.deltas),
            seed: None,
            trajectories: None,
            recorded_paths: None,
            solver: Some(args.solver),
        },
    );
    m.outputs = vec![SOLUTION_FILE.into(), POLICY_FILE.into()];
    m.optimum = Some(solved.optimum);
    m.wall_time_secs = wall;
    write_manifest(args.out, &m)?;
    Ok(m)
}

pub struct SimulateArgs<'a> {
    pub model: &'a str,
    pub policy: &'a str,
    pub trajectories: usize,
    pub seed: u64,
    pub recorded_paths: usize,
    pub out: &'a Path,
}

pub fn simulate(args: SimulateArgs<'_>) -> Result<RunManifest> {
    let model = load_model(args.model)?;
    let policy = PolicyFile::from_json(&read(args.policy)?)
        .map_err(|e| with_file(args.policy, e))?
        .into_history_policy(&model)?;
    let cfg = sim::SimConfig {
        num_trajectories: args.trajectories,
        seed: args.seed,
        record_paths: args.recorded_paths > 0,
    };
    let start = Instant::now();
    let mut stats = sim::simulate(&model, &policy, &cfg)?;
    let wall = start.elapsed().as_secs_f64();
    if let Some(paths) = &mut stats.paths {
        paths.truncate(args.recorded_paths);
    }

    fs::create_dir_all(args.out)?;
    write_atomic(&args.out.join(ALARM_PMF_FILE), |p| sim::write_alarm_pmf(p, &stats))?;
    write_atomic(&args.out.join(PATHS_FILE), |p| sim::write_paths(p, &stats))?;
    write_atomic(&args.out.join(CONDITIONAL_MEANS_FILE), |p| sim::write_conditional_means(p, &stats))?;

    let mut m = RunManifest::new(
        "simulate",
        Inputs {
            model: args.model.to_string(),
            policy: Some(args.policy.to_string()),
        },
        RunConfig {
            problem: None,
            deltas: None,
            seed: Some(args.seed),
            trajectories: Some(args.trajectories),
            recorded_paths: Some(args.recorded_paths),
            solver: None,
        },
    );
    m.outputs = vec![ALARM_PMF_FILE.into(), PATHS_FILE.into(), CONDITIONAL_MEANS_FILE.into()];
    m.mean_reward = Some(stats.mean_reward);
    m.wall_time_secs = wall;
    write_manifest(args.out, &m)?;
    Ok(m)
}

fn write_manifest(out: &Path, m: &RunManifest) -> Result<()> {
    write_text_atomic(&out.join(MANIFEST_FILE), &serde_json::to_string_pretty(m)?)
}

/// Re-runs the command recorded in `manifest` with outputs under `out`.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunManifest> {
    let text = read(&manifest.to_string_lossy())?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: line {} column {}: {e}", manifest.display(), e.line(), e.column())))?;
    let missing = |field: &str| Error::Rejected(format!("manifest has no {field}"));
    match m.command.as_str() {
        "solve" => solve(SolveArgs {
            model: &m.inputs.model,
            problem: m.config.problem.ok_or_else(|| missing("problem"))?,
            deltas: m.config.deltas.clone().ok_or_else(|| missing("deltas"))?,
            solver: m.config.solver.unwrap_or_default(),
            out,
        }),
        "simulate" => simulate(SimulateArgs {
            model: &m.inputs.model,
            policy: m.inputs.policy.as_deref().ok_or_else(|| missing("policy"))?,
            trajectories: m.config.trajectories.ok_or_else(|| missing("trajectories"))?,
            seed: m.config.seed.ok_or_else(|| missing("seed"))?,
            recorded_paths: m.config.recorded_paths.unwrap_or(0),
            out,
        }),
        other => Err(Error::Rejected(format!("cannot replay command {other:?}"))),
    }
}

/// Runs the named suites, printing each report. Returns whether all passed.
pub fn verify(suites: &[Suite]) -> bool {
    let mut ok = true;
    for &s in suites {
        let report = verify::run(s);
        println!("{report}");
        ok &= report.passed();
    }
    ok
}

/// Prints the validation report; `Ok(false)` when the model is invalid.
pub fn validate(model: &str) -> Result<bool> {
    let mdp = match model {
        m if m.starts_with("builtin:") => load_model(m)?,
        path => Mdp::from_json(&read(path)?).map_err(|e| with_file(path, e))?,
    };
    let report = ccmdp::validate_mdp(&mdp);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.ok)
}

pub fn export_lp(model: &str, problem: u8, deltas: &[f64], out: Option<&Path>) -> Result<()> {
    let mdp = load_model(model)?;
    let olp = match problem {
        1 => lp::build_problem1_lp(&augment_binary(&mdp)?, deltas[0])?,
        _ => lp::build_problem2_lp(&augment_counting(&mdp)?, deltas)?,
    };
    emit(out, &olp.lp.to_text())
}

pub fn solve_lp(path: &str, solver: &SolverConfig, out: Option<&Path>) -> Result<Status> {
    let problem = LpProblem::from_text(&read(path)?).map_err(|e| with_file(path, e))?;
    let solution = lp::solve_with(&problem, solver)?;
    emit(out, &serde_json::to_string(&solution)?)?;
    Ok(solution.status)
}

pub fn compose(path: &str, out: Option<&Path>) -> Result<()> {
    let text = read(path)?;
    let model: detectors::DetectorModel = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{path}: line {} column {}: {e}", e.line(), e.column())))?;
    let composed = detectors::compose(&model.plant, &model.detector, &model.rewards)?;
    let report = ccmdp::validate_mdp(&composed.mdp);
    if !report.ok {
        return Err(Error::InvalidMdp(report));
    }
    eprintln!(
        "composed {} states ({} plant states x {} levels{})",
        composed.mdp.num_states,
        composed.num_plant_states,
        composed.levels.len(),
        if composed.time_indexed { " x time" } else { "" }
    );
    emit(out, &composed.mdp.to_json()?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            write_text_atomic(p, text)
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("."))
}
