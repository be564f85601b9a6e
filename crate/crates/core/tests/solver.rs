use ccmdp::lp::{self, Certificate, LpProblem, SolverConfig, Status};
use ccmdp::{augment_binary, models};
use proptest::prelude::*;

#[test]
fn single_bounded_variable() {
    let mut lp = LpProblem::with_unit_box(1);
    lp.objective = vec![(0, 1.0)];
    lp.inequalities.push_row([(0, 1.0)], 0.5);
    let s = lp::solve(&lp).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.values[0] - 0.5).abs() < 1e-12);
    assert!((s.objective - 0.5).abs() < 1e-12);
}

#[test]
fn infeasible_rows_come_with_a_farkas_certificate() {
    let mut lp = LpProblem::with_unit_box(2);
    lp.objective = vec![(0, 1.0)];
    lp.equalities.push_row([(0, 1.0), (1, 1.0)], 3.0);
    let s = lp::solve(&lp).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    let cert = s.certificate.expect("certificate");
    assert!(matches!(cert, Certificate::Farkas { .. }));
    assert!(cert.margin(&lp) > 0.0);
}

#[test]
fn unbounded_objective_comes_with_a_ray() {
    let mut lp = LpProblem::with_unit_box(2);
    lp.upper = vec![f64::INFINITY, 1.0];
    lp.objective = vec![(0, 1.0), (1, 1.0)];
    lp.inequalities.push_row([(0, -1.0), (1, 1.0)], 1.0);
    let s = lp::solve(&lp).unwrap();
    assert_eq!(s.status, Status::Unbounded);
    let cert = s.certificate.expect("certificate");
    assert!(matches!(cert, Certificate::Ray(_)));
    assert!(cert.margin(&lp) > 0.0);
}

#[test]
fn zero_bound_on_the_counterexample_is_infeasible() {
    let aug = augment_binary(&models::counterexample()).unwrap();
    let olp = lp::build_problem1_lp(&aug, 0.0).unwrap();
    let s = lp::solve(&olp.lp).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    assert!(s.certificate.unwrap().margin(&olp.lp) > 0.0);
}

#[test]
fn repeated_solves_are_identical() {
    let aug = augment_binary(&models::level_walk()).unwrap();
    let olp = lp::build_problem1_lp(&aug, 0.5).unwrap();
    let a = lp::solve(&olp.lp).unwrap();
    let b = lp::solve(&olp.lp).unwrap();
    assert_eq!(a, b);
}

#[test]
fn objective_scaling_scales_the_optimum() {
    let aug = augment_binary(&models::level_walk()).unwrap();
    let olp = lp::build_problem1_lp(&aug, 0.5).unwrap();
    let base = lp::solve(&olp.lp).unwrap();
    let mut scaled = olp.lp.clone();
    for (_, c) in &mut scaled.objective {
        *c *= 1000.0;
    }
    let s = lp::solve(&scaled).unwrap();
    assert_eq!(s.status, Status::Optimal);
    let rel = (s.objective - 1000.0 * base.objective).abs() / (1000.0 * base.objective);
    assert!(rel <= 1e-9, "relative difference {rel:e}");
    assert!(olp.lp.max_violation(&s.values) <= 1e-8);
}

#[test]
fn text_export_round_trips_to_the_same_solution() {
    let aug = augment_binary(&models::counterexample()).unwrap();
    let olp = lp::build_problem1_lp(&aug, 0.5).unwrap();
    let back = LpProblem::from_text(&olp.lp.to_text()).unwrap();
    assert_eq!(back, olp.lp);
    assert_eq!(lp::solve(&back).unwrap(), lp::solve(&olp.lp).unwrap());
}

/// Best vertex of a two-variable LP with inequality rows and box bounds,
/// by intersecting every pair of constraint lines.
fn brute_force_2d(lp: &LpProblem) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = Vec::new();
    let mut coef = vec![[0.0; 2]; lp.inequalities.num_rows()];
    for &(r, c, v) in &lp.inequalities.triplets {
        coef[r][c] += v;
    }
    lines.extend(coef.into_iter().zip(lp.inequalities.rhs.iter().copied()));
    for j in 0..2 {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        lines.push((e, lp.lower[j]));
        lines.push((e, lp.upper[j]));
    }
    let mut c = [0.0; 2];
    for &(j, v) in &lp.objective {
        c[j] += v;
    }
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for k in i + 1..lines.len() {
            let ([a, b], p) = lines[i];
            let ([d, e], q) = lines[k];
            let det = a * e - b * d;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(p * e - b * q) / det, (a * q - p * d) / det];
            if lp.max_violation(&x) <= 1e-9 {
                let v = c[0] * x[0] + c[1] * x[1];
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

fn small_coef() -> impl Strategy<Value = f64> {
    (-8i32..=8).prop_map(|k| k as f64 / 4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn two_variable_lps_match_vertex_enumeration(
        c in prop::array::uniform2(small_coef()),
        rows in prop::collection::vec((prop::array::uniform2(small_coef()), -4i32..=8), 0..5),
        upper in prop::array::uniform2(1i32..=4),
    ) {
        let mut lp = LpProblem::with_unit_box(2);
        lp.upper = vec![upper[0] as f64, upper[1] as f64];
        lp.objective = vec![(0, c[0]), (1, c[1])];
        for (a, b) in &rows {
            lp.inequalities.push_row([(0, a[0]), (1, a[1])], *b as f64 / 2.0);
        }
        let s = lp::solve_with(&lp, &SolverConfig::default()).unwrap();
        match brute_force_2d(&lp) {
            Some(best) => {
                prop_assert_eq!(s.status, Status::Optimal);
                prop_assert!((s.objective - best).abs() <= 1e-9, "{} vs {}", s.objective, best);
                prop_assert!(lp.max_violation(&s.values) <= 1e-9);
            }
            None => {
                prop_assert_eq!(s.status, Status::Infeasible);
                prop_assert!(s.certificate.unwrap().margin(&lp) > 0.0);
            }
        }
    }

    #[test]
    fn feasible_by_construction_lps_are_solved_feasibly(
        n in 2usize..7,
        seed_rows in prop::collection::vec(prop::collection::vec(small_coef(), 7), 1..5),
        point in prop::collection::vec(0.0f64..1.0, 7),
        c in prop::collection::vec(small_coef(), 7),
        split in 0usize..5,
    ) {
        let mut lp = LpProblem::with_unit_box(n);
        lp.objective = (0..n).map(|j| (j, c[j])).collect();
        for (r, row) in seed_rows.iter().enumerate() {
            let lhs: f64 = (0..n).map(|j| row[j] * point[j]).sum();
            let entries = (0..n).map(|j| (j, row[j]));
            if r < split {
                lp.equalities.push_row(entries, lhs);
            } else {
                lp.inequalities.push_row(entries, lhs + 0.25);
            }
        }
        let s = lp::solve(&lp).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        prop_assert!(lp.max_violation(&s.values) <= 1e-8);
        let at_point: f64 = (0..n).map(|j| c[j] * point[j]).sum();
        prop_assert!(s.objective >= at_point - 1e-9);
    }
}
