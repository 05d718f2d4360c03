use approx::assert_relative_eq;
use nalgebra::DMatrix;

use super::*;

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn two_by_two_lmi_minimum() {
    // min t  s.t. [[t, 1], [1, t]] ⪰ 0
    let mut p = ConicProgram::new();
    let (id, t) = p.scalar_variable("t");
    let m = MatExpr::from_fn(2, 2, |r, c| if r == c { t.clone() } else { AffExpr::constant(1.0) });
    p.add_psd("lmi", m);
    p.add_linear_objective(&t);
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_relative_eq!(sol.scalar(id), 1.0, epsilon = 1e-6);
    assert_relative_eq!(sol.objective_value, 1.0, epsilon = 1e-6);
}

#[test]
fn negative_identity_is_infeasible() {
    let mut p = ConicProgram::new();
    let (_, x) = p.scalar_variable("x");
    p.add_psd("neg", MatExpr::from_matrix(&(-DMatrix::identity(3, 3))));
    p.add_square(1.0, x);
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    // x ≥ 0 and x ≤ −1
    let mut p = ConicProgram::new();
    let (_, x) = p.scalar_variable("x");
    p.add_psd("lo", MatExpr::from_fn(1, 1, |_, _| x.clone()));
    p.add_psd("hi", MatExpr::from_fn(1, 1, |_, _| -x.clone() - AffExpr::constant(1.0)));
    p.add_square(1.0, x);
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn infeasible_matrix_lmi() {
    // X ⪰ 0, X ⪯ −I
    let mut p = ConicProgram::new();
    let (_, x) = p.symmetric_variable("X", 3);
    p.add_psd("pos", x.clone());
    let upper = MatExpr::from_matrix(&(-DMatrix::identity(3, 3))).sub(&x);
    p.add_psd("neg", upper);
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn projection_onto_nonnegative_orthant() {
    let target = [-1.0, 0.0, 1.0];
    let mut p = ConicProgram::new();
    let (id, y) = p.matrix_variable("y", 3, 1);
    let diag = MatExpr::from_fn(3, 3, |r, c| if r == c { y.get(r, 0).clone() } else { AffExpr::zero() });
    p.add_psd("nonneg", diag);
    for (i, t) in target.iter().enumerate() {
        p.add_square(1.0, y.get(i, 0).clone() - AffExpr::constant(*t));
    }
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    let v = sol.value(id);
    // the middle coordinate is degenerate (zero multiplier on an active
    // constraint), so interior iterates approach it only like √μ
    assert_relative_eq!(v[(0, 0)], 0.0, epsilon = 1e-6);
    assert_relative_eq!(v[(1, 0)], 0.0, epsilon = 1e-3);
    assert_relative_eq!(v[(2, 0)], 1.0, epsilon = 1e-6);
}

#[test]
fn projection_onto_zero_sum_hyperplane() {
    let c = [1.0, 2.0, 3.0];
    let mut p = ConicProgram::new();
    let (id, v) = p.matrix_variable("v", 3, 1);
    let mut sum = AffExpr::zero();
    for (i, ci) in c.iter().enumerate() {
        p.add_square(1.0, v.get(i, 0).clone() - AffExpr::constant(*ci));
        sum += v.get(i, 0);
    }
    p.add_equality(sum);
    let sol = solve(&p, &settings()).unwrap();
    assert!(sol.is_optimal());
    let got = sol.value(id);
    for (i, want) in [-1.0, 0.0, 1.0].iter().enumerate() {
        assert_relative_eq!(got[(i, 0)], *want, epsilon = 1e-8);
    }
}

fn t_example(scale: f64) -> (ConicProgram, VarId) {
    let mut p = ConicProgram::new();
    let (id, t) = p.scalar_variable("t");
    let m = MatExpr::from_fn(2, 2, |r, c| if r == c { t.clone() } else { AffExpr::constant(1.0) });
    p.add_psd("lmi", m);
    p.add_linear_objective(&(t * scale));
    (p, id)
}

#[test]
fn scaled_objective_scales_value() {
    let (p1, id) = t_example(1.0);
    let (p2, _) = t_example(250.0);
    let a = solve(&p1, &settings()).unwrap();
    let b = solve(&p2, &settings()).unwrap();
    assert!(a.is_optimal() && b.is_optimal());
    assert_relative_eq!(b.objective_value, 250.0 * a.objective_value, max_relative = 1e-6);
    assert_relative_eq!(a.scalar(id), b.scalar(id), epsilon = 1e-6);
}

#[test]
fn dropping_a_constraint_keeps_feasibility() {
    let (mut p, _) = t_example(1.0);
    let (_, t) = (VarId(0), AffExpr::var(VarId(0), 0, 0));
    p.add_psd("upper", MatExpr::from_fn(1, 1, |_, _| AffExpr::constant(5.0) - t.clone()));
    assert!(solve(&p, &settings()).unwrap().is_optimal());
    p.psd_constraints.pop();
    assert!(solve(&p, &settings()).unwrap().is_optimal());
    p.psd_constraints.pop();
    // without any constraint the linear objective is unbounded, never infeasible
    assert_ne!(solve(&p, &settings()).unwrap().status, Status::Infeasible);
}

#[test]
fn reloaded_program_solves_identically() {
    let (p, _) = t_example(3.0);
    let json = serde_json::to_string(&p).unwrap();
    let q: ConicProgram = serde_json::from_str(&json).unwrap();
    assert_eq!(solve(&p, &settings()).unwrap(), solve(&q, &settings()).unwrap());
}

#[test]
fn objective_scaling_keeps_minimizer() {
    let build = |scale: f64| {
        let mut p = ConicProgram::new();
        let (id, y) = p.matrix_variable("y", 2, 1);
        let m = MatExpr::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => y.get(0, 0).clone(),
            (1, 1) => y.get(1, 0).clone(),
            _ => AffExpr::constant(1.0),
        });
        p.add_psd("hyperbola", m);
        p.add_square(scale, y.get(0, 0).clone());
        p.add_square(4.0 * scale, y.get(1, 0).clone());
        (p, id)
    };
    let (p1, id) = build(1.0);
    let (p2, _) = build(1e4);
    let a = solve(&p1, &settings()).unwrap();
    let b = solve(&p2, &settings()).unwrap();
    assert!(a.is_optimal() && b.is_optimal());
    // y0·y1 = 1 at the optimum, y0² + 4y1² minimal at y0 = √2, y1 = 1/√2
    assert_relative_eq!(a.value(id)[(0, 0)], 2f64.sqrt(), epsilon = 1e-4);
    assert_relative_eq!(a.value(id), b.value(id), epsilon = 1e-5);
}

#[test]
fn largest_eigenvalue_by_lmi() {
    let c = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.3, -1.0, 1.0, 0.5, 0.3, 0.5, -0.7]);
    let mut p = ConicProgram::new();
    let (id, t) = p.scalar_variable("t");
    let lmi = MatExpr::identity(3).times_scalar(&t).sub(&MatExpr::from_matrix(&c));
    p.add_psd("lmax", lmi);
    p.add_linear_objective(&t);
    let sol = solve(&p, &settings()).unwrap();
    assert!(sol.is_optimal());
    assert_relative_eq!(sol.scalar(id), crate::linalg::max_eigenvalue(&c), epsilon = 1e-6);
}

#[test]
fn symmetric_variable_with_equalities() {
    // min tr X  s.t. X ⪰ C, X₀₁ = 0.2
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let mut p = ConicProgram::new();
    let (id, x) = p.symmetric_variable("X", 2);
    p.add_psd("above", x.sub(&MatExpr::from_matrix(&c)));
    p.add_equality(x.get(1, 0).clone() - AffExpr::constant(0.2));
    p.add_linear_objective(&(x.get(0, 0).clone() + x.get(1, 1).clone()));
    let sol = solve(&p, &settings()).unwrap();
    assert!(sol.is_optimal());
    let v = sol.value(id);
    assert_relative_eq!(v[(0, 1)], 0.2, epsilon = 1e-7);
    assert_relative_eq!(v[(1, 0)], 0.2, epsilon = 1e-7);
    // X − C = [[a, −0.3], [−0.3, b]] with ab = 0.09, a + b minimal ⇒ a = b = 0.3
    assert_relative_eq!(v[(0, 0)], 1.3, epsilon = 1e-5);
    assert_relative_eq!(v[(1, 1)], 2.3, epsilon = 1e-5);
}

#[test]
fn equality_constrained_least_squares() {
    // min (x−1)² + (y−3)²  s.t. x + y = 2
    let mut p = ConicProgram::new();
    let (id, v) = p.matrix_variable("v", 2, 1);
    p.add_square(1.0, v.get(0, 0).clone() - AffExpr::constant(1.0));
    p.add_square(1.0, v.get(1, 0).clone() - AffExpr::constant(3.0));
    p.add_equality(v.get(0, 0).clone() + v.get(1, 0).clone() - AffExpr::constant(2.0));
    let sol = solve(&p, &settings()).unwrap();
    assert!(sol.is_optimal());
    assert_relative_eq!(sol.value(id)[(0, 0)], 0.0, epsilon = 1e-9);
    assert_relative_eq!(sol.value(id)[(1, 0)], 2.0, epsilon = 1e-9);
}

#[test]
fn inconsistent_equalities_are_infeasible() {
    let mut p = ConicProgram::new();
    let (_, x) = p.scalar_variable("x");
    p.add_equality(x.clone() - AffExpr::constant(1.0));
    p.add_equality(x.clone() - AffExpr::constant(2.0));
    p.add_square(1.0, x);
    assert_eq!(solve(&p, &settings()).unwrap().status, Status::Infeasible);
}

#[test]
fn unbounded_below() {
    let mut p = ConicProgram::new();
    let (_, x) = p.scalar_variable("x");
    p.add_psd("pos", MatExpr::from_fn(1, 1, |_, _| x.clone()));
    p.add_linear_objective(&(-x));
    let sol = solve(&p, &settings()).unwrap();
    assert_eq!(sol.status, Status::Unbounded);
}

#[test]
fn malformed_program_is_rejected() {
    let mut p = ConicProgram::new();
    let (_, x) = p.scalar_variable("x");
    p.add_psd("rect", MatExpr::from_fn(1, 2, |_, _| x.clone()));
    assert!(matches!(solve(&p, &settings()), Err(crate::Error::Validation(_))));
}

#[test]
fn solution_serde_round_trip() {
    let mut p = ConicProgram::new();
    let (_, t) = p.scalar_variable("t");
    p.add_psd("lo", MatExpr::from_fn(1, 1, |_, _| t.clone() - AffExpr::constant(2.0)));
    p.add_linear_objective(&t);
    let sol = solve(&p, &settings()).unwrap();
    let json = serde_json::to_string(&sol).unwrap();
    let back: Solution = serde_json::from_str(&json).unwrap();
    assert_eq!(sol, back);
    let pj = serde_json::to_string(&p).unwrap();
    let pb: ConicProgram = serde_json::from_str(&pj).unwrap();
    assert_eq!(p, pb);
}

#[test]
fn deterministic_repeat() {
    let mut p = ConicProgram::new();
    let (_, x) = p.symmetric_variable("X", 3);
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 1.5]);
    p.add_psd("above", x.sub(&MatExpr::from_matrix(&c)));
    for r in 0..3 {
        for col in 0..3 {
            p.add_square(1.0, x.get(r, col).clone());
        }
    }
    let a = solve(&p, &settings()).unwrap();
    let b = solve(&p, &settings()).unwrap();
    assert_eq!(a, b);
    assert!(a.is_optimal());
}
