use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{max_eigenvalue, min_eigenvalue};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn random_fir(rng: &mut ChaCha8Rng, n_x: usize, n_u: usize, f: usize) -> FirPair {
    FirPair::new(
        (0..f).map(|_| random_matrix(rng, n_x, n_x)).collect(),
        (0..f).map(|_| random_matrix(rng, n_u, n_x)).collect(),
    )
    .unwrap()
}

fn weights(q: &[f64], r: &[f64]) -> CostWeights {
    CostWeights::new(
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(q)),
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(r)),
    )
    .unwrap()
}

#[test]
fn stack_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phi = random_fir(&mut rng, 3, 2, 4);
    let s = phi.stack();
    assert_eq!(s.matrix().shape(), (12, 5));
    assert_eq!(s.matrix()[(3, 4)], phi.phi_u[1][(1, 0)]);
    assert_eq!(s.to_fir(), phi);
}

#[test]
fn symbolic_stack_matches_numeric() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phi = random_fir(&mut rng, 2, 1, 3);
    let e = FirExpr {
        phi_x: phi.phi_x.iter().map(MatExpr::from_matrix).collect(),
        phi_u: phi.phi_u.iter().map(MatExpr::from_matrix).collect(),
    };
    assert_eq!(e.stack().constant_part(), *phi.stack().matrix());
}

#[test]
fn equation_count() {
    let c = affine_constraints(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 12).unwrap();
    assert_eq!(c.equation_count(), 52);
    let mut prog = ConicProgram::new();
    let e = FirExpr::variables(&mut prog, "phi", 2, 2, 12);
    c.emit(&mut prog, &e);
    assert_eq!(prog.equalities.len(), 52);
    assert!(affine_constraints(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 0).is_err());
}

#[test]
fn deadbeat_constraints_for_pure_delay() {
    // Â = 0, B̂ = I, F = 2: Φx(1) = I, Φx(2) = Φu(1), Φu(2) = 0
    let c = affine_constraints(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u1 = random_matrix(&mut rng, 2, 2);
    let good = FirPair::new(
        vec![DMatrix::identity(2, 2), u1.clone()],
        vec![u1.clone(), DMatrix::zeros(2, 2)],
    )
    .unwrap();
    assert!(c.max_residual(&good) < 1e-15);
    let mut bad = good.clone();
    bad.phi_u[1][(0, 0)] = 0.1;
    assert_relative_eq!(c.max_residual(&bad), 0.1);
}

#[test]
fn parametrized_taps_follow_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_matrix(&mut rng, 2, 2);
    let b = random_matrix(&mut rng, 2, 1);
    let c = affine_constraints(&a, &b, 5).unwrap();
    let mut prog = ConicProgram::new();
    let e = c.parametrize(&mut prog, "phi");
    assert_eq!(prog.equalities.len(), 4);
    let vals: Vec<DMatrix<f64>> = (0..5).map(|_| random_matrix(&mut rng, 1, 2)).collect();
    let look = |v: sdp::VarId, r: usize, col: usize| vals[v.0][(r, col)];
    let phi = FirPair {
        phi_x: e.phi_x.iter().map(|m| m.eval(look)).collect(),
        phi_u: e.phi_u.iter().map(|m| m.eval(look)).collect(),
    };
    let res = c.residuals(&phi);
    for r in &res[..5] {
        assert!(r.amax() < 1e-12);
    }
}

#[test]
fn h2_single_identity_tap() {
    let w = weights(&[2.0, 3.0], &[5.0]);
    let mut phi = FirPair::new(
        vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)],
        vec![DMatrix::zeros(1, 2); 2],
    )
    .unwrap();
    assert_relative_eq!(h2_objective(&w, 1.0).evaluate(&phi), 5.0, epsilon = 1e-12);
    assert_relative_eq!(h2_objective(&w, 2.0).evaluate(&phi), 20.0, epsilon = 1e-12);
    phi.phi_u[0][(0, 1)] = 1.0;
    assert_relative_eq!(h2_objective(&w, 1.0).evaluate(&phi), 10.0, epsilon = 1e-12);
}

#[test]
fn h2_example_weights() {
    let w = weights(&[1.0, 0.001], &[1000.0, 1000.0]);
    let phi = FirPair::new(vec![DMatrix::identity(2, 2)], vec![DMatrix::identity(2, 2)]).unwrap();
    assert_relative_eq!(h2_objective(&w, 1.0).evaluate(&phi), 2001.001, epsilon = 1e-9);
}

#[test]
fn h2_symbolic_matches_numeric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = CostWeights::new(
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        DMatrix::from_element(1, 1, 3.0),
    )
    .unwrap();
    let obj = h2_objective(&w, 1.3);
    let mut prog = ConicProgram::new();
    let e = FirExpr::variables(&mut prog, "phi", 2, 1, 3);
    obj.add_to(&mut prog, &e, 2.0);
    let vals: Vec<DMatrix<f64>> = prog
        .variables
        .iter()
        .map(|d| random_matrix(&mut rng, d.rows, d.cols))
        .collect();
    let look = |v: sdp::VarId, r: usize, c: usize| vals[v.0][(r, c)];
    let phi = FirPair {
        phi_x: e.phi_x.iter().map(|m| m.eval(look)).collect(),
        phi_u: e.phi_u.iter().map(|m| m.eval(look)).collect(),
    };
    assert_relative_eq!(prog.objective_at(&vals), 2.0 * obj.evaluate(&phi), max_relative = 1e-12);
}

#[test]
fn h2_lower_bound_on_feasible_pairs() {
    // any feasible pair has Φx(1) = I, so J ≥ σ² tr Q
    let w = weights(&[1.0, 0.5], &[2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_matrix(&mut rng, 2, 2);
    let b = random_matrix(&mut rng, 2, 1);
    let c = affine_constraints(&a, &b, 4).unwrap();
    let mut prog = ConicProgram::new();
    let e = c.parametrize(&mut prog, "phi");
    for _ in 0..20 {
        let vals: Vec<DMatrix<f64>> = (0..4).map(|_| random_matrix(&mut rng, 1, 2)).collect();
        let look = |v: sdp::VarId, r: usize, col: usize| vals[v.0][(r, col)];
        let phi = FirPair {
            phi_x: e.phi_x.iter().map(|m| m.eval(look)).collect(),
            phi_u: e.phi_u.iter().map(|m| m.eval(look)).collect(),
        };
        assert!(h2_objective(&w, 1.0).evaluate(&phi) >= 1.5 - 1e-12);
    }
}

#[test]
fn hinf_structure_parametrization_satisfies_equalities() {
    let s = hinf_structure(4, 2, 1.7).unwrap();
    let mut prog = ConicProgram::new();
    let p = s.parametrize(&mut prog, "X", &AffExpr::constant(1.7));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_matrix(&mut rng, 6, 6);
    let x = &x + x.transpose();
    let look = |_: sdp::VarId, r: usize, c: usize| x[(r, c)];
    let pv = p.eval(look);
    assert!(s.violation(&pv, 1.7) < 1e-12);
    for e in s.equalities(&p, &AffExpr::constant(1.7)) {
        assert!(e.eval(look).abs() < 1e-12);
    }
    assert!(hinf_structure(3, 2, 0.0).is_err());
}

#[test]
fn hinf_parametrization_has_full_dimension() {
    // free symmetric X of size p(F−1) covers the whole structured subspace:
    // dim S^{pF} − (#diag-sum + #band equations) = dim S^{p(F−1)}
    for (p, f) in [(1usize, 2usize), (2, 3), (3, 4), (2, 12)] {
        let n = p * f;
        let sym = n * (n + 1) / 2;
        let eqs = p * (p + 1) / 2 + (f - 1) * p * p;
        let m = p * (f - 1);
        assert_eq!(sym - eqs, m * (m + 1) / 2);
    }
}

#[test]
fn zero_response_certificate() {
    let s = hinf_structure(3, 2, 0.9).unwrap();
    let p = DMatrix::identity(6, 6) * 0.3;
    assert!(s.violation(&p, 0.9) < 1e-15);
    let cert = HinfCertificate { p, gamma: 0.9 };
    assert!(cert.structure_violation(2) < 1e-15);
}

#[test]
fn single_tap_bound_is_largest_singular_value() {
    let g = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -0.5, 0.3, 1.0]);
    let (norm, cert) = hinf_norm_bound(&[g.clone()], &SolverSettings::tight()).unwrap();
    let smax = g.singular_values().max();
    assert_relative_eq!(norm, smax, max_relative = 1e-6);
    assert_relative_eq!(cert.gamma, smax * smax, max_relative = 1e-6);
}

#[test]
fn fir_bound_matches_frequency_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let taps: Vec<DMatrix<f64>> = (0..4).map(|_| random_matrix(&mut rng, 2, 3)).collect();
        let (norm, cert) = hinf_norm_bound(&taps, &SolverSettings::tight()).unwrap();
        let sampled = sampled_hinf_norm(&taps, 512);
        assert!(sampled <= norm * (1.0 + 1e-6), "sampled {sampled} > certified {norm}");
        assert!((norm - sampled) / sampled < 1e-4, "certified {norm}, sampled {sampled}");
        assert!(cert.structure_violation(2) < 1e-6);
    }
}

fn robust_program(stack: &DMatrix<f64>, lambda: Multiplier, d: &DMatrix<f64>, n_x: usize) -> Result<ConicProgram> {
    let mut prog = ConicProgram::new();
    let s = hinf_structure(stack.nrows() / n_x, n_x, 1.0)?;
    let p = s.parametrize(&mut prog, "X", &AffExpr::constant(1.0));
    robust_stability_lmi(
        &mut prog,
        "robust",
        n_x,
        &MatExpr::from_matrix(stack),
        &p,
        &lambda,
        &Uncertainty::Constant(d.clone()),
    )?;
    Ok(prog)
}

#[test]
fn zero_multiplier_with_nonzero_stack_is_infeasible() {
    let stack = DMatrix::from_row_slice(2, 3, &[0.1, 0.0, 0.2, 0.0, 0.1, 0.0]);
    let prog = robust_program(&stack, Multiplier::Fixed(0.0), &DMatrix::identity(3, 3), 2).unwrap();
    let sol = sdp::solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn feasibility_monotone_in_uncertainty_scale() {
    let stack = DMatrix::from_row_slice(4, 3, &[0.5, 0.1, 0.2, 0.0, 0.4, 0.1, 0.2, 0.0, 0.1, 0.1, 0.1, 0.0]);
    let d = DMatrix::identity(3, 3) * 2.0;
    let mut base = None;
    for alpha in [1.0, 3.0, 100.0] {
        let mut prog = ConicProgram::new();
        let (lid, lam) = prog.scalar_variable("lambda");
        let s = hinf_structure(2, 2, 1.0).unwrap();
        let p = s.parametrize(&mut prog, "X", &AffExpr::constant(1.0));
        robust_stability_lmi(
            &mut prog,
            "robust",
            2,
            &MatExpr::from_matrix(&stack),
            &p,
            &Multiplier::Variable(lam),
            &Uncertainty::Constant(&d * alpha),
        )
        .unwrap();
        let sol = sdp::solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "alpha = {alpha}");
        let l = sol.scalar(lid);
        assert!((-1e-7..=1.0 + 1e-7).contains(&l), "lambda = {l}");
        base.get_or_insert(alpha);
    }
}

#[test]
fn variable_multiplier_with_symbolic_uncertainty_is_bilinear() {
    let mut prog = ConicProgram::new();
    let (_, lam) = prog.scalar_variable("lambda");
    let (_, v) = prog.matrix_variable("phi", 2, 3);
    let p = MatExpr::identity(2);
    let d = Uncertainty::Affine(v.transpose().right_mul(&DMatrix::zeros(2, 3)).add(&MatExpr::identity(3).times_scalar(&AffExpr::var(sdp::VarId(1), 0, 0))));
    let err = robust_stability_lmi(&mut prog, "r", 2, &v, &p, &Multiplier::Variable(lam), &d).unwrap_err();
    assert!(matches!(err, Error::Bilinear));
}

#[test]
fn propagated_uncertainty_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d1 = DMatrix::identity(3, 3) * 0.5;
    let phi = random_fir(&mut rng, 2, 1, 3);
    let stack = phi.stack();
    assert_eq!(propagated_uncertainty(&d1, &stack, 0, 4.0).unwrap(), d1);
    let zero = PhiStack::from_matrix(DMatrix::zeros(6, 3), 2, 1).unwrap();
    assert_eq!(propagated_uncertainty(&d1, &zero, 20, 4.0).unwrap(), d1);
    let dt = propagated_uncertainty(&d1, &stack, 20, 4.0).unwrap();
    let diff = &dt - &d1;
    assert!(min_eigenvalue(&diff) >= -1e-12);
    assert!(diff.rank(1e-9) <= 3);
}

#[test]
fn linearization_touches_at_nominal_and_lies_below() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d1 = DMatrix::identity(3, 3) * 0.2;
    let nom = random_fir(&mut rng, 2, 1, 4).stack();
    let lin = linearized_uncertainty(&d1, &nom, 20, 13.36).unwrap();
    let exact = propagated_uncertainty(&d1, &nom, 20, 13.36).unwrap();
    assert!((lin.eval(nom.matrix()) - &exact).amax() < 1e-10);
    let at_zero = lin.eval(&DMatrix::zeros(8, 3));
    let want = &d1 - nom.matrix().transpose() * nom.matrix() * (20.0 / 13.36);
    assert!((at_zero - want).amax() < 1e-12);
    for _ in 0..100 {
        let s = random_fir(&mut rng, 2, 1, 4).stack();
        let gap = propagated_uncertainty(&d1, &s, 20, 13.36).unwrap() - lin.eval(s.matrix());
        assert!(min_eigenvalue(&gap) >= -1e-9);
    }
}

#[test]
fn symbolic_linearization_matches_numeric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d1 = DMatrix::identity(3, 3);
    let nom = random_fir(&mut rng, 2, 1, 2).stack();
    let lin = linearized_uncertainty(&d1, &nom, 7, 3.0).unwrap();
    let mut prog = ConicProgram::new();
    let (_, v) = prog.matrix_variable("s", 4, 3);
    let e = lin.expr(&v);
    let val = random_matrix(&mut rng, 4, 3);
    let got = e.eval(|_, r, c| val[(r, c)]);
    assert!((got - lin.eval(&val)).amax() < 1e-12);
    assert!(max_eigenvalue(&lin.constant()) <= 1.0 + 1e-12);
}
