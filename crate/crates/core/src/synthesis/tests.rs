use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::identify::{build_model, sample_region, Dataset};
use crate::lin_sys::{closed_loop_matrix, rng_stream, simulate_with, Excited, LtiSystem, ZeroController};
use crate::linalg::spectral_radius;

fn scalar_model(a: f64, b: f64, d: f64) -> Model {
    Model {
        a_hat: DMatrix::from_element(1, 1, a),
        b_hat: DMatrix::from_element(1, 1, b),
        d: DMatrix::identity(2, 2) * d,
        delta: 0.1,
        sigma_w: 1.0,
        c_delta: 1.0,
    }
}

fn unit_weights(n_x: usize, n_u: usize) -> CostWeights {
    CostWeights::new(DMatrix::identity(n_x, n_x), DMatrix::identity(n_u, n_u)).unwrap()
}

fn a_tr() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.5, 1.1, 0.0, 0.8])
}

fn example_weights() -> CostWeights {
    CostWeights::new(
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.001])),
        DMatrix::identity(2, 2) * 1000.0,
    )
    .unwrap()
}

/// Model identified from `rollouts` open-loop rollouts of the example plant.
fn identified_model(seed: u64, rollouts: usize, len: usize) -> Model {
    let sys = LtiSystem::new(a_tr(), DMatrix::identity(2, 2), 1.0).unwrap();
    let mut data = Dataset::new(2, 2);
    for r in 0..rollouts {
        let mut rng = rng_stream(seed, 2 * r as u64);
        let mut c = Excited::new(ZeroController { n_x: 2, n_u: 2 }, 1.0, rng_stream(seed, 2 * r as u64 + 1));
        data.push(simulate_with(&sys, &mut c, len, &mut rng).unwrap()).unwrap();
    }
    build_model(&data, 1.0, 0.1).unwrap()
}

#[test]
fn scalar_nominal_matches_riccati() {
    let res = nominal_synthesis(&scalar_model(0.5, 1.0, 1.0), &unit_weights(1, 1), 30).unwrap();
    // p = a²p − a²p²/(p + 1) + 1  ⇔  p² − 0.25p − 1 = 0
    let p = (0.25 + 4.0625f64.sqrt()) / 2.0;
    assert_relative_eq!(res.cost, p, max_relative = 1e-3);
    assert_relative_eq!(res.cost, 1.13278, max_relative = 1e-3);
}

#[test]
fn deadbeat_plant_needs_no_feedback() {
    let w = CostWeights::new(DMatrix::from_element(1, 1, 3.0), DMatrix::from_element(1, 1, 2.0)).unwrap();
    for f in [1, 4] {
        let res = nominal_synthesis(&scalar_model(0.0, 1.0, 1.0), &w, f).unwrap();
        assert_relative_eq!(res.cost, 3.0, epsilon = 1e-6);
        assert!(res.phi.phi_u.iter().all(|u| u.amax() < 1e-5));
    }
}

#[test]
fn uncontrollable_deadbeat_is_infeasible() {
    let err = nominal_synthesis(&scalar_model(0.5, 0.0, 1.0), &unit_weights(1, 1), 6).unwrap_err();
    assert!(matches!(err, Error::Infeasible { .. }), "{err}");
}

fn riccati_cost(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &CostWeights) -> f64 {
    // P = Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA by fixed-point iteration
    let mut p = w.q.clone();
    for _ in 0..10_000 {
        let g = (&w.r + b.transpose() * &p * b).try_inverse().unwrap();
        p = &w.q + a.transpose() * &p * a - a.transpose() * &p * b * g * b.transpose() * &p * a;
    }
    p.trace()
}

/// Optimal cost of steering each unit initial state to zero in `f` steps,
/// summed over the basis. Solved as an equality constrained least squares
/// over the input sequence.
fn terminal_lqr_cost(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &CostWeights, f: usize) -> f64 {
    let (n, m) = (a.nrows(), b.ncols());
    let nv = m * f;
    // x_k = A^{k-1} e + Σ_{j<k} A^{k-1-j} B u_j, k = 1..f+1
    let pow = |k: usize| (0..k).fold(DMatrix::identity(n, n), |acc, _| a * acc);
    let state_map = |k: usize| {
        let mut g = DMatrix::zeros(n, nv);
        for j in 1..k {
            g.view_mut((0, m * (j - 1)), (n, m)).copy_from(&(pow(k - 1 - j) * b));
        }
        g
    };
    let mut total = 0.0;
    for i in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        let mut h = DMatrix::zeros(nv, nv);
        let mut g = DVector::zeros(nv);
        let mut c = 0.0;
        for k in 1..=f {
            let gk = state_map(k);
            let x0 = pow(k - 1) * &e;
            h += gk.transpose() * &w.q * &gk;
            g += gk.transpose() * &w.q * &x0;
            c += (x0.transpose() * &w.q * &x0)[(0, 0)];
            let mut blk = h.view_mut((m * (k - 1), m * (k - 1)), (m, m));
            blk += &w.r;
        }
        let ceq = state_map(f + 1);
        let deq = -(pow(f) * &e);
        let mut kkt = DMatrix::zeros(nv + n, nv + n);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&h);
        kkt.view_mut((nv, 0), (n, nv)).copy_from(&ceq);
        kkt.view_mut((0, nv), (nv, n)).copy_from(&ceq.transpose());
        let mut rhs = DVector::zeros(nv + n);
        rhs.rows_mut(0, nv).copy_from(&(-&g));
        rhs.rows_mut(nv, n).copy_from(&deq);
        let sol = kkt.lu().solve(&rhs).unwrap();
        let u = sol.rows(0, nv);
        total += (u.transpose() * &h * u)[(0, 0)] + 2.0 * g.dot(&u) + c;
    }
    total
}

#[test]
fn example_plant_nominal_matches_terminal_lqr() {
    let model = Model {
        a_hat: a_tr(),
        b_hat: DMatrix::identity(2, 2),
        d: DMatrix::identity(4, 4),
        delta: 0.1,
        sigma_w: 1.0,
        c_delta: 1.0,
    };
    let w = example_weights();
    let res = nominal_synthesis(&model, &w, 12).unwrap();
    let oracle = terminal_lqr_cost(&model.a_hat, &model.b_hat, &w, 12);
    assert_relative_eq!(res.cost, oracle, max_relative = 1e-5);
    let m = closed_loop_matrix(&model.a_hat, &model.b_hat, &res.phi).unwrap();
    assert!(spectral_radius(&m).unwrap() < 1.0);

    // long responses recover the Riccati cost
    let long = nominal_synthesis(&model, &w, 40).unwrap();
    assert_relative_eq!(long.cost, riccati_cost(&model.a_hat, &model.b_hat, &w), max_relative = 1e-2);
}

#[test]
fn robust_cost_bounds_and_limits() {
    let model = identified_model(11, 10, 6);
    let w = example_weights();
    let nominal = nominal_synthesis(&model, &w, 12).unwrap();
    let robust = robust_synthesis(&model, &w, 12).unwrap();
    assert!(robust.cost >= nominal.cost - 1e-6 * nominal.cost);
    let l = robust.lambda.unwrap();
    assert!((0.0..=1.0).contains(&l));
    assert!(robust.cost >= w.q.trace() - 1e-6);
    let cert = robust.certificate.as_ref().unwrap();
    assert!(cert.structure_violation(2) < 1e-7);
    let eig = crate::sls::robust_lmi_min_eigenvalue(&robust.phi.stack(), &cert.p, l, &model.d).unwrap();
    assert!(eig >= -1e-6, "{eig}");

    let tight = Model {
        d: &model.d * 1e6,
        ..model.clone()
    };
    let near = robust_synthesis(&tight, &w, 12).unwrap();
    assert!((near.cost - nominal.cost).abs() <= 5e-3 * nominal.cost, "{} vs {}", near.cost, nominal.cost);
    assert!(near.cost <= robust.cost * (1.0 + 1e-7));
}

#[test]
fn robust_controller_stabilizes_region_boundary() {
    let model = identified_model(12, 10, 6);
    let res = robust_synthesis(&model, &example_weights(), 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (a, b) = sample_region(&model, 1.0, &mut rng).unwrap();
        let m = closed_loop_matrix(&a, &b, &res.phi).unwrap();
        assert!(spectral_radius(&m).unwrap() < 1.0);
    }
    let m = closed_loop_matrix(&model.a_hat, &model.b_hat, &res.phi).unwrap();
    assert!(spectral_radius(&m).unwrap() < 1.0);
}

#[test]
fn zero_uncertainty_matrix_is_infeasible() {
    let model = Model {
        d: DMatrix::zeros(4, 4),
        ..identified_model(13, 10, 6)
    };
    let err = robust_synthesis(&model, &example_weights(), 6).unwrap_err();
    assert!(matches!(err, Error::Infeasible { .. }), "{err}");
}

#[test]
fn fallback_is_labeled_heuristic() {
    let model = Model {
        d: DMatrix::identity(2, 2) * 1e-4,
        ..scalar_model(1.5, 1.0, 1.0)
    };
    let w = unit_weights(1, 1);
    assert!(matches!(robust_synthesis(&model, &w, 6), Err(Error::Infeasible { .. })));
    let opts = SynthesisOptions {
        robust_fallback: Some(1e6),
        ..SynthesisOptions::default()
    };
    let r = robust_synthesis_with(&model, &w, 6, &opts).unwrap();
    assert!(r.heuristic);
}

#[test]
fn grid_construction() {
    let g = Lambda2Grid::default().values(Some(0.37)).unwrap();
    assert_eq!(g.len(), 25);
    assert!(g.contains(&0.37));
    assert_relative_eq!(g[0], 1e-3);
    assert_relative_eq!(*g.last().unwrap(), 1.0);
    assert!(Lambda2Grid::Explicit(vec![]).values(None).is_err());
    assert!(Lambda2Grid::Explicit(vec![0.0]).values(None).is_err());
    assert!(Lambda2Grid::Explicit(vec![1.5]).values(None).is_err());
}

#[test]
fn dual_plan_upper_bound_and_selection() {
    let model = identified_model(14, 10, 6);
    let w = example_weights();
    let opts = SynthesisOptions {
        solver: SolverSettings::tight(),
        ..SynthesisOptions::default()
    };
    let robust = robust_synthesis_with(&model, &w, 8, &opts).unwrap();
    let lnom = robust.lambda.unwrap();
    let setup = DualSetup {
        horizon: 100,
        explore: 20,
        grid: Lambda2Grid::Explicit(vec![0.01, lnom, 0.9]),
    };
    let plan = dual_synthesis_from(&model, &w, 8, &setup, &robust, &opts).unwrap();
    assert!(plan.objective <= 100.0 * robust.cost + 1e-6, "{} > {}", plan.objective, 100.0 * robust.cost);
    assert_eq!(plan.table.len(), 3);
    let best = plan
        .table
        .iter()
        .filter_map(|p| p.objective)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(plan.objective, best);
    let h2 = crate::sls::h2_objective(&w, model.sigma_w);
    let recomputed = 20.0 * h2.evaluate(&plan.phi1) + 80.0 * h2.evaluate(&plan.phi2_planned);
    assert_relative_eq!(plan.objective, recomputed, max_relative = 1e-12);
    assert!((0.0..=1.0).contains(&plan.lambda1));
    for phi in [&plan.phi1, &plan.phi2_planned] {
        let m = closed_loop_matrix(&model.a_hat, &model.b_hat, phi).unwrap();
        assert!(spectral_radius(&m).unwrap() < 1.0);
    }
}

#[test]
fn dual_rejects_bad_horizons() {
    let model = identified_model(15, 10, 6);
    let w = example_weights();
    let robust = robust_synthesis(&model, &w, 4).unwrap();
    for (t, te) in [(10, 0), (10, 10)] {
        let setup = DualSetup {
            horizon: t,
            explore: te,
            grid: Lambda2Grid::default(),
        };
        let r = dual_synthesis_from(&model, &w, 4, &setup, &robust, &SynthesisOptions::default());
        assert!(matches!(r, Err(Error::Contract(_))));
    }
}
