//! LTI plants, closed-loop simulation, quadratic costs and the time-domain
//! realization of FIR system responses.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{discrete_lyapunov, min_eigenvalue, symmetrize};
use crate::sls::FirPair;

/// `x_{t+1} = A x_t + B u_t + w_t`, `w_t ~ N(0, σ_w² I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma_w: f64,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, sigma_w: f64) -> Result<Self> {
        ensure_dims(a.is_square() && a.nrows() > 0, || format!("A is {}x{}", a.nrows(), a.ncols()))?;
        ensure_dims(b.nrows() == a.nrows() && b.ncols() > 0, || {
            format!("B is {}x{} for n_x = {}", b.nrows(), b.ncols(), a.nrows())
        })?;
        if !(sigma_w >= 0.0 && sigma_w.is_finite()) {
            return Err(Error::Contract(format!("sigma_w must be nonnegative, got {sigma_w}")));
        }
        Ok(Self { a, b, sigma_w })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + w
    }
}

/// Stage cost weights `xᵀQx + uᵀRu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        for (name, m) in [("Q", &q), ("R", &r)] {
            ensure_dims(m.is_square(), || format!("{name} is {}x{}", m.nrows(), m.ncols()))?;
            if (m - m.transpose()).amax() > 1e-10 * (1.0 + m.amax()) {
                return Err(Error::Contract(format!("{name} is not symmetric")));
            }
            if min_eigenvalue(m) < -1e-10 {
                return Err(Error::Contract(format!("{name} is not positive semidefinite")));
            }
        }
        Ok(Self {
            q: symmetrize(&q),
            r: symmetrize(&r),
        })
    }

    pub fn stage(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }
}

/// States `x_1..x_N` and inputs `u_1..u_N`, plus the successor state `x_{N+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub terminal: DVector<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// State feedback policy evaluated once per time step.
pub trait Controller {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn control(&mut self, x: &DVector<f64>) -> DVector<f64>;
}

#[derive(Clone, Debug)]
pub struct ZeroController {
    pub n_x: usize,
    pub n_u: usize,
}

impl Controller for ZeroController {
    fn state_dim(&self) -> usize {
        self.n_x
    }
    fn input_dim(&self) -> usize {
        self.n_u
    }
    fn control(&mut self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.n_u)
    }
}

/// `u = K x`.
#[derive(Clone, Debug)]
pub struct StaticGain(pub DMatrix<f64>);

impl Controller for StaticGain {
    fn state_dim(&self) -> usize {
        self.0.ncols()
    }
    fn input_dim(&self) -> usize {
        self.0.nrows()
    }
    fn control(&mut self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }
}

/// Adds white Gaussian excitation `e_t ~ N(0, σ_e² I)` to another controller.
pub struct Excited<C> {
    pub inner: C,
    pub sigma_e: f64,
    rng: ChaCha20Rng,
}

impl<C: Controller> Excited<C> {
    pub fn new(inner: C, sigma_e: f64, rng: ChaCha20Rng) -> Self {
        Self { inner, sigma_e, rng }
    }
}

impl<C: Controller> Controller for Excited<C> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn control(&mut self, x: &DVector<f64>) -> DVector<f64> {
        let mut u = self.inner.control(x);
        for v in u.iter_mut() {
            let e: f64 = self.rng.sample(StandardNormal);
            *v += self.sigma_e * e;
        }
        u
    }
}

/// Deterministic generator for stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn check_controller(system: &LtiSystem, controller: &dyn Controller) -> Result<()> {
    if controller.state_dim() != system.n_x() || controller.input_dim() != system.n_u() {
        return Err(Error::Contract(format!(
            "controller maps {} states to {} inputs, plant has n_x = {}, n_u = {}",
            controller.state_dim(),
            controller.input_dim(),
            system.n_x(),
            system.n_u()
        )));
    }
    Ok(())
}

/// Simulates `horizon` steps from `x_0 = 0`, so the first recorded state is `w_0`.
pub fn simulate(
    system: &LtiSystem,
    controller: &mut dyn Controller,
    horizon: usize,
    rng_seed: u64,
) -> Result<Trajectory> {
    let mut rng = rng_stream(rng_seed, 0);
    simulate_with(system, controller, horizon, &mut rng)
}

/// As [`simulate`], drawing noise from `rng`.
pub fn simulate_with(
    system: &LtiSystem,
    controller: &mut dyn Controller,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    check_controller(system, controller)?;
    let x1 = gaussian(rng, system.n_x(), system.sigma_w);
    simulate_from(system, controller, x1, horizon, rng)
}

/// Simulates `horizon` steps starting at the given current state.
pub fn simulate_from(
    system: &LtiSystem,
    controller: &mut dyn Controller,
    x_start: DVector<f64>,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    check_controller(system, controller)?;
    ensure_dims(x_start.len() == system.n_x(), || {
        format!("initial state has length {}, n_x = {}", x_start.len(), system.n_x())
    })?;
    let mut states = Vec::with_capacity(horizon);
    let mut inputs = Vec::with_capacity(horizon);
    let mut x = x_start;
    for _ in 0..horizon {
        let u = controller.control(&x);
        let w = gaussian(rng, system.n_x(), system.sigma_w);
        let next = system.step(&x, &u, &w);
        states.push(x);
        inputs.push(u);
        x = next;
    }
    Ok(Trajectory {
        states,
        inputs,
        terminal: x,
    })
}

/// `Σ_{t=t1}^{t2} x_tᵀQx_t + u_tᵀRu_t` with 1-based inclusive indices.
pub fn evaluate_cost(traj: &Trajectory, weights: &CostWeights, t1: usize, t2: usize) -> Result<f64> {
    if t1 < 1 || t1 > t2 || t2 > traj.len() {
        return Err(Error::Contract(format!(
            "cost range [{t1}, {t2}] invalid for a trajectory of length {}",
            traj.len()
        )));
    }
    Ok((t1 - 1..t2)
        .map(|t| weights.stage(&traj.states[t], &traj.inputs[t]))
        .sum())
}

/// Time-domain realization of an FIR response through internal disturbance
/// estimates `δ`.
#[derive(Clone, Debug)]
pub struct SlsController {
    phi: FirPair,
    /// `history[j]` holds `δ_{t−1−j}`.
    history: Vec<DVector<f64>>,
}

impl SlsController {
    pub fn phi(&self) -> &FirPair {
        &self.phi
    }

    pub fn reset(&mut self) {
        for d in &mut self.history {
            d.fill(0.0);
        }
    }

    /// Most recent disturbance estimate.
    pub fn last_estimate(&self) -> Option<&DVector<f64>> {
        self.history.first()
    }
}

pub fn realize_controller(phi: &FirPair) -> Result<SlsController> {
    let n_x = phi.n_x();
    let id = DMatrix::<f64>::identity(n_x, n_x);
    let dev = (&phi.phi_x[0] - &id).amax();
    if dev > 1e-6 {
        return Err(Error::InvalidResponse(format!(
            "Phi_x(1) deviates from the identity by {dev:.3e}"
        )));
    }
    let mut phi = phi.clone();
    phi.phi_x[0] = id;
    let f = phi.horizon();
    Ok(SlsController {
        history: vec![DVector::zeros(n_x); f.saturating_sub(1)],
        phi,
    })
}

impl Controller for SlsController {
    fn state_dim(&self) -> usize {
        self.phi.n_x()
    }
    fn input_dim(&self) -> usize {
        self.phi.n_u()
    }
    fn control(&mut self, x: &DVector<f64>) -> DVector<f64> {
        let mut delta = x.clone();
        for (j, d) in self.history.iter().enumerate() {
            delta -= &self.phi.phi_x[j + 1] * d;
        }
        let mut u = &self.phi.phi_u[0] * &delta;
        for (j, d) in self.history.iter().enumerate() {
            u += &self.phi.phi_u[j + 1] * d;
        }
        if !self.history.is_empty() {
            self.history.rotate_right(1);
            self.history[0] = delta;
        }
        u
    }
}

/// Closed-loop update `(M, L)` on the augmented state
/// `z_t = (x_t, δ_{t−1}, …, δ_{t−F+1})`: `z_{t+1} = M z_t + [w; 0]` with
/// `u_t = L z_t`.
fn augmented_loop(a: &DMatrix<f64>, b: &DMatrix<f64>, phi: &FirPair) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let f = phi.horizon();
    let dim = n * f;
    let mut l = DMatrix::zeros(b.ncols(), dim);
    l.view_mut((0, 0), (b.ncols(), n)).copy_from(&phi.phi_u[0]);
    for j in 1..f {
        let blk = &phi.phi_u[j] - &phi.phi_u[0] * &phi.phi_x[j];
        l.view_mut((0, n * j), (b.ncols(), n)).copy_from(&blk);
    }
    let mut m = DMatrix::zeros(dim, dim);
    // x_{t+1} = A x_t + B u_t
    let top = b * &l;
    m.view_mut((0, 0), (n, dim)).copy_from(&top);
    let ax = m.view((0, 0), (n, n)) + a;
    m.view_mut((0, 0), (n, n)).copy_from(&ax);
    if f > 1 {
        // δ_t = x_t − Σ_j Φx(j+1) δ_{t−j}
        m.view_mut((n, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
        for j in 1..f {
            m.view_mut((n, n * j), (n, n)).copy_from(&(-&phi.phi_x[j]));
        }
        // shift register
        for j in 2..f {
            m.view_mut((n * j, n * (j - 1)), (n, n))
                .copy_from(&DMatrix::identity(n, n));
        }
    }
    (m, l)
}

pub fn closed_loop_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, phi: &FirPair) -> Result<DMatrix<f64>> {
    ensure_dims(a.is_square() && b.nrows() == a.nrows(), || "plant matrices".into())?;
    ensure_dims(phi.n_x() == a.nrows() && phi.n_u() == b.ncols(), || {
        format!(
            "response is for n_x = {}, n_u = {}, plant has n_x = {}, n_u = {}",
            phi.n_x(),
            phi.n_u(),
            a.nrows(),
            b.ncols()
        )
    })?;
    Ok(augmented_loop(a, b, phi).0)
}

pub use crate::linalg::spectral_radius;

fn stationary_cost(
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    g_w: &DMatrix<f64>,
    g_e: &DMatrix<f64>,
    sigma_w: f64,
    sigma_e: f64,
    weights: &CostWeights,
) -> Result<f64> {
    let n = weights.q.nrows();
    let noise = g_w * g_w.transpose() * sigma_w.powi(2) + g_e * g_e.transpose() * sigma_e.powi(2);
    let sigma = discrete_lyapunov(m, &noise, 1e-10)?;
    let sxx = sigma.view((0, 0), (n, n)).into_owned();
    let suu = l * &sigma * l.transpose()
        + DMatrix::identity(l.nrows(), l.nrows()) * sigma_e.powi(2);
    Ok((&weights.q * sxx).trace() + (&weights.r * suu).trace())
}

/// Expected per-step cost of `u = Kx + e`, `e ~ N(0, σ_e² I)`, in steady state.
pub fn stationary_cost_with_excitation(
    system: &LtiSystem,
    k: &DMatrix<f64>,
    sigma_e: f64,
    weights: &CostWeights,
) -> Result<f64> {
    ensure_dims(k.nrows() == system.n_u() && k.ncols() == system.n_x(), || {
        format!("K is {}x{}", k.nrows(), k.ncols())
    })?;
    let m = &system.a + &system.b * k;
    let g_w = DMatrix::identity(system.n_x(), system.n_x());
    stationary_cost(&m, k, &g_w, &system.b, system.sigma_w, sigma_e, weights)
}

/// Steady-state per-step cost of the realized FIR controller plus input
/// excitation `e ~ N(0, σ_e² I)` on the plant `system`.
pub fn stationary_cost_sls(
    system: &LtiSystem,
    phi: &FirPair,
    sigma_e: f64,
    weights: &CostWeights,
) -> Result<f64> {
    let (m, l) = augmented_loop(&system.a, &system.b, phi);
    let n = system.n_x();
    let dim = m.nrows();
    let mut g_w = DMatrix::zeros(dim, n);
    g_w.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    let mut g_e = DMatrix::zeros(dim, system.n_u());
    g_e.view_mut((0, 0), (n, system.n_u())).copy_from(&system.b);
    stationary_cost(&m, &l, &g_w, &g_e, system.sigma_w, sigma_e, weights)
}
