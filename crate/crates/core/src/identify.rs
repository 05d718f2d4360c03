//! Least-squares identification and the ellipsoidal credibility region
//! around the estimate.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{ensure_dims, Error, Result};
use crate::lin_sys::Trajectory;
use crate::linalg::{max_eigenvalue, symmetrize};

/// Independent rollouts of the same plant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_x: usize,
    pub n_u: usize,
    pub rollouts: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(n_x: usize, n_u: usize) -> Self {
        Self {
            n_x,
            n_u,
            rollouts: Vec::new(),
        }
    }

    pub fn from_rollouts(n_x: usize, n_u: usize, rollouts: Vec<Trajectory>) -> Result<Self> {
        let mut d = Self::new(n_x, n_u);
        for r in rollouts {
            d.push(r)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, traj: Trajectory) -> Result<()> {
        ensure_dims(traj.states.len() == traj.inputs.len(), || {
            format!("{} states but {} inputs", traj.states.len(), traj.inputs.len())
        })?;
        ensure_dims(traj.terminal.len() == self.n_x, || "terminal state length".into())?;
        for (x, u) in traj.states.iter().zip(&traj.inputs) {
            ensure_dims(x.len() == self.n_x && u.len() == self.n_u, || {
                format!(
                    "sample of sizes ({}, {}) in a dataset with n_x = {}, n_u = {}",
                    x.len(),
                    u.len(),
                    self.n_x,
                    self.n_u
                )
            })?;
        }
        self.rollouts.push(traj);
        Ok(())
    }

    /// Transitions `(x_t, u_t, x_{t+1})`, never spanning two rollouts.
    pub fn pairs(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>, &DVector<f64>)> {
        self.rollouts.iter().flat_map(|r| {
            (0..r.len()).map(move |t| {
                let next = if t + 1 < r.len() { &r.states[t + 1] } else { &r.terminal };
                (&r.states[t], &r.inputs[t], next)
            })
        })
    }

    pub fn num_pairs(&self) -> usize {
        self.rollouts.iter().map(Trajectory::len).sum()
    }

    /// `Σ [x_t; u_t][x_t; u_t]ᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let p = self.n_x + self.n_u;
        let mut g = DMatrix::zeros(p, p);
        for (x, u, _) in self.pairs() {
            let z = regressor(x, u);
            g.ger(1.0, &z, &z, 1.0);
        }
        symmetrize(&g)
    }

    /// Writes `rollout_id, t, x_1.., u_1..`; the successor of the last
    /// transition is stored as an extra row with zero input.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["rollout_id".to_string(), "t".to_string()];
        header.extend((1..=self.n_x).map(|i| format!("x_{i}")));
        header.extend((1..=self.n_u).map(|i| format!("u_{i}")));
        wr.write_record(&header)?;
        let zero = DVector::zeros(self.n_u);
        for (id, r) in self.rollouts.iter().enumerate() {
            let rows = r
                .states
                .iter()
                .zip(&r.inputs)
                .chain(std::iter::once((&r.terminal, &zero)));
            for (t, (x, u)) in rows.enumerate() {
                let mut rec = vec![id.to_string(), (t + 1).to_string()];
                rec.extend(x.iter().chain(u.iter()).map(|v| format!("{v:?}")));
                wr.write_record(&rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "rollout_id" || cols[1] != "t" {
            return Err(Error::Csv("header must start with `rollout_id, t`".into()));
        }
        let n_x = cols.iter().filter(|c| c.starts_with("x_")).count();
        let n_u = cols.iter().filter(|c| c.starts_with("u_")).count();
        let expected: Vec<String> = ["rollout_id".to_string(), "t".to_string()]
            .into_iter()
            .chain((1..=n_x).map(|i| format!("x_{i}")))
            .chain((1..=n_u).map(|i| format!("u_{i}")))
            .collect();
        if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() || n_x == 0 {
            return Err(Error::Csv(format!("unexpected header {cols:?}")));
        }
        let mut groups: Vec<(String, Vec<(DVector<f64>, DVector<f64>)>)> = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: column {}: {e}", line + 2, cols[i])))
            };
            let x = DVector::from_iterator(n_x, (0..n_x).map(|i| parse(2 + i)).collect::<Result<Vec<_>>>()?);
            let u = DVector::from_iterator(
                n_u,
                (0..n_u).map(|i| parse(2 + n_x + i)).collect::<Result<Vec<_>>>()?,
            );
            let id = rec[0].to_string();
            match groups.last_mut() {
                Some((g, rows)) if *g == id => rows.push((x, u)),
                _ => {
                    if groups.iter().any(|(g, _)| *g == id) {
                        return Err(Error::Csv(format!("rollout `{id}` is not contiguous")));
                    }
                    groups.push((id, vec![(x, u)]));
                }
            }
        }
        let mut data = Self::new(n_x, n_u);
        for (_, mut rows) in groups {
            let (terminal, _) = rows.pop().expect("non-empty group");
            let (states, inputs) = rows.into_iter().unzip();
            data.push(Trajectory {
                states,
                inputs,
                terminal,
            })?;
        }
        Ok(data)
    }
}

fn regressor(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(x.len() + u.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), u.len()).copy_from(u);
    z
}

pub fn merge(d1: &Dataset, d2: &Dataset) -> Result<Dataset> {
    ensure_dims(d1.n_x == d2.n_x && d1.n_u == d2.n_u, || {
        format!(
            "merging datasets with (n_x, n_u) = ({}, {}) and ({}, {})",
            d1.n_x, d1.n_u, d2.n_x, d2.n_u
        )
    })?;
    let mut out = d1.clone();
    out.rollouts.extend(d2.rollouts.iter().cloned());
    Ok(out)
}

/// `(Â, B̂) = argmin Σ ‖x_{t+1} − A x_t − B u_t‖²`.
pub fn least_squares(data: &Dataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n_x, n_u) = (data.n_x, data.n_u);
    let p = n_x + n_u;
    let n = data.num_pairs();
    let mut z = DMatrix::zeros(n, p);
    let mut y = DMatrix::zeros(n, n_x);
    for (i, (x, u, next)) in data.pairs().enumerate() {
        z.view_mut((i, 0), (1, n_x)).copy_from(&x.transpose());
        z.view_mut((i, n_x), (1, n_u)).copy_from(&u.transpose());
        y.view_mut((i, 0), (1, n_x)).copy_from(&next.transpose());
    }
    if n == 0 {
        return Err(Error::Underdetermined { rank: 0, required: p });
    }
    let svd = z.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(Error::Underdetermined { rank, required: p });
    }
    let theta_t = svd
        .solve(&y, tol)
        .map_err(|e| Error::Contract(format!("least squares: {e}")))?;
    let theta = theta_t.transpose();
    Ok((
        theta.columns(0, n_x).into_owned(),
        theta.columns(n_x, n_u).into_owned(),
    ))
}

/// Residual-based estimate of `σ_w`.
pub fn estimate_noise_std(data: &Dataset, a_hat: &DMatrix<f64>, b_hat: &DMatrix<f64>) -> Result<f64> {
    let p = data.n_x + data.n_u;
    let n = data.num_pairs();
    if n <= p {
        return Err(Error::Underdetermined { rank: n, required: p + 1 });
    }
    let ss: f64 = data
        .pairs()
        .map(|(x, u, next)| (next - a_hat * x - b_hat * u).norm_squared())
        .sum();
    Ok((ss / (data.n_x * (n - p)) as f64).sqrt())
}

/// Which χ² quantile defines the region radius `c_δ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSquareConvention {
    /// Quantile at probability `1 − δ`, giving a region of mass `1 − δ`.
    #[default]
    UpperTail,
    /// Quantile at probability `δ`.
    LowerTail,
}

impl ChiSquareConvention {
    pub fn probability(self, delta: f64) -> f64 {
        match self {
            ChiSquareConvention::UpperTail => 1.0 - delta,
            ChiSquareConvention::LowerTail => delta,
        }
    }
}

/// `c` with `P(χ²_dof ≤ c) = p`.
pub fn chi_square_quantile(dof: usize, p: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Contract("chi-square needs at least one degree of freedom".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Contract(format!("probability must lie in (0, 1), got {p}")));
    }
    let k = dof as f64 / 2.0;
    let cdf = |c: f64| gamma_lr(k, c / 2.0);
    let mut hi = dof as f64 + 10.0;
    while cdf(hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nominal estimate with the region `{(A, B) : XᵀDX ⪯ I}`,
/// `X = [Â − A, B̂ − B]ᵀ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub delta: f64,
    pub sigma_w: f64,
    pub c_delta: f64,
}

impl Model {
    pub fn n_x(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_hat.ncols()
    }
}

pub fn build_model(data: &Dataset, sigma_w: f64, delta: f64) -> Result<Model> {
    build_model_with(data, sigma_w, delta, ChiSquareConvention::default())
}

pub fn build_model_with(
    data: &Dataset,
    sigma_w: f64,
    delta: f64,
    convention: ChiSquareConvention,
) -> Result<Model> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Contract(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(sigma_w > 0.0) {
        return Err(Error::Contract(format!("sigma_w must be positive, got {sigma_w}")));
    }
    let (a_hat, b_hat) = least_squares(data)?;
    let dof = data.n_x * data.n_x + data.n_x * data.n_u;
    let c_delta = chi_square_quantile(dof, convention.probability(delta))?;
    let d = data.gram() / (sigma_w * sigma_w * c_delta);
    Ok(Model {
        a_hat,
        b_hat,
        d,
        delta,
        sigma_w,
        c_delta,
    })
}

/// `λ_max(XᵀDX)`: at most 1 inside the region.
pub fn region_level(model: &Model, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    ensure_dims(a.shape() == model.a_hat.shape() && b.shape() == model.b_hat.shape(), || {
        format!("candidate plant {:?}/{:?}", a.shape(), b.shape())
    })?;
    let (n_x, n_u) = (model.n_x(), model.n_u());
    let mut x = DMatrix::zeros(n_x + n_u, n_x);
    x.view_mut((0, 0), (n_x, n_x)).copy_from(&(&model.a_hat - a).transpose());
    x.view_mut((n_x, 0), (n_u, n_x)).copy_from(&(&model.b_hat - b).transpose());
    Ok(max_eigenvalue(&(x.transpose() * &model.d * x)))
}

pub fn in_credibility_region(model: &Model, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    Ok(region_level(model, a, b)? <= 1.0 + 1e-9)
}

/// A plant with `λ_max(XᵀDX) = radius²`, direction drawn from `rng`.
/// Requires `D ≻ 0`.
pub fn sample_region(model: &Model, radius: f64, rng: &mut impl Rng) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n_x, n_u) = (model.n_x(), model.n_u());
    let p = n_x + n_u;
    let eig = nalgebra::SymmetricEigen::new(symmetrize(&model.d));
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Contract("region sampling needs a positive definite D".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let u = DMatrix::<f64>::from_fn(p, n_x, |_, _| rng.sample(StandardNormal));
    let smax = u.singular_values().max();
    let x = inv_sqrt * u * (radius / smax);
    let a = &model.a_hat - x.rows(0, n_x).transpose();
    let b = &model.b_hat - x.rows(n_x, n_u).transpose();
    Ok((a, b))
}
