//! Small dense helpers shared by the modules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues are clipped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&d) * v.transpose()))
}

/// Spectral radius via the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "spectral radius of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    // Eigenvalues of nilpotent matrices are only resolved to about ε^{1/n};
    // detect them exactly through a vanishing power.
    let mut p = m.clone();
    let mut k = 1;
    while k < m.nrows() && p.amax() > 0.0 {
        p = &p * &p;
        k *= 2;
    }
    if p.amax() == 0.0 {
        return Ok(0.0);
    }
    Ok(m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Solves `X = A X Aᵀ + W` for stable `A` with the doubling iteration.
pub fn discrete_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::Unstable(rho));
    }
    let mut x = symmetrize(w);
    let mut ak = a.clone();
    for _ in 0..200 {
        let next = &x + &ak * &x * ak.transpose();
        let diff = (&next - &x).amax();
        x = symmetrize(&next);
        if diff <= tol * (1.0 + x.amax()) {
            return Ok(x);
        }
        ak = &ak * &ak;
    }
    Err(Error::Unstable(rho))
}

/// Column-major dense symmetric positive definite factorization used by the
/// interior-point solver.
pub(crate) struct SpdFactor {
    llt: faer::linalg::solvers::Llt<f64>,
    n: usize,
}

impl SpdFactor {
    /// Factors the symmetric matrix held column-major in `data` (`n × n`).
    /// Only the lower triangle is read.
    pub(crate) fn new(data: &[f64], n: usize) -> Option<Self> {
        let mat = faer::MatRef::from_column_major_slice(data, n, n);
        mat.llt(faer::Side::Lower).ok().map(|llt| Self { llt, n })
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        let cols = rhs.len() / self.n.max(1);
        let view = faer::MatMut::from_column_major_slice_mut(rhs, self.n, cols);
        self.llt.solve_in_place(view);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lyapunov_scalar_geometric_series() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let w = DMatrix::from_element(1, 1, 1.0);
        let x = discrete_lyapunov(&a, &w, 1e-12).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0 / 0.75, epsilon = 1e-10);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = DMatrix::from_element(1, 1, 1.1);
        let w = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(discrete_lyapunov(&a, &w, 1e-12), Err(Error::Unstable(_))));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = psd_sqrt(&m);
        assert_relative_eq!(&s * &s, m, epsilon = 1e-12);
    }

    #[test]
    fn spd_factor_solves() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let f = SpdFactor::new(m.as_slice(), 2).unwrap();
        let mut rhs = vec![1.0, 2.0];
        f.solve_in_place(&mut rhs);
        let x = nalgebra::DVector::from_vec(rhs);
        assert_relative_eq!(&m * x, nalgebra::DVector::from_vec(vec![1.0, 2.0]), epsilon = 1e-12);
    }
}
