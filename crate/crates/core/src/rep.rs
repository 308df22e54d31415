//! Vector-matrix representations of matrix-exponential distributions.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{mat_norm_inf, matrix_exp, to_complex};
use crate::tolerance::ToleranceConfig;

/// An ME representation `(alpha, A)` with density `-alpha A exp(A x) 1`.
///
/// Entries are stored as complex numbers so that Jordan-form representations
/// with complex eigenvalues on the diagonal can be carried through the
/// pipeline; ordinary inputs have zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MERep {
    alpha: RowDVector<Complex64>,
    a: DMatrix<Complex64>,
}

impl MERep {
    pub fn new(alpha: RowDVector<Complex64>, a: DMatrix<Complex64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidInput("empty representation".into()));
        }
        if alpha.len() != a.nrows() {
            return Err(Error::InvalidInput(format!(
                "initial vector has length {} but matrix has order {}",
                alpha.len(),
                a.nrows()
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !alpha.iter().all(finite) || !a.iter().all(finite) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(Self { alpha, a })
    }

    pub fn from_real(alpha: &[f64], a: &DMatrix<f64>) -> Result<Self> {
        let alpha = RowDVector::from_iterator(alpha.len(), alpha.iter().map(|&x| x.into()));
        Self::new(alpha, to_complex(a))
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn alpha(&self) -> &RowDVector<Complex64> {
        &self.alpha
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn is_real(&self) -> bool {
        self.alpha.iter().chain(self.a.iter()).all(|z| z.im == 0.0)
    }

    /// Real parts of `(alpha, A)` when every imaginary part is below `tol`.
    pub fn real_parts(&self, tol: f64) -> Option<(Vec<f64>, DMatrix<f64>)> {
        if self.alpha.iter().chain(self.a.iter()).all(|z| z.im.abs() <= tol) {
            Some((
                self.alpha.iter().map(|z| z.re).collect(),
                self.a.map(|z| z.re),
            ))
        } else {
            None
        }
    }

    pub fn alpha_sum(&self) -> Complex64 {
        self.alpha.iter().sum()
    }

    pub fn norm_inf(&self) -> f64 {
        mat_norm_inf(&self.a)
    }

    /// Checks the normalization `alpha * 1 = 1` and nonsingularity of `A`.
    pub fn check_valid(&self, tol: &ToleranceConfig) -> Result<()> {
        let s = self.alpha_sum();
        if (s - 1.0).norm() > tol.alpha_sum {
            return Err(Error::InvalidInput(format!(
                "initial vector sums to {s}, expected 1"
            )));
        }
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        let lu = (&self.a / Complex64::from(scale)).lu();
        let det = lu.determinant().norm();
        if !(det > 1e-14f64.powi(self.order() as i32).max(f64::MIN_POSITIVE)) || det == 0.0 {
            return Err(Error::InvalidInput("matrix is singular".into()));
        }
        Ok(())
    }

    /// `f^(k)(0) = -alpha A^(k+1) 1` for `k = 0..count`.
    pub fn derivatives_at_zero(&self, count: usize) -> Vec<Complex64> {
        let n = self.order();
        let mut v = DVector::from_element(n, Complex64::from(1.0));
        (0..count)
            .map(|_| {
                v = &self.a * &v;
                -(&self.alpha * &v)[(0, 0)]
            })
            .collect()
    }

    /// `v_k = A^(k+1) 1` row vector products normalized by `scale^(k+1)`.
    pub(crate) fn scaled_derivatives_at_zero(&self, count: usize, scale: f64) -> Vec<Complex64> {
        let n = self.order();
        let a = &self.a / Complex64::from(scale);
        let mut v = DVector::from_element(n, Complex64::from(1.0));
        (0..count)
            .map(|_| {
                v = &a * &v;
                -(&self.alpha * &v)[(0, 0)]
            })
            .collect()
    }
}

/// Density `-alpha A exp(A x) 1` at `x >= 0`.
pub fn pdf_eval(rep: &MERep, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Precondition(format!("pdf argument {x} must be finite and >= 0")));
    }
    let exit = exit_vector(rep);
    let e = matrix_exp(&(rep.matrix() * Complex64::from(x)));
    let value = (rep.alpha() * e * exit)[(0, 0)].re;
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "matrix exponential overflow at x = {x} (||A x||_inf = {:.3e})",
            rep.norm_inf() * x
        )));
    }
    Ok(value)
}

/// Density on a grid, reusing one matrix exponential for evenly spaced points.
pub fn pdf_grid(rep: &MERep, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter().map(|&x| pdf_eval(rep, x)).collect()
}

fn exit_vector(rep: &MERep) -> DVector<Complex64> {
    let n = rep.order();
    -(rep.matrix() * DVector::from_element(n, Complex64::from(1.0)))
}

/// `E[X^k] = k! alpha (-A)^(-k) 1` for `k = 1..=k_max`.
pub fn moments(rep: &MERep, k_max: usize) -> Result<Vec<f64>> {
    let n = rep.order();
    let lu = (-rep.matrix()).lu();
    let mut v = DVector::from_element(n, Complex64::from(1.0));
    let mut factorial = 1.0;
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Numeric("singular matrix in moment computation".into()))?;
        factorial *= k as f64;
        let m = factorial * (rep.alpha() * &v)[(0, 0)].re;
        if !m.is_finite() {
            return Err(Error::Numeric("singular matrix in moment computation".into()));
        }
        out.push(m);
    }
    Ok(out)
}

/// `(alpha W, G)`: equal in distribution to `rep` whenever `A W = W G`.
pub fn apply_transformation(
    rep: &MERep,
    w: &DMatrix<Complex64>,
    g: &DMatrix<Complex64>,
    tol: &ToleranceConfig,
) -> Result<MERep> {
    if w.nrows() != rep.order() || w.ncols() != g.nrows() || !g.is_square() {
        return Err(Error::Precondition(format!(
            "shape mismatch: A is {n}x{n}, W is {}x{}, G is {}x{}",
            w.nrows(),
            w.ncols(),
            g.nrows(),
            g.ncols(),
            n = rep.order()
        )));
    }
    for (i, row) in w.row_iter().enumerate() {
        let s: Complex64 = row.iter().sum();
        if (s - 1.0).norm() > tol.row_sum {
            return Err(Error::Precondition(format!("row {i} of W sums to {s}, expected 1")));
        }
    }
    MERep::new(rep.alpha() * w, g.clone())
}

/// `||A W - W G||_inf / (||A||_inf + ||G||_inf)`.
pub fn transformation_residual(
    rep: &MERep,
    w: &DMatrix<Complex64>,
    g: &DMatrix<Complex64>,
) -> f64 {
    let r = rep.matrix() * w - w * g;
    mat_norm_inf(&r) / (rep.norm_inf() + mat_norm_inf(g)).max(f64::MIN_POSITIVE)
}
