//! Spectral analysis of ME densities and Jordan-form minimal representations.

use std::fmt;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cluster_eigenvalues, eigenvalues, solve_least_squares};
use crate::rep::MERep;
use crate::tolerance::ToleranceConfig;

/// One exponential-polynomial term `sum_j c_j x^(j-1) e^(s x)` of a density.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTerm {
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
    /// `coeffs[j]` multiplies `x^j e^(s x)`.
    pub coeffs: Vec<Complex64>,
}

impl SpectralTerm {
    pub fn is_real(&self) -> bool {
        self.eigenvalue.im == 0.0
    }

    pub fn leading_coeff(&self) -> Complex64 {
        *self.coeffs.last().expect("nonempty term")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Surviving terms sorted by descending real part.
    pub terms: Vec<SpectralTerm>,
    pub dominant: usize,
    /// Eigenvalues of the input that do not contribute to the density, with
    /// the number of removed Jordan levels.
    pub dropped: Vec<(Complex64, usize)>,
    /// Spectral radius used for scaling and tie detection.
    pub scale: f64,
    pub cluster_tol: f64,
}

impl SpectralData {
    pub fn order(&self) -> usize {
        self.terms.iter().map(|t| t.multiplicity).sum()
    }

    pub fn dominant_term(&self) -> &SpectralTerm {
        &self.terms[self.dominant]
    }

    /// `lambda_1`, the negated real part of the dominant eigenvalue.
    pub fn lambda1(&self) -> f64 {
        -self.dominant_term().eigenvalue.re
    }

    pub fn n1(&self) -> usize {
        self.dominant_term().multiplicity
    }

    /// Evaluates the exponential-polynomial expansion at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let e = (t.eigenvalue * x).exp();
                let mut poly = Complex64::from(0.0);
                for c in t.coeffs.iter().rev() {
                    poly = poly * x + c;
                }
                (poly * e).re
            })
            .sum()
    }
}

/// Clusters the eigenvalues of `A` and extracts the density expansion
/// coefficients from `f^(k)(0)`, dropping eigenvalues that do not contribute.
pub fn analyze_spectrum(rep: &MERep, tol: &ToleranceConfig) -> Result<SpectralData> {
    rep.check_valid(tol)?;
    let n = rep.order();
    let raw = eigenvalues(rep.matrix())?;
    let norm = rep.norm_inf();
    let spectrum = cluster_eigenvalues(&raw, tol.cluster * norm, norm, rep.is_real());
    let scale = spectrum
        .eigenvalues
        .iter()
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    // scaled derivatives d_k = f^(k)(0) / w^(k+1); unknowns c_{i,p} / w^(p+1)
    let d = rep.scaled_derivatives_at_zero(n, scale);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    let mut col = 0;
    let mut columns = Vec::with_capacity(n);
    for (idx, &(s, mult)) in spectrum.eigenvalues.iter().enumerate() {
        let sh = s / scale;
        for p in 0..mult {
            for k in p..n {
                // k! / (k - p)!
                let falling: f64 = ((k - p + 1)..=k).map(|v| v as f64).product();
                m[(k, col)] = sh.powu((k - p) as u32) * falling;
            }
            columns.push((idx, p));
            col += 1;
        }
    }
    // size of the data itself; cancelling terms can make cmax much larger
    let dmax = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut rhs = DVector::from_vec(d);
    for k in 0..n {
        let r = m.row(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if r > 0.0 {
            m.row_mut(k).scale_mut(1.0 / r);
            rhs[k] /= r;
        }
    }
    let col_scale: Vec<f64> = (0..n)
        .map(|j| m.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
        .collect();
    for (j, s) in col_scale.iter().enumerate() {
        m.column_mut(j).scale_mut(1.0 / s);
    }
    let (sol, _) = solve_least_squares(m, &rhs, "coefficient system", tol.max_condition)?;
    let scaled: Vec<Complex64> = (0..n).map(|j| sol[j] / col_scale[j]).collect();

    let mut grouped: Vec<Vec<Complex64>> = spectrum
        .eigenvalues
        .iter()
        .map(|&(_, m)| vec![Complex64::from(0.0); m])
        .collect();
    for (j, &(idx, p)) in columns.iter().enumerate() {
        grouped[idx][p] = scaled[j];
    }
    if rep.is_real() {
        symmetrize(&spectrum.eigenvalues, &mut grouped);
    }
    let cmax = grouped.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    if !(cmax > 0.0) || !cmax.is_finite() {
        return Err(Error::Numeric("density expansion has no nonzero coefficient".into()));
    }

    let zero = tol.coeff_zero * cmax.min(dmax);
    let mut terms = Vec::new();
    let mut dropped = Vec::new();
    for (&(s, mult), coeffs) in spectrum.eigenvalues.iter().zip(grouped) {
        let keep = coeffs
            .iter()
            .rposition(|c| c.norm() > zero)
            .map_or(0, |p| p + 1);
        if keep < mult {
            dropped.push((s, mult - keep));
        }
        if keep == 0 {
            continue;
        }
        let coeffs = coeffs[..keep]
            .iter()
            .enumerate()
            .map(|(p, c)| c * scale.powi(p as i32 + 1))
            .collect();
        terms.push(SpectralTerm {
            eigenvalue: s,
            multiplicity: keep,
            coeffs,
        });
    }
    Ok(SpectralData {
        terms,
        dominant: 0,
        dropped,
        scale,
        cluster_tol: tol.cluster * norm,
    })
}

// conjugate eigenvalues of a real density carry conjugate coefficients
fn symmetrize(eigs: &[(Complex64, usize)], coeffs: &mut [Vec<Complex64>]) {
    for i in 0..eigs.len() {
        let (s, m) = eigs[i];
        if s.im == 0.0 {
            for c in coeffs[i].iter_mut() {
                c.im = 0.0;
            }
            continue;
        }
        if s.im < 0.0 {
            continue;
        }
        let partner = (0..eigs.len()).find(|&j| eigs[j].0 == s.conj() && eigs[j].1 == m);
        if let Some(j) = partner {
            for p in 0..m {
                let avg = (coeffs[i][p] + coeffs[j][p].conj()) / 2.0;
                coeffs[i][p] = avg;
                coeffs[j][p] = avg.conj();
            }
        }
    }
}

/// Jordan-form representation of order `sum n_i` with one block per term.
pub fn minimal_representation(spec: &SpectralData) -> Result<MERep> {
    if spec.terms.is_empty() {
        return Err(Error::Precondition("empty spectral data".into()));
    }
    let n = spec.order();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    let mut alpha = RowDVector::<Complex64>::zeros(n);
    let mut offset = 0;
    for t in &spec.terms {
        let (s, m) = (t.eigenvalue, t.multiplicity);
        if s.norm() == 0.0 {
            return Err(Error::Precondition("zero eigenvalue in spectral data".into()));
        }
        for i in 0..m {
            a[(offset + i, offset + i)] = s;
            if i + 1 < m {
                a[(offset + i, offset + i + 1)] = 1.0.into();
            }
        }
        // e_q^T J e^{Jx} 1 = e^{sx} sum_p x^p w_{q+p} / p!  with  w = J 1
        let w = |i: usize| if i + 1 < m { s + 1.0 } else { s };
        let mut block = vec![Complex64::from(0.0); m];
        let mut factorial = 1.0;
        let facts: Vec<f64> = (0..m)
            .map(|p| {
                if p > 0 {
                    factorial *= p as f64;
                }
                factorial
            })
            .collect();
        for p in (0..m).rev() {
            let q_new = m - 1 - p;
            let mut acc = t.coeffs[p] * facts[p];
            for (q, bq) in block.iter().enumerate().take(q_new) {
                acc += bq * w(q + p);
            }
            block[q_new] = -acc / w(m - 1);
        }
        for (i, v) in block.into_iter().enumerate() {
            alpha[offset + i] = v;
        }
        offset += m;
    }
    MERep::new(alpha, a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecReport {
    pub holds: bool,
    pub dominant: Complex64,
    /// Eigenvalues sharing the maximal real part with the dominant one.
    pub ties: Vec<Complex64>,
}

impl fmt::Display for DecReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.holds {
            return write!(f, "dominant eigenvalue {} is unique and real", fmt_c(self.dominant));
        }
        if self.ties.is_empty() {
            return write!(f, "dominant eigenvalue {} is not real", fmt_c(self.dominant));
        }
        let names: Vec<String> = self.ties.iter().map(|z| fmt_c(*z)).collect();
        write!(
            f,
            "eigenvalue {} ties in real part with {}",
            fmt_c(self.dominant),
            names.join(", ")
        )
    }
}

pub(crate) fn fmt_c(z: Complex64) -> String {
    let clean = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let (re, im) = (clean(z.re), clean(z.im));
    if im == 0.0 {
        format!("{re}")
    } else if im > 0.0 {
        format!("{re}+{im}i")
    } else {
        format!("{re}-{}i", -im)
    }
}

/// Dominant eigenvalue condition: one term of maximal real part, and it is real.
pub fn check_dec(spec: &SpectralData) -> DecReport {
    let tie = spec.cluster_tol.max(1e-12 * spec.scale);
    let max_re = spec
        .terms
        .iter()
        .map(|t| t.eigenvalue.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<&SpectralTerm> = spec
        .terms
        .iter()
        .filter(|t| (t.eigenvalue.re - max_re).abs() <= tie)
        .collect();
    let dominant = top
        .iter()
        .find(|t| t.is_real())
        .map_or(top[0].eigenvalue, |t| t.eigenvalue);
    let ties: Vec<Complex64> = top
        .iter()
        .map(|t| t.eigenvalue)
        .filter(|&z| z != dominant)
        .collect();
    DecReport {
        holds: top.len() == 1 && top[0].is_real(),
        dominant,
        ties,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub c1_stable: bool,
    pub c2_real_dominant: bool,
    pub c3_normalized: bool,
    pub c4_nonnegative_start: bool,
    /// Order and value of the first derivative of `f` at 0 that is nonzero.
    pub first_nonzero_derivative: Option<(usize, f64)>,
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.c1_stable && self.c2_real_dominant && self.c3_normalized && self.c4_nonnegative_start
    }
}

/// Index and value of the first derivative of the density at 0 whose
/// magnitude exceeds `deriv_zero * ||A||^(k+1)`.
pub fn first_nonzero_derivative(rep: &MERep, tol: &ToleranceConfig) -> Option<(usize, f64)> {
    let norm = rep.norm_inf().max(f64::MIN_POSITIVE);
    let n = rep.order();
    // scaled by norm^(k+1) to keep the powers bounded
    rep.scaled_derivatives_at_zero(n + 1, norm)
        .into_iter()
        .enumerate()
        .find(|(_, d)| d.re.abs() > tol.deriv_zero)
        .map(|(k, d)| (k, d.re * norm.powi(k as i32 + 1)))
}

pub fn check_c_conditions(rep: &MERep, spec: &SpectralData, tol: &ToleranceConfig) -> ConditionReport {
    let c1_stable = spec.terms.iter().all(|t| t.eigenvalue.re < 0.0);
    let dec = check_dec(spec);
    let c2_real_dominant = dec.dominant.im == 0.0;
    let c3_normalized = (rep.alpha_sum() - 1.0).norm() <= tol.alpha_sum;
    let first = first_nonzero_derivative(rep, tol);
    ConditionReport {
        c1_stable,
        c2_real_dominant,
        c3_normalized,
        c4_nonnegative_start: first.is_some_and(|(_, v)| v > 0.0),
        first_nonzero_derivative: first,
    }
}
