//! Dense linear algebra shared by the pipeline: matrix exponential, the
//! 1-/infinity-norms, eigenvalues with clustering, and least-squares solves.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types the pipeline computes with (`f64` and `Complex64`).
pub trait Field: ComplexField<RealField = f64> + Copy {}
impl Field for f64 {}
impl Field for Complex64 {}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `exp(H)` by scaling and squaring around the degree-13 diagonal Padé approximant.
pub fn matrix_exp<T: Field>(h: &DMatrix<T>) -> DMatrix<T> {
    assert!(h.is_square(), "matrix_exp expects a square matrix");
    let n = h.nrows();
    if n == 0 {
        return h.clone();
    }
    let norm1 = (0..n)
        .map(|j| h.column(j).iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm1 == 0.0 {
        return DMatrix::identity(n, n);
    }
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = h * T::from_real(0.5f64.powi(squarings));
    let b = |k: usize| T::from_real(PADE13[k]);
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// The norms used by the tail bounds.
///
/// Vectors are passed as `1 x n` (row) or `n x 1` (column) matrices, so for a row
/// vector `mat_inf == vec1` and for a column vector `mat_inf == vec_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub vec1: f64,
    pub vec_inf: f64,
    pub mat_inf: f64,
}

pub fn norms<T: Field>(m: &DMatrix<T>) -> NormReport {
    let vec1 = m.iter().map(|x| x.modulus()).sum();
    let vec_inf = m.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    NormReport {
        vec1,
        vec_inf,
        mat_inf: mat_norm_inf(m),
    }
}

/// Maximum absolute row sum.
pub fn mat_norm_inf<T: Field>(m: &DMatrix<T>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Real part of `m` when every imaginary part is within `tol` (absolute).
pub fn real_part_if_real(m: &DMatrix<Complex64>, tol: f64) -> Option<DMatrix<f64>> {
    if m.iter().all(|z| z.im.abs() <= tol) {
        Some(m.map(|z| z.re))
    } else {
        None
    }
}

/// All eigenvalues of `a`, with multiplicity.
pub fn eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(real) = real_part_if_real(a, 0.0) {
        let schur = Schur::try_new(real, f64::EPSILON, 10_000 * n)
            .ok_or_else(|| Error::Numeric("real Schur iteration did not converge".into()))?;
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000 * n)
        .ok_or_else(|| Error::Numeric("complex Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Distinct eigenvalues with algebraic multiplicities, sorted by descending
/// real part; a conjugate pair is listed positive-imaginary first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub eigenvalues: Vec<(Complex64, usize)>,
}

impl ComplexSpectrum {
    pub fn dimension(&self) -> usize {
        self.eigenvalues.iter().map(|(_, m)| m).sum()
    }
}

/// Groups numerically equal eigenvalues.
///
/// Two eigenvalues join when they are within `tol` of each other (single
/// linkage). Clusters are further merged when the combined group of `m`
/// values fits in a disc of radius `scale * (1e3 * eps)^(1/m)` around its
/// centroid, the spread a defective eigenvalue of multiplicity `m` shows
/// after rounding. `real_input` forces conjugate symmetry of the result.
pub fn cluster_eigenvalues(
    eigs: &[Complex64],
    tol: f64,
    scale: f64,
    real_input: bool,
) -> ComplexSpectrum {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut c = i;
        while p[c] != r {
            let next = p[c];
            p[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    let mut root_index = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_index[r] == usize::MAX {
            root_index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_index[r]].push(eigs[i]);
    }

    let centroid = |g: &[Complex64]| g.iter().sum::<Complex64>() / g.len() as f64;
    // grow a neighbourhood around each group; take the largest admissible merge
    loop {
        let mut best: Option<(usize, Vec<usize>, usize, f64)> = None;
        for i in 0..groups.len() {
            let ci = centroid(&groups[i]);
            let mut others: Vec<usize> = (0..groups.len()).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                (centroid(&groups[a]) - ci)
                    .norm()
                    .total_cmp(&(centroid(&groups[b]) - ci).norm())
            });
            let mut merged = groups[i].clone();
            for (t, &j) in others.iter().enumerate() {
                merged.extend_from_slice(&groups[j]);
                let m = merged.len();
                let c = centroid(&merged);
                let spread = merged.iter().map(|z| (z - c).norm()).fold(0.0, f64::max);
                let radius = scale * (1e3 * f64::EPSILON).powf(1.0 / m as f64);
                if spread <= radius {
                    let better = best
                        .as_ref()
                        .map_or(true, |(_, _, bm, bs)| m > *bm || (m == *bm && spread < *bs));
                    if better {
                        best = Some((i, others[..=t].to_vec(), m, spread));
                    }
                }
            }
        }
        match best {
            Some((i, mut js, _, _)) => {
                js.sort_unstable_by(|a, b| b.cmp(a));
                let mut moved = Vec::new();
                let mut target = i;
                for j in js {
                    moved.extend(groups.remove(j));
                    if j < target {
                        target -= 1;
                    }
                }
                groups[target].extend(moved);
            }
            None => break,
        }
    }

    let mut out: Vec<(Complex64, usize)> = groups
        .iter()
        .map(|g| {
            let mut c = centroid(g);
            if real_input && c.im.abs() <= tol.max(scale * 1e-14) {
                c.im = 0.0;
            }
            (c, g.len())
        })
        .collect();
    if real_input {
        // pair each upper-half cluster with its mirror image
        let uppers: Vec<usize> = (0..out.len()).filter(|&i| out[i].0.im > 0.0).collect();
        for i in uppers {
            let target = out[i].0.conj();
            let partner = (0..out.len())
                .filter(|&j| out[j].0.im < 0.0 && out[j].1 == out[i].1)
                .min_by(|&a, &b| {
                    (out[a].0 - target)
                        .norm()
                        .total_cmp(&(out[b].0 - target).norm())
                });
            if let Some(j) = partner {
                let avg = (out[i].0 + out[j].0.conj()) / 2.0;
                out[i].0 = avg;
                out[j].0 = avg.conj();
            }
        }
    }
    out.sort_by(|a, b| {
        b.0.re
            .total_cmp(&a.0.re)
            .then_with(|| a.0.im.abs().total_cmp(&b.0.im.abs()))
            .then_with(|| b.0.im.total_cmp(&a.0.im))
    });
    ComplexSpectrum { eigenvalues: out }
}

/// Least-squares solution of `m x = b` for `m` of full column rank, by
/// Householder QR, with the 1-norm condition estimate `||R||_1 ||R^-1||_1`.
///
/// nalgebra's SVD does not converge reliably on some small tall systems, so
/// it is not used here.
pub fn solve_least_squares(
    m: DMatrix<Complex64>,
    b: &DVector<Complex64>,
    what: &str,
    max_condition: f64,
) -> Result<(DVector<Complex64>, f64)> {
    let cols = m.ncols();
    if m.nrows() < cols {
        return Err(Error::Numeric(format!(
            "{what}: {} equations for {cols} unknowns",
            m.nrows()
        )));
    }
    let qr = m.qr();
    let r = qr.r();
    let qtb = qr.q().adjoint() * b;
    let rinv = r
        .clone()
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    let condition = rinv.map_or(f64::INFINITY, |ri| norm_1(&r) * norm_1(&ri));
    if !condition.is_finite() || condition > max_condition {
        return Err(Error::IllConditioned {
            what: what.to_string(),
            condition,
        });
    }
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numeric(format!("{what}: singular triangular factor")))?;
    Ok((x, condition))
}

fn norm_1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_oracle(h: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        // plain series after scaling by 2^-6, then squaring back
        let n = h.nrows();
        let scaled = h / 64.0;
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..6 {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(matrix_exp(&z), DMatrix::identity(3, 3));
    }

    #[test]
    fn exp_of_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let e = matrix_exp(&h);
        assert!((e[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn exp_matches_series_for_large_norm() {
        let h = DMatrix::from_row_slice(3, 3, &[-7.0, 3.0, 1.0, 2.0, -9.0, 4.0, 0.5, 1.5, -6.0]);
        let e = matrix_exp(&h);
        let o = taylor_oracle(&h, 40);
        let rel = (&e - &o).norm() / o.norm();
        assert!(rel < 1e-12, "rel {rel}");
    }

    #[test]
    fn exp_complex_diagonal() {
        let s = Complex64::new(-5.0, 3.0);
        let h = DMatrix::from_element(1, 1, s);
        let e = matrix_exp(&h);
        assert!((e[(0, 0)] - s.exp()).norm() < 1e-15);
    }

    #[test]
    fn norms_of_vector() {
        let v = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 3.0]);
        let r = norms(&v);
        assert_eq!(r.vec1, 6.0);
        assert_eq!(r.vec_inf, 3.0);
        let ones = DMatrix::from_element(5, 1, 1.0);
        assert_eq!(norms(&ones).mat_inf, 1.0);
    }

    #[test]
    fn clustering_merges_defective_spread() {
        // eigenvalues of a perturbed 3x3 Jordan block
        let eps = 1e-16f64;
        let r = eps.cbrt();
        let eigs: Vec<Complex64> = (0..3)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                Complex64::new(-1.0 + r * th.cos(), r * th.sin())
            })
            .chain(std::iter::once(Complex64::new(-3.0, 0.0)))
            .collect();
        let s = cluster_eigenvalues(&eigs, 1e-6 * 3.0, 3.0, true);
        assert_eq!(s.eigenvalues.len(), 2);
        assert_eq!(s.eigenvalues[0].1, 3);
        assert!((s.eigenvalues[0].0 - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn clustering_orders_conjugates() {
        let eigs = vec![
            Complex64::new(-5.0, -3.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-5.0, 3.0),
        ];
        let s = cluster_eigenvalues(&eigs, 1e-6, 5.0, true);
        assert_eq!(s.eigenvalues[0].0, Complex64::new(-1.0, 0.0));
        assert_eq!(s.eigenvalues[1].0, Complex64::new(-5.0, 3.0));
        assert_eq!(s.eigenvalues[2].0, Complex64::new(-5.0, -3.0));
        assert_eq!(s.dimension(), 3);
    }
}
