//! Feedback-Erlang blocks and monocyclic generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{mat_norm_inf, solve_least_squares};
use crate::rep::MERep;
use crate::spectral::{check_dec, fmt_c, SpectralData};

/// A chain of `b` phases of rate `sigma`; the last phase returns to the
/// first with probability `z` and leaves otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FEBlock {
    pub b: usize,
    pub sigma: f64,
    pub z: f64,
}

impl FEBlock {
    pub fn degenerate(rate: f64) -> Self {
        Self { b: 1, sigma: rate, z: 0.0 }
    }

    pub fn is_degenerate(&self) -> bool {
        self.b == 1 && self.z == 0.0
    }

    pub fn is_valid(&self) -> bool {
        self.b >= 1 && self.sigma > 0.0 && self.sigma.is_finite() && (0.0..1.0).contains(&self.z)
    }

    /// Dominant eigenvalue `-sigma (1 - z^(1/b))`.
    pub fn r(&self) -> f64 {
        -self.sigma * (1.0 - self.z.powf(1.0 / self.b as f64))
    }

    /// Rate of leaving the block from its last phase.
    pub fn exit_rate(&self) -> f64 {
        self.sigma * (1.0 - self.z)
    }

    /// `-sigma + sigma z^(1/b) e^(2 pi i k / b)` for `k = 0..b`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let q = self.z.powf(1.0 / self.b as f64);
        (0..self.b)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / self.b as f64;
                Complex64::new(-self.sigma + self.sigma * q * th.cos(), self.sigma * q * th.sin())
            })
            .collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let b = self.b;
        let mut m = DMatrix::zeros(b, b);
        for i in 0..b {
            m[(i, i)] = -self.sigma;
            if i + 1 < b {
                m[(i, i + 1)] = self.sigma;
            }
        }
        m[(b - 1, 0)] += self.z * self.sigma;
        m
    }
}

/// FE block whose spectrum contains `eigenvalue` (and its conjugate) while
/// its dominant eigenvalue stays below `-lambda1`.
pub fn fe_block_for(eigenvalue: Complex64, lambda1: f64) -> Result<FEBlock> {
    let a = -eigenvalue.re;
    let c = eigenvalue.im.abs();
    if !(a > 0.0) {
        return Err(Error::Precondition(format!(
            "eigenvalue {} must have negative real part",
            fmt_c(eigenvalue)
        )));
    }
    if c == 0.0 {
        return Ok(FEBlock::degenerate(a));
    }
    if !(a > lambda1) {
        return Err(Error::DominantEigenvalue(format!(
            "complex eigenvalue {} has real part not below -{lambda1}",
            fmt_c(eigenvalue)
        )));
    }
    let ratio = 2.0 * PI / (PI - 2.0 * (c / (a - lambda1)).atan());
    let mut b = (ratio.floor() as usize + 1).max(3);
    for _ in 0..256 {
        let t = (PI / b as f64).tan();
        let sigma = a + 0.5 * c * (1.0 / t - t);
        let q = c / (sigma * (2.0 * PI / b as f64).sin());
        let block = FEBlock { b, sigma, z: q.powi(b as i32) };
        let target = Complex64::new(-a, c);
        let closest = block
            .eigenvalues()
            .into_iter()
            .map(|e| (e - target).norm())
            .fold(f64::INFINITY, f64::min);
        let margin = 1e-12 * a.max(1.0);
        if block.is_valid()
            && q < 1.0
            && block.r() < -lambda1 - margin
            && closest <= 1e-9 * eigenvalue.norm()
        {
            return Ok(block);
        }
        b += 1;
    }
    Err(Error::Numeric(format!(
        "no feedback-Erlang block found for eigenvalue {}",
        fmt_c(eigenvalue)
    )))
}

/// Chained FE blocks; the exit of each block feeds the first phase of the
/// next one and the last block exits to absorption.
#[derive(Debug, Clone, PartialEq)]
pub struct MonocyclicRep {
    pub blocks: Vec<FEBlock>,
    pub gamma: Option<Vec<f64>>,
}

impl MonocyclicRep {
    pub fn new(blocks: Vec<FEBlock>) -> Self {
        Self { blocks, gamma: None }
    }

    pub fn order(&self) -> usize {
        self.blocks.iter().map(|b| b.b).sum()
    }

    pub fn generator(&self) -> DMatrix<f64> {
        generator_of(&self.blocks)
    }

    pub fn exit_rate(&self) -> f64 {
        self.blocks.last().map_or(0.0, |b| b.exit_rate())
    }

    /// `-G 1`, nonzero only in the last phase.
    pub fn exit_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.order());
        if let Some(last) = v.len().checked_sub(1) {
            v[last] = self.exit_rate();
        }
        v
    }

    pub fn gamma(&self) -> Result<&[f64]> {
        self.gamma
            .as_deref()
            .ok_or_else(|| Error::Precondition("initial vector has not been computed".into()))
    }

    pub fn norm_inf(&self) -> f64 {
        mat_norm_inf(&self.generator())
    }
}

pub fn generator_of(blocks: &[FEBlock]) -> DMatrix<f64> {
    let u: usize = blocks.iter().map(|b| b.b).sum();
    let mut g = DMatrix::zeros(u, u);
    let mut o = 0;
    for (j, blk) in blocks.iter().enumerate() {
        g.view_mut((o, o), (blk.b, blk.b)).copy_from(&blk.matrix());
        if j + 1 < blocks.len() {
            g[(o + blk.b - 1, o + blk.b)] = blk.exit_rate();
        }
        o += blk.b;
    }
    g
}

/// `out = v G` using the block structure.
pub fn vec_mul_generator(blocks: &[FEBlock], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut o = 0;
    for (j, blk) in blocks.iter().enumerate() {
        let (b, s) = (blk.b, blk.sigma);
        for i in 0..b {
            let vi = v[o + i];
            out[o + i] -= s * vi;
            if i + 1 < b {
                out[o + i + 1] += s * vi;
            }
        }
        let last = v[o + b - 1];
        out[o] += blk.z * s * last;
        if j + 1 < blocks.len() {
            out[o + b] += blk.exit_rate() * last;
        }
        o += b;
    }
}

/// Monocyclic generator with one FE block per eigenvalue instance; the
/// degenerate blocks of the dominant eigenvalue come first.
pub fn build_generator(spec: &SpectralData) -> Result<MonocyclicRep> {
    let dec = check_dec(spec);
    if !dec.holds {
        return Err(Error::DominantEigenvalue(dec.to_string()));
    }
    let lambda1 = spec.lambda1();
    if !(lambda1 > 0.0) {
        return Err(Error::Precondition(format!(
            "dominant eigenvalue {} must be negative",
            fmt_c(dec.dominant)
        )));
    }
    let mut blocks = vec![FEBlock::degenerate(lambda1); spec.n1()];
    for (i, t) in spec.terms.iter().enumerate() {
        if i == spec.dominant {
            continue;
        }
        let s = t.eigenvalue;
        // a conjugate pair shares one block
        if s.im < 0.0
            && spec
                .terms
                .iter()
                .any(|o| (o.eigenvalue - s.conj()).norm() <= spec.cluster_tol.max(1e-12))
        {
            continue;
        }
        let blk = fe_block_for(s, lambda1)?;
        blocks.extend(std::iter::repeat_n(blk, t.multiplicity));
    }
    Ok(MonocyclicRep::new(blocks))
}

/// Solves `A W = W G`, `W 1 = 1` and sets `gamma = alpha W`.
///
/// Rows of `W` belonging to different connected components of the sparsity
/// pattern of `A` decouple; each component is solved separately.
pub fn solve_gamma(rep: &MERep, mono: &MonocyclicRep) -> Result<MonocyclicRep> {
    let (w, condition) = solve_transform(rep, mono)?;
    let gamma = rep.alpha() * &w;
    let gnorm: f64 = gamma.iter().map(|z| z.norm()).sum();
    let imag = gamma.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-9 * gnorm.max(1.0) {
        return Err(Error::Numeric(format!(
            "initial vector has imaginary part {imag:.3e} (condition {condition:.3e})"
        )));
    }
    let mut out = mono.clone();
    out.gamma = Some(gamma.iter().map(|z| z.re).collect());
    Ok(out)
}

/// `W` with `A W = W G` and `W 1 = 1`, and the worst condition estimate of
/// the component systems.
pub fn solve_transform(rep: &MERep, mono: &MonocyclicRep) -> Result<(DMatrix<Complex64>, f64)> {
    let a = rep.matrix();
    let n = rep.order();
    let g = mono.generator().map(Complex64::from);
    let u = g.nrows();
    if u < n {
        return Err(Error::Precondition(format!(
            "generator order {u} is below representation order {n}"
        )));
    }
    let mut w = DMatrix::<Complex64>::zeros(n, u);
    let mut worst = 1.0f64;
    for comp in components(a) {
        let m = comp.len();
        let sub = DMatrix::from_fn(m, m, |i, j| a[(comp[i], comp[j])]);
        // unknown x[i + m*j] = W[comp[i], j]
        let rows = m * u + m;
        let mut sys = DMatrix::<Complex64>::zeros(rows, m * u);
        let mut rhs = DVector::<Complex64>::zeros(rows);
        for j in 0..u {
            for i in 0..m {
                let r = i + m * j;
                // (A W)_{ij} = sum_k A_ik W_kj
                for k in 0..m {
                    sys[(r, k + m * j)] += sub[(i, k)];
                }
                // (W G)_{ij} = sum_k W_ik G_kj
                for k in 0..u {
                    if g[(k, j)] != Complex64::from(0.0) {
                        sys[(r, i + m * k)] -= g[(k, j)];
                    }
                }
            }
        }
        let scale = (mat_norm_inf(&sub) + mat_norm_inf(&g)).max(f64::MIN_POSITIVE);
        for i in 0..m {
            for j in 0..u {
                sys[(m * u + i, i + m * j)] = Complex64::from(scale);
            }
            rhs[m * u + i] = Complex64::from(scale);
        }
        let (x, condition) = solve_least_squares(sys.clone(), &rhs, "transformation system", f64::INFINITY)?;
        let resid = (&sys * &x - &rhs).norm() / (rhs.norm() + (&sys * &x).norm()).max(1.0);
        if !(resid <= 1e-9) {
            return Err(Error::IllConditioned {
                what: format!("transformation system (residual {resid:.3e})"),
                condition,
            });
        }
        if condition.is_finite() {
            worst = worst.max(condition);
        }
        for (i, &row) in comp.iter().enumerate() {
            for j in 0..u {
                w[(row, j)] = x[i + m * j];
            }
        }
    }
    Ok((w, worst))
}

// connected components of the symmetric sparsity pattern of a
fn components(a: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut stack = vec![s];
        seen[s] = true;
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                let linked = a[(i, j)] != Complex64::from(0.0) || a[(j, i)] != Complex64::from(0.0);
                if linked && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::deconv::deconvolve;
    use crate::linalg::{eigenvalues, to_complex};
    use crate::rep::pdf_eval;
    use crate::spectral::{analyze_spectrum, minimal_representation};
    use crate::tolerance::ToleranceConfig;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn block_for_worked_example_pair() {
        let blk = fe_block_for(Complex64::new(-5.0, 3.0), 1.0).unwrap();
        assert_eq!(blk.b, 4);
        let m = blk.matrix();
        for i in 0..4 {
            assert!((m[(i, i)] + 5.0).abs() < 1e-9);
        }
        for i in 0..3 {
            assert!((m[(i, i + 1)] - 5.0).abs() < 1e-9);
        }
        assert!((m[(3, 0)] - 81.0 / 125.0).abs() < 1e-9);
        assert!((blk.r() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn real_eigenvalue_gives_degenerate_block() {
        let blk = fe_block_for(Complex64::from(-3.0), 1.0).unwrap();
        assert_eq!(blk, FEBlock { b: 1, sigma: 3.0, z: 0.0 });
    }

    #[test]
    fn tied_real_part_is_rejected() {
        let err = fe_block_for(Complex64::new(-1.0, 2.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::DominantEigenvalue(_)));
    }

    #[test]
    fn produced_blocks_embed_target_pair() {
        for &(a, c, l1) in &[(5.0, 3.0, 1.0), (2.0, 10.0, 1.0), (1.2, 0.1, 1.0), (30.0, 60.0, 2.0)] {
            let target = Complex64::new(-a, c);
            let blk = fe_block_for(target, l1).unwrap();
            let eig = eigenvalues(&to_complex(&blk.matrix())).unwrap();
            let d = eig.iter().map(|e| (e - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8 * target.norm().max(1.0), "a={a} c={c}: {d}");
            assert!(blk.r() < -l1);
        }
    }

    #[test]
    fn worked_example_generator() {
        let spec = analyze_spectrum(&corpus::worked_example(), &tol()).unwrap();
        let mono = build_generator(&spec).unwrap();
        let g = mono.generator();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(8, 8, &[
            -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, -3.0, 3.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -4.0, 4.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, -5.0, 5.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, -5.0, 5.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -5.0, 5.0,
            0.0, 0.0, 0.0, 0.0, 81.0 / 125.0, 0.0, 0.0, -5.0,
        ]);
        assert!((&g - &want).amax() < 1e-9);
        assert!((mat_norm_inf(&g) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn vec_mul_matches_dense() {
        let blocks = vec![
            FEBlock::degenerate(1.0),
            FEBlock { b: 3, sigma: 4.0, z: 0.3 },
            FEBlock { b: 1, sigma: 2.0, z: 0.25 },
        ];
        let g = generator_of(&blocks);
        let v: Vec<f64> = (0..5).map(|i| 0.1 + i as f64).collect();
        let mut out = vec![0.0; 5];
        vec_mul_generator(&blocks, &v, &mut out);
        let dense = nalgebra::RowDVector::from_vec(v) * g;
        for i in 0..5 {
            assert!((out[i] - dense[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn simple_generators() {
        let spec = analyze_spectrum(&corpus::exponential(2.0), &tol()).unwrap();
        let g = build_generator(&spec).unwrap().generator();
        assert_eq!(g, DMatrix::from_element(1, 1, -2.0));

        let spec = analyze_spectrum(&corpus::erlang(2, 1.0), &tol()).unwrap();
        let g = build_generator(&spec).unwrap().generator();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]));
    }

    fn worked_gamma() -> Vec<f64> {
        [
            315.0 / 2176.0,
            10733.0 / 21760.0,
            6641.0 / 32640.0,
            8399.0 / 21760.0,
            147.0 / 680.0,
            -67.0 / 272.0,
            -45.0 / 1088.0,
            225.0 / 1088.0,
        ]
        .iter()
        .map(|v| v * 102.0 / 139.0)
        .collect()
    }

    #[test]
    fn worked_example_gamma() {
        let spec = analyze_spectrum(&corpus::worked_example(), &tol()).unwrap();
        let min = minimal_representation(&spec).unwrap();
        let y = deconvolve(&min, 1, 10.0).unwrap();
        let mono = solve_gamma(&y, &build_generator(&spec).unwrap()).unwrap();
        let gamma = mono.gamma().unwrap();
        for (g, w) in gamma.iter().zip(worked_gamma()) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
        assert!((gamma.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monocyclic_input_gives_identity() {
        let blocks = vec![FEBlock::degenerate(1.0), FEBlock::degenerate(3.0), FEBlock { b: 4, sigma: 5.0, z: 0.1296 }];
        let mono = MonocyclicRep::new(blocks);
        let alpha = [0.3, 0.1, 0.2, 0.1, 0.2, 0.1];
        let rep = MERep::from_real(&alpha, &mono.generator()).unwrap();
        let (w, _) = solve_transform(&rep, &mono).unwrap();
        assert!((w - DMatrix::<Complex64>::identity(6, 6)).camax() < 1e-9);
    }

    #[test]
    fn real_distinct_spectrum_pdf_matches() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.5, 0.0, -3.0, 1.0, 0.2, 0.0, -5.0]);
        let rep = MERep::from_real(&[0.5, 0.3, 0.2], &a).unwrap();
        let spec = analyze_spectrum(&rep, &tol()).unwrap();
        let min = minimal_representation(&spec).unwrap();
        let mono = solve_gamma(&min, &build_generator(&spec).unwrap()).unwrap();
        let out = MERep::from_real(mono.gamma().unwrap(), &mono.generator()).unwrap();
        for i in 0..50 {
            let x = 0.1 * i as f64;
            assert!((pdf_eval(&rep, x).unwrap() - pdf_eval(&out, x).unwrap()).abs() < 1e-8);
        }
    }
}
