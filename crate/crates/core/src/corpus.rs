//! Reference distributions used by tests, examples and the CLI.

use nalgebra::DMatrix;

use crate::rep::MERep;

const SCALE: f64 = 102.0 / 139.0;

/// Order-7 ME representation whose spectrum carries a redundant `+1`.
///
/// The density is
/// `(102/139)(x e^-x + e^-x + e^-3x - 10 e^-4x + e^-5x (8 cos 3x + 4 sin 3x))`.
pub fn worked_example() -> MERep {
    let alpha: Vec<f64> = [1.0, 1.0, -1.0 / 3.0, 2.0 / 3.0, -5.0 / 2.0, 12.0 / 17.0, 14.0 / 17.0]
        .iter()
        .map(|v| SCALE * v)
        .collect();
    MERep::from_real(&alpha, &worked_example_matrix()).expect("static data")
}

pub fn worked_example_matrix() -> DMatrix<f64> {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(7, 7, &[
        -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -1.0, 4.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -4.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, -5.0, 3.0,
        0.0, 0.0, 0.0, 0.0, 0.0, -3.0, -5.0,
    ]);
    a
}

pub fn worked_example_pdf(x: f64) -> f64 {
    let e = |r: f64| (-r * x).exp();
    SCALE
        * (x * e(1.0) + e(1.0) + e(3.0) - 10.0 * e(4.0)
            + e(5.0) * (8.0 * (3.0 * x).cos() + 4.0 * (3.0 * x).sin()))
}

pub fn worked_example_cdf(x: f64) -> f64 {
    // integral of each term from 0 to x
    let e = |r: f64| (-r * x).exp();
    let xe = 1.0 - e(1.0) * (1.0 + x);
    let pure = |r: f64| (1.0 - e(r)) / r;
    // int e^{-5t}(8 cos 3t + 4 sin 3t) dt = Re int (8 - 4i) e^{(-5+3i)t} dt
    let s = num_complex::Complex64::new(-5.0, 3.0);
    let c = num_complex::Complex64::new(8.0, -4.0);
    let osc = (c * ((s * x).exp() - 1.0) / s).re;
    SCALE * (xe + pure(1.0) + pure(3.0) - 10.0 * pure(4.0) + osc)
}

/// `f + f'/mu` for the worked example, the density left after splitting off
/// one exponential phase of rate `mu`.
pub fn worked_example_deconvolved_pdf(x: f64, mu: f64) -> f64 {
    let e = |r: f64| (-r * x).exp();
    let (c3, s3) = ((3.0 * x).cos(), (3.0 * x).sin());
    let f = x * e(1.0) + e(1.0) + e(3.0) - 10.0 * e(4.0) + e(5.0) * (8.0 * c3 + 4.0 * s3);
    let df = e(1.0) - x * e(1.0) - e(1.0) - 3.0 * e(3.0)
        + 40.0 * e(4.0)
        + e(5.0) * (-5.0 * (8.0 * c3 + 4.0 * s3) + (-24.0 * s3 + 12.0 * c3));
    SCALE * (f + df / mu)
}

pub fn exponential(rate: f64) -> MERep {
    MERep::from_real(&[1.0], &DMatrix::from_element(1, 1, -rate)).expect("static data")
}

/// Erlang(`k`, `rate`) as a chain starting in state 0.
pub fn erlang(k: usize, rate: f64) -> MERep {
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = -rate;
        if i + 1 < k {
            a[(i, i + 1)] = rate;
        }
    }
    let mut alpha = vec![0.0; k];
    alpha[0] = 1.0;
    MERep::from_real(&alpha, &a).expect("static data")
}

pub fn erlang_pdf(k: usize, rate: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 1 { rate } else { 0.0 };
    }
    let log = (k as f64) * rate.ln() + ((k - 1) as f64) * x.ln() - rate * x - ln_factorial(k - 1);
    log.exp()
}

pub fn erlang_cdf(k: usize, rate: f64, x: f64) -> f64 {
    // 1 - sum_{j<k} e^{-rx} (rx)^j / j!
    let y = rate * x;
    let mut term = (-y).exp();
    let mut sum = 0.0;
    for j in 0..k {
        if j > 0 {
            term *= y / j as f64;
        }
        sum += term;
    }
    (1.0 - sum).max(0.0)
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// A 10-state generator with five communicating classes and dominant
/// eigenvalue `-1` of algebraic multiplicity four.
pub fn ten_state_generator() -> DMatrix<f64> {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(10, 10, &[
        -4.0, 1.0, 1.0, 0.0, 0.2, 0.4, 0.0, 0.0, 0.0, 0.4,
        1.0, -2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        2.0, 0.0, -3.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.4, 0.2,
        0.0, 0.0, 0.0, -4.0, 3.0, 0.2, 0.2, 0.0, 0.4, 0.0,
        0.0, 0.0, 0.0, 1.0, -2.0, 0.0, 0.2, 0.2, 0.0, 0.2,
        0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 1.0, 0.0, 0.2, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -2.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -8.0, 2.0, 0.6,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.0, -7.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0,
    ]);
    a
}

/// Density proportional to `0.01 e^-x + e^-2x (1 + 1.5 cos x)`; it satisfies
/// the dominant eigenvalue condition but is negative around `x = 3`.
pub fn sign_changing() -> MERep {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        -1.0, 0.0, 0.0, 0.0,
        0.0, -2.0, 1.0, 0.0,
        0.0, -1.0, -2.0, 0.0,
        0.0, 0.0, 0.0, -2.0,
    ]);
    // exit vector (1, 1, 3, 2): the rotation block yields
    // e^-2x ((a1 + 3 a2) cos x + (3 a1 - a2) sin x)
    let c = 1.0 / 1.11;
    MERep::from_real(&[0.01 * c, 0.15 * c, 0.45 * c, 0.5 * c], &a).expect("static data")
}

pub fn sign_changing_pdf(x: f64) -> f64 {
    (0.01 * (-x).exp() + (-2.0 * x).exp() * (1.0 + 1.5 * x.cos())) / 1.11
}

/// Spectrum `{-1, -1 +- 2i}`: a real eigenvalue tied in real part with a
/// complex pair.
pub fn tied_spectrum() -> MERep {
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 2.0, 0.0, -2.0, -1.0]);
    MERep::from_real(&[0.6, 0.2, 0.2], &a).expect("static data")
}
