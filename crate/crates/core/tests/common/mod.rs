#![allow(dead_code)]

use me2ph::MERep;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sub-generator where every state can leave: off-diagonal rates with
/// a fixed sparsity, a positive exit rate per state and strictly positive
/// initial probabilities, so no state is redundant.
pub fn random_markovian(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut out = 0.0;
        for j in 0..n {
            if i != j && rng.random_bool(0.6) {
                let r = rng.random_range(0.05..3.0);
                a[(i, j)] = r;
                out += r;
            }
        }
        let exit = rng.random_range(0.1..2.0);
        a[(i, i)] = -(out + exit);
    }
    let mut alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|x| *x /= s);
    (alpha, a)
}

pub fn random_markovian_rep(rng: &mut ChaCha8Rng, n: usize) -> MERep {
    let (alpha, a) = random_markovian(rng, n);
    MERep::from_real(&alpha, &a).unwrap()
}

/// `(alpha T^-1, T A T^-1)` for a random `T` with `T 1 = 1`; the density is
/// unchanged but the representation is no longer Markovian in general.
pub fn scrambled(rng: &mut ChaCha8Rng, alpha: &[f64], a: &DMatrix<f64>) -> MERep {
    let n = alpha.len();
    loop {
        let mut t = DMatrix::from_fn(n, n, |i, j| {
            let v: f64 = rng.random_range(-0.5..0.5);
            if i == j { 1.0 + v } else { v }
        });
        for i in 0..n {
            let s: f64 = t.row(i).sum();
            t[(i, i)] += 1.0 - s;
        }
        if let Some(inv) = t.clone().try_inverse() {
            if inv.amax() < 20.0 {
                let al = nalgebra::RowDVector::from_row_slice(alpha) * &inv;
                let m = &t * a * &inv;
                return MERep::from_real(al.as_slice(), &m).unwrap();
            }
        }
    }
}

pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}

/// Candidate ME inputs with a complex pair and signed initial vectors; many
/// of them need an Erlang tail once converted.
pub fn signed_candidate(rng: &mut ChaCha8Rng, n: usize) -> MERep {
    let a: f64 = rng.random_range(2.0..5.0);
    let b: f64 = rng.random_range(2.0..6.0);
    let w: f64 = rng.random_range(0.5..4.0);
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = -1.0;
    // a double dominant eigenvalue from four states on
    let o = if n >= 4 {
        m[(0, 1)] = 1.0;
        m[(1, 1)] = -1.0;
        2
    } else {
        1
    };
    m[(o, o)] = -b;
    m[(o, o + 1)] = w;
    m[(o + 1, o)] = -w;
    m[(o + 1, o + 1)] = -b;
    for (k, i) in (o + 2..n).enumerate() {
        m[(i, i)] = -(a + 1.5 * k as f64);
    }
    let mut alpha: Vec<f64> = (0..n)
        .map(|i| if i < o { rng.random_range(0.2..1.0) } else { rng.random_range(-0.6..0.6) })
        .collect();
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|x| *x /= s);
    MERep::from_real(&alpha, &m).unwrap()
}

/// Erlang(`l`, rate) followed by a random Markovian chain of `n` states,
/// started in the first Erlang phase.
pub fn erlang_damped(rng: &mut ChaCha8Rng, n: usize, l: usize) -> MERep {
    let (alpha, a) = random_markovian(rng, n);
    let rate: f64 = rng.random_range(0.5..3.0);
    let m = l + n;
    let mut big = DMatrix::zeros(m, m);
    for i in 0..l {
        big[(i, i)] = -rate;
        if i + 1 < l {
            big[(i, i + 1)] = rate;
        }
    }
    for (j, &p) in alpha.iter().enumerate() {
        big[(l - 1, l + j)] = rate * p;
    }
    big.view_mut((l, l), (n, n)).copy_from(&a);
    let mut start = vec![0.0; m];
    start[0] = 1.0;
    MERep::from_real(&start, &big).unwrap()
}
