//! Erlang-tail extension that turns a monocyclic representation with a
//! signed initial vector into a Markovian one.

mod eval;
mod ph;

pub use eval::{poisson_pmf, Evaluator};
pub use ph::{ErlangTail, PHRep};

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_norm_inf, matrix_exp, vec_norm1};
use crate::monocyclic::{vec_mul_generator, MonocyclicRep};
use crate::tolerance::ToleranceConfig;

/// Scalars that fix the rate and length of the Erlang tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub tau: f64,
    /// `||G||_inf`
    pub g: f64,
    /// `||gamma||_1`
    pub gamma_norm: f64,
    /// Smallest entry of `gamma e^(G tau)`.
    pub eps1: f64,
    /// Lower bound of the density on `[0, tau]`.
    pub eps2: f64,
    pub lambda_prime: f64,
    pub lambda_dprime: f64,
    pub lambda: f64,
    pub n: usize,
}

impl BoundsReport {
    pub fn from_constants(tau: f64, g: f64, gamma_norm: f64, eps1: f64, eps2: f64) -> Self {
        let gt = g * tau;
        let lambda_prime = gamma_norm * gt * gt * gt.exp() / (2.0 * eps1 * tau);
        let lambda_dprime = gamma_norm * gt.exp() * tau * g.powi(3) / (2.0 * eps2);
        let lambda = lambda_prime.max(lambda_dprime);
        Self {
            tau,
            g,
            gamma_norm,
            eps1,
            eps2,
            lambda_prime,
            lambda_dprime,
            lambda,
            n: (tau * lambda).ceil() as usize,
        }
    }

    /// Same bounds with an explicitly chosen tail rate.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self.n = (self.tau * lambda).ceil() as usize;
        self
    }
}

fn min_entry_after(mono: &MonocyclicRep, gamma: &[f64], t: f64) -> f64 {
    let e = matrix_exp(&(mono.generator() * t));
    let v = RowDVector::from_row_slice(gamma) * e;
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// A time `tau` with `gamma e^(G tau) > 0`, searched on the grid
/// `n1/lambda1 * 2^k`.
///
/// From the starting point the search halves while the vector stays
/// positive and returns the smallest positive candidate; otherwise it
/// doubles until the vector becomes positive.
pub fn find_tau(mono: &MonocyclicRep, n1: usize, lambda1: f64, tol: &ToleranceConfig) -> Result<f64> {
    let gamma = mono.gamma()?;
    if !(gamma[0] > 0.0) {
        return Err(Error::Precondition(format!(
            "first entry of the initial vector is {} (must be positive)",
            gamma[0]
        )));
    }
    let start = n1 as f64 / lambda1;
    if gamma.iter().all(|&g| g > 0.0) {
        return Ok(start);
    }
    if min_entry_after(mono, gamma, start) > 0.0 {
        let mut tau = start;
        for _ in 0..tol.max_doublings {
            let next = tau / 2.0;
            if min_entry_after(mono, gamma, next) > 0.0 {
                tau = next;
            } else {
                break;
            }
        }
        return Ok(tau);
    }
    let mut tau = start;
    for _ in 0..tol.max_doublings {
        tau *= 2.0;
        if min_entry_after(mono, gamma, tau) > 0.0 {
            return Ok(tau);
        }
    }
    Err(Error::Precondition(
        "preconditions violated (gamma_1 <= 0 or non-DEC input): no tau found".into(),
    ))
}

/// Default grid size for the density infimum on `[0, tau]`.
pub fn default_grid(g: f64, tau: f64) -> usize {
    (10.0 * (g * tau).ceil()).max(10.0) as usize
}

pub fn compute_bounds(
    mono: &MonocyclicRep,
    tau: f64,
    grid: Option<usize>,
    tol: &ToleranceConfig,
) -> Result<BoundsReport> {
    let gamma = mono.gamma()?;
    let gm = mono.generator();
    let g = mat_norm_inf(&gm);
    let gamma_norm = vec_norm1(gamma);
    let eps1 = min_entry_after(mono, gamma, tau);
    if !(eps1 > 0.0) {
        return Err(Error::Precondition(format!(
            "gamma e^(G tau) has minimum {eps1:.3e} at tau = {tau}"
        )));
    }
    let points = grid.unwrap_or_else(|| default_grid(g, tau)).max(2);
    let min_f = density_min(&gm, gamma, mono.exit_rate(), tau, points);
    let eps2 = tol.eps2_safety * min_f;
    if !(eps2 > 0.0) {
        return Err(Error::PositiveDensity(format!(
            "positive density condition fails on [0, {tau}] (minimum {min_f:.3e})"
        )));
    }
    Ok(BoundsReport::from_constants(tau, g, gamma_norm, eps1, eps2))
}

// min of gamma e^{Gx}(-G1) over an even grid on [0, tau]
fn density_min(g: &DMatrix<f64>, gamma: &[f64], exit: f64, tau: f64, points: usize) -> f64 {
    let h = tau / (points - 1) as f64;
    let step = matrix_exp(&(g * h));
    let mut v = RowDVector::from_row_slice(gamma);
    let last = gamma.len() - 1;
    let mut m = f64::INFINITY;
    for i in 0..points {
        if i > 0 {
            v = &v * &step;
        }
        m = m.min(v[last] * exit);
    }
    m
}

/// Computes `gamma W` for the extended generator by `n` vector products.
pub fn append_tail(
    mono: &MonocyclicRep,
    bounds: &BoundsReport,
    max_order: usize,
    tol: &ToleranceConfig,
) -> Result<PHRep> {
    match sweep(mono, bounds.lambda, bounds.n, max_order, tol)? {
        Ok(ph) => Ok(ph),
        Err(_) => {
            let retry = bounds.with_lambda(2.0 * bounds.lambda);
            match sweep(mono, retry.lambda, retry.n, max_order, tol)? {
                Ok(ph) => Ok(ph),
                Err((index, value)) => Err(Error::Numeric(format!(
                    "initial vector entry {index} is {value:.3e} after doubling the tail rate"
                ))),
            }
        }
    }
}

type Sweep = std::result::Result<PHRep, (usize, f64)>;

fn sweep(
    mono: &MonocyclicRep,
    lambda: f64,
    n: usize,
    max_order: usize,
    tol: &ToleranceConfig,
) -> Result<Sweep> {
    let gamma = mono.gamma()?;
    let u = mono.order();
    let order = u.saturating_add(n);
    if order > max_order {
        return Err(Error::OrderLimit { order, limit: max_order });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Numeric(format!("tail rate {lambda} is not usable")));
    }
    let exit = mono.exit_rate();
    let mut v = gamma.to_vec();
    let mut gv = vec![0.0; u];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        weights[n - 1 - k] = v[u - 1] * exit / lambda;
        vec_mul_generator(&mono.blocks, &v, &mut gv);
        for (x, d) in v.iter_mut().zip(&gv) {
            *x += d / lambda;
        }
    }
    let slack = tol.markov_slack * vec_norm1(gamma);
    let mut head = v;
    for (i, x) in head.iter_mut().chain(weights.iter_mut()).enumerate() {
        if !x.is_finite() || *x <= -slack {
            return Ok(Err((i, *x)));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(Ok(PHRep {
        prefix: None,
        head_blocks: mono.blocks.clone(),
        head_gamma: head,
        tail: (n > 0).then_some(ErlangTail { lambda, n, weights }),
    }))
}
