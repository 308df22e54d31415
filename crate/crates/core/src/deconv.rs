//! Splitting an Erlang factor off a density that vanishes at zero, and
//! attaching it back to a Markovian representation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rep::MERep;
use crate::spectral::{analyze_spectrum, first_nonzero_derivative, SpectralData};
use crate::tail::PHRep;
use crate::tolerance::ToleranceConfig;
use crate::validate::{check_markovian_ph, check_positive_density};

/// Erlang(`l`, `mu`) factor of a density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeconvParams {
    pub l: usize,
    pub mu: f64,
}

/// Order of the zero of the density at the origin.
pub fn zero_multiplicity(rep: &MERep, tol: &ToleranceConfig) -> Result<usize> {
    match first_nonzero_derivative(rep, tol) {
        Some((k, _)) if k < rep.order() => Ok(k),
        _ => Err(Error::InvalidInput(format!(
            "all derivatives of the density up to order {} vanish at 0",
            rep.order()
        ))),
    }
}

/// `(alpha (I + A/mu)^l, A)`, whose density is `sum_i C(l,i) mu^-i f^(i)`.
pub fn deconvolve(rep: &MERep, l: usize, mu: f64) -> Result<MERep> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Precondition(format!("rate {mu} must be positive")));
    }
    let n = rep.order();
    let step = DMatrix::<Complex64>::identity(n, n) + rep.matrix() / Complex64::from(mu);
    let mut alpha = rep.alpha().clone();
    for _ in 0..l {
        alpha = &alpha * &step;
    }
    MERep::new(alpha, rep.matrix().clone())
}

/// Smallest rate in `2 lambda1, 4 lambda1, ...` whose deconvolved density
/// passes the positive density check.
pub fn choose_mu(rep: &MERep, l: usize, spec: &SpectralData, tol: &ToleranceConfig) -> Result<f64> {
    if l == 0 {
        return Err(Error::Precondition("no factor to split off (l = 0)".into()));
    }
    let mut mu = 2.0 * spec.lambda1();
    for _ in 0..=tol.max_doublings {
        if accepts_mu(rep, l, mu, tol)? {
            return Ok(mu);
        }
        mu *= 2.0;
    }
    Err(Error::PositiveDensity(format!(
        "no rate up to {mu:.3e} gives a positive deconvolved density; \
         positive-density or DEC precondition likely violated"
    )))
}

/// Whether the density left after splitting off Erlang(`l`, `mu`) is positive.
pub fn accepts_mu(rep: &MERep, l: usize, mu: f64, tol: &ToleranceConfig) -> Result<bool> {
    let y = deconvolve(rep, l, mu)?;
    let f0 = -(y.alpha() * y.matrix()).iter().sum::<Complex64>().re;
    if !(f0 > tol.deriv_zero * y.norm_inf()) {
        return Ok(false);
    }
    // alpha_Y 1 = 1 - sum of lower derivatives at 0 / mu^i, zero only up to rounding
    let relaxed = ToleranceConfig { alpha_sum: tol.alpha_sum.max(tol.mass_drift), ..tol.clone() };
    let spec_y = analyze_spectrum(&y, &relaxed)?;
    Ok(check_positive_density(&y, &spec_y, &relaxed).pass)
}

/// Prefixes `l` exponential phases of rate `mu` to a Markovian representation.
pub fn recompose(ph: &PHRep, l: usize, mu: f64, tol: &ToleranceConfig) -> Result<PHRep> {
    if l == 0 {
        return Ok(ph.clone());
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Precondition(format!("rate {mu} must be positive")));
    }
    let verdict = check_markovian_ph(ph, tol);
    if !verdict.markovian {
        return Err(Error::Precondition(format!(
            "cannot prefix a non-Markovian representation: {}",
            verdict.violation.unwrap_or_default()
        )));
    }
    let mut out = ph.clone();
    out.prefix = Some(match ph.prefix {
        None => DeconvParams { l, mu },
        Some(p) if p.mu == mu => DeconvParams { l: p.l + l, mu },
        Some(p) => {
            return Err(Error::Precondition(format!(
                "existing prefix has rate {} but {mu} was requested",
                p.mu
            )))
        }
    });
    Ok(out)
}
