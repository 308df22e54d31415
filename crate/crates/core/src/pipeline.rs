//! The five-step conversion from an ME representation to a structured
//! Markovian one.

use num_complex::Complex64;
use serde::Serialize;

use crate::deconv::{choose_mu, deconvolve, recompose, zero_multiplicity, DeconvParams};
use crate::error::{Error, Result};
use crate::monocyclic::{build_generator, solve_gamma, FEBlock};
use crate::rep::MERep;
use crate::spectral::{
    analyze_spectrum, check_c_conditions, check_dec, fmt_c, minimal_representation,
};
use crate::tail::{append_tail, compute_bounds, find_tau, BoundsReport, PHRep};
use crate::tolerance::ToleranceConfig;
use crate::validate::check_positive_density;

/// Hand-derived constants substituted for the computed Step-4 bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaperBounds {
    pub gamma_norm: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Rate for the Erlang factor, when one is split off.
    pub mu: f64,
    /// Significant digits `lambda` is rounded up to.
    pub lambda_digits: u32,
}

impl Default for PaperBounds {
    fn default() -> Self {
        Self {
            gamma_norm: 1.5,
            eps1: 0.05,
            eps2: 0.069,
            mu: 10.0,
            lambda_digits: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertOptions {
    pub tol: ToleranceConfig,
    pub paper_bounds: Option<PaperBounds>,
    pub max_order: usize,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        Self {
            tol: ToleranceConfig::default(),
            paper_bounds: None,
            max_order: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionReport {
    pub input_order: usize,
    pub minimal_order: usize,
    /// Eigenvalues with their multiplicities in the minimal representation.
    pub spectrum: Vec<(String, usize)>,
    pub dropped: Vec<(String, usize)>,
    pub lambda1: f64,
    pub n1: usize,
    pub first_derivative: Option<(usize, f64)>,
    pub deconv: Option<DeconvParams>,
    pub blocks: Vec<FEBlock>,
    pub gamma: Vec<f64>,
    pub bounds: Option<BoundsReport>,
    pub final_order: usize,
}

pub struct Conversion {
    pub report: ConversionReport,
    pub ph: PHRep,
}

pub fn round_up_significant(x: f64, digits: u32) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return x;
    }
    let e = x.log10().floor() as i32 - digits as i32 + 1;
    let unit = 10f64.powi(e);
    let r = (x / unit).ceil() * unit;
    // guard against representation error in the division
    if r < x { r + unit } else { r }
}

// the body vector sums to one in exact arithmetic
fn renormalize(mut ph: PHRep, tol: &ToleranceConfig) -> Result<PHRep> {
    let total: f64 = ph.body_vector().sum();
    if !((total - 1.0).abs() <= tol.mass_drift) {
        return Err(Error::Numeric(format!("initial vector has total mass {total}")));
    }
    ph.head_gamma.iter_mut().for_each(|g| *g /= total);
    if let Some(t) = ph.tail.as_mut() {
        t.weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(ph)
}

pub fn convert(rep: &MERep, opts: &ConvertOptions) -> Result<Conversion> {
    let tol = &opts.tol;
    rep.check_valid(tol)?;

    // Step 1
    let spec = analyze_spectrum(rep, tol)?;
    if let Some(t) = spec.terms.iter().find(|t| !(t.eigenvalue.re < 0.0)) {
        return Err(Error::InvalidInput(format!(
            "eigenvalue {} contributing to the density has nonnegative real part",
            fmt_c(t.eigenvalue)
        )));
    }
    let dec = check_dec(&spec);
    if !dec.holds {
        return Err(Error::DominantEigenvalue(dec.to_string()));
    }
    let minimal = minimal_representation(&spec)?;
    let cond = check_c_conditions(&minimal, &spec, tol);
    let positivity = check_positive_density(&minimal, &spec, tol);
    if !cond.c4_nonnegative_start || !positivity.pass {
        return Err(Error::PositiveDensity(positivity.describe()));
    }

    // Step 2
    let l = zero_multiplicity(&minimal, tol)?;
    let (y, deconv) = if l > 0 {
        let mu = match opts.paper_bounds {
            Some(p) => p.mu,
            None => choose_mu(&minimal, l, &spec, tol)?,
        };
        (deconvolve(&minimal, l, mu)?, Some(DeconvParams { l, mu }))
    } else {
        (minimal.clone(), None)
    };

    // Step 3
    let mono = solve_gamma(&y, &build_generator(&spec)?)?;
    let gamma = mono.gamma()?.to_vec();
    let slack = tol.markov_slack * gamma.iter().map(|g| g.abs()).sum::<f64>();

    // Step 4
    let prefix_len = deconv.map_or(0, |d| d.l);
    let (ph, bounds) = if gamma.iter().all(|&g| g > -slack) {
        let mut ph = PHRep::from_monocyclic(&mono)?;
        ph.head_gamma.iter_mut().for_each(|g| *g = g.max(0.0));
        (ph, None)
    } else {
        let tau = find_tau(&mono, spec.n1(), spec.lambda1(), tol)?;
        let bounds = match opts.paper_bounds {
            Some(p) => {
                let b = BoundsReport::from_constants(tau, mono.norm_inf(), p.gamma_norm, p.eps1, p.eps2);
                b.with_lambda(round_up_significant(b.lambda, p.lambda_digits))
            }
            None => compute_bounds(&mono, tau, None, tol)?,
        };
        let limit = opts.max_order.saturating_sub(prefix_len);
        (append_tail(&mono, &bounds, limit, tol)?, Some(bounds))
    };
    let ph = renormalize(ph, tol)?;

    // Step 5
    let ph = match deconv {
        Some(d) => recompose(&ph, d.l, d.mu, tol)?,
        None => ph,
    };
    let final_order = ph.order();
    if final_order > opts.max_order {
        return Err(Error::OrderLimit { order: final_order, limit: opts.max_order });
    }

    let name = |z: Complex64| fmt_c(z);
    let report = ConversionReport {
        input_order: rep.order(),
        minimal_order: minimal.order(),
        spectrum: spec.terms.iter().map(|t| (name(t.eigenvalue), t.multiplicity)).collect(),
        dropped: spec.dropped.iter().map(|&(z, m)| (name(z), m)).collect(),
        lambda1: spec.lambda1(),
        n1: spec.n1(),
        first_derivative: cond.first_nonzero_derivative,
        deconv,
        blocks: mono.blocks.clone(),
        gamma,
        bounds: bounds.map(|b| BoundsReport { lambda: ph.tail.as_ref().map_or(b.lambda, |t| t.lambda), n: ph.tail_n(), ..b }),
        final_order,
    };
    Ok(Conversion { report, ph })
}
