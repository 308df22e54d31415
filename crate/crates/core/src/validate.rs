//! Markovianity, positivity, equivalence, redundancy and Monte Carlo checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rep::{self, MERep};
use crate::spectral::{first_nonzero_derivative, SpectralData};
use crate::tail::{Evaluator, PHRep};
use crate::tolerance::ToleranceConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovVerdict {
    pub markovian: bool,
    pub violation: Option<String>,
}

impl MarkovVerdict {
    fn ok() -> Self {
        Self { markovian: true, violation: None }
    }

    fn fail(msg: String) -> Self {
        Self { markovian: false, violation: Some(msg) }
    }
}

pub fn check_markovian(rep: &MERep, tol: &ToleranceConfig) -> MarkovVerdict {
    let Some((alpha, a)) = rep.real_parts(0.0) else {
        return MarkovVerdict::fail("representation has complex entries".into());
    };
    let n = alpha.len();
    if let Some(i) = alpha.iter().position(|&v| v < 0.0) {
        return MarkovVerdict::fail(format!("initial entry {i} is {} < 0", alpha[i]));
    }
    let s: f64 = alpha.iter().sum();
    if (s - 1.0).abs() > tol.alpha_sum {
        return MarkovVerdict::fail(format!("initial vector sums to {s}"));
    }
    let scale = rep.norm_inf();
    for i in 0..n {
        if !(a[(i, i)] < 0.0) {
            return MarkovVerdict::fail(format!("diagonal entry {i} is {} (must be negative)", a[(i, i)]));
        }
        for j in 0..n {
            if i != j && a[(i, j)] < 0.0 {
                return MarkovVerdict::fail(format!("off-diagonal entry ({i},{j}) is {} < 0", a[(i, j)]));
            }
        }
        let row: f64 = a.row(i).sum();
        if row > tol.row_sum * scale {
            return MarkovVerdict::fail(format!("row {i} sums to {row} > 0"));
        }
    }
    if rep.check_valid(tol).is_err() {
        return MarkovVerdict::fail("matrix is singular".into());
    }
    MarkovVerdict::ok()
}

/// Markovianity of the structured form, without building the generator.
pub fn check_markovian_ph(ph: &PHRep, tol: &ToleranceConfig) -> MarkovVerdict {
    if ph.head_blocks.is_empty() {
        return MarkovVerdict::fail("representation has no phases".into());
    }
    if let Some((j, b)) = ph.head_blocks.iter().enumerate().find(|(_, b)| !b.is_valid()) {
        return MarkovVerdict::fail(format!("block {j} has invalid parameters {b:?}"));
    }
    if ph.head_gamma.len() != ph.head_order() {
        return MarkovVerdict::fail(format!(
            "head vector has length {} but the head has {} phases",
            ph.head_gamma.len(),
            ph.head_order()
        ));
    }
    if let Some(t) = &ph.tail {
        if !(t.lambda > 0.0) || !t.lambda.is_finite() {
            return MarkovVerdict::fail(format!("tail rate {} is not positive", t.lambda));
        }
        if t.weights.len() != t.n {
            return MarkovVerdict::fail("tail weight count differs from tail length".into());
        }
    }
    if let Some(p) = ph.prefix {
        if !(p.mu > 0.0) || !p.mu.is_finite() || p.l == 0 {
            return MarkovVerdict::fail(format!("prefix {p:?} is not usable"));
        }
    }
    let mut total = 0.0;
    for (i, v) in ph.body_vector().enumerate() {
        if !(v >= 0.0) {
            return MarkovVerdict::fail(format!("initial entry {i} is {v} < 0"));
        }
        total += v;
    }
    if (total - 1.0).abs() > tol.alpha_sum {
        return MarkovVerdict::fail(format!("initial vector sums to {total}"));
    }
    MarkovVerdict::ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    pub grid_ok: bool,
    pub tail_ok: bool,
    pub start_ok: bool,
    /// Smallest grid value and where it occurs.
    pub grid_min: f64,
    pub grid_argmin: f64,
}

impl PositivityReport {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if !self.grid_ok {
            parts.push(format!("density is {:.3e} at x = {:.6}", self.grid_min, self.grid_argmin));
        }
        if !self.tail_ok {
            parts.push("leading coefficient of the dominant term is not positive".to_string());
        }
        if !self.start_ok {
            parts.push("first nonzero derivative at 0 is not positive".to_string());
        }
        if parts.is_empty() {
            "density positive on the checked range".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Grid positivity on `[delta, K]`, sign of the asymptotic term, and sign of
/// the density near 0.
pub fn check_positive_density(rep: &MERep, spec: &SpectralData, tol: &ToleranceConfig) -> PositivityReport {
    let lambda1 = spec.lambda1();
    let n1 = spec.n1() as f64;
    let delta = tol.positivity_start / lambda1;
    let k = tol.positivity_horizon * n1 / lambda1;
    let points = tol.positivity_points.max(2);
    let mut grid_min = f64::INFINITY;
    let mut grid_argmin = delta;
    for i in 0..points {
        let x = delta + (k - delta) * i as f64 / (points - 1) as f64;
        let v = spec.pdf(x);
        if !(v > grid_min) {
            grid_min = v;
            grid_argmin = x;
        }
    }
    let lead = spec.dominant_term().leading_coeff();
    let tail_ok = spec.dominant_term().is_real() && lead.re > 0.0;
    let start_ok = first_nonzero_derivative(rep, tol).is_some_and(|(_, v)| v > 0.0);
    let grid_ok = grid_min > 0.0;
    PositivityReport {
        pass: grid_ok && tail_ok && start_ok,
        grid_ok,
        tail_ok,
        start_ok,
        grid_min,
        grid_argmin,
    }
}

/// Anything with a density and moments.
pub trait DensityModel {
    fn pdf_many(&self, xs: &[f64]) -> Result<Vec<f64>>;
    fn moments(&self, k_max: usize) -> Result<Vec<f64>>;
}

impl DensityModel for MERep {
    fn pdf_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        rep::pdf_grid(self, xs)
    }

    fn moments(&self, k_max: usize) -> Result<Vec<f64>> {
        rep::moments(self, k_max)
    }
}

impl DensityModel for PHRep {
    fn pdf_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let x_max = xs.iter().copied().fold(0.0, f64::max);
        Evaluator::new(self, x_max)?.pdf_many(xs)
    }

    fn moments(&self, k_max: usize) -> Result<Vec<f64>> {
        PHRep::moments(self, k_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceVerdict {
    pub max_rel_error: f64,
    pub grid: Vec<f64>,
    pub moments_rel_error: f64,
    pub pass: bool,
}

/// Compares densities on `grid` and the first five moments.
pub fn check_equivalence(
    a: &dyn DensityModel,
    b: &dyn DensityModel,
    grid: &[f64],
    tol: f64,
) -> Result<EquivalenceVerdict> {
    let pa = a.pdf_many(grid)?;
    let pb = b.pdf_many(grid)?;
    let peak = pa.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = (1e-12 * peak).max(f64::MIN_POSITIVE);
    let max_rel_error = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).abs() / x.abs().max(floor))
        .fold(0.0, f64::max);
    let ma = a.moments(5)?;
    let mb = b.moments(5)?;
    let moments_rel_error = ma
        .iter()
        .zip(&mb)
        .map(|(x, y)| (x - y).abs() / x.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(EquivalenceVerdict {
        pass: max_rel_error <= tol && moments_rel_error <= tol,
        max_rel_error,
        grid: grid.to_vec(),
        moments_rel_error,
    })
}

/// Removes phases with zero expected occupancy `-alpha A^-1`.
pub fn eliminate_redundant(rep: &MERep, tol: &ToleranceConfig) -> Result<MERep> {
    let verdict = check_markovian(rep, tol);
    if !verdict.markovian {
        return Err(Error::Precondition(format!(
            "representation is not Markovian: {}",
            verdict.violation.unwrap_or_default()
        )));
    }
    let (alpha, a) = rep.real_parts(0.0).expect("checked real");
    let n = alpha.len();
    let lu = a.transpose().lu();
    let rhs = -nalgebra::DVector::from_vec(alpha.clone());
    let occ = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular generator".into()))?;
    let keep: Vec<usize> = (0..n).filter(|&i| occ[i] > 1e-12).collect();
    if keep.len() == n {
        return Ok(rep.clone());
    }
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])]);
    let alpha: Vec<f64> = keep.iter().map(|&i| alpha[i]).collect();
    MERep::from_real(&alpha, &sub)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub samples: usize,
    pub seed: u64,
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Draws absorption times of the structured chain and returns the
/// Kolmogorov-Smirnov distance to the exact distribution function.
pub fn monte_carlo_check(ph: &PHRep, samples: usize, seed: u64, tol: &ToleranceConfig) -> Result<MonteCarloReport> {
    let verdict = check_markovian_ph(ph, tol);
    if !verdict.markovian {
        return Err(Error::Precondition(format!(
            "representation is not Markovian: {}",
            verdict.violation.unwrap_or_default()
        )));
    }
    if samples == 0 {
        return Err(Error::Precondition("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..samples).map(|_| sample_absorption(ph, &mut rng)).collect::<Result<_>>()?;
    draws.sort_by(f64::total_cmp);
    let x_max = *draws.last().expect("nonempty");
    let cdf = CdfTable::new(ph, x_max)?;
    let nf = samples as f64;
    let mut ks = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let f = cdf.eval(x);
        ks = ks.max((f - i as f64 / nf).abs()).max(((i + 1) as f64 / nf - f).abs());
    }
    let threshold = 1.63 / nf.sqrt();
    Ok(MonteCarloReport { samples, seed, ks, threshold, pass: ks <= threshold })
}

fn sample_absorption(ph: &PHRep, rng: &mut ChaCha8Rng) -> Result<f64> {
    let gamma = |shape: usize, rate: f64, rng: &mut ChaCha8Rng| -> Result<f64> {
        if shape == 0 {
            return Ok(0.0);
        }
        Gamma::new(shape as f64, 1.0 / rate)
            .map(|d| d.sample(rng))
            .map_err(|e| Error::Numeric(format!("gamma sampler: {e}")))
    };
    let mut t = match ph.prefix {
        Some(p) => gamma(p.l, p.mu, rng)?,
        None => 0.0,
    };
    let u = ph.head_order();
    let start = pick(ph, rng.random::<f64>());
    if start >= u {
        let tail = ph.tail.as_ref().expect("index past head implies a tail");
        return Ok(t + gamma(tail.n - (start - u), tail.lambda, rng)?);
    }
    // walk the head: block j, phase i
    let mut offsets = Vec::with_capacity(ph.head_blocks.len());
    let mut o = 0;
    for b in &ph.head_blocks {
        offsets.push(o);
        o += b.b;
    }
    let mut j = offsets.iter().rposition(|&o| o <= start).expect("offset 0");
    let mut i = start - offsets[j];
    loop {
        let blk = ph.head_blocks[j];
        t += Exp::new(blk.sigma).expect("positive rate").sample(rng);
        if i + 1 < blk.b {
            i += 1;
            continue;
        }
        if blk.z > 0.0 && rng.random::<f64>() < blk.z {
            i = 0;
            continue;
        }
        j += 1;
        i = 0;
        if j == ph.head_blocks.len() {
            break;
        }
    }
    if let Some(tail) = &ph.tail {
        t += gamma(tail.n, tail.lambda, rng)?;
    }
    Ok(t)
}

// body index holding cumulative probability u
fn pick(ph: &PHRep, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in ph.body_vector().enumerate() {
        if w > 0.0 {
            last = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

/// Distribution function on a fine grid with cubic Hermite interpolation.
struct CdfTable {
    h: f64,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl CdfTable {
    fn new(ph: &PHRep, x_max: f64) -> Result<Self> {
        let points = 4001;
        let ev = Evaluator::new(ph, x_max)?;
        let h = x_max / (points - 1) as f64;
        let mut f = Vec::with_capacity(points);
        let mut d = Vec::with_capacity(points);
        for i in 0..points {
            let x = (i as f64 * h).min(x_max);
            f.push(ev.cdf(x)?);
            d.push(ev.pdf(x)?);
        }
        Ok(Self { h, f, d })
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.f.len() - 1;
        if self.h == 0.0 {
            return self.f[last];
        }
        let s = x / self.h;
        let i = (s.floor() as usize).min(last - 1);
        let t = s - i as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        h00 * self.f[i] + h10 * self.h * self.d[i] + h01 * self.f[i + 1] + h11 * self.h * self.d[i + 1]
    }
}
