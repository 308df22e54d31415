//! Density and distribution function of a structured PH representation by
//! uniformization.
//!
//! With a uniformization rate `L` at least as large as every phase rate,
//! the absorption time is `Gamma(K, L)` where `K` is the index of the
//! absorbing jump of the embedded chain. With `q_K = P(K)`:
//!
//! `f(x) = L sum_K q_K Pois(K - 1; L x)`, `F(x) = sum_K q_K P(Pois(L x) >= K)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::monocyclic::vec_mul_generator;

use super::PHRep;

/// Cost cap for the general stage filters, in sequence-element updates.
const FILTER_BUDGET: usize = 2_000_000_000;

pub struct Evaluator {
    rate: f64,
    /// `q[k]` is the probability of absorption at jump `k`; `q[0] = 0`.
    q: Vec<f64>,
    /// `cum[k] = q[0] + ... + q[k]`
    cum: Vec<f64>,
    x_max: f64,
}

fn window(m: f64) -> f64 {
    12.0 * m.sqrt() + 20.0
}

impl Evaluator {
    /// Prepares evaluation on `[0, x_max]`.
    pub fn new(ph: &PHRep, x_max: f64) -> Result<Self> {
        if !(x_max >= 0.0) || !x_max.is_finite() {
            return Err(Error::Precondition(format!("evaluation range {x_max} is not usable")));
        }
        let rate = ph.max_rate();
        if !(rate > 0.0) {
            return Err(Error::Precondition("representation has no positive rate".into()));
        }
        let m = rate * x_max;
        let k_max = (m + window(m)).ceil() as usize + 2;
        let q = jump_distribution(ph, rate, k_max)?;
        let mut cum = Vec::with_capacity(q.len());
        let mut s = 0.0;
        for &v in &q {
            s += v;
            cum.push(s);
        }
        Ok(Self { rate, q, cum, x_max })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn check(&self, x: f64) -> Result<()> {
        if !(x >= 0.0) || x > self.x_max * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "argument {x} is outside the prepared range [0, {}]",
                self.x_max
            )));
        }
        Ok(())
    }

    fn bounds(&self, m: f64) -> (usize, usize) {
        let w = window(m);
        let lo = (m - w).floor().max(0.0) as usize;
        let hi = ((m + w).ceil() as usize).min(self.q.len() - 2);
        (lo, hi)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let m = self.rate * x;
        if m == 0.0 {
            return Ok(self.rate * self.q[1]);
        }
        let (lo, hi) = self.bounds(m);
        let pmf = PoissonWindow::new(m, lo, hi);
        // K - 1 = j
        let s: f64 = (lo..=hi).map(|j| self.q[j + 1] * pmf.get(j)).sum();
        Ok(self.rate * s)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let m = self.rate * x;
        if m == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = self.bounds(m);
        let pmf = PoissonWindow::new(m, lo, hi);
        // P(Pois >= K) is ~1 for K <= lo
        let mut total = self.cum[lo];
        let mut below = 0.0;
        for k in (lo + 1)..=(hi + 1) {
            below += pmf.get(k - 1);
            total += self.q[k] * (1.0 - below).max(0.0);
        }
        Ok(total.min(1.0))
    }

    pub fn pdf_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.pdf(x)).collect()
    }
}

/// Absorption-jump distribution `q[0..=k_max]` of the uniformized chain.
fn jump_distribution(ph: &PHRep, rate: f64, k_max: usize) -> Result<Vec<f64>> {
    let blocks = &ph.head_blocks;
    let u = ph.head_order();
    let exit = ph.head_exit_rate() / rate;

    // jumps at which the head is left
    let mut head_exit = vec![0.0; k_max + 1];
    let mut v = ph.head_gamma.clone();
    let mut gv = vec![0.0; u];
    for slot in head_exit.iter_mut().skip(1) {
        *slot = v[u - 1] * exit;
        vec_mul_generator(blocks, &v, &mut gv);
        for (x, d) in v.iter_mut().zip(&gv) {
            *x += d / rate;
        }
    }

    let mut q = match &ph.tail {
        None => head_exit,
        Some(t) if t.lambda == rate => {
            // each tail phase takes exactly one jump
            let mut q = vec![0.0; k_max + 1];
            for (k, slot) in q.iter_mut().enumerate().skip(1) {
                if k <= t.n {
                    *slot = t.weights[t.n - k];
                } else {
                    *slot = head_exit[k - t.n];
                }
            }
            q
        }
        Some(t) => {
            if t.n.saturating_mul(k_max) > FILTER_BUDGET {
                return Err(Error::Numeric(format!(
                    "tail rate {} is below the uniformization rate {rate}; evaluation too costly",
                    t.lambda
                )));
            }
            let p = t.lambda / rate;
            let mut x = head_exit;
            for j in 0..t.n {
                x[0] += t.weights[j];
                geometric_stage(&mut x, p);
            }
            x
        }
    };
    if let Some(pre) = ph.prefix {
        if pre.l.saturating_mul(k_max) > FILTER_BUDGET {
            return Err(Error::Numeric("prefix evaluation too costly".into()));
        }
        let p = pre.mu / rate;
        for _ in 0..pre.l {
            geometric_stage(&mut q, p);
        }
    }
    Ok(q)
}

// passage through one phase left with probability p at each jump
fn geometric_stage(x: &mut [f64], p: f64) {
    let mut prev_in = 0.0;
    let mut prev_out = 0.0;
    for slot in x.iter_mut() {
        let out = (1.0 - p) * prev_out + p * prev_in;
        prev_in = *slot;
        prev_out = out;
        *slot = out;
    }
}

/// Poisson probabilities on `[lo, hi]`, anchored at the mode and extended by
/// the ratio recurrence.
struct PoissonWindow {
    lo: usize,
    values: Vec<f64>,
}

impl PoissonWindow {
    fn new(m: f64, lo: usize, hi: usize) -> Self {
        let mode = (m.floor() as usize).clamp(lo, hi);
        let mut values = vec![0.0; hi - lo + 1];
        values[mode - lo] = poisson_pmf(mode, m);
        for k in (mode + 1)..=hi {
            values[k - lo] = values[k - 1 - lo] * m / k as f64;
        }
        for k in (lo..mode).rev() {
            values[k - lo] = values[k + 1 - lo] * (k + 1) as f64 / m;
        }
        Self { lo, values }
    }

    fn get(&self, k: usize) -> f64 {
        self.values.get(k - self.lo).copied().unwrap_or(0.0)
    }
}

/// `e^-m m^k / k!` in the saddle-point form, accurate for large `k` and `m`.
pub fn poisson_pmf(k: usize, m: f64) -> f64 {
    if m == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-m).exp();
    }
    let x = k as f64;
    (-stirlerr(x) - bd0(x, m)).exp() / (2.0 * PI * x).sqrt()
}

// ln(k!) - (k + 1/2) ln k + k - ln sqrt(2 pi)
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let lnfact: f64 = (1..=n as usize).map(|i| (i as f64).ln()).sum();
        return lnfact - (n + 0.5) * n.ln() + n - (2.0 * PI).sqrt().ln();
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

// x ln(x/np) + np - x, without cancellation when x ~ np
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        let mut j = 1;
        loop {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1;
        }
    }
    x * (x / np).ln() + np - x
}
