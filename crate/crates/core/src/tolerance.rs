//! Numeric slack shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    /// Allowed deviation of `alpha * 1` from one.
    pub alpha_sum: f64,
    /// Eigenvalues closer than `cluster * ||A||_inf` are treated as one.
    pub cluster: f64,
    /// Pdf coefficients below `coeff_zero` times the smaller of `max|c|` and
    /// `max|f^(k)(0)|` (both spectrally scaled) are treated as absent.
    pub coeff_zero: f64,
    /// `f^(k)(0)` is zero when below `deriv_zero * ||A||_inf^(k+1)`.
    pub deriv_zero: f64,
    /// Largest condition estimate accepted from a dense solve.
    pub max_condition: f64,
    /// Negative entries of a Markovian vector down to `-markov_slack * ||gamma||_1` are clamped.
    pub markov_slack: f64,
    /// Allowed deviation of `W * 1` from one.
    pub row_sum: f64,
    /// Rounding drift of the total mass of a computed initial vector that is
    /// renormalized away.
    pub mass_drift: f64,
    /// Relative tolerance of the equivalence verdict.
    pub equivalence: f64,
    /// Grid size of the positive density check.
    pub positivity_points: usize,
    /// Right end of the positivity grid in units of `n1 / lambda1`.
    pub positivity_horizon: f64,
    /// Left end of the positivity grid in units of `1 / lambda1`.
    pub positivity_start: f64,
    /// Multiplier applied to the grid minimum of the pdf on `[0, tau]`.
    pub eps2_safety: f64,
    /// Cap on the doubling searches for `mu` and `tau`.
    pub max_doublings: usize,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            alpha_sum: 1e-9,
            cluster: 1e-6,
            coeff_zero: 1e-9,
            deriv_zero: 1e-9,
            max_condition: 1e13,
            markov_slack: 1e-12,
            row_sum: 1e-9,
            mass_drift: 1e-6,
            equivalence: 1e-5,
            positivity_points: 2000,
            positivity_horizon: 30.0,
            positivity_start: 1e-3,
            eps2_safety: 0.9,
            max_doublings: 60,
        }
    }
}
