//! File formats and subcommands behind the `me2ph` binary.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod io;

use std::fmt;

/// Everything a subcommand can fail with, mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Parse(String),
    Grid(String),
    Invalid(String),
    Core(me2ph::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        use me2ph::Error as E;
        match self {
            Failure::Io(_) | Failure::Parse(_) | Failure::Grid(_) => 1,
            Failure::Invalid(_) => 5,
            Failure::Core(e) => match e {
                E::DominantEigenvalue(_) => 2,
                E::PositiveDensity(_) => 3,
                E::IllConditioned { .. } | E::Numeric(_) | E::OrderLimit { .. } => 4,
                E::InvalidInput(_) | E::Precondition(_) => 5,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        use me2ph::Error as E;
        match self {
            Failure::Io(_) => "io",
            Failure::Parse(_) => "parse",
            Failure::Grid(_) => "grid",
            Failure::Invalid(_) => "invalid",
            Failure::Core(e) => match e {
                E::DominantEigenvalue(_) => "dec",
                E::PositiveDensity(_) => "positivity",
                E::IllConditioned { .. } => "ill-conditioned",
                E::Numeric(_) => "numeric",
                E::OrderLimit { .. } => "order-limit",
                E::InvalidInput(_) | E::Precondition(_) => "invalid",
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) | Failure::Parse(m) | Failure::Grid(m) | Failure::Invalid(m) => {
                write!(f, "error[{}]: {m}", self.kind())
            }
            Failure::Core(e) => write!(f, "error[{}]: {e}", self.kind()),
        }
    }
}

impl From<me2ph::Error> for Failure {
    fn from(e: me2ph::Error) -> Self {
        Failure::Core(e)
    }
}

/// Parses `start:stop:count` into `count` evenly spaced points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = |why: &str| Failure::Grid(format!("grid '{spec}': {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad("expected start:stop:count"));
    };
    let a: f64 = a.trim().parse().map_err(|_| bad("start is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| bad("stop is not a number"))?;
    let n: usize = n.trim().parse().map_err(|_| bad("count is not a positive integer"))?;
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < a {
        return Err(bad("need 0 <= start <= stop"));
    }
    match n {
        0 => Err(bad("count must be at least 1")),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}
