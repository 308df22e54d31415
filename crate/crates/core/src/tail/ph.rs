use nalgebra::{DMatrix, DVector, RowDVector};

use crate::deconv::DeconvParams;
use crate::error::{Error, Result};
use crate::monocyclic::{generator_of, FEBlock, MonocyclicRep};
use crate::rep::MERep;

/// `n` phases of rate `lambda` after the monocyclic head.
///
/// `weights[k]` is the initial probability of the `k`-th tail phase, from
/// which `n - k` phases remain.
#[derive(Debug, Clone, PartialEq)]
pub struct ErlangTail {
    pub lambda: f64,
    pub n: usize,
    pub weights: Vec<f64>,
}

/// Structured phase-type representation: an optional Erlang prefix, a
/// monocyclic head, and an optional Erlang tail.
///
/// The process starts either in the prefix (if present, in its first phase)
/// or directly in the body according to `(head_gamma, tail.weights)`. The
/// prefix feeds the body with that same vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PHRep {
    pub prefix: Option<DeconvParams>,
    pub head_blocks: Vec<FEBlock>,
    pub head_gamma: Vec<f64>,
    pub tail: Option<ErlangTail>,
}

impl PHRep {
    pub fn from_monocyclic(mono: &MonocyclicRep) -> Result<Self> {
        Ok(Self {
            prefix: None,
            head_blocks: mono.blocks.clone(),
            head_gamma: mono.gamma()?.to_vec(),
            tail: None,
        })
    }

    pub fn head_order(&self) -> usize {
        self.head_blocks.iter().map(|b| b.b).sum()
    }

    pub fn tail_n(&self) -> usize {
        self.tail.as_ref().map_or(0, |t| t.n)
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.map_or(0, |p| p.l)
    }

    pub fn order(&self) -> usize {
        self.prefix_len() + self.head_order() + self.tail_n()
    }

    pub fn head_generator(&self) -> DMatrix<f64> {
        generator_of(&self.head_blocks)
    }

    pub fn head_exit_rate(&self) -> f64 {
        self.head_blocks.last().map_or(0.0, |b| b.exit_rate())
    }

    /// Initial vector of the body (head followed by tail).
    pub fn body_vector(&self) -> impl Iterator<Item = f64> + '_ {
        self.head_gamma
            .iter()
            .copied()
            .chain(self.tail.iter().flat_map(|t| t.weights.iter().copied()))
    }

    pub fn max_rate(&self) -> f64 {
        let head = self.head_blocks.iter().map(|b| b.sigma).fold(0.0, f64::max);
        let tail = self.tail.as_ref().map_or(0.0, |t| t.lambda);
        let prefix = self.prefix.map_or(0.0, |p| p.mu);
        head.max(tail).max(prefix)
    }

    /// Full `(beta, B)` pair; refuses orders above `limit`.
    pub fn to_dense(&self, limit: usize) -> Result<MERep> {
        let order = self.order();
        if order > limit {
            return Err(Error::OrderLimit { order, limit });
        }
        let l = self.prefix_len();
        let u = self.head_order();
        let n = self.tail_n();
        let mut b = DMatrix::<f64>::zeros(order, order);
        let body: Vec<f64> = self.body_vector().collect();
        let mut beta = vec![0.0; order];
        if let Some(p) = self.prefix {
            for i in 0..l {
                b[(i, i)] = -p.mu;
                if i + 1 < l {
                    b[(i, i + 1)] = p.mu;
                }
            }
            for (j, &w) in body.iter().enumerate() {
                b[(l - 1, l + j)] = p.mu * w;
            }
            beta[0] = 1.0;
        } else {
            beta.copy_from_slice(&body);
        }
        b.view_mut((l, l), (u, u)).copy_from(&self.head_generator());
        if let Some(t) = &self.tail {
            b[(l + u - 1, l + u)] = self.head_exit_rate();
            for k in 0..n {
                let s = l + u + k;
                b[(s, s)] = -t.lambda;
                if k + 1 < n {
                    b[(s, s + 1)] = t.lambda;
                }
            }
        }
        MERep::from_real(&beta, &b)
    }

    /// `E[X^k]` for `k = 1..=k_max` from the structure: the absorption time
    /// is the sum of independent prefix, head and tail stages.
    pub fn moments(&self, k_max: usize) -> Result<Vec<f64>> {
        let head = head_moments(&self.head_generator(), &self.head_gamma, k_max)?;
        let body: Vec<f64> = match &self.tail {
            None => head,
            Some(t) => {
                let n = t.n;
                (0..=k_max)
                    .map(|k| {
                        let tail: f64 = t
                            .weights
                            .iter()
                            .enumerate()
                            .map(|(j, &w)| w * erlang_moment(n - j, t.lambda, k))
                            .sum();
                        let through: f64 = (0..=k)
                            .map(|i| binom(k, i) * head[i] * erlang_moment(n, t.lambda, k - i))
                            .sum();
                        tail + through
                    })
                    .collect()
            }
        };
        let total: Vec<f64> = match self.prefix {
            None => body,
            Some(p) => (0..=k_max)
                .map(|k| {
                    (0..=k)
                        .map(|i| binom(k, i) * erlang_moment(p.l, p.mu, i) * body[k - i])
                        .sum()
                })
                .collect(),
        };
        Ok(total[1..].to_vec())
    }
}

// E_h[T^i] = i! h (-G)^{-i} 1, with the 0-th entry the mass h 1
fn head_moments(g: &DMatrix<f64>, h: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let u = g.nrows();
    let lu = (-g).lu();
    let hv = RowDVector::from_row_slice(h);
    let mut v = DVector::from_element(u, 1.0);
    let mut out = vec![hv.sum()];
    let mut fact = 1.0;
    for k in 1..=k_max {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Numeric("singular head generator".into()))?;
        fact *= k as f64;
        out.push(fact * (&hv * &v)[(0, 0)]);
    }
    Ok(out)
}

fn erlang_moment(m: usize, rate: f64, k: usize) -> f64 {
    (0..k).map(|i| (m + i) as f64 / rate).product()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}
