//! Independent masked categoricals, one per action dimension.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("every index of action dimension {dim} is masked")]
    AllMasked { dim: usize },
    #[error("action {index} in dimension {dim} has zero probability")]
    Impossible { dim: usize, index: usize },
}

/// Per-dimension log-probabilities; masked indices hold `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedMultiCategorical {
    pub log_probs: Vec<Vec<f64>>,
}

impl MaskedMultiCategorical {
    /// `logits` and `allowed` are flat in layout order with block sizes
    /// `cards`.
    pub fn new(logits: &[f64], allowed: &[bool], cards: &[usize]) -> Result<Self, DistError> {
        let mut out = Vec::with_capacity(cards.len());
        let mut off = 0;
        for (d, &n) in cards.iter().enumerate() {
            let z = &logits[off..off + n];
            let m = &allowed[off..off + n];
            off += n;
            let max = z.iter().zip(m).filter(|x| *x.1).map(|x| *x.0).fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(DistError::AllMasked { dim: d });
            }
            let lse = max + z.iter().zip(m).filter(|x| *x.1).map(|x| (x.0 - max).exp()).sum::<f64>().ln();
            out.push(z.iter().zip(m).map(|(v, ok)| if *ok { v - lse } else { f64::NEG_INFINITY }).collect());
        }
        Ok(Self { log_probs: out })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.log_probs
            .iter()
            .map(|lp| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut last = 0;
                for (i, l) in lp.iter().enumerate() {
                    if *l == f64::NEG_INFINITY {
                        continue;
                    }
                    last = i;
                    acc += l.exp();
                    if u < acc {
                        return i;
                    }
                }
                last
            })
            .collect()
    }

    /// Most likely index per dimension, lowest index on ties.
    pub fn mode(&self) -> Vec<usize> {
        self.log_probs
            .iter()
            .map(|lp| {
                let mut best = 0;
                for (i, l) in lp.iter().enumerate() {
                    if *l > lp[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Joint log-probability: the sum over dimensions.
    pub fn log_prob(&self, actions: &[usize]) -> Result<f64, DistError> {
        let mut s = 0.0;
        for (d, (lp, &a)) in self.log_probs.iter().zip(actions).enumerate() {
            let l = lp[a];
            if l == f64::NEG_INFINITY {
                return Err(DistError::Impossible { dim: d, index: a });
            }
            s += l;
        }
        Ok(s)
    }

    /// Entropy summed over dimensions.
    pub fn entropy(&self) -> f64 {
        self.log_probs.iter().map(|lp| dim_entropy(lp)).sum()
    }

    /// `∂ log π(a) / ∂ logits`, flat.
    pub fn grad_log_prob(&self, actions: &[usize], out: &mut [f64], scale: f64) {
        let mut off = 0;
        for (lp, &a) in self.log_probs.iter().zip(actions) {
            for (j, l) in lp.iter().enumerate() {
                if *l == f64::NEG_INFINITY {
                    continue;
                }
                let ind = if j == a { 1.0 } else { 0.0 };
                out[off + j] += scale * (ind - l.exp());
            }
            off += lp.len();
        }
    }

    /// `∂ H / ∂ logits`, flat.
    pub fn grad_entropy(&self, out: &mut [f64], scale: f64) {
        let mut off = 0;
        for lp in &self.log_probs {
            let h = dim_entropy(lp);
            for (j, l) in lp.iter().enumerate() {
                if *l == f64::NEG_INFINITY {
                    continue;
                }
                out[off + j] += scale * -l.exp() * (l + h);
            }
            off += lp.len();
        }
    }
}

fn dim_entropy(lp: &[f64]) -> f64 {
    -lp.iter().filter(|l| **l > f64::NEG_INFINITY).map(|l| l.exp() * l).sum::<f64>()
}
