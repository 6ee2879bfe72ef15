//! Fully connected tanh network over a flat parameter vector.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Layer sizes `[in, h1, ..., out]`; parameters stored layer by layer as a
/// row-major `out × in` weight matrix followed by the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Cache {
    /// Input followed by the post-activation output of each hidden layer.
    acts: Vec<Vec<f64>>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Rows (or columns, whichever are fewer) made orthonormal by modified
/// Gram–Schmidt over a Gaussian draw, then scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut v: Vec<Vec<f64>> = (0..n).map(|_| (0..len).map(|_| rng.sample(StandardNormal)).collect()).collect();
    for i in 0..n {
        for j in 0..i {
            let d: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = v.split_at_mut(i);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= d * b;
            }
        }
        let norm = v[i].iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        for a in v[i].iter_mut() {
            *a /= norm;
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            w[r * cols + c] = gain * if rows <= cols { v[r][c] } else { v[c][r] };
        }
    }
    w
}

impl Mlp {
    /// Orthogonal weights, zero biases; `out_gain` scales the last layer.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, out_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs an input and an output layer");
        let mut params = Vec::with_capacity(param_count(sizes));
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let gain = if l == last { out_gain } else { hidden_gain };
            if gain == 0.0 {
                params.extend(std::iter::repeat(0.0).take(w[0] * w[1]));
            } else {
                params.extend(orthogonal(w[1], w[0], gain, rng));
            }
            params.extend(std::iter::repeat(0.0).take(w[1]));
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, None)
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut Cache) -> Vec<f64> {
        self.run(x, Some(cache))
    }

    fn run(&self, x: &[f64], mut cache: Option<&mut Cache>) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.sizes[0]);
        if let Some(c) = cache.as_deref_mut() {
            c.acts.clear();
            c.acts.push(x.to_vec());
        }
        let mut cur = x.to_vec();
        let mut off = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (din, dout) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + din * dout];
            let b = &self.params[off + din * dout..off + din * dout + dout];
            off += din * dout + dout;
            let mut y: Vec<f64> = (0..dout).map(|o| b[o] + dot(&w[o * din..(o + 1) * din], &cur)).collect();
            if l + 1 < n_layers {
                for v in y.iter_mut() {
                    *v = v.tanh();
                }
                if let Some(c) = cache.as_deref_mut() {
                    c.acts.push(y.clone());
                }
            }
            cur = y;
        }
        cur
    }

    /// Accumulates `∂L/∂params` into `grads` given `∂L/∂output`.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grads: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut offs = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offs.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut g = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (din, dout) = (self.sizes[l], self.sizes[l + 1]);
            let input = &cache.acts[l];
            let off = offs[l];
            let w = &self.params[off..off + din * dout];
            {
                let (gw, gb) = grads[off..off + din * dout + dout].split_at_mut(din * dout);
                for o in 0..dout {
                    let go = g[o];
                    if go == 0.0 {
                        continue;
                    }
                    gb[o] += go;
                    for (gwi, xi) in gw[o * din..(o + 1) * din].iter_mut().zip(input) {
                        *gwi += go * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut gin = vec![0.0; din];
            for o in 0..dout {
                let go = g[o];
                if go == 0.0 {
                    continue;
                }
                for (gi, wi) in gin.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                    *gi += go * wi;
                }
            }
            // through tanh of the previous layer
            for (gi, a) in gin.iter_mut().zip(input) {
                *gi *= 1.0 - a * a;
            }
            g = gin;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
