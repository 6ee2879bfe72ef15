//! Concentration, return and distribution statistics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("total capacity is zero")]
    ZeroCapacity,
}

/// Herfindahl–Hirschman index on a 0–10000 scale.
pub fn compute_hhi(capacities: &[f64]) -> Result<f64, MetricError> {
    let total: f64 = capacities.iter().sum();
    if !(total > 0.0) {
        return Err(MetricError::ZeroCapacity);
    }
    let sq: f64 = capacities.iter().map(|c| c * c).sum();
    Ok(10_000.0 * sq / (total * total))
}

pub const IRR_LO: f64 = -0.99;
pub const IRR_HI: f64 = 10.0;
pub const IRR_TOL: f64 = 1e-6;

fn npv(flows: &[f64], r: f64) -> f64 {
    let d = 1.0 + r;
    let mut acc = 0.0;
    let mut f = 1.0;
    for c in flows {
        acc += c * f;
        f /= d;
    }
    acc
}

/// Annual internal rate of return by bisection on `(−0.99, 10)`. `None`
/// when the stream has no sign change or no root in the interval.
pub fn compute_irr(flows: &[f64]) -> Option<f64> {
    let has_pos = flows.iter().any(|f| *f > 0.0);
    let has_neg = flows.iter().any(|f| *f < 0.0);
    if !(has_pos && has_neg) {
        return None;
    }
    // scale out the magnitude so the sign tests do not depend on it
    let m = flows.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let f: Vec<f64> = flows.iter().map(|x| x / m).collect();
    let (mut lo, mut hi) = (IRR_LO, IRR_HI);
    let (flo, fhi) = (npv(&f, lo), npv(&f, hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > IRR_TOL * 1e-3 {
        let mid = 0.5 * (lo + hi);
        let fm = npv(&f, mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Linear-interpolation percentile, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] + (v[i + 1] - v[i]) * frac
}
