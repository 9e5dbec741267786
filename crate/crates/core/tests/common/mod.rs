//! Independent scalar-loop oracles shared by integration tests.

#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use deixis_core::hint::adapter::KEYPOINT_DIM;
use deixis_core::hint::{AdapterParams, KeypointNorm};

pub fn oracle_layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut sum = 0.0;
    for i in 0..n {
        sum += x[i];
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for i in 0..n {
        let dv = x[i] - mean;
        ss += dv * dv;
    }
    let denom = (ss / n as f64 + 1e-5).sqrt();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = gain[i] * (x[i] - mean) / denom + bias[i];
    }
    out
}

pub fn oracle_gelu(z: f64) -> f64 {
    let inner = (2.0 / std::f64::consts::PI).sqrt() * (z + 0.044715 * z.powi(3));
    z * 0.5 * (1.0 + inner.tanh())
}

/// `W2 · GeLU(W1 · LN(k))` with explicit index loops.
pub fn oracle_adapter(p: &AdapterParams, k: &[f64]) -> Vec<f64> {
    let mut x = k.to_vec();
    if p.norm == KeypointNorm::RootCentered {
        for j in 0..21 {
            for c in 0..3 {
                x[3 * j + c] = k[3 * j + c] - k[c];
            }
        }
    }
    let y = oracle_layer_norm(&x, &p.ln_gain, &p.ln_bias);
    let mut a = vec![0.0; p.d_h];
    for r in 0..p.d_h {
        let mut z = 0.0;
        for c in 0..KEYPOINT_DIM {
            z += p.w1.data[r * KEYPOINT_DIM + c] * y[c];
        }
        a[r] = oracle_gelu(z);
    }
    let mut h = vec![0.0; p.d];
    for r in 0..p.d {
        for c in 0..p.d_h {
            h[r] += p.w2.data[r * p.d_h + c] * a[c];
        }
    }
    h
}

/// Relative error with a floor at the resolution of a central difference
/// with h = 1e-5 (round-off ≈ 1e-10 absolute on O(1) outputs).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}
