//! Runtime numerics suite for the adapter kernels: forward against a
//! scalar-loop reference, backward against central differences.

// The reference loops index like the formulas they mirror.
#![allow(clippy::needless_range_loop)]

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adapter::{adapter_backward, adapter_forward, AdapterParams, GateConfig, KeypointNorm, KEYPOINT_DIM};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckTolerances {
    pub forward_abs: f64,
    pub backward_rel: f64,
    /// Central-difference step.
    pub h: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        CheckTolerances { forward_abs: 1e-9, backward_rel: 1e-4, h: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFailure {
    pub config: usize,
    pub d_h: usize,
    pub d: usize,
    pub entry: String,
    pub got: f64,
    pub want: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub configs: usize,
    pub forward_max_abs: f64,
    pub backward_max_rel: f64,
    pub failures: Vec<CheckFailure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn reference_forward(p: &AdapterParams, k: &[f64]) -> Vec<f64> {
    let mut x = k.to_vec();
    if p.norm == KeypointNorm::RootCentered {
        for i in 0..KEYPOINT_DIM {
            x[i] = k[i] - k[i % 3];
        }
    }
    let n = KEYPOINT_DIM as f64;
    let mut mean = 0.0;
    for v in &x {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0;
    for v in &x {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    let sd = (var + 1e-5).sqrt();
    let y: Vec<f64> = (0..KEYPOINT_DIM).map(|i| p.ln_gain[i] * (x[i] - mean) / sd + p.ln_bias[i]).collect();
    let mut a = vec![0.0; p.d_h];
    for r in 0..p.d_h {
        let mut z = 0.0;
        for c in 0..KEYPOINT_DIM {
            z += p.w1.data[r * KEYPOINT_DIM + c] * y[c];
        }
        let inner = (2.0 / std::f64::consts::PI).sqrt() * (z + 0.044715 * z * z * z);
        a[r] = 0.5 * z * (1.0 + inner.tanh());
    }
    let mut out = vec![0.0; p.d];
    for r in 0..p.d {
        for c in 0..p.d_h {
            out[r] += p.w2.data[r * p.d_h + c] * a[c];
        }
    }
    out
}

// floor at central-difference resolution for near-zero entries
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

/// Checks `n` random configurations with `d_h ∈ [1, 8]`, `d ∈ [2, 16]`,
/// alternating raw and root-centred keypoints.
pub fn run_check(n: usize, seed_value: u64, tol: &CheckTolerances) -> CheckReport {
    let gate = GateConfig::default();
    let mut report = CheckReport { configs: n, forward_max_abs: 0.0, backward_max_rel: 0.0, failures: Vec::new() };
    for i in 0..n {
        let mut rng = seed::rng(seed_value, "adapter-check", i as u64);
        let d_h = rng.gen_range(1..=8);
        let d = rng.gen_range(2..=16);
        let mut p = AdapterParams::random(d_h, d, &mut rng);
        if i % 2 == 1 {
            p.norm = KeypointNorm::RootCentered;
        }
        let k: Vec<f64> = (0..KEYPOINT_DIM).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut fail = |entry: String, got: f64, want: f64| {
            report.failures.push(CheckFailure { config: i, d_h, d, entry, got, want })
        };

        let out = match adapter_forward(&p, &k, 1.0, &gate) {
            Ok(t) => t.0.unwrap_or_default(),
            Err(e) => {
                fail(format!("forward error: {e}"), f64::NAN, f64::NAN);
                continue;
            }
        };
        for (j, (a, b)) in out.iter().zip(reference_forward(&p, &k)).enumerate() {
            let err = (a - b).abs();
            report.forward_max_abs = report.forward_max_abs.max(err);
            if !(err <= tol.forward_abs) {
                fail(format!("H[{j}]"), *a, b);
            }
        }

        let grads = match adapter_backward(&p, &k, 1.0, &gate, &g) {
            Ok(gr) => gr,
            Err(e) => {
                fail(format!("backward error: {e}"), f64::NAN, f64::NAN);
                continue;
            }
        };
        let objective = |q: &AdapterParams, kk: &[f64]| -> f64 {
            reference_forward(q, kk).iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let blocks: [(&str, &[f64], usize); 5] = [
            ("W1", &grads.w1.data, 0),
            ("W2", &grads.w2.data, 1),
            ("ln_gain", &grads.ln_gain, 2),
            ("ln_bias", &grads.ln_bias, 3),
            ("K", &grads.keypoints, 4),
        ];
        for (name, analytic, which) in blocks {
            for (j, a) in analytic.iter().enumerate() {
                let eval = |e: f64| {
                    let mut q = p.clone();
                    let mut kk = k.clone();
                    match which {
                        0 => q.w1.data[j] += e,
                        1 => q.w2.data[j] += e,
                        2 => q.ln_gain[j] += e,
                        3 => q.ln_bias[j] += e,
                        _ => kk[j] += e,
                    }
                    objective(&q, &kk)
                };
                let numeric = (eval(tol.h) - eval(-tol.h)) / (2.0 * tol.h);
                let err = rel(*a, numeric);
                report.backward_max_rel = report.backward_max_rel.max(err);
                if !(err <= tol.backward_rel) {
                    fail(format!("d{name}[{j}]"), *a, numeric);
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = run_check(20, 1, &CheckTolerances::default());
        assert!(r.passed(), "{:?}", &r.failures[..r.failures.len().min(5)]);
        assert!(r.forward_max_abs < 1e-12);
    }

    #[test]
    fn impossible_tolerance_reports_cases() {
        let tight = CheckTolerances { forward_abs: -1.0, ..CheckTolerances::default() };
        let r = run_check(2, 1, &tight);
        assert!(!r.passed());
        assert!(r.failures.iter().all(|f| f.entry.starts_with("H[")));
    }
}
