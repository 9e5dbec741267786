//! Keypoint adapter: `H = W2 · GeLU(W1 · LN(flatten(K)))`, gated on detection confidence.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::linalg::{dot, Matrix};
use crate::error::KernelError;
use crate::seed;
use crate::synth::hand::NUM_KEYPOINTS;

pub const KEYPOINT_DIM: usize = 3 * NUM_KEYPOINTS;
pub const LN_EPS: f64 = 1e-5;
pub const GELU_COEF: f64 = 0.044715;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub tau: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { tau: 0.5 }
    }
}

impl GateConfig {
    pub fn new(tau: f64) -> Result<GateConfig, KernelError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(KernelError::ShapeMismatch(format!("tau {tau} outside [0, 1]")));
        }
        Ok(GateConfig { tau })
    }

    #[inline]
    pub fn open(&self, confidence: f64) -> bool {
        confidence >= self.tau
    }
}

/// Keypoint preprocessing applied before the LayerNorm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointNorm {
    /// Raw camera-space coordinates.
    #[default]
    Raw,
    /// Subtract the wrist from every keypoint.
    RootCentered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParams {
    pub d_h: usize,
    pub d: usize,
    pub w1: Matrix,
    pub w2: Matrix,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub norm: KeypointNorm,
}

impl AdapterParams {
    /// Gaussian init scaled by fan-in; unit gain, zero bias.
    pub fn init(d_h: usize, d: usize, seed: u64) -> AdapterParams {
        let mut rng = seed::rng(seed, "adapter-init", 0);
        let n1 = Normal::new(0.0, (1.0 / KEYPOINT_DIM as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / d_h.max(1) as f64).sqrt()).expect("valid std");
        AdapterParams {
            d_h,
            d,
            w1: Matrix::from_fn(d_h, KEYPOINT_DIM, |_, _| n1.sample(&mut rng)),
            w2: Matrix::from_fn(d, d_h, |_, _| n2.sample(&mut rng)),
            ln_gain: vec![1.0; KEYPOINT_DIM],
            ln_bias: vec![0.0; KEYPOINT_DIM],
            norm: KeypointNorm::Raw,
        }
    }

    /// Fully random parameters, used by oracle tests.
    pub fn random(d_h: usize, d: usize, rng: &mut impl Rng) -> AdapterParams {
        AdapterParams {
            d_h,
            d,
            w1: Matrix::from_fn(d_h, KEYPOINT_DIM, |_, _| rng.gen_range(-1.0..1.0)),
            w2: Matrix::from_fn(d, d_h, |_, _| rng.gen_range(-1.0..1.0)),
            ln_gain: (0..KEYPOINT_DIM).map(|_| rng.gen_range(0.5..1.5)).collect(),
            ln_bias: (0..KEYPOINT_DIM).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            norm: KeypointNorm::Raw,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::ShapeMismatch(m));
        if self.d_h == 0 || self.d == 0 {
            return bad("d_h and d must be at least 1".into());
        }
        if (self.w1.rows, self.w1.cols) != (self.d_h, KEYPOINT_DIM) || self.w1.data.len() != self.d_h * KEYPOINT_DIM {
            return bad(format!("W1 is {}×{}, expected {}×{KEYPOINT_DIM}", self.w1.rows, self.w1.cols, self.d_h));
        }
        if (self.w2.rows, self.w2.cols) != (self.d, self.d_h) || self.w2.data.len() != self.d * self.d_h {
            return bad(format!("W2 is {}×{}, expected {}×{}", self.w2.rows, self.w2.cols, self.d, self.d_h));
        }
        if self.ln_gain.len() != KEYPOINT_DIM || self.ln_bias.len() != KEYPOINT_DIM {
            return bad("LayerNorm gain/bias must have length 63".into());
        }
        let finite = self.w1.is_finite()
            && self.w2.is_finite()
            && self.ln_gain.iter().chain(&self.ln_bias).all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> AdapterCheckpoint {
        AdapterCheckpoint {
            format_version: CHECKPOINT_VERSION,
            d_h: self.d_h,
            d: self.d,
            w1: self.w1.data.clone(),
            w2: self.w2.data.clone(),
            ln_gain: self.ln_gain.clone(),
            ln_bias: self.ln_bias.clone(),
            norm: self.norm,
        }
    }
}

/// On-disk form: row-major weights plus dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterCheckpoint {
    pub format_version: u32,
    pub d_h: usize,
    pub d: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    #[serde(default)]
    pub norm: KeypointNorm,
}

impl AdapterCheckpoint {
    pub fn into_params(self) -> Result<AdapterParams, KernelError> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(KernelError::Checkpoint(format!("unsupported format_version {}", self.format_version)));
        }
        let w1 =
            Matrix::from_rows(self.d_h, KEYPOINT_DIM, self.w1).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        let w2 = Matrix::from_rows(self.d, self.d_h, self.w2).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        let p = AdapterParams {
            d_h: self.d_h,
            d: self.d,
            w1,
            w2,
            ln_gain: self.ln_gain,
            ln_bias: self.ln_bias,
            norm: self.norm,
        };
        p.validate().map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        Ok(p)
    }
}

/// Present (`Some`) only when the gate was open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandIntentToken(pub Option<Vec<f64>>);

impl HandIntentToken {
    pub fn absent() -> Self {
        HandIntentToken(None)
    }

    pub fn is_present(&self) -> bool {
        self.0.is_some()
    }

    pub fn value(&self) -> Option<&[f64]> {
        self.0.as_deref()
    }
}

pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let (xhat, _) = normalize(x);
    xhat.iter().zip(gain).zip(bias).map(|((v, g), b)| v * g + b).collect()
}

/// `(x − μ)/s` and `s = sqrt(var + ε)`.
fn normalize(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let s = (var + LN_EPS).sqrt();
    (x.iter().map(|v| (v - mean) / s).collect(), s)
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Tanh-approximation GeLU.
#[inline]
pub fn gelu(z: f64) -> f64 {
    0.5 * z * (1.0 + (SQRT_2_OVER_PI * (z + GELU_COEF * z * z * z)).tanh())
}

#[inline]
pub fn gelu_grad(z: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (z + GELU_COEF * z * z * z)).tanh();
    0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_COEF * z * z)
}

pub fn flatten_keypoints(k: &[[f64; 3]]) -> Result<Vec<f64>, KernelError> {
    if k.len() != NUM_KEYPOINTS {
        return Err(KernelError::ShapeMismatch(format!("{} keypoints, expected {NUM_KEYPOINTS}", k.len())));
    }
    Ok(k.iter().flatten().copied().collect())
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AdapterTrace {
    xhat: Vec<f64>,
    s: f64,
    y: Vec<f64>,
    z: Vec<f64>,
    a: Vec<f64>,
    pub out: Vec<f64>,
}

fn preprocess(params: &AdapterParams, k: &[f64]) -> Result<Vec<f64>, KernelError> {
    if k.len() != KEYPOINT_DIM {
        return Err(KernelError::ShapeMismatch(format!("{} keypoint values, expected {KEYPOINT_DIM}", k.len())));
    }
    Ok(match params.norm {
        KeypointNorm::Raw => k.to_vec(),
        KeypointNorm::RootCentered => k.iter().enumerate().map(|(i, v)| v - k[i % 3]).collect(),
    })
}

/// Ungated forward pass with intermediates.
pub fn adapter_trace(params: &AdapterParams, k: &[f64]) -> Result<AdapterTrace, KernelError> {
    params.validate()?;
    let x = preprocess(params, k)?;
    let (xhat, s) = normalize(&x);
    let y: Vec<f64> = xhat.iter().zip(&params.ln_gain).zip(&params.ln_bias).map(|((v, g), b)| v * g + b).collect();
    let z = params.w1.matvec(&y);
    let a: Vec<f64> = z.iter().map(|v| gelu(*v)).collect();
    let out = params.w2.matvec(&a);
    Ok(AdapterTrace { xhat, s, y, z, a, out })
}

/// Gated adapter: a token when `c ≥ τ`, otherwise absent. `k` is the flattened
/// keypoint-major vector `(k0.x, k0.y, k0.z, k1.x, …)`.
pub fn adapter_forward(
    params: &AdapterParams,
    k: &[f64],
    confidence: f64,
    gate: &GateConfig,
) -> Result<HandIntentToken, KernelError> {
    params.validate()?;
    if k.len() != KEYPOINT_DIM {
        return Err(KernelError::ShapeMismatch(format!("{} keypoint values, expected {KEYPOINT_DIM}", k.len())));
    }
    if !gate.open(confidence) {
        return Ok(HandIntentToken::absent());
    }
    Ok(HandIntentToken(Some(adapter_trace(params, k)?.out)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrads {
    pub w1: Matrix,
    pub w2: Matrix,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub keypoints: Vec<f64>,
}

/// Gradients of `⟨grad_out, H⟩`; fails with `GateClosed` when no token exists.
pub fn adapter_backward(
    params: &AdapterParams,
    k: &[f64],
    confidence: f64,
    gate: &GateConfig,
    grad_out: &[f64],
) -> Result<AdapterGrads, KernelError> {
    if !gate.open(confidence) {
        return Err(KernelError::GateClosed { confidence, tau: gate.tau });
    }
    let trace = adapter_trace(params, k)?;
    backward_from_trace(params, &trace, grad_out)
}

pub fn backward_from_trace(
    params: &AdapterParams,
    t: &AdapterTrace,
    grad_out: &[f64],
) -> Result<AdapterGrads, KernelError> {
    if grad_out.len() != params.d {
        return Err(KernelError::ShapeMismatch(format!(
            "grad_out has {} entries, expected {}",
            grad_out.len(),
            params.d
        )));
    }
    let mut w2 = Matrix::zeros(params.d, params.d_h);
    w2.add_outer(1.0, grad_out, &t.a);
    let da = params.w2.matvec_t(grad_out);
    let dz: Vec<f64> = da.iter().zip(&t.z).map(|(g, z)| g * gelu_grad(*z)).collect();
    let mut w1 = Matrix::zeros(params.d_h, KEYPOINT_DIM);
    w1.add_outer(1.0, &dz, &t.y);
    let dy = params.w1.matvec_t(&dz);
    let ln_gain: Vec<f64> = dy.iter().zip(&t.xhat).map(|(g, x)| g * x).collect();
    let ln_bias = dy.clone();
    let dxhat: Vec<f64> = dy.iter().zip(&params.ln_gain).map(|(g, w)| g * w).collect();
    let n = KEYPOINT_DIM as f64;
    let m1 = dxhat.iter().sum::<f64>() / n;
    let m2 = dot(&dxhat, &t.xhat) / n;
    let dx: Vec<f64> = dxhat.iter().zip(&t.xhat).map(|(g, x)| (g - m1 - x * m2) / t.s).collect();
    let keypoints = match params.norm {
        KeypointNorm::Raw => dx,
        KeypointNorm::RootCentered => {
            let mut dk = dx.clone();
            for (i, g) in dx.iter().enumerate() {
                dk[i % 3] -= g;
            }
            dk
        }
    };
    Ok(AdapterGrads { w1, w2, ln_gain, ln_bias, keypoints })
}
