//! Layer-spec JSON files and seeded synthesis of missing tensors.
//!
//! The schema lives in `docs/layer-spec.schema.json`. Anything a file leaves
//! out (weights, bias, activations) is drawn from a ChaCha8 stream seeded
//! with `seed`, in that order, so a file with only geometry and a seed
//! describes one fixed layer. Missing multipliers come from
//! [`default_requant`].

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::orchestrator::{LayerJob, Routing};
use crate::qtensor::{
    compute_requant_params, BiasVector, ConvLayerSpec, Dims3, KernelDims, Multiplier, Padding, QuantError,
    QuantizedTensor, RequantParams, WeightTensor,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayerSpecError {
    #[error("invalid layer-spec JSON: {0}")]
    Json(String),
    #[error("field `{field}`: invalid base64: {reason}")]
    Base64 { field: &'static str, reason: String },
    #[error("field `{field}`: expected {expected} values, got {got}")]
    Length { field: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Quant(#[from] QuantError),
}

/// int8 payload, either base64 of the raw bytes or a plain array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Int8Data {
    Base64(String),
    Inline(Vec<i8>),
}

impl Int8Data {
    pub fn decode(&self, field: &'static str) -> Result<Vec<i8>, LayerSpecError> {
        match self {
            Int8Data::Inline(v) => Ok(v.clone()),
            Int8Data::Base64(s) => base64::engine::general_purpose::STANDARD
                .decode(s)
                .map(|b| b.into_iter().map(|x| x as i8).collect())
                .map_err(|e| LayerSpecError::Base64 { field, reason: e.to_string() }),
        }
    }

    pub fn encode(data: &[i8]) -> Self {
        let bytes: Vec<u8> = data.iter().map(|&x| x as u8).collect();
        Int8Data::Base64(base64::engine::general_purpose::STANDARD.encode(bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub input: Dims3,
    pub kernel: KernelDims,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "same")]
    pub padding: Padding,
    #[serde(default)]
    pub z_in: i8,
    #[serde(default)]
    pub z_out: i8,
    /// One entry per output channel, or a single entry for all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multipliers: Vec<Multiplier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<i32>>,
    /// `(K, R, S, C)` order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Int8Data>,
    /// `(H, W, C)` order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Int8Data>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub routing: Routing,
}

fn one() -> usize {
    1
}

fn same() -> Padding {
    Padding::Same
}

impl LayerFile {
    pub fn geometry(input: Dims3, kernel: KernelDims, seed: u64) -> Self {
        Self {
            name: None,
            input,
            kernel,
            stride: 1,
            padding: Padding::Same,
            z_in: 0,
            z_out: 0,
            multipliers: Vec::new(),
            bias: None,
            weights: None,
            activations: None,
            seed,
            routing: Routing::ToHost,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LayerSpecError> {
        serde_json::from_str(text).map_err(|e| LayerSpecError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layer file serializes")
    }

    /// Build a job, synthesizing whatever the file leaves out.
    pub fn to_job(&self) -> Result<LayerJob, LayerSpecError> {
        let k = self.kernel;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let weights = match &self.weights {
            Some(w) => check_len("weights", w.decode("weights")?, k.k * k.r * k.s * k.c)?,
            None => random_i8(&mut rng, k.k * k.r * k.s * k.c),
        };
        let bias = match &self.bias {
            Some(b) => check_len("bias", b.clone(), k.k)?,
            None => (0..k.k).map(|_| rng.gen_range(-4096..=4096)).collect(),
        };
        let acts = match &self.activations {
            Some(a) => check_len("activations", a.decode("activations")?, self.input.len())?,
            None => random_i8(&mut rng, self.input.len()),
        };
        let multipliers = match self.multipliers.len() {
            0 => default_requant(k.taps(), k.k, self.z_out)?.multipliers,
            1 => vec![self.multipliers[0]; k.k],
            _ => check_len("multipliers", self.multipliers.clone(), k.k)?,
        };
        let spec = ConvLayerSpec {
            input: self.input,
            kernel: k,
            stride: self.stride,
            padding: self.padding,
            z_in: self.z_in,
            requant: RequantParams::new(multipliers, self.z_out),
            bias: BiasVector(bias),
        };
        spec.validate()?;
        let weights = WeightTensor::with_unit_scales((k.k, k.r, k.s, k.c), weights)?;
        let input = QuantizedTensor::new(self.input, acts, 1.0, self.z_in)?;
        let mut job = LayerJob::new(self.name.clone().unwrap_or_else(|| format!("conv_{k}")), spec, weights, input);
        job.routing = self.routing;
        Ok(job)
    }
}

fn check_len<T>(field: &'static str, v: Vec<T>, expected: usize) -> Result<Vec<T>, LayerSpecError> {
    if v.len() == expected {
        Ok(v)
    } else {
        Err(LayerSpecError::Length { field, expected, got: v.len() })
    }
}

pub fn random_i8(rng: &mut impl Rng, n: usize) -> Vec<i8> {
    (0..n).map(|_| rng.gen::<i8>()).collect()
}

/// Multipliers that keep uniformly random int8 data inside the output range
/// most of the time: the accumulator's standard deviation is about
/// `74 * 74 * sqrt(taps)`, scaled here to 32.
pub fn default_requant(taps: usize, k: usize, z_out: i8) -> Result<RequantParams, QuantError> {
    let m = 32.0 / (74.0 * 74.0 * (taps as f64).sqrt());
    compute_requant_params(m.min(0.99), &vec![1.0; k], 1.0, z_out)
}
