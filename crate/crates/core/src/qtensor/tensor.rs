use serde::{Deserialize, Serialize};

use super::QuantError;

/// Spatial/channel extent of a channel-last tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims3 {
    pub const fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub const fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major `(y, x, c)` offset.
    #[inline]
    pub const fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.w + x) * self.c + c
    }

    /// Inverse of [`Dims3::index`].
    pub const fn coords(&self, index: usize) -> (usize, usize, usize) {
        let c = index % self.c;
        let pix = index / self.c;
        (pix / self.w, pix % self.w, c)
    }
}

impl std::fmt::Display for Dims3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

fn check_scale(scale: f64) -> Result<(), QuantError> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(QuantError::InvalidScale(scale))
    }
}

/// An int8 activation tensor with per-tensor affine quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    dims: Dims3,
    data: Vec<i8>,
    scale: f64,
    zero_point: i8,
}

impl QuantizedTensor {
    pub fn new(dims: Dims3, data: Vec<i8>, scale: f64, zero_point: i8) -> Result<Self, QuantError> {
        check_scale(scale)?;
        if data.len() != dims.len() {
            return Err(QuantError::DimensionMismatch(format!(
                "tensor {dims} needs {} elements, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(Self { dims, data, scale, zero_point })
    }

    /// A tensor with every element equal to `value`.
    pub fn filled(dims: Dims3, value: i8, scale: f64, zero_point: i8) -> Result<Self, QuantError> {
        Self::new(dims, vec![value; dims.len()], scale, zero_point)
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i8] {
        &mut self.data
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn zero_point(&self) -> i8 {
        self.zero_point
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> i8 {
        self.data[self.dims.index(y, x, c)]
    }
}

/// Quantize real values: `q = clamp(round(v / scale) + zero_point, -128, 127)`
/// with round-half-away-from-zero.
pub fn quantize(dims: Dims3, values: &[f64], scale: f64, zero_point: i8) -> Result<QuantizedTensor, QuantError> {
    check_scale(scale)?;
    let data = values
        .iter()
        .map(|&v| {
            let q = (v / scale).round() + f64::from(zero_point);
            q.clamp(-128.0, 127.0) as i8
        })
        .collect();
    QuantizedTensor::new(dims, data, scale, zero_point)
}

/// `v = scale * (q - zero_point)` for every element.
pub fn dequantize(t: &QuantizedTensor) -> Vec<f64> {
    let z = i32::from(t.zero_point);
    t.data.iter().map(|&q| t.scale * f64::from(i32::from(q) - z)).collect()
}

/// Kernel weights in `(K, R, S, C)` order, symmetric per-output-channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    k: usize,
    r: usize,
    s: usize,
    c: usize,
    data: Vec<i8>,
    scales: Vec<f64>,
}

impl WeightTensor {
    /// The zero-point of every weight channel.
    pub const ZERO_POINT: i8 = 0;

    pub fn new(
        (k, r, s, c): (usize, usize, usize, usize),
        data: Vec<i8>,
        scales: Vec<f64>,
    ) -> Result<Self, QuantError> {
        if data.len() != k * r * s * c {
            return Err(QuantError::DimensionMismatch(format!(
                "weights {k}x{r}x{s}x{c} need {} elements, got {}",
                k * r * s * c,
                data.len()
            )));
        }
        if scales.len() != k {
            return Err(QuantError::DimensionMismatch(format!(
                "expected {k} per-channel scales, got {}",
                scales.len()
            )));
        }
        for &sc in &scales {
            check_scale(sc)?;
        }
        Ok(Self { k, r, s, c, data, scales })
    }

    /// Unit per-channel scales.
    pub fn with_unit_scales(dims: (usize, usize, usize, usize), data: Vec<i8>) -> Result<Self, QuantError> {
        Self::new(dims, data, vec![1.0; dims.0])
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.k, self.r, self.s, self.c)
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i8] {
        &mut self.data
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    #[inline]
    pub fn get(&self, k: usize, r: usize, s: usize, c: usize) -> i8 {
        self.data[((k * self.r + r) * self.s + s) * self.c + c]
    }

    /// The `R*S*C` weights of one output channel, in consumption order.
    pub fn channel(&self, k: usize) -> &[i8] {
        let n = self.r * self.s * self.c;
        &self.data[k * n..(k + 1) * n]
    }
}

/// Per-output-channel int32 bias.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BiasVector(pub Vec<i32>);

impl BiasVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
