use serde::{Deserialize, Serialize};

use super::{BiasVector, Dims3, QuantError, QuantizedTensor, RequantParams, WeightTensor};

/// Kernel extent `K x R x S x C` (output channels, rows, cols, input channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelDims {
    pub k: usize,
    pub r: usize,
    pub s: usize,
    pub c: usize,
}

impl KernelDims {
    pub const fn new(k: usize, r: usize, s: usize, c: usize) -> Self {
        Self { k, r, s, c }
    }

    /// Multiply-accumulates per output element.
    pub const fn taps(&self) -> usize {
        self.r * self.s * self.c
    }
}

impl std::fmt::Display for KernelDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.k, self.r, self.s, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

/// Padding actually applied on each border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PadGeometry {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

/// Geometry and parameters of one quantized convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerSpec {
    pub input: Dims3,
    pub kernel: KernelDims,
    pub stride: usize,
    pub padding: Padding,
    pub z_in: i8,
    pub requant: RequantParams,
    pub bias: BiasVector,
}

impl ConvLayerSpec {
    /// Checks internal consistency. Zero-sized layers are rejected here so
    /// that nothing downstream has to map them.
    pub fn validate(&self) -> Result<(), QuantError> {
        let bad = |m: String| Err(QuantError::InvalidSpec(m));
        let KernelDims { k, r, s, c } = self.kernel;
        if self.input.is_empty() {
            return bad(format!("input {} has zero area", self.input));
        }
        if k == 0 || r == 0 || s == 0 || c == 0 {
            return bad(format!("kernel {} has a zero extent", self.kernel));
        }
        if self.stride == 0 {
            return bad("stride must be positive".into());
        }
        if c != self.input.c {
            return Err(QuantError::DimensionMismatch(format!(
                "kernel expects {c} input channels, input has {}",
                self.input.c
            )));
        }
        if self.padding == Padding::Valid && (r > self.input.h || s > self.input.w) {
            return bad(format!("kernel {r}x{s} larger than input {}x{}", self.input.h, self.input.w));
        }
        if self.bias.len() != k {
            return Err(QuantError::DimensionMismatch(format!(
                "{} bias values for {k} output channels",
                self.bias.len()
            )));
        }
        if self.requant.multipliers.len() != k {
            return Err(QuantError::DimensionMismatch(format!(
                "{} multipliers for {k} output channels",
                self.requant.multipliers.len()
            )));
        }
        self.requant.validate()
    }

    /// Border padding. `same` follows the usual convention: output size is
    /// `ceil(in / stride)` and any odd padding goes to the bottom/right.
    pub fn pads(&self) -> PadGeometry {
        match self.padding {
            Padding::Valid => PadGeometry::default(),
            Padding::Same => {
                let split = |size: usize, k: usize| {
                    let out = size.div_ceil(self.stride);
                    let total = ((out - 1) * self.stride + k).saturating_sub(size);
                    (total / 2, total - total / 2)
                };
                let (top, bottom) = split(self.input.h, self.kernel.r);
                let (left, right) = split(self.input.w, self.kernel.s);
                PadGeometry { top, left, bottom, right }
            }
        }
    }

    /// Input extent after padding, i.e. the buffer the input DMA walks.
    pub fn padded_input(&self) -> Dims3 {
        let p = self.pads();
        Dims3::new(self.input.h + p.top + p.bottom, self.input.w + p.left + p.right, self.input.c)
    }

    pub fn output_dims(&self) -> Dims3 {
        let p = self.padded_input();
        Dims3::new((p.h - self.kernel.r) / self.stride + 1, (p.w - self.kernel.s) / self.stride + 1, self.kernel.k)
    }

    /// Total multiply-accumulates, counting padding taps.
    pub fn macs(&self) -> u64 {
        let o = self.output_dims();
        (o.h * o.w * o.c) as u64 * self.kernel.taps() as u64
    }
}

/// 32-bit accumulators of a convolution before re-quantization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccTensor {
    dims: Dims3,
    data: Vec<i32>,
}

impl AccTensor {
    pub fn new(dims: Dims3, data: Vec<i32>) -> Result<Self, QuantError> {
        if data.len() != dims.len() {
            return Err(QuantError::DimensionMismatch(format!(
                "accumulator {dims} needs {} elements, got {}",
                dims.len(),
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, k: usize) -> i32 {
        self.data[self.dims.index(y, x, k)]
    }
}

/// Reference integer convolution with checked 32-bit accumulation.
///
/// `acc[y,x,k] = bias[k] + sum (in[y*stride+r-pad, x*stride+s-pad, c] - z_in) * w[k,r,s,c]`,
/// where taps landing in the padding contribute nothing.
pub fn conv2d_ref(
    input: &QuantizedTensor,
    weights: &WeightTensor,
    spec: &ConvLayerSpec,
) -> Result<AccTensor, QuantError> {
    spec.validate()?;
    if input.dims() != spec.input {
        return Err(QuantError::DimensionMismatch(format!(
            "input tensor {} does not match spec {}",
            input.dims(),
            spec.input
        )));
    }
    if input.zero_point() != spec.z_in {
        return Err(QuantError::DimensionMismatch(format!(
            "input zero-point {} does not match spec {}",
            input.zero_point(),
            spec.z_in
        )));
    }
    let KernelDims { k: kk, r: kr, s: ks, c: kc } = spec.kernel;
    if weights.dims() != (kk, kr, ks, kc) {
        return Err(QuantError::DimensionMismatch(format!(
            "weights {:?} do not match kernel {}",
            weights.dims(),
            spec.kernel
        )));
    }

    let out = spec.output_dims();
    let pads = spec.pads();
    let z_in = i32::from(spec.z_in);
    let mut data = Vec::with_capacity(out.len());
    for y in 0..out.h {
        for x in 0..out.w {
            for k in 0..kk {
                let overflow = || QuantError::AccumulatorOverflow { y, x, k };
                let mut acc = spec.bias.0[k];
                for r in 0..kr {
                    let Some(iy) = (y * spec.stride + r).checked_sub(pads.top) else { continue };
                    if iy >= spec.input.h {
                        continue;
                    }
                    for s in 0..ks {
                        let Some(ix) = (x * spec.stride + s).checked_sub(pads.left) else { continue };
                        if ix >= spec.input.w {
                            continue;
                        }
                        for c in 0..kc {
                            let a = i32::from(input.get(iy, ix, c)) - z_in;
                            let term = a.checked_mul(i32::from(weights.get(k, r, s, c))).ok_or_else(overflow)?;
                            acc = acc.checked_add(term).ok_or_else(overflow)?;
                        }
                    }
                }
                data.push(acc);
            }
        }
    }
    AccTensor::new(out, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtensor::Multiplier;

    fn spec(input: Dims3, kernel: KernelDims, stride: usize, padding: Padding) -> ConvLayerSpec {
        ConvLayerSpec {
            input,
            kernel,
            stride,
            padding,
            z_in: 0,
            requant: RequantParams::uniform(kernel.k, Multiplier::new(1 << 30, 0), 0),
            bias: BiasVector::zeros(kernel.k),
        }
    }

    #[test]
    fn identity_kernel_widens_input() {
        let dims = Dims3::new(3, 2, 1);
        let input = QuantizedTensor::new(dims, vec![-128, -1, 0, 1, 5, 127], 1.0, 0).unwrap();
        let w = WeightTensor::with_unit_scales((1, 1, 1, 1), vec![1]).unwrap();
        let acc = conv2d_ref(&input, &w, &spec(dims, KernelDims::new(1, 1, 1, 1), 1, Padding::Same)).unwrap();
        assert_eq!(acc.data(), &[-128, -1, 0, 1, 5, 127]);
    }

    #[test]
    fn all_ones_3x3_valid_gives_nine_c() {
        let dims = Dims3::new(5, 6, 1);
        let input = QuantizedTensor::filled(dims, 7, 1.0, 0).unwrap();
        let w = WeightTensor::with_unit_scales((1, 3, 3, 1), vec![1; 9]).unwrap();
        let acc = conv2d_ref(&input, &w, &spec(dims, KernelDims::new(1, 3, 3, 1), 1, Padding::Valid)).unwrap();
        assert_eq!(acc.dims(), Dims3::new(3, 4, 1));
        assert!(acc.data().iter().all(|&v| v == 63));
    }

    #[test]
    fn same_padding_preserves_spatial_dims() {
        for (h, w, r) in [(16, 16, 3), (7, 5, 3), (4, 4, 1), (9, 3, 5), (6, 6, 2)] {
            let s = spec(Dims3::new(h, w, 2), KernelDims::new(3, r, r, 2), 1, Padding::Same);
            assert_eq!(s.output_dims(), Dims3::new(h, w, 3));
        }
        let s = spec(Dims3::new(7, 8, 1), KernelDims::new(1, 3, 3, 1), 2, Padding::Same);
        assert_eq!(s.output_dims(), Dims3::new(4, 4, 1));
    }

    #[test]
    fn padding_taps_use_input_zero_point() {
        let dims = Dims3::new(2, 2, 1);
        let mut s = spec(dims, KernelDims::new(1, 3, 3, 1), 1, Padding::Same);
        s.z_in = 9;
        let input = QuantizedTensor::filled(dims, 9, 1.0, 9).unwrap();
        let w = WeightTensor::with_unit_scales((1, 3, 3, 1), vec![3; 9]).unwrap();
        let acc = conv2d_ref(&input, &w, &s).unwrap();
        assert!(acc.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn rejects_mismatches() {
        let dims = Dims3::new(4, 4, 2);
        let input = QuantizedTensor::filled(dims, 1, 1.0, 0).unwrap();
        let w = WeightTensor::with_unit_scales((1, 1, 1, 3), vec![1; 3]).unwrap();
        let s = spec(dims, KernelDims::new(1, 1, 1, 3), 1, Padding::Same);
        assert!(matches!(conv2d_ref(&input, &w, &s), Err(QuantError::DimensionMismatch(_))));

        let mut s = spec(dims, KernelDims::new(2, 1, 1, 2), 1, Padding::Same);
        s.bias = BiasVector::zeros(1);
        let w = WeightTensor::with_unit_scales((2, 1, 1, 2), vec![1; 4]).unwrap();
        assert!(conv2d_ref(&input, &w, &s).is_err());

        let s = spec(Dims3::new(0, 4, 2), KernelDims::new(2, 1, 1, 2), 1, Padding::Same);
        assert!(matches!(s.validate(), Err(QuantError::InvalidSpec(_))));
        let s = spec(dims, KernelDims::new(0, 1, 1, 2), 1, Padding::Same);
        assert!(s.validate().is_err());
    }

    #[test]
    fn overflow_is_an_error() {
        let dims = Dims3::new(1, 1, 1);
        let input = QuantizedTensor::filled(dims, 127, 1.0, 0).unwrap();
        let w = WeightTensor::with_unit_scales((1, 1, 1, 1), vec![127]).unwrap();
        let mut s = spec(dims, KernelDims::new(1, 1, 1, 1), 1, Padding::Valid);
        s.bias = BiasVector(vec![i32::MAX - 100]);
        assert_eq!(conv2d_ref(&input, &w, &s), Err(QuantError::AccumulatorOverflow { y: 0, x: 0, k: 0 }));
    }

    #[test]
    fn macs_counts_padding_taps() {
        let s = spec(Dims3::new(16, 16, 24), KernelDims::new(24, 3, 3, 24), 1, Padding::Same);
        assert_eq!(s.macs(), 16 * 16 * 24 * 216);
    }
}
