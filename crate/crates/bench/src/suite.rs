use xppsim::layer_spec::LayerFile;
use xppsim::orchestrator::LayerJob;
use xppsim::qtensor::{Dims3, KernelDims, Padding};

use crate::BenchError;

/// Published latencies for one layer, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedLatency {
    pub hpdp_ms: f64,
    pub gr740_ms: f64,
}

/// A layer shape as published: kernel `K x R x S x C` and image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub kernel: KernelDims,
    pub image: Dims3,
    pub latency: PublishedLatency,
}

pub const REFERENCE_LAYERS: [ReferenceRow; 4] = [
    ReferenceRow {
        kernel: KernelDims::new(24, 3, 3, 24),
        image: Dims3::new(194, 194, 24),
        latency: PublishedLatency { hpdp_ms: 121.27, gr740_ms: 23894.08 },
    },
    ReferenceRow {
        kernel: KernelDims::new(48, 3, 3, 48),
        image: Dims3::new(98, 98, 48),
        latency: PublishedLatency { hpdp_ms: 110.94, gr740_ms: 23731.64 },
    },
    ReferenceRow {
        kernel: KernelDims::new(96, 3, 3, 96),
        image: Dims3::new(50, 50, 96),
        latency: PublishedLatency { hpdp_ms: 104.84, gr740_ms: 11765.59 },
    },
    ReferenceRow {
        kernel: KernelDims::new(96, 1, 1, 96),
        image: Dims3::new(96, 96, 96),
        latency: PublishedLatency { hpdp_ms: 47.44, gr740_ms: 31320.04 },
    },
];

/// Default spatial crop for desk-scale runs.
pub const DESK_CROP: usize = 16;

/// How the published image size maps onto a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeConvention {
    /// The image is the input; `same` padding keeps the output that size.
    #[default]
    Input,
    /// The image is the output; the input is grown by `R-1` x `S-1` and
    /// convolved with `valid` padding.
    Output,
}

/// Spatial shrinking applied to a published image size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Crop to at most `n x n`.
    Crop(usize),
    /// Divide height and width by `n`, rounding up; `1` is the original size.
    Divide(usize),
}

impl Scale {
    pub fn apply(self, image: Dims3, kernel: KernelDims) -> Dims3 {
        let (h, w) = match self {
            Scale::Crop(n) => (image.h.min(n), image.w.min(n)),
            Scale::Divide(n) => (image.h.div_ceil(n.max(1)), image.w.div_ceil(n.max(1))),
        };
        Dims3::new(h.max(kernel.r), w.max(kernel.s), image.c)
    }

    /// Fraction of the original height simulated.
    pub fn factor(self, image: Dims3, kernel: KernelDims) -> f64 {
        self.apply(image, kernel).h as f64 / image.h as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub name: String,
    /// The layer actually simulated.
    pub layer: LayerFile,
    /// Ratio of simulated to published image height; 1.0 is full size.
    pub scale: f64,
    pub published: Option<PublishedLatency>,
}

impl BenchCase {
    pub fn job(&self) -> Result<LayerJob, BenchError> {
        let mut job =
            self.layer.to_job().map_err(|e| BenchError::Case { case: self.name.clone(), reason: e.to_string() })?;
        job.name = self.name.clone();
        Ok(job)
    }
}

/// Layer geometry for a published image under a size convention.
pub fn layer_for(kernel: KernelDims, image: Dims3, convention: SizeConvention, seed: u64) -> LayerFile {
    let mut f = LayerFile::geometry(image, kernel, seed);
    f.z_in = -5;
    f.z_out = 3;
    if convention == SizeConvention::Output {
        f.input = Dims3::new(image.h + kernel.r - 1, image.w + kernel.s - 1, image.c);
        f.padding = Padding::Valid;
    }
    f
}

/// The four published layers. Case `i` draws its data from `seed + i`.
pub fn table1_suite(scale: Scale, convention: SizeConvention, seed: u64) -> Vec<BenchCase> {
    REFERENCE_LAYERS
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let image = scale.apply(row.image, row.kernel);
            let mut layer = layer_for(row.kernel, image, convention, seed.wrapping_add(i as u64));
            let name = format!("{}", row.kernel);
            layer.name = Some(name.clone());
            BenchCase { name, layer, scale: scale.factor(row.image, row.kernel), published: Some(row.latency) }
        })
        .collect()
}

/// A user-supplied layer; its own seed is replaced by the suite seed.
pub fn case_from_file(layer: LayerFile, fallback_name: &str, seed: Option<u64>) -> BenchCase {
    let mut layer = layer;
    if let Some(s) = seed {
        layer.seed = s;
    }
    let name = layer.name.clone().unwrap_or_else(|| fallback_name.to_string());
    BenchCase { name, layer, scale: 1.0, published: None }
}
