//! Host-side memory spaces the DMA engines read from and write to.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::dma::{Dma4dDescriptor, DmaError};

/// Named host buffers addressed by stream and preload descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MemSpace {
    /// Padded input activations.
    Act,
    /// Weights, `(K, R, S, C)`.
    Wgt,
    /// Per-channel bias.
    Bias,
    /// Output feature map, `(H, W, K)`.
    Out,
}

impl MemSpace {
    pub fn name(self) -> &'static str {
        match self {
            MemSpace::Act => "act",
            MemSpace::Wgt => "wgt",
            MemSpace::Bias => "bias",
            MemSpace::Out => "out",
        }
    }
}

impl fmt::Display for MemSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MemSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "act" => Ok(MemSpace::Act),
            "wgt" => Ok(MemSpace::Wgt),
            "bias" => Ok(MemSpace::Bias),
            "out" => Ok(MemSpace::Out),
            _ => Err(format!("unknown memory space `{s}`")),
        }
    }
}

/// A descriptor bound to the memory space it walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpacedDma {
    pub space: MemSpace,
    pub desc: Dma4dDescriptor,
}

impl fmt::Display for SpacedDma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // "dma <space> base=..."
        let d = self.desc.to_string();
        write!(f, "dma {} {}", self.space, &d["dma ".len()..])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("memory space `{0}` is not allocated")]
    MissingSpace(MemSpace),
    #[error("{space}: {source}")]
    Dma { space: MemSpace, source: DmaError },
    #[error("{space}: descriptor walks {expected} words but {got} values were supplied")]
    LengthMismatch { space: MemSpace, expected: u64, got: usize },
}

/// Word-addressed host buffers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HostMemory {
    spaces: BTreeMap<MemSpace, Vec<i32>>,
}

impl HostMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, space: MemSpace, words: Vec<i32>) {
        self.spaces.insert(space, words);
    }

    pub fn get(&self, space: MemSpace) -> Option<&[i32]> {
        self.spaces.get(&space).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, space: MemSpace) -> Option<&mut Vec<i32>> {
        self.spaces.get_mut(&space)
    }

    /// Read the words a descriptor walks, in stream order.
    pub fn gather(&self, dma: &SpacedDma) -> Result<Vec<i32>, MemoryError> {
        let buf = self.get(dma.space).ok_or(MemoryError::MissingSpace(dma.space))?;
        let region = 0..buf.len() as u64;
        dma.desc
            .addresses(region)
            .map(|a| a.map(|a| buf[a as usize]).map_err(|source| MemoryError::Dma { space: dma.space, source }))
            .collect()
    }

    /// Write `values` to the addresses a descriptor walks.
    pub fn scatter(&mut self, dma: &SpacedDma, values: &[i32]) -> Result<(), MemoryError> {
        let space = dma.space;
        if dma.desc.len() != values.len() as u64 {
            return Err(MemoryError::LengthMismatch { space, expected: dma.desc.len(), got: values.len() });
        }
        let buf = self.spaces.get_mut(&space).ok_or(MemoryError::MissingSpace(space))?;
        let region = 0..buf.len() as u64;
        dma.desc.validate(&region).map_err(|source| MemoryError::Dma { space, source })?;
        for (addr, &v) in dma.desc.raw_addresses().zip(values) {
            buf[addr as usize] = v;
        }
        Ok(())
    }
}
