pub mod arch;
pub mod config;
pub mod dataflow;
pub mod dma;
pub mod layer_spec;
pub mod mapper;
pub mod memory;
pub mod orchestrator;
pub mod qtensor;
