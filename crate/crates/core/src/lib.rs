pub mod cascade;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod neuralnet;
pub mod plane;
pub mod wavelet;
