//! Two-step urban-expansion prediction on raster time series.
//!
//! Step one segments multi-date imagery into urban masks with an
//! unsupervised differentiable-clustering network; step two feeds the
//! masks to a stacked ConvLSTM that predicts the next-date mask. The
//! crate also ships the surrounding machinery: a small differentiable
//! tensor core, binary-mask morphology, raster tiling and dataset
//! assembly, an evaluation suite (MSE/RMSE/PSNR/SSIM, confusion matrix,
//! accuracy, kappa), and a deterministic synthetic growth generator for
//! desk-scale benchmarks.
//!
//! Everything is seeded and bit-reproducible; the data-parallel paths
//! (enabled by the default `parallel` feature) produce results
//! identical to the sequential fallback.

pub mod convlstm;
pub mod exec;
pub mod maskops;
pub mod metrics;
pub mod pipeline;
pub mod segnet;
pub mod synth;
pub mod tensor;
