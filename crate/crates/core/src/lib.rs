//! Pulse-Doppler gesture sensing core.
//!
//! Everything needed to go from scripted hand motion to a gesture label:
//!
//! - [`config`]: radar timing constants and the range/Doppler bin mathematics
//!   every other module derives from.
//! - [`gesture`]: point-scatterer kinematics for the five gesture classes and
//!   synthesis of complex channel-impulse-response (CIR) frames.
//! - [`dsp`]: slow-time FFT processing turning CIR frames into 9x49
//!   range-Doppler images (RDIs).
//! - [`restore`]: frame-drop modelling and band-limited sequence restoration
//!   via spectrum zero-padding, plus resampling-based data augmentation.
//! - [`segment`]: noise-vs-motion segmentation of mixed RDI streams and
//!   hysteresis filtering of streaming label predictions.
//! - [`nn`]: a small dependency-free neural-network engine (conv, pooling,
//!   batch norm, dropout, dense, LSTM cell) with backprop and gradient
//!   checking.
//! - [`models`]: the two gesture classifiers (a CNN+LSTM sequence model and a
//!   pure tiny CNN on stacked frames), dataset synthesis, training, and
//!   evaluation.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! additionally enables wall-clock timing in training reports and inference
//! latency measurement. IO, file formats, the CLI, and the threaded capture
//! pipeline live in the companion `rdgest-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod dsp;
pub mod error;
pub mod fft;
pub mod gesture;
pub mod models;
pub mod nn;
pub mod restore;
pub mod rng;
pub mod segment;

pub use config::RadarConfig;
pub use dsp::{CirFrame, Rdi};
pub use error::{Error, Result};
pub use gesture::{GestureLabel, GestureScript, Scatterer};
pub use restore::{FeatureSequence, RdiSequence};
pub use rng::SimRng;
