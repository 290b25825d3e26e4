//! Streaming speech enhancement with TCN mask estimators.
//!
//! Two model families share one separation network: a fully learned linear
//! encoder/decoder pair, and a fixed Fourier front end whose masks act on
//! stacked real/imaginary spectrograms. Per-layer causality control turns
//! either into a low-latency streaming system; the [`streaming`] module runs
//! 1-frame-in-1-frame-out inference, accounts for look-ahead, and can probe
//! the true future dependence empirically. The [`loss`] module provides the
//! four training objectives as measurements (with analytic gradients checked
//! against finite differences) plus SI-SNR and segmental-SNR metrics.
//!
//! Everything is deterministic: weights come from a seeded initializer or a
//! binary container, and batch and streaming inference produce identical
//! samples.

pub mod dsp;
pub mod io;
pub mod loss;
pub mod mat;
pub mod model;
pub mod rng;
pub mod signal;
pub mod streaming;
pub mod tcn;

pub use signal::AudioSignal;
