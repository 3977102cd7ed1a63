//! Joint communication-radar (JCR) design toolkit.
//!
//! A single phase-quantized transmit beamformer is circularly shifted from
//! frame to frame. The receiver sees one sample per frame of the 2D-DFT of
//! the masked Doppler-angle channel, which turns radar channel estimation
//! into a partial 2D-DFT compressed sensing problem.
//!
//! Modules, bottom-up:
//!
//! - [`spectral`]: unitary DFTs, circulant shifts, Zadoff-Chu sequences.
//! - [`beamformer`]: Gerchberg-Saxton design of the b-bit JCR beamformer and its gain mask.
//! - [`trajectory`]: sampling trajectories, point spread function and coherence.
//! - [`scene`]: sparse target scenes, channel assembly and noisy measurement synthesis.
//! - [`recovery`]: FFT-accelerated OMP, unmasking and NMSE.
//! - [`tradeoff`]: communication metrics, trade-off region, convex hull and weighted optimum.
//! - [`experiment`]: config ingestion and seeded Monte Carlo experiment runners.

pub mod beamformer;
pub mod experiment;
pub mod recovery;
pub mod scene;
pub mod seed;
pub mod spectral;
pub mod tradeoff;
pub mod trajectory;

pub use num_complex::Complex64 as C64;
