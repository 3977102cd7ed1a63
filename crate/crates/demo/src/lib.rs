//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations, each returning plain numeric arrays for canvas drawing:
//! a Gerchberg-Saxton beamformer and its beampattern, the PSF of a sampling
//! trajectory, and the radar/communication trade-off region.

use jcr_core::beamformer::{beampattern, gs_design, shifted_family, target_magnitude_profile};
use jcr_core::experiment::{self, ExperimentConfig, ExperimentKind, MaskChoice};
use jcr_core::tradeoff::{weighted_optimum, Normalization, Weights};
use jcr_core::trajectory::{analyze, optimized_trajectory, random_trajectory};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct BeamView {
    sin_theta: Vec<f64>,
    gain_db: Vec<f64>,
    dft_magnitudes: Vec<f64>,
    ideal_magnitudes: Vec<f64>,
    error: f64,
}

#[wasm_bindgen]
impl BeamView {
    #[wasm_bindgen(getter)]
    pub fn sin_theta(&self) -> Vec<f64> {
        self.sin_theta.clone()
    }

    /// `10 log10` of the normalized beampattern, floored at -40 dB.
    #[wasm_bindgen(getter)]
    pub fn gain_db(&self) -> Vec<f64> {
        self.gain_db.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn dft_magnitudes(&self) -> Vec<f64> {
        self.dft_magnitudes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ideal_magnitudes(&self) -> Vec<f64> {
        self.ideal_magnitudes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn error(&self) -> f64 {
        self.error
    }
}

/// Designs the `bits`-bit beamformer for `split`, circularly shifts it by
/// `shift` and samples its beampattern at `points` values of `sin(theta)`.
#[wasm_bindgen]
pub fn design_beam(
    antennas: usize,
    split: f64,
    bits: u32,
    iterations: usize,
    shift: usize,
    points: usize,
) -> Result<BeamView, String> {
    let profile = target_magnitude_profile(split, antennas).map_err(|e| e.to_string())?;
    let gs = gs_design(&profile, bits, iterations).map_err(|e| e.to_string())?;
    let f = shifted_family(&gs.beamformer, &[shift % antennas])
        .map_err(|e| e.to_string())?
        .remove(0);
    let points = points.max(2);
    let sin_theta: Vec<f64> = (0..points)
        .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
        .collect();
    let gain_db = beampattern(f.weights(), &sin_theta)
        .into_iter()
        .map(|g| 10.0 * g.max(1e-4).log10())
        .collect();
    Ok(BeamView {
        sin_theta,
        gain_db,
        dft_magnitudes: f.dft_magnitudes(),
        ideal_magnitudes: profile.magnitudes().to_vec(),
        error: gs.final_error(),
    })
}

#[wasm_bindgen]
pub struct PsfView {
    rows: usize,
    cols: usize,
    magnitudes: Vec<f64>,
    shifts: Vec<u32>,
    coherence: f64,
}

#[wasm_bindgen]
impl PsfView {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major `|PSF|`.
    #[wasm_bindgen(getter)]
    pub fn magnitudes(&self) -> Vec<f64> {
        self.magnitudes.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn shifts(&self) -> Vec<u32> {
        self.shifts.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn coherence(&self) -> f64 {
        self.coherence
    }
}

/// PSF of the optimized (`random = false`, prime `size`) or a random trajectory.
#[wasm_bindgen]
pub fn sampling_psf(size: usize, random: bool, seed: u32) -> Result<PsfView, String> {
    let t = if random {
        random_trajectory(size, size, seed as u64)
    } else {
        optimized_trajectory(size)
    }
    .map_err(|e| e.to_string())?;
    let a = analyze(&t);
    Ok(PsfView {
        rows: size,
        cols: size,
        magnitudes: a.psf.as_slice().iter().map(|z| z.norm()).collect(),
        shifts: t.shifts().iter().map(|&c| c as u32).collect(),
        coherence: a.coherence,
    })
}

#[wasm_bindgen]
pub struct TradeoffView {
    log_nmse: Vec<f64>,
    log_dmse: Vec<f64>,
    hull: Vec<u32>,
    chosen: u32,
    chosen_rho: u32,
    chosen_delta: f64,
}

#[wasm_bindgen]
impl TradeoffView {
    /// `log10` radar NMSE of every lattice point.
    #[wasm_bindgen(getter)]
    pub fn log_nmse(&self) -> Vec<f64> {
        self.log_nmse.clone()
    }

    /// `log2` effective DMSE of every lattice point.
    #[wasm_bindgen(getter)]
    pub fn log_dmse(&self) -> Vec<f64> {
        self.log_dmse.clone()
    }

    /// Hull vertices in order of increasing NMSE.
    #[wasm_bindgen(getter)]
    pub fn hull(&self) -> Vec<u32> {
        self.hull.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn chosen(&self) -> u32 {
        self.chosen
    }

    #[wasm_bindgen(getter)]
    pub fn chosen_rho(&self) -> u32 {
        self.chosen_rho
    }

    #[wasm_bindgen(getter)]
    pub fn chosen_delta(&self) -> f64 {
        self.chosen_delta
    }
}

/// Analytic trade-off region on the default `(rho, split)` lattice and the
/// weighted optimum for communication weight `comm_weight`.
#[wasm_bindgen]
pub fn tradeoff(
    size: usize,
    targets: usize,
    snr_db: f64,
    zeta_c_db: f64,
    comm_weight: f64,
    ideal_mask: bool,
) -> Result<TradeoffView, String> {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::ParetoSweep);
    cfg.frames = size;
    cfg.antennas = size;
    cfg.targets = vec![targets];
    cfg.snr_db = vec![snr_db];
    cfg.zeta_c_db = zeta_c_db;
    cfg.trials = 50;
    cfg.weights = vec![comm_weight];
    cfg.mask = if ideal_mask {
        MaskChoice::Ideal
    } else {
        MaskChoice::Designed
    };
    cfg.validate().map_err(|e| e.join("; "))?;
    let region = experiment::tradeoff_region(&cfg).map_err(|e| e.to_string())?;
    let pick = weighted_optimum(&region, Weights::comm_share(comm_weight), Normalization::MinMax)
        .map_err(|e| e.to_string())?;
    Ok(TradeoffView {
        log_nmse: region.points.iter().map(|p| p.log_nmse).collect(),
        log_dmse: region.points.iter().map(|p| p.log_dmse).collect(),
        hull: region.vertices().iter().map(|&i| i as u32).collect(),
        chosen: pick.index as u32,
        chosen_rho: pick.point.rho,
        chosen_delta: pick.point.delta,
    })
}
