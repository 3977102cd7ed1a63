//! Sparse Doppler-angle scenes and circulant-shift measurements.
//!
//! Targets sit on the `M x N` Doppler-angle grid: Doppler bin `p` means
//! `nu T_D = p / M`, angle bin `q` means `sin(theta) = 2q / N`. The
//! Doppler-angle channel `H~` holds `h_k sqrt(MN)` at each target so that a
//! unit target produces unit-magnitude time-antenna entries in `H`.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::beamformer::{radar_split, Beamformer, BeamformerError, GainMask};
use crate::seed::{complex_gaussian, rng_from};
use crate::spectral::{dft2d, ComplexGrid, Direction};
use crate::trajectory::Trajectory;
use crate::C64;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene needs at least one target")]
    Empty,
    #[error("target bin ({doppler}, {angle}) is outside the {frames}x{antennas} grid")]
    OutOfGrid {
        doppler: usize,
        angle: usize,
        frames: usize,
        antennas: usize,
    },
    #[error("two targets share bin ({doppler}, {angle})")]
    DuplicateBin { doppler: usize, angle: usize },
    #[error("cannot place {targets} targets with separation {separation} on a {frames}x{antennas} grid")]
    Infeasible {
        targets: usize,
        separation: usize,
        frames: usize,
        antennas: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid SNR model: {0}")]
    InvalidSnr(String),
    #[error(transparent)]
    Beamformer(#[from] BeamformerError),
    #[error("scene file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub amplitude: C64,
    pub doppler_bin: usize,
    pub angle_bin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetScene {
    targets: Vec<Target>,
    frames: usize,
    antennas: usize,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>, frames: usize, antennas: usize) -> Result<Self, SceneError> {
        if targets.is_empty() {
            return Err(SceneError::Empty);
        }
        let mut seen = HashSet::new();
        for t in &targets {
            if t.doppler_bin >= frames || t.angle_bin >= antennas {
                return Err(SceneError::OutOfGrid {
                    doppler: t.doppler_bin,
                    angle: t.angle_bin,
                    frames,
                    antennas,
                });
            }
            if !seen.insert((t.doppler_bin, t.angle_bin)) {
                return Err(SceneError::DuplicateBin {
                    doppler: t.doppler_bin,
                    angle: t.angle_bin,
                });
            }
        }
        Ok(Self {
            targets,
            frames,
            antennas,
        })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Writes `doppler_bin,angle_bin,re,im` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "doppler_bin,angle_bin,re,im")?;
        for t in &self.targets {
            writeln!(
                w,
                "{},{},{:e},{:e}",
                t.doppler_bin, t.angle_bin, t.amplitude.re, t.amplitude.im
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, frames: usize, antennas: usize) -> Result<Self, SceneError> {
        let mut targets = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("doppler_bin")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(SceneError::Parse(format!(
                    "line {}: expected 4 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let bad = |e: &dyn std::fmt::Display| SceneError::Parse(format!("line {}: {e}", lineno + 1));
            targets.push(Target {
                doppler_bin: fields[0].parse().map_err(|e| bad(&e))?,
                angle_bin: fields[1].parse().map_err(|e| bad(&e))?,
                amplitude: C64::new(
                    fields[2].parse().map_err(|e| bad(&e))?,
                    fields[3].parse().map_err(|e| bad(&e))?,
                ),
            });
        }
        Self::new(targets, frames, antennas)
    }
}

/// SNR bookkeeping for one radar operating point (unit average target power).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrModel {
    /// SNR without preamble correlation gain and TX beamforming gain, dB.
    pub zeta_db: f64,
    /// Preamble length in building blocks.
    pub rho: u32,
    /// Symbols per building block.
    pub block_len: u32,
    pub split: f64,
    pub antennas: usize,
}

impl SnrModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.rho == 0 {
            return Err(SceneError::InvalidSnr("rho must be at least 1".into()));
        }
        if self.block_len == 0 {
            return Err(SceneError::InvalidSnr("block length must be at least 1".into()));
        }
        if self.antennas < 2 {
            return Err(SceneError::InvalidSnr("need at least 2 antennas".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(SceneError::InvalidSnr(format!(
                "split must lie in (0, 1) for radar sensing, got {}",
                self.split
            )));
        }
        if !self.zeta_db.is_finite() {
            return Err(SceneError::InvalidSnr("SNR must be finite".into()));
        }
        Ok(())
    }

    /// Builds the model whose net SNR equals `zeta_net_db`.
    pub fn from_net_db(zeta_net_db: f64, rho: u32, block_len: u32, split: f64, antennas: usize) -> Self {
        let gain = antennas as f64 * radar_split(split, antennas) * rho as f64 * block_len as f64;
        Self {
            zeta_db: zeta_net_db - 10.0 * gain.log10(),
            rho,
            block_len,
            split,
            antennas,
        }
    }

    pub fn zeta(&self) -> f64 {
        10f64.powf(self.zeta_db / 10.0)
    }

    /// RX array gain times integration gain, `N rho L_BLK`.
    pub fn gamma(&self) -> f64 {
        self.antennas as f64 * self.rho as f64 * self.block_len as f64
    }

    /// SNR including the preamble integration gain.
    pub fn zeta_p(&self) -> f64 {
        self.zeta() * self.rho as f64 * self.block_len as f64
    }

    /// SNR including the per-direction TX gain `N split_r`.
    pub fn zeta_net(&self) -> f64 {
        self.antennas as f64 * radar_split(self.split, self.antennas) * self.zeta_p()
    }

    pub fn zeta_net_db(&self) -> f64 {
        10.0 * self.zeta_net().log10()
    }

    /// Per-measurement noise variance, `N split_r / zeta_net`.
    pub fn noise_variance(&self) -> f64 {
        self.antennas as f64 * radar_split(self.split, self.antennas) / self.zeta_net()
    }
}

/// On-grid Doppler vector `d[m] = exp(-j 2 pi p m / M)`.
pub fn doppler_vector(doppler_bin: usize, frames: usize) -> Vec<C64> {
    (0..frames)
        .map(|m| {
            let r = (doppler_bin * m) % frames;
            C64::from_polar(1.0, -2.0 * std::f64::consts::PI * r as f64 / frames as f64)
        })
        .collect()
}

/// Sparse Doppler-angle channel `H~` with `h_k sqrt(MN)` at each target.
pub fn doppler_angle_channel(scene: &TargetScene) -> ComplexGrid {
    let (m, n) = (scene.frames, scene.antennas);
    let scale = ((m * n) as f64).sqrt();
    let mut ht = ComplexGrid::zeros(m, n).expect("scene dimensions are non-zero");
    for t in &scene.targets {
        ht.set(t.doppler_bin, t.angle_bin, t.amplitude * scale);
    }
    ht
}

/// Returns `(H, H~)` with `H = U_M H~ U_N`.
pub fn assemble_channel(scene: &TargetScene) -> Result<(ComplexGrid, ComplexGrid), SceneError> {
    // Re-check in case the scene was built field by field elsewhere.
    TargetScene::new(scene.targets.clone(), scene.frames, scene.antennas)?;
    let ht = doppler_angle_channel(scene);
    Ok((dft2d(&ht, Direction::Forward), ht))
}

/// `Z~ = H~ Lambda`: column `q` scaled by the mask entry `q`.
pub fn masked_matrix(ht: &ComplexGrid, mask: &GainMask) -> Result<ComplexGrid, SceneError> {
    if ht.cols() != mask.antennas() {
        return Err(SceneError::Dimension(format!(
            "channel has {} angle bins, mask has {}",
            ht.cols(),
            mask.antennas()
        )));
    }
    // GainMask construction already rejects zero entries.
    ComplexGrid::from_fn(ht.rows(), ht.cols(), |p, q| ht.get(p, q) * mask.get(q))
        .map_err(|e| SceneError::Dimension(e.to_string()))
}

/// `Z(m, c[m])` for every frame, with `Z = U_M Z~ U_N`.
pub fn grid_samples(zt: &ComplexGrid, trajectory: &Trajectory) -> Result<Vec<C64>, SceneError> {
    check_grid(zt.rows(), zt.cols(), trajectory)?;
    let z = dft2d(zt, Direction::Forward);
    Ok(trajectory
        .shifts()
        .iter()
        .enumerate()
        .map(|(m, &c)| z.get(m, c))
        .collect())
}

/// `e_m^T H f_m` for every frame: the beamforming path before any DFT algebra.
pub fn direct_samples(h: &ComplexGrid, precoders: &[Vec<C64>]) -> Result<Vec<C64>, SceneError> {
    if precoders.len() != h.rows() {
        return Err(SceneError::Dimension(format!(
            "{} precoders for {} frames",
            precoders.len(),
            h.rows()
        )));
    }
    precoders
        .iter()
        .enumerate()
        .map(|(m, f)| {
            if f.len() != h.cols() {
                return Err(SceneError::Dimension(format!(
                    "precoder {m} has {} weights, channel has {} antennas",
                    f.len(),
                    h.cols()
                )));
            }
            Ok(h.row(m).iter().zip(f).map(|(a, b)| a * b).sum())
        })
        .collect()
}

fn check_grid(rows: usize, cols: usize, trajectory: &Trajectory) -> Result<(), SceneError> {
    if rows != trajectory.frames() || cols != trajectory.antennas() {
        return Err(SceneError::Dimension(format!(
            "grid is {rows}x{cols}, trajectory is {}x{}",
            trajectory.frames(),
            trajectory.antennas()
        )));
    }
    Ok(())
}

/// Noisy circulant-shift measurements of one CPI.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub values: Vec<C64>,
    pub trajectory: Trajectory,
    pub mask: GainMask,
    pub noise_variance: f64,
}

/// Samples `Z(m, c[m])` and adds circular Gaussian noise of variance `snr.noise_variance()`.
pub fn synthesize(
    scene: &TargetScene,
    beamformer: &Beamformer,
    mask: &GainMask,
    trajectory: &Trajectory,
    snr: &SnrModel,
    seed: u64,
) -> Result<MeasurementSet, SceneError> {
    snr.validate()?;
    let noise_variance = snr.noise_variance();
    synthesize_with_noise(scene, beamformer, mask, trajectory, noise_variance, seed)
}

/// As [`synthesize`] with an explicit per-sample noise variance (0 for noiseless).
pub fn synthesize_with_noise(
    scene: &TargetScene,
    beamformer: &Beamformer,
    mask: &GainMask,
    trajectory: &Trajectory,
    noise_variance: f64,
    seed: u64,
) -> Result<MeasurementSet, SceneError> {
    if beamformer.antennas() != scene.antennas || mask.antennas() != scene.antennas {
        return Err(SceneError::Dimension(format!(
            "beamformer/mask size {}/{} vs scene antennas {}",
            beamformer.antennas(),
            mask.antennas(),
            scene.antennas
        )));
    }
    check_grid(scene.frames, scene.antennas, trajectory)?;
    let ht = doppler_angle_channel(scene);
    let zt = masked_matrix(&ht, mask)?;
    let mut values = grid_samples(&zt, trajectory)?;
    add_noise(&mut values, noise_variance, seed);
    Ok(MeasurementSet {
        values,
        trajectory: trajectory.clone(),
        mask: mask.clone(),
        noise_variance,
    })
}

pub fn add_noise(values: &mut [C64], noise_variance: f64, seed: u64) {
    if noise_variance > 0.0 {
        let mut rng = rng_from(seed, &[0x6e6f_6973]);
        for v in values.iter_mut() {
            *v += complex_gaussian(&mut rng, noise_variance);
        }
    }
}

/// Random on-grid scene with unit average target power.
///
/// Bins are distinct and at least `min_separation` apart in circular
/// Chebyshev distance (`0` or `1` only asks for distinct bins).
pub fn random_scene(
    targets: usize,
    frames: usize,
    antennas: usize,
    seed: u64,
    min_separation: usize,
) -> Result<TargetScene, SceneError> {
    let cells = frames * antennas;
    let infeasible = || SceneError::Infeasible {
        targets,
        separation: min_separation,
        frames,
        antennas,
    };
    if targets == 0 {
        return Err(SceneError::Empty);
    }
    if targets > cells {
        return Err(infeasible());
    }
    let mut rng = rng_from(seed, &[0x7363_656e]);
    let bins: Vec<(usize, usize)> = if min_separation <= 1 {
        rand::seq::index::sample(&mut rng, cells, targets)
            .into_iter()
            .map(|i| (i / antennas, i % antennas))
            .collect()
    } else {
        let circ = |a: usize, b: usize, len: usize| {
            let d = a.abs_diff(b);
            d.min(len - d)
        };
        let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(targets);
        let mut attempts = 0usize;
        while chosen.len() < targets {
            attempts += 1;
            if attempts > 1000 * targets + 10_000 {
                return Err(infeasible());
            }
            let cand = (rng.random_range(0..frames), rng.random_range(0..antennas));
            let ok = chosen
                .iter()
                .all(|&(p, q)| circ(p, cand.0, frames).max(circ(q, cand.1, antennas)) >= min_separation);
            if ok {
                chosen.push(cand);
            }
        }
        chosen
    };
    let mut amplitudes: Vec<C64> = (0..targets).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let power = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / targets as f64;
    let scale = if power > 0.0 { 1.0 / power.sqrt() } else { 1.0 };
    for a in amplitudes.iter_mut() {
        *a *= scale;
    }
    let list = bins
        .into_iter()
        .zip(amplitudes)
        .map(|((p, q), amplitude)| Target {
            amplitude,
            doppler_bin: p,
            angle_bin: q,
        })
        .collect();
    TargetScene::new(list, frames, antennas)
}
