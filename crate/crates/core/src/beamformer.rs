//! Phase-quantized JCR transmit beamformer.
//!
//! The beamformer puts a fraction `split` of its discrete beampattern energy
//! on DFT bin 0 (the communication direction) and spreads the rest evenly
//! over the other `N - 1` bins. Weights are constrained to `b`-bit phases
//! with magnitude `1/sqrt(N)`, so the design is solved by Gerchberg-Saxton
//! alternating projections between the beampattern-magnitude set and the
//! quantized-phase set.

use std::f64::consts::PI;

use thiserror::Error;

use crate::spectral::{circulant_shift, unitary_dft, zadoff_chu, DftPlan, Direction};
use crate::C64;

pub const DEFAULT_BITS: u32 = 4;
pub const DEFAULT_GS_ITERATIONS: usize = 100;
pub const MAX_BITS: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformerError {
    #[error("split must lie in (0, 1], got {0}")]
    InvalidSplit(f64),
    #[error("at least {min} antennas are required, got {got}")]
    TooFewAntennas { min: usize, got: usize },
    #[error("phase resolution must be 1..={MAX_BITS} bits, got {0}")]
    InvalidBits(u32),
    #[error("Gerchberg-Saxton needs at least one iteration")]
    NoIterations,
    #[error("magnitude profile is invalid: {0}")]
    InvalidProfile(String),
    #[error("circulant shift {shift} is outside 0..{antennas}")]
    ShiftOutOfRange { shift: usize, antennas: usize },
    #[error(
        "degenerate design: gain mask entry {bin} is zero, the target at that angle bin is unobservable"
    )]
    DegenerateDesign { bin: usize },
}

/// The `b`-bit phase alphabet `exp(j 2 pi n / 2^b) / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseAlphabet {
    bits: u32,
    antennas: usize,
}

impl PhaseAlphabet {
    pub fn new(bits: u32, antennas: usize) -> Result<Self, BeamformerError> {
        if bits == 0 || bits > MAX_BITS {
            return Err(BeamformerError::InvalidBits(bits));
        }
        if antennas == 0 {
            return Err(BeamformerError::TooFewAntennas { min: 1, got: 0 });
        }
        Ok(Self { bits, antennas })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    /// Nearest phase index; exact midpoints go to the lower phase.
    pub fn quantize(&self, phase: f64) -> u32 {
        let levels = self.levels() as f64;
        let x = (phase / (2.0 * PI) * levels).rem_euclid(levels);
        let idx = (x - 0.5).ceil();
        (idx as i64).rem_euclid(self.levels() as i64) as u32
    }

    pub fn phase(&self, index: u32) -> f64 {
        2.0 * PI * (index % self.levels()) as f64 / self.levels() as f64
    }

    pub fn weight(&self, index: u32) -> C64 {
        C64::from_polar(1.0 / (self.antennas as f64).sqrt(), self.phase(index))
    }
}

/// Target DFT magnitudes of the JCR beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamProfile {
    split: f64,
    magnitudes: Vec<f64>,
}

impl BeamProfile {
    /// Wraps an arbitrary non-negative unit-energy magnitude vector.
    pub fn from_magnitudes(magnitudes: Vec<f64>) -> Result<Self, BeamformerError> {
        if magnitudes.len() < 2 {
            return Err(BeamformerError::TooFewAntennas {
                min: 2,
                got: magnitudes.len(),
            });
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(BeamformerError::InvalidProfile(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        let energy: f64 = magnitudes.iter().map(|m| m * m).sum();
        if (energy - 1.0).abs() > 1e-9 {
            return Err(BeamformerError::InvalidProfile(format!(
                "energy is {energy}, expected 1"
            )));
        }
        Ok(Self {
            split: magnitudes[0] * magnitudes[0],
            magnitudes,
        })
    }

    pub fn split(&self) -> f64 {
        self.split
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn antennas(&self) -> usize {
        self.magnitudes.len()
    }
}

/// Energy per sensing bin, `(1 - split) / (N - 1)`.
pub fn radar_split(split: f64, antennas: usize) -> f64 {
    (1.0 - split) / (antennas as f64 - 1.0)
}

/// `[sqrt(split), sqrt(split_r), ..., sqrt(split_r)]` with `split_r = (1 - split)/(N - 1)`.
pub fn target_magnitude_profile(split: f64, antennas: usize) -> Result<BeamProfile, BeamformerError> {
    if !(split > 0.0 && split <= 1.0) {
        return Err(BeamformerError::InvalidSplit(split));
    }
    if antennas < 2 {
        return Err(BeamformerError::TooFewAntennas {
            min: 2,
            got: antennas,
        });
    }
    let rest = radar_split(split, antennas).sqrt();
    let mut magnitudes = vec![rest; antennas];
    magnitudes[0] = split.sqrt();
    Ok(BeamProfile { split, magnitudes })
}

/// A transmit beamformer whose weights all lie on the `b`-bit alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    alphabet: PhaseAlphabet,
    phase_indices: Vec<u32>,
    weights: Vec<C64>,
    split: f64,
}

impl Beamformer {
    pub fn from_phase_indices(
        alphabet: PhaseAlphabet,
        phase_indices: Vec<u32>,
        split: f64,
    ) -> Result<Self, BeamformerError> {
        if phase_indices.len() != alphabet.antennas {
            return Err(BeamformerError::TooFewAntennas {
                min: alphabet.antennas,
                got: phase_indices.len(),
            });
        }
        if !(split > 0.0 && split <= 1.0) {
            return Err(BeamformerError::InvalidSplit(split));
        }
        let phase_indices: Vec<u32> = phase_indices.into_iter().map(|i| i % alphabet.levels()).collect();
        let weights = phase_indices.iter().map(|&i| alphabet.weight(i)).collect();
        Ok(Self {
            alphabet,
            phase_indices,
            weights,
            split,
        })
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn phase_indices(&self) -> &[u32] {
        &self.phase_indices
    }

    pub fn alphabet(&self) -> PhaseAlphabet {
        self.alphabet
    }

    pub fn bits(&self) -> u32 {
        self.alphabet.bits
    }

    pub fn antennas(&self) -> usize {
        self.weights.len()
    }

    pub fn split(&self) -> f64 {
        self.split
    }

    /// DFT index of the communication direction. Other directions are reached with [`steer`].
    pub fn comm_bin(&self) -> usize {
        0
    }

    /// Discrete beampattern `|U_N f|`.
    pub fn dft_magnitudes(&self) -> Vec<f64> {
        unitary_dft(&self.weights, Direction::Forward)
            .expect("beamformer is never empty")
            .iter()
            .map(|z| z.norm())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GsOutcome {
    pub beamformer: Beamformer,
    /// Beampattern error `|| |U_N f| - profile ||` after each iteration.
    pub error_trace: Vec<f64>,
}

impl GsOutcome {
    pub fn final_error(&self) -> f64 {
        *self.error_trace.last().expect("at least one iteration")
    }

    pub fn best_error(&self) -> f64 {
        self.error_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn profile_error(spectrum: &[C64], profile: &[f64]) -> f64 {
    spectrum
        .iter()
        .zip(profile)
        .map(|(z, &m)| (z.norm() - m).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Gerchberg-Saxton synthesis of the `b`-bit beamformer matching `profile`.
///
/// Starts from the root-1 Zadoff-Chu sequence and runs `iterations` passes of
/// (i) imposing the target DFT magnitudes while keeping DFT phases and
/// (ii) quantizing the element phases with magnitude `1/sqrt(N)`.
/// The last iterate is returned.
pub fn gs_design(profile: &BeamProfile, bits: u32, iterations: usize) -> Result<GsOutcome, BeamformerError> {
    if iterations == 0 {
        return Err(BeamformerError::NoIterations);
    }
    let n = profile.antennas();
    let alphabet = PhaseAlphabet::new(bits, n)?;
    let plan = DftPlan::new(n).expect("profile has at least two entries");
    let scale = 1.0 / (n as f64).sqrt();

    let mut f: Vec<C64> = zadoff_chu(n, 1)
        .expect("root 1 is coprime with every length")
        .into_entries()
        .into_iter()
        .map(|z| z * scale)
        .collect();
    let mut indices = vec![0u32; n];
    let mut error_trace = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        let mut spectrum = plan.apply(&f, Direction::Forward);
        for (z, &mag) in spectrum.iter_mut().zip(profile.magnitudes()) {
            let phase = if z.norm() > 0.0 { z.arg() } else { 0.0 };
            *z = C64::from_polar(mag, phase);
        }
        plan.process(&mut spectrum, Direction::Inverse);
        for (i, z) in spectrum.iter().enumerate() {
            indices[i] = alphabet.quantize(z.arg());
            f[i] = alphabet.weight(indices[i]);
        }
        error_trace.push(profile_error(
            &plan.apply(&f, Direction::Forward),
            profile.magnitudes(),
        ));
    }

    let beamformer = Beamformer::from_phase_indices(alphabet, indices, profile.split())?;
    Ok(GsOutcome {
        beamformer,
        error_trace,
    })
}

/// Quantizes the phases of the zero-phase inverse DFT of `profile`: the naive design.
pub fn quantized_idft_baseline(
    profile: &BeamProfile,
    bits: u32,
) -> Result<(Beamformer, f64), BeamformerError> {
    let n = profile.antennas();
    let alphabet = PhaseAlphabet::new(bits, n)?;
    let spectrum: Vec<C64> = profile.magnitudes().iter().map(|&m| C64::new(m, 0.0)).collect();
    let raw = unitary_dft(&spectrum, Direction::Inverse).expect("non-empty profile");
    let indices = raw.iter().map(|z| alphabet.quantize(z.arg())).collect();
    let bf = Beamformer::from_phase_indices(alphabet, indices, profile.split())?;
    let err = profile_error(
        &unitary_dft(bf.weights(), Direction::Forward).expect("non-empty"),
        profile.magnitudes(),
    );
    Ok((bf, err))
}

/// Half-wavelength ULA steering vector `[1, e^{j pi sin(theta)}, ..., e^{j (N-1) pi sin(theta)}]`.
pub fn steering_vector(antennas: usize, theta: f64) -> Vec<C64> {
    let s = theta.sin();
    (0..antennas)
        .map(|n| C64::from_polar(1.0, PI * n as f64 * s))
        .collect()
}

/// Points the communication beam of `f` at `theta` (radians from broadside).
pub fn steer(f: &Beamformer, theta: f64) -> Vec<C64> {
    f.weights()
        .iter()
        .zip(steering_vector(f.antennas(), theta))
        .map(|(w, a)| w * a)
        .collect()
}

/// Radiated power `|a(theta)^* w|^2 / N` at each `sin(theta)` sample.
///
/// At `sin(theta) = 2k/N` this equals `|(U_N w)[k]|^2`.
pub fn beampattern(weights: &[C64], sin_theta: &[f64]) -> Vec<f64> {
    let n = weights.len() as f64;
    sin_theta
        .iter()
        .map(|&s| {
            let acc: C64 = weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * C64::from_polar(1.0, -PI * i as f64 * s))
                .sum();
            acc.norm_sqr() / n
        })
        .collect()
}

/// The per-frame beamformers `f_m`, one per trajectory shift.
///
/// Each member is the cyclic delay of `f` by `c[m]`, whose DFT is the DFT of
/// `f` modulated by `exp(-j 2 pi k c[m] / N)`. This keeps
/// `U_N f_m = Lambda U_N e_{c[m]}` exact under the forward kernel used here.
pub fn shifted_family(f: &Beamformer, shifts: &[usize]) -> Result<Vec<Beamformer>, BeamformerError> {
    let n = f.antennas();
    shifts
        .iter()
        .map(|&shift| {
            if shift >= n {
                return Err(BeamformerError::ShiftOutOfRange { shift, antennas: n });
            }
            let advance = -(shift as i64);
            let idx: Vec<u32> = (0..n)
                .map(|i| f.phase_indices[(i as i64 + advance).rem_euclid(n as i64) as usize])
                .collect();
            let member = Beamformer::from_phase_indices(f.alphabet, idx, f.split)?;
            debug_assert_eq!(member.weights, circulant_shift(&f.weights, advance));
            Ok(member)
        })
        .collect()
}

/// Diagonal of `Lambda = sqrt(N) diag(U_N f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMask {
    diagonal: Vec<C64>,
    split: f64,
}

const DEGENERATE_TOL: f64 = 1e-12;

impl GainMask {
    /// Builds a mask from an explicit diagonal, e.g. an idealized or unit mask.
    pub fn from_diagonal(diagonal: Vec<C64>, split: f64) -> Result<Self, BeamformerError> {
        if diagonal.is_empty() {
            return Err(BeamformerError::TooFewAntennas { min: 1, got: 0 });
        }
        if let Some(bin) = diagonal.iter().position(|z| z.norm() <= DEGENERATE_TOL) {
            return Err(BeamformerError::DegenerateDesign { bin });
        }
        Ok(Self { diagonal, split })
    }

    /// The unquantized mask `sqrt(N) * profile`.
    pub fn ideal(profile: &BeamProfile) -> Result<Self, BeamformerError> {
        let scale = (profile.antennas() as f64).sqrt();
        Self::from_diagonal(
            profile
                .magnitudes()
                .iter()
                .map(|&m| C64::new(m * scale, 0.0))
                .collect(),
            profile.split(),
        )
    }

    pub fn diagonal(&self) -> &[C64] {
        &self.diagonal
    }

    pub fn get(&self, bin: usize) -> C64 {
        self.diagonal[bin]
    }

    pub fn antennas(&self) -> usize {
        self.diagonal.len()
    }

    pub fn split(&self) -> f64 {
        self.split
    }

    /// `N * split_r`: the nominal power gain of every sensing bin.
    pub fn nominal_radar_gain(&self) -> f64 {
        let n = self.antennas();
        if n < 2 {
            return 1.0;
        }
        n as f64 * radar_split(self.split, n)
    }
}

pub fn gain_mask(f: &Beamformer) -> Result<GainMask, BeamformerError> {
    let scale = (f.antennas() as f64).sqrt();
    let diagonal = unitary_dft(f.weights(), Direction::Forward)
        .expect("beamformer is never empty")
        .into_iter()
        .map(|z| z * scale)
        .collect();
    GainMask::from_diagonal(diagonal, f.split)
}

/// Designs the beamformer for `split` and returns it with its gain mask.
pub fn design(
    split: f64,
    antennas: usize,
    bits: u32,
    iterations: usize,
) -> Result<(GsOutcome, GainMask), BeamformerError> {
    let profile = target_magnitude_profile(split, antennas)?;
    let outcome = gs_design(&profile, bits, iterations)?;
    let mask = gain_mask(&outcome.beamformer)?;
    Ok((outcome, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_examples() {
        let p = target_magnitude_profile(1.0, 4).unwrap();
        assert_eq!(p.magnitudes(), &[1.0, 0.0, 0.0, 0.0]);

        let p = target_magnitude_profile(0.5, 3).unwrap();
        let expected = [0.5f64.sqrt(), 0.5, 0.5];
        for (a, b) in p.magnitudes().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_rejects_bad_split() {
        for split in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(
                target_magnitude_profile(split, 8),
                Err(BeamformerError::InvalidSplit(_))
            ));
        }
        assert!(target_magnitude_profile(0.5, 1).is_err());
    }

    #[test]
    fn quantizer_rounds_to_nearest_and_breaks_ties_low() {
        let a = PhaseAlphabet::new(2, 4).unwrap();
        assert_eq!(a.quantize(0.0), 0);
        assert_eq!(a.quantize(0.3 * PI), 1);
        assert_eq!(a.quantize(-0.3 * PI), 3);
        // Exact midpoint between index 0 and 1.
        assert_eq!(a.quantize(PI / 4.0), 0);
        // Midpoint between index 3 and 0 (= 4).
        assert_eq!(a.quantize(-PI / 4.0), 3);
        assert_eq!(a.quantize(2.0 * PI), 0);
    }

    #[test]
    fn alphabet_rejects_bits() {
        assert!(PhaseAlphabet::new(0, 4).is_err());
        assert!(PhaseAlphabet::new(9, 4).is_err());
        assert!(PhaseAlphabet::new(8, 4).is_ok());
    }

    #[test]
    fn gs_rejects_zero_iterations() {
        let p = target_magnitude_profile(0.5, 8).unwrap();
        assert_eq!(gs_design(&p, 4, 0).unwrap_err(), BeamformerError::NoIterations);
    }

    #[test]
    fn gs_full_comm_split_is_a_steering_solution() {
        for bits in 1..=4 {
            let p = target_magnitude_profile(1.0, 8).unwrap();
            let out = gs_design(&p, bits, 20).unwrap();
            let mags = out.beamformer.dft_magnitudes();
            assert!((mags[0] * mags[0] - 1.0).abs() < 1e-12, "bits={bits}");
        }
    }

    #[test]
    fn gs_weights_are_on_the_grid() {
        let p = target_magnitude_profile(0.3, 31).unwrap();
        let out = gs_design(&p, 3, 50).unwrap();
        let bf = &out.beamformer;
        let a = bf.alphabet();
        for (w, &idx) in bf.weights().iter().zip(bf.phase_indices()) {
            assert!((w.norm() - 1.0 / 31f64.sqrt()).abs() < 1e-15);
            assert!(idx < a.levels());
            assert!((w - a.weight(idx)).norm() == 0.0);
        }
        let norm: f64 = bf.weights().iter().map(|w| w.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(out.error_trace.len(), 50);
    }

    #[test]
    fn steer_at_broadside_is_identity() {
        let p = target_magnitude_profile(0.5, 16).unwrap();
        let bf = gs_design(&p, 4, 10).unwrap().beamformer;
        let s = steer(&bf, 0.0);
        for (a, b) in s.iter().zip(bf.weights()) {
            assert!((a - b).norm() < 1e-15);
        }
        let s = steer(&bf, 0.7);
        assert!(s.iter().all(|w| (w.norm() - 0.25).abs() < 1e-15));
    }

    #[test]
    fn steered_peak_moves_to_nearest_bin() {
        let n = 16;
        let p = target_magnitude_profile(1.0, n).unwrap();
        let bf = gs_design(&p, 4, 10).unwrap().beamformer;
        for theta_deg in [-50.0f64, -20.0, 10.0, 35.0, 60.0] {
            let theta = theta_deg.to_radians();
            let w = steer(&bf, theta);
            // Fine-grid oracle: argmax of the continuous beampattern.
            let grid: Vec<f64> = (0..4000).map(|i| -1.0 + 2.0 * i as f64 / 4000.0).collect();
            let pat = beampattern(&w, &grid);
            let (best, _) = pat
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            assert!((grid[best] - theta.sin()).abs() < 2e-3);
            let spec = unitary_dft(&w, Direction::Forward).unwrap();
            let peak_bin = (0..n)
                .max_by(|&a, &b| spec[a].norm().partial_cmp(&spec[b].norm()).unwrap())
                .unwrap();
            let expected = (n as f64 * theta.sin() / 2.0).round().rem_euclid(n as f64) as usize;
            assert_eq!(peak_bin, expected, "theta={theta_deg}");
        }
    }

    #[test]
    fn beampattern_on_grid_matches_dft() {
        let p = target_magnitude_profile(0.4, 12).unwrap();
        let bf = gs_design(&p, 3, 30).unwrap().beamformer;
        let grid: Vec<f64> = (0..12).map(|k| 2.0 * k as f64 / 12.0).collect();
        let pat = beampattern(bf.weights(), &grid);
        for (v, m) in pat.iter().zip(bf.dft_magnitudes()) {
            assert!((v - m * m).abs() < 1e-12);
        }
    }

    #[test]
    fn family_identity_and_range() {
        let p = target_magnitude_profile(0.5, 8).unwrap();
        let bf = gs_design(&p, 4, 30).unwrap().beamformer;
        let fam = shifted_family(&bf, &[0]).unwrap();
        assert_eq!(fam[0], bf);
        assert_eq!(
            shifted_family(&bf, &[8]).unwrap_err(),
            BeamformerError::ShiftOutOfRange {
                shift: 8,
                antennas: 8
            }
        );
    }

    #[test]
    fn family_members_are_distinct_and_share_beampattern() {
        let p = target_magnitude_profile(0.5, 8).unwrap();
        let bf = gs_design(&p, 4, 30).unwrap().beamformer;
        let shifts: Vec<usize> = (0..8).collect();
        let fam = shifted_family(&bf, &shifts).unwrap();
        let base = bf.dft_magnitudes();
        for (i, a) in fam.iter().enumerate() {
            for (x, y) in a.dft_magnitudes().iter().zip(&base) {
                assert!((x - y).abs() < 1e-10);
            }
            for b in &fam[i + 1..] {
                assert_ne!(a.weights(), b.weights());
            }
        }
    }

    #[test]
    fn family_dft_is_mask_times_shifted_basis() {
        let n = 7;
        let p = target_magnitude_profile(0.6, n).unwrap();
        let bf = gs_design(&p, 3, 30).unwrap().beamformer;
        let mask = gain_mask(&bf).unwrap();
        for shift in 0..n {
            let fm = &shifted_family(&bf, &[shift]).unwrap()[0];
            let lhs = unitary_dft(fm.weights(), Direction::Forward).unwrap();
            for k in 0..n {
                let rhs = mask.get(k) * crate::spectral::dft_entry(n, k, shift);
                assert!((lhs[k] - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ideal_mask_magnitudes() {
        let p = target_magnitude_profile(0.5, 3).unwrap();
        let m = GainMask::ideal(&p).unwrap();
        let expected = [1.5f64.sqrt(), 0.75f64.sqrt(), 0.75f64.sqrt()];
        for (z, e) in m.diagonal().iter().zip(expected) {
            assert!((z.norm() - e).abs() < 1e-12);
        }
        assert!((m.nominal_radar_gain() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn full_comm_mask_is_degenerate() {
        let p = target_magnitude_profile(1.0, 5).unwrap();
        assert_eq!(
            GainMask::ideal(&p).unwrap_err(),
            BeamformerError::DegenerateDesign { bin: 1 }
        );
        let bf = gs_design(&p, 4, 10).unwrap().beamformer;
        assert!(matches!(
            gain_mask(&bf),
            Err(BeamformerError::DegenerateDesign { .. })
        ));
    }
}
