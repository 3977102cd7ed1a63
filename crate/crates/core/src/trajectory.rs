//! Space-time subsampling trajectories.
//!
//! Frame `m` samples grid coordinate `(m, c[m])` of the `M x N` matrix `Z`.
//! The quality of a trajectory is the coherence of the resulting partial
//! 2D-DFT sensing matrix, which can be read off the point spread function
//! (the 2D-DFT of the binary sampling mask).

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::seed::rng_from;
use crate::spectral::{dft2d, dft_entry, is_prime, ComplexGrid, Direction};
use crate::C64;

/// Column budget for building the explicit `M x MN` sensing matrix.
pub const DIRECT_COHERENCE_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("optimized trajectories need a prime frame count with M = N; {0} is not prime")]
    NotPrime(usize),
    #[error("frames and antennas must be at least 1, got M={frames} N={antennas}")]
    EmptyGrid { frames: usize, antennas: usize },
    #[error("shift {shift} at frame {frame} is outside 0..{antennas}")]
    ShiftOutOfRange {
        frame: usize,
        shift: usize,
        antennas: usize,
    },
    #[error("explicit sensing matrix would have {columns} columns, limit is {DIRECT_COHERENCE_LIMIT}")]
    TooLarge { columns: usize },
    #[error("active fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("cannot parse trajectory: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// `c[m] = m(m+1)/2 mod M`, M prime.
    Optimized,
    /// Shifts drawn uniformly and independently.
    Random,
    /// Supplied by the caller.
    Custom,
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryKind::Optimized => "optimized",
            TrajectoryKind::Random => "random",
            TrajectoryKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    shifts: Vec<usize>,
    antennas: usize,
    kind: TrajectoryKind,
}

impl Trajectory {
    pub fn new(shifts: Vec<usize>, antennas: usize) -> Result<Self, TrajectoryError> {
        Self::with_kind(shifts, antennas, TrajectoryKind::Custom)
    }

    fn with_kind(shifts: Vec<usize>, antennas: usize, kind: TrajectoryKind) -> Result<Self, TrajectoryError> {
        if shifts.is_empty() || antennas == 0 {
            return Err(TrajectoryError::EmptyGrid {
                frames: shifts.len(),
                antennas,
            });
        }
        if let Some((frame, &shift)) = shifts.iter().enumerate().find(|(_, &s)| s >= antennas) {
            return Err(TrajectoryError::ShiftOutOfRange {
                frame,
                shift,
                antennas,
            });
        }
        Ok(Self {
            shifts,
            antennas,
            kind,
        })
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn frames(&self) -> usize {
        self.shifts.len()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    /// Comma-separated shifts, e.g. `0,1,3,1,0`.
    pub fn to_csv_line(&self) -> String {
        self.shifts
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_line(line: &str, antennas: usize) -> Result<Self, TrajectoryError> {
        let shifts = line
            .trim()
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| TrajectoryError::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(shifts, antennas)
    }

    /// `g[m] = omega^{c[m]}` with `omega = exp(-j 2 pi / N)`.
    pub fn g_vector(&self) -> Vec<C64> {
        let n = self.antennas as f64;
        self.shifts
            .iter()
            .map(|&c| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * c as f64 / n))
            .collect()
    }
}

pub fn optimized_trajectory(frames: usize) -> Result<Trajectory, TrajectoryError> {
    if !is_prime(frames) {
        return Err(TrajectoryError::NotPrime(frames));
    }
    let shifts = (0..frames).map(|m| (m * (m + 1) / 2) % frames).collect();
    Trajectory::with_kind(shifts, frames, TrajectoryKind::Optimized)
}

pub fn random_trajectory(frames: usize, antennas: usize, seed: u64) -> Result<Trajectory, TrajectoryError> {
    if frames == 0 || antennas == 0 {
        return Err(TrajectoryError::EmptyGrid { frames, antennas });
    }
    let mut rng = rng_from(seed, &[0x7472_616a]);
    let shifts = (0..frames).map(|_| rng.random_range(0..antennas)).collect();
    Trajectory::with_kind(shifts, antennas, TrajectoryKind::Random)
}

#[derive(Debug, Clone)]
pub struct SamplingAnalysis {
    /// `B(m, n) = 1` iff `n = c[m]`.
    pub binary_matrix: ComplexGrid,
    /// `U_M B U_N`.
    pub psf: ComplexGrid,
    /// `sqrt(MN)/M * max_{(p,q) != (0,0)} |psf(p,q)|`.
    pub coherence: f64,
}

pub fn binary_matrix(t: &Trajectory) -> ComplexGrid {
    ComplexGrid::from_fn(t.frames(), t.antennas, |m, n| {
        if t.shifts[m] == n {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .expect("trajectory dimensions are non-zero")
}

pub fn analyze(t: &Trajectory) -> SamplingAnalysis {
    let (m, n) = (t.frames(), t.antennas);
    let b = binary_matrix(t);
    let psf = dft2d(&b, Direction::Forward);
    debug_assert!((psf.get(0, 0).norm() - (m as f64 / n as f64).sqrt()).abs() < 1e-9);
    let mut peak = 0.0f64;
    for p in 0..m {
        for q in 0..n {
            if (p, q) != (0, 0) {
                peak = peak.max(psf.get(p, q).norm());
            }
        }
    }
    let coherence = if m * n == 1 {
        // A single dictionary column has no partner.
        0.0
    } else {
        ((m * n) as f64).sqrt() / m as f64 * peak
    };
    SamplingAnalysis {
        binary_matrix: b,
        psf,
        coherence,
    }
}

/// Entry of the sensing matrix at row `m` for dictionary atom `(p, q)`:
/// `(U_N)[c[m], q] * (U_M)[m, p]`.
#[inline]
pub fn sensing_entry(t: &Trajectory, m: usize, p: usize, q: usize) -> C64 {
    dft_entry(t.antennas, t.shifts[m], q) * dft_entry(t.frames(), m, p)
}

/// Column index of atom `(p, q)` in `vec(Z~)` (column-major).
#[inline]
pub fn atom_index(frames: usize, p: usize, q: usize) -> usize {
    q * frames + p
}

/// The explicit `M x MN` sensing matrix, rows `(e_c^T U_N) kron (e_m^T U_M)`.
pub fn sensing_matrix(t: &Trajectory) -> Result<ComplexGrid, TrajectoryError> {
    let (m, n) = (t.frames(), t.antennas);
    let columns = m * n;
    if columns > DIRECT_COHERENCE_LIMIT {
        return Err(TrajectoryError::TooLarge { columns });
    }
    let mut a = ComplexGrid::zeros(m, columns).expect("non-empty");
    for row in 0..m {
        for q in 0..n {
            for p in 0..m {
                a.set(row, atom_index(m, p, q), sensing_entry(t, row, p, q));
            }
        }
    }
    Ok(a)
}

/// Mutual coherence from the explicit sensing matrix.
pub fn coherence_direct(t: &Trajectory) -> Result<f64, TrajectoryError> {
    let a = sensing_matrix(t)?;
    let (rows, cols) = (a.rows(), a.cols());
    let columns: Vec<Vec<C64>> = (0..cols).map(|j| a.column(j)).collect();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut mu = 0.0f64;
    for i in 0..cols {
        for l in i + 1..cols {
            let mut dot = C64::new(0.0, 0.0);
            for r in 0..rows {
                dot += columns[i][r].conj() * columns[l][r];
            }
            mu = mu.max(dot.norm() / (norms[i] * norms[l]));
        }
    }
    Ok(mu)
}

/// Largest `K` with `K < (1 + sqrt(N)) / 2`.
pub fn max_recoverable_targets(antennas: usize) -> usize {
    // K < (1 + sqrt(N))/2  <=>  2K - 1 < sqrt(N)  <=>  (2K - 1)^2 < N for K >= 1.
    let mut k = 0usize;
    while (2 * (k + 1) - 1).pow(2) < antennas {
        k += 1;
    }
    k
}

/// Random antenna switching precoders for the RS baseline.
///
/// Each frame activates a random subset of `ceil(active_fraction * N)` antennas
/// with weight `1/sqrt(N)` pointed at the communication direction; the rest
/// are switched off, so total radiated power is the active fraction.
pub fn rs_baseline_precoders(
    frames: usize,
    antennas: usize,
    seed: u64,
    active_fraction: f64,
) -> Result<Vec<Vec<C64>>, TrajectoryError> {
    if !(active_fraction > 0.0 && active_fraction <= 1.0) {
        return Err(TrajectoryError::InvalidFraction(active_fraction));
    }
    if frames == 0 || antennas == 0 {
        return Err(TrajectoryError::EmptyGrid { frames, antennas });
    }
    let active = ((active_fraction * antennas as f64) - 1e-9).ceil().max(1.0) as usize;
    let weight = C64::new(1.0 / (antennas as f64).sqrt(), 0.0);
    let mut rng = rng_from(seed, &[0x7273_6a63]);
    Ok((0..frames)
        .map(|_| {
            let mut v = vec![C64::new(0.0, 0.0); antennas];
            for i in rand::seq::index::sample(&mut rng, antennas, active) {
                v[i] = weight;
            }
            v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimized_shifts() {
        assert_eq!(optimized_trajectory(5).unwrap().shifts(), &[0, 1, 3, 1, 0]);
        let t = optimized_trajectory(31).unwrap();
        assert_eq!(t.shifts()[7], 28);
        assert_eq!(t.shifts()[8], 5);
        assert_eq!(t.kind(), TrajectoryKind::Optimized);
    }

    #[test]
    fn optimized_rejects_composite() {
        assert_eq!(optimized_trajectory(32), Err(TrajectoryError::NotPrime(32)));
        assert_eq!(optimized_trajectory(1), Err(TrajectoryError::NotPrime(1)));
    }

    #[test]
    fn single_sample_is_fully_coherent() {
        let t = Trajectory::new(vec![0], 2).unwrap();
        assert!((analyze(&t).coherence - 1.0).abs() < 1e-12);
        assert!((coherence_direct(&t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_trajectory_is_reproducible() {
        let a = random_trajectory(31, 17, 9).unwrap();
        assert_eq!(a, random_trajectory(31, 17, 9).unwrap());
        assert_ne!(a, random_trajectory(31, 17, 10).unwrap());
        assert!(a.shifts().iter().all(|&s| s < 17));
    }

    #[test]
    fn recoverable_targets() {
        assert_eq!(max_recoverable_targets(31), 3);
        assert_eq!(max_recoverable_targets(257), 8);
        assert_eq!(max_recoverable_targets(1), 0);
        // Perfect square: bound is exactly 2, strict.
        assert_eq!(max_recoverable_targets(9), 1);
        assert_eq!(max_recoverable_targets(10), 2);
    }

    #[test]
    fn csv_line_round_trip() {
        let t = optimized_trajectory(7).unwrap();
        let line = t.to_csv_line();
        assert_eq!(line, "0,1,3,6,3,1,0");
        let back = Trajectory::from_csv_line(&line, 7).unwrap();
        assert_eq!(back.shifts(), t.shifts());
        assert!(Trajectory::from_csv_line("0,9", 7).is_err());
        assert!(Trajectory::from_csv_line("0,x", 7).is_err());
    }

    #[test]
    fn direct_coherence_guard() {
        let t = random_trajectory(65, 64, 1).unwrap();
        assert!(matches!(
            coherence_direct(&t),
            Err(TrajectoryError::TooLarge { .. })
        ));
    }

    #[test]
    fn rs_precoders() {
        let full = rs_baseline_precoders(4, 8, 1, 1.0).unwrap();
        for v in &full {
            assert!(v
                .iter()
                .all(|w| (w.re - 1.0 / 8f64.sqrt()).abs() < 1e-15 && w.im == 0.0));
        }
        let half = rs_baseline_precoders(10, 32, 5, 0.5).unwrap();
        for v in &half {
            let nz: Vec<_> = v.iter().filter(|w| w.norm() > 0.0).collect();
            assert_eq!(nz.len(), 16);
            assert!(nz.iter().all(|w| (w.norm() - 1.0 / 32f64.sqrt()).abs() < 1e-15));
            let power: f64 = v.iter().map(|w| w.norm_sqr()).sum();
            assert!((power - 0.5).abs() < 1e-12);
        }
        assert_eq!(half, rs_baseline_precoders(10, 32, 5, 0.5).unwrap());
        assert!(rs_baseline_precoders(4, 8, 1, 0.0).is_err());
    }
}
