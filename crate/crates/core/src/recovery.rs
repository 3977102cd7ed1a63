//! Sparse recovery of the masked Doppler-angle matrix.
//!
//! The sensing operator is a partial 2D-DFT, so correlating a residual with
//! every dictionary atom is one zero-filled inverse 2D-DFT instead of an
//! `M x MN` matrix product. Least-squares refits only touch the selected
//! atoms, which are generated analytically from DFT rows.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::beamformer::GainMask;
use crate::scene::MeasurementSet;
use crate::spectral::{dft_entry, ComplexGrid, Dft2dPlan, Direction};
use crate::trajectory::{sensing_entry, Trajectory};
use crate::C64;

/// Largest admissible condition number of the support Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("requested sparsity {requested} exceeds the {measurements} available measurements")]
    SparsityTooLarge { requested: usize, measurements: usize },
    #[error("least-squares system on {atoms} atoms is ill-conditioned (condition number {condition:e})")]
    IllConditioned { atoms: usize, condition: f64 },
    #[error("support is empty")]
    EmptySupport,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// When OMP stops adding atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    /// Select exactly this many atoms.
    Sparsity(usize),
    /// Stop once the residual norm is at or below the threshold.
    Residual(f64),
}

impl Stopping {
    /// Residual threshold `factor * sigma_w * sqrt(M)`.
    pub fn noise_scaled(factor: f64, noise_variance: f64, measurements: usize) -> Self {
        Stopping::Residual(factor * noise_variance.sqrt() * (measurements as f64).sqrt())
    }
}

/// Selected `(doppler_bin, angle_bin)` atoms in selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SupportSet {
    entries: Vec<(usize, usize)>,
}

impl SupportSet {
    pub fn new(entries: Vec<(usize, usize)>) -> Result<Self, RecoveryError> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].contains(e) {
                return Err(RecoveryError::Dimension(format!("duplicate support entry {e:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, bin: (usize, usize)) -> bool {
        self.entries.contains(&bin)
    }

    /// Same bins regardless of order.
    pub fn same_bins(&self, other: &[(usize, usize)]) -> bool {
        let mut a = self.entries.clone();
        let mut b = other.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Estimate of `Z~` (masked domain).
    pub z_hat: ComplexGrid,
    /// Estimate of `H~` (column `q` of `z_hat` divided by the mask entry `q`).
    pub h_hat: ComplexGrid,
    pub support: SupportSet,
    pub residual_norm: f64,
    /// Residual norm before the first atom and after each selection.
    pub residual_trace: Vec<f64>,
}

/// `A^* y` reshaped to `M x N`: zero-filled samples through an inverse 2D-DFT.
pub fn adjoint_apply(y: &MeasurementSet) -> ComplexGrid {
    let plan = Dft2dPlan::new(y.trajectory.frames(), y.trajectory.antennas())
        .expect("trajectory dimensions are non-zero");
    adjoint_with_plan(&plan, &y.values, &y.trajectory)
}

fn adjoint_with_plan(plan: &Dft2dPlan, values: &[C64], trajectory: &Trajectory) -> ComplexGrid {
    let mut grid = ComplexGrid::zeros(trajectory.frames(), trajectory.antennas()).expect("non-empty");
    for (m, (&c, &v)) in trajectory.shifts().iter().zip(values).enumerate() {
        grid.set(m, c, v);
    }
    plan.apply(&grid, Direction::Inverse)
}

/// Sensing-matrix column of atom `(p, q)`; its norm is `1/sqrt(N)`.
pub fn atom(trajectory: &Trajectory, p: usize, q: usize) -> Vec<C64> {
    (0..trajectory.frames())
        .map(|m| sensing_entry(trajectory, m, p, q))
        .collect()
}

fn to_matrix(columns: &[Vec<C64>]) -> DMatrix<C64> {
    let rows = columns.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, columns.len(), |r, c| columns[c][r])
}

fn gram(columns: &[Vec<C64>]) -> DMatrix<C64> {
    let a = to_matrix(columns);
    a.adjoint() * a
}

fn condition_number(g: &DMatrix<C64>) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least-squares fit of `y` on `columns` via the normal equations.
fn least_squares(columns: &[Vec<C64>], y: &[C64]) -> Result<Vec<C64>, RecoveryError> {
    let a = to_matrix(columns);
    let g = a.adjoint() * &a;
    let condition = condition_number(&g);
    if !(condition <= CONDITION_LIMIT) {
        return Err(RecoveryError::IllConditioned {
            atoms: columns.len(),
            condition,
        });
    }
    let rhs = a.adjoint() * DMatrix::from_column_slice(y.len(), 1, y);
    let x = g.full_piv_lu().solve(&rhs).ok_or(RecoveryError::IllConditioned {
        atoms: columns.len(),
        condition,
    })?;
    Ok(x.iter().copied().collect())
}

fn residual(columns: &[Vec<C64>], coeffs: &[C64], y: &[C64]) -> Vec<C64> {
    let mut r = y.to_vec();
    for (col, &x) in columns.iter().zip(coeffs) {
        for (ri, &a) in r.iter_mut().zip(col) {
            *ri -= a * x;
        }
    }
    r
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonal matching pursuit over the partial 2D-DFT dictionary.
pub fn omp_recover(y: &MeasurementSet, stopping: Stopping) -> Result<ChannelEstimate, RecoveryError> {
    let t = &y.trajectory;
    let (m, n) = (t.frames(), t.antennas());
    if y.values.len() != m {
        return Err(RecoveryError::Dimension(format!(
            "{} measurements for a {m}-frame trajectory",
            y.values.len()
        )));
    }
    if y.mask.antennas() != n {
        return Err(RecoveryError::Dimension(format!(
            "mask has {} entries, trajectory has {n} antennas",
            y.mask.antennas()
        )));
    }
    let max_atoms = match stopping {
        Stopping::Sparsity(k) if k > m => {
            return Err(RecoveryError::SparsityTooLarge {
                requested: k,
                measurements: m,
            })
        }
        Stopping::Sparsity(k) => k,
        Stopping::Residual(_) => m,
    };

    let plan = Dft2dPlan::new(m, n).expect("non-empty");
    // All atoms share the norm 1/sqrt(N); rescale correlations to unit-norm atoms.
    let atom_scale = (n as f64).sqrt();
    let mut support: Vec<(usize, usize)> = Vec::new();
    let mut columns: Vec<Vec<C64>> = Vec::new();
    let mut coeffs: Vec<C64> = Vec::new();
    let mut r = y.values.clone();
    let mut trace = vec![norm(&r)];

    while support.len() < max_atoms {
        if let Stopping::Residual(threshold) = stopping {
            if norm(&r) <= threshold {
                break;
            }
        }
        let corr = adjoint_with_plan(&plan, &r, t);
        let mut best: Option<((usize, usize), f64)> = None;
        for p in 0..m {
            for q in 0..n {
                if support.contains(&(p, q)) {
                    continue;
                }
                let v = corr.get(p, q).norm() * atom_scale;
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some(((p, q), v));
                }
            }
        }
        let Some(((p, q), _)) = best else { break };
        support.push((p, q));
        columns.push(atom(t, p, q));
        coeffs = least_squares(&columns, &y.values)?;
        r = residual(&columns, &coeffs, &y.values);
        trace.push(norm(&r));
    }

    let mut z_hat = ComplexGrid::zeros(m, n).expect("non-empty");
    let mut h_hat = ComplexGrid::zeros(m, n).expect("non-empty");
    for (&(p, q), &x) in support.iter().zip(&coeffs) {
        z_hat.set(p, q, x);
        h_hat.set(p, q, x / y.mask.get(q));
    }
    Ok(ChannelEstimate {
        z_hat,
        h_hat,
        support: SupportSet { entries: support },
        residual_norm: *trace.last().expect("trace starts non-empty"),
        residual_trace: trace,
    })
}

/// Result of OMP over an explicit dictionary.
#[derive(Debug, Clone)]
pub struct DictionaryEstimate {
    /// Selected column indices in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub residual_norm: f64,
}

/// OMP over explicitly supplied dictionary columns (used for non-convolutional
/// sensing, e.g. random antenna switching). Columns are normalized for selection.
pub fn omp_dictionary(
    columns: &[Vec<C64>],
    y: &[C64],
    stopping: Stopping,
) -> Result<DictionaryEstimate, RecoveryError> {
    let m = y.len();
    if columns.iter().any(|c| c.len() != m) {
        return Err(RecoveryError::Dimension(
            "dictionary rows do not match measurements".into(),
        ));
    }
    let max_atoms = match stopping {
        Stopping::Sparsity(k) if k > m => {
            return Err(RecoveryError::SparsityTooLarge {
                requested: k,
                measurements: m,
            })
        }
        Stopping::Sparsity(k) => k.min(columns.len()),
        Stopping::Residual(_) => m.min(columns.len()),
    };
    let inv_norms: Vec<f64> = columns
        .iter()
        .map(|c| {
            let n = norm(c);
            if n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    let mut support: Vec<usize> = Vec::new();
    let mut selected: Vec<Vec<C64>> = Vec::new();
    let mut coeffs: Vec<C64> = Vec::new();
    let mut r = y.to_vec();
    while support.len() < max_atoms {
        if let Stopping::Residual(threshold) = stopping {
            if norm(&r) <= threshold {
                break;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, col) in columns.iter().enumerate() {
            if inv_norms[j] == 0.0 || support.contains(&j) {
                continue;
            }
            let dot: C64 = col.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
            let v = dot.norm() * inv_norms[j];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        selected.push(columns[j].clone());
        coeffs = least_squares(&selected, y)?;
        r = residual(&selected, &coeffs, y);
    }
    Ok(DictionaryEstimate {
        support,
        coefficients: coeffs,
        residual_norm: norm(&r),
    })
}

/// Doppler-angle dictionary for arbitrary per-frame precoders:
/// column `(p, q)` (index `q M + p`) has entries `(U_M)[m, p] (U_N f_m)[q]`.
pub fn precoder_dictionary(precoders: &[Vec<C64>]) -> Result<Vec<Vec<C64>>, RecoveryError> {
    let m = precoders.len();
    let n = precoders.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || precoders.iter().any(|f| f.len() != n) {
        return Err(RecoveryError::Dimension(
            "precoders must be non-empty and equal length".into(),
        ));
    }
    let spectra: Vec<Vec<C64>> = precoders
        .iter()
        .map(|f| crate::spectral::unitary_dft(f, Direction::Forward).expect("non-empty"))
        .collect();
    let mut cols = Vec::with_capacity(m * n);
    for q in 0..n {
        for p in 0..m {
            cols.push((0..m).map(|row| dft_entry(m, row, p) * spectra[row][q]).collect());
        }
    }
    Ok(cols)
}

/// `|| H~ - H~_est ||_F^2 / K`.
pub fn nmse(truth: &ComplexGrid, estimate: &ComplexGrid, targets: usize) -> f64 {
    assert_eq!(
        (truth.rows(), truth.cols()),
        (estimate.rows(), estimate.cols()),
        "grid shapes differ"
    );
    let err: f64 = truth
        .as_slice()
        .iter()
        .zip(estimate.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    err / targets.max(1) as f64
}

/// Column normalization used by [`nmse_analytic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnScaling {
    /// Columns of the sensing matrix as they are (norm `1/sqrt(N)`); matches
    /// the Monte Carlo NMSE of the `H~` estimate.
    #[default]
    Raw,
    /// Unit-norm columns; scale-free.
    Unit,
}

/// Post-detection NMSE approximation `Tr(A_S^+ (A_S^+)^*) / (K zeta_net)`.
///
/// Each support atom's error term is weighted by `N split_r / |Lambda_q|^2`,
/// which is 1 for every sensing bin of an ideal mask and corrects for the
/// actual gain of a quantized design.
pub fn nmse_analytic(
    support: &SupportSet,
    trajectory: &Trajectory,
    mask: &GainMask,
    zeta_net: f64,
    targets: usize,
    scaling: ColumnScaling,
) -> Result<f64, RecoveryError> {
    if support.is_empty() {
        return Err(RecoveryError::EmptySupport);
    }
    if mask.antennas() != trajectory.antennas() {
        return Err(RecoveryError::Dimension(
            "mask and trajectory sizes differ".into(),
        ));
    }
    let mut columns: Vec<Vec<C64>> = support
        .entries()
        .iter()
        .map(|&(p, q)| atom(trajectory, p, q))
        .collect();
    if scaling == ColumnScaling::Unit {
        for c in columns.iter_mut() {
            let s = 1.0 / norm(c);
            c.iter_mut().for_each(|z| *z *= s);
        }
    }
    let g = gram(&columns);
    let condition = condition_number(&g);
    if !(condition <= CONDITION_LIMIT) {
        return Err(RecoveryError::IllConditioned {
            atoms: columns.len(),
            condition,
        });
    }
    let inv = g.try_inverse().ok_or(RecoveryError::IllConditioned {
        atoms: columns.len(),
        condition,
    })?;
    let nominal = mask.nominal_radar_gain();
    let trace: f64 = support
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &(_, q))| inv[(i, i)].re * nominal / mask.get(q).norm_sqr())
        .sum();
    Ok(trace / (targets.max(1) as f64 * zeta_net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformer::{target_magnitude_profile, GainMask};
    use crate::trajectory::optimized_trajectory;

    fn set(values: Vec<C64>, t: Trajectory, n: usize) -> MeasurementSet {
        MeasurementSet {
            values,
            trajectory: t,
            mask: GainMask::from_diagonal(vec![C64::new(1.0, 0.0); n], 0.5).unwrap(),
            noise_variance: 0.0,
        }
    }

    #[test]
    fn adjoint_of_corner_sample() {
        let t = Trajectory::new(vec![0, 1], 2).unwrap();
        let y = set(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], t, 2);
        let g = adjoint_apply(&y);
        assert!(g
            .as_slice()
            .iter()
            .all(|z| (z - C64::new(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn adjoint_is_isometric_on_samples() {
        let t = optimized_trajectory(7).unwrap();
        let values: Vec<C64> = (0..7).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let y = set(values.clone(), t, 7);
        assert!((adjoint_apply(&y).frobenius_norm() - norm(&values)).abs() < 1e-12);
    }

    #[test]
    fn zero_measurements_give_empty_support() {
        let t = optimized_trajectory(7).unwrap();
        let y = set(vec![C64::new(0.0, 0.0); 7], t, 7);
        let est = omp_recover(&y, Stopping::Residual(1e-9)).unwrap();
        assert!(est.support.is_empty());
        assert_eq!(est.residual_norm, 0.0);
    }

    #[test]
    fn sparsity_larger_than_measurements_rejected() {
        let t = optimized_trajectory(5).unwrap();
        let y = set(vec![C64::new(1.0, 0.0); 5], t, 5);
        assert_eq!(
            omp_recover(&y, Stopping::Sparsity(6)).unwrap_err(),
            RecoveryError::SparsityTooLarge {
                requested: 6,
                measurements: 5
            }
        );
    }

    #[test]
    fn nmse_identities() {
        let a = ComplexGrid::from_fn(3, 3, |r, c| C64::new(r as f64, c as f64)).unwrap();
        assert_eq!(nmse(&a, &a, 2), 0.0);
        let zero = ComplexGrid::zeros(3, 3).unwrap();
        let base = nmse(&a, &zero, 2);
        let scaled = nmse(&a.map(|z| z * 3.0), &zero, 2);
        assert!((scaled - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn analytic_single_atom() {
        let n = 31;
        let t = optimized_trajectory(n).unwrap();
        let mask = GainMask::ideal(&target_magnitude_profile(0.5, n).unwrap()).unwrap();
        let s = SupportSet::new(vec![(4, 9)]).unwrap();
        let unit = nmse_analytic(&s, &t, &mask, 100.0, 1, ColumnScaling::Unit).unwrap();
        assert!((unit - 0.01).abs() < 1e-12);
        let raw = nmse_analytic(&s, &t, &mask, 100.0, 1, ColumnScaling::Raw).unwrap();
        assert!((raw - 0.31).abs() < 1e-12);
        let doubled = nmse_analytic(&s, &t, &mask, 200.0, 1, ColumnScaling::Raw).unwrap();
        assert!((doubled - raw / 2.0).abs() < 1e-14);
        assert_eq!(
            nmse_analytic(&SupportSet::default(), &t, &mask, 1.0, 1, ColumnScaling::Raw),
            Err(RecoveryError::EmptySupport)
        );
    }

    #[test]
    fn analytic_rejects_duplicate_atoms() {
        // One frame at shift 0: every angle atom reduces to the same entry.
        let t = Trajectory::new(vec![0], 3).unwrap();
        let mask = GainMask::from_diagonal(vec![C64::new(1.0, 0.0); 3], 0.5).unwrap();
        let s = SupportSet::new(vec![(0, 0), (0, 1)]).unwrap();
        assert!(matches!(
            nmse_analytic(&s, &t, &mask, 1.0, 2, ColumnScaling::Raw),
            Err(RecoveryError::IllConditioned { .. })
        ));
    }

    #[test]
    fn support_set_rejects_duplicates() {
        assert!(SupportSet::new(vec![(1, 2), (1, 2)]).is_err());
        let s = SupportSet::new(vec![(1, 2), (0, 3)]).unwrap();
        assert!(s.same_bins(&[(0, 3), (1, 2)]));
    }
}
