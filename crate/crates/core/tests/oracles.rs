//! Library routines checked against naive, independently written references.

use std::f64::consts::PI;

use jcr_core::beamformer::{design, target_magnitude_profile, GainMask};
use jcr_core::recovery::{adjoint_apply, nmse_analytic, omp_recover, ColumnScaling, Stopping, SupportSet};
use jcr_core::scene::{random_scene, synthesize_with_noise, MeasurementSet};
use jcr_core::seed::{complex_gaussian, rng_from};
use jcr_core::spectral::{dft2d, unitary_dft, ComplexGrid, Direction};
use jcr_core::trajectory::{analyze, coherence_direct, optimized_trajectory, random_trajectory, Trajectory};
use jcr_core::C64;
use nalgebra::DMatrix;

fn naive_dft(v: &[C64], sign: f64) -> Vec<C64> {
    let l = v.len();
    let s = 1.0 / (l as f64).sqrt();
    (0..l)
        .map(|k| {
            v.iter()
                .enumerate()
                .map(|(n, &x)| x * C64::from_polar(s, sign * 2.0 * PI * (k * n) as f64 / l as f64))
                .sum()
        })
        .collect()
}

fn random_vec(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = rng_from(seed, &[len as u64]);
    (0..len).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn fft_matches_naive_dft_up_to_64() {
    for len in 1..=64 {
        let v = random_vec(len, 11);
        let fwd = unitary_dft(&v, Direction::Forward).unwrap();
        let inv = unitary_dft(&v, Direction::Inverse).unwrap();
        assert!(max_diff(&fwd, &naive_dft(&v, -1.0)) < 1e-12, "forward, len {len}");
        assert!(max_diff(&inv, &naive_dft(&v, 1.0)) < 1e-12, "inverse, len {len}");
    }
}

#[test]
fn dft2d_is_left_and_right_multiplication() {
    for (m, n) in [(1, 1), (3, 5), (7, 4), (16, 9)] {
        let data = random_vec(m * n, 3);
        let x = ComplexGrid::from_row_major(m, n, data).unwrap();
        // U_M X U_N, computed column-wise then row-wise by hand.
        let mut cols = ComplexGrid::zeros(m, n).unwrap();
        for c in 0..n {
            for (r, z) in naive_dft(&x.column(c), -1.0).into_iter().enumerate() {
                cols.set(r, c, z);
            }
        }
        let mut want = ComplexGrid::zeros(m, n).unwrap();
        for r in 0..m {
            for (c, z) in naive_dft(cols.row(r), -1.0).into_iter().enumerate() {
                want.set(r, c, z);
            }
        }
        assert!(dft2d(&x, Direction::Forward).max_abs_diff(&want) < 1e-12);
    }
}

/// `A[m, q*M + p] = exp(-j2pi c[m] q / N) exp(-j2pi m p / M) / sqrt(MN)`.
fn explicit_sensing(t: &Trajectory) -> DMatrix<C64> {
    let (m, n) = (t.frames(), t.antennas());
    let s = 1.0 / ((m * n) as f64).sqrt();
    DMatrix::from_fn(m, m * n, |row, col| {
        let (p, q) = (col % m, col / m);
        let phase = -2.0 * PI * ((t.shifts()[row] * q) as f64 / n as f64 + (row * p) as f64 / m as f64);
        C64::from_polar(s, phase)
    })
}

#[test]
fn adjoint_matches_explicit_conjugate_transpose() {
    for (size, seed) in [(5, 1), (7, 2), (11, 3), (13, 4)] {
        let t = random_trajectory(size, size, seed).unwrap();
        let values = random_vec(size, seed);
        let a = explicit_sensing(&t);
        let want = a.adjoint() * DMatrix::from_column_slice(size, 1, &values);
        let y = MeasurementSet {
            values,
            trajectory: t,
            mask: GainMask::from_diagonal(vec![C64::new(1.0, 0.0); size], 0.5).unwrap(),
            noise_variance: 0.0,
        };
        let got = adjoint_apply(&y);
        for q in 0..size {
            for p in 0..size {
                assert!((got.get(p, q) - want[q * size + p]).norm() < 1e-12);
            }
        }
    }
}

/// Textbook OMP: correlate, grow the support, solve least squares by SVD.
fn reference_omp(a: &DMatrix<C64>, y: &[C64], k: usize) -> (Vec<usize>, Vec<C64>) {
    let y = DMatrix::from_column_slice(y.len(), 1, y);
    let mut support = Vec::new();
    let mut coef = DMatrix::zeros(0, 1);
    let mut r = y.clone();
    for _ in 0..k {
        let corr = a.adjoint() * &r;
        let best = (0..a.ncols())
            .filter(|i| !support.contains(i))
            .max_by(|&i, &j| corr[i].norm().total_cmp(&corr[j].norm()))
            .unwrap();
        support.push(best);
        let sub = a.select_columns(&support);
        coef = sub.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        r = &y - sub * &coef;
    }
    (support, coef.iter().copied().collect())
}

#[test]
fn omp_matches_reference_on_noisy_scenes() {
    let (mut checked, size) = (0, 11);
    let (_, mask) = design(0.5, size, 4, 100).unwrap();
    for trial in 0..20u64 {
        let t = if trial % 2 == 0 {
            optimized_trajectory(size).unwrap()
        } else {
            random_trajectory(size, size, trial).unwrap()
        };
        let scene = random_scene(2, size, size, trial, 0).unwrap();
        let (gs, _) = design(0.5, size, 4, 100).unwrap();
        let y = synthesize_with_noise(&scene, &gs.beamformer, &mask, &t, 0.01, trial).unwrap();
        let got = match omp_recover(&y, Stopping::Sparsity(2)) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let (support, coef) = reference_omp(&explicit_sensing(&t), &y.values, 2);
        let bins: Vec<(usize, usize)> = support.iter().map(|&i| (i % size, i / size)).collect();
        assert_eq!(got.support.entries(), &bins[..], "trial {trial}");
        for (&(p, q), c) in bins.iter().zip(&coef) {
            assert!((got.z_hat.get(p, q) - c).norm() < 1e-9, "trial {trial}");
        }
        checked += 1;
    }
    assert!(checked >= 18);
}

#[test]
fn analytic_nmse_matches_pseudo_inverse() {
    let size = 11;
    let profile = target_magnitude_profile(0.5, size).unwrap();
    let ideal = GainMask::ideal(&profile).unwrap();
    let (_, designed) = design(0.5, size, 4, 100).unwrap();
    for seed in 0..10u64 {
        let t = random_trajectory(size, size, seed).unwrap();
        let scene = random_scene(3, size, size, seed, 0).unwrap();
        let bins: Vec<(usize, usize)> = scene
            .targets()
            .iter()
            .map(|x| (x.doppler_bin, x.angle_bin))
            .collect();
        let cols: Vec<usize> = bins.iter().map(|&(p, q)| q * size + p).collect();
        let sub = explicit_sensing(&t).select_columns(&cols);
        let pinv = sub.pseudo_inverse(1e-14).unwrap();
        let cov = &pinv * pinv.adjoint();
        let support = SupportSet::new(bins.clone()).unwrap();
        for mask in [&ideal, &designed] {
            let nominal = size as f64 * (1.0 - 0.5) / (size - 1) as f64;
            let want: f64 = bins
                .iter()
                .enumerate()
                .map(|(i, &(_, q))| cov[(i, i)].re * nominal / mask.get(q).norm_sqr())
                .sum::<f64>()
                / (3.0 * 100.0);
            let got = match nmse_analytic(&support, &t, mask, 100.0, 3, ColumnScaling::Raw) {
                Ok(v) => v,
                Err(_) => continue,
            };
            assert!((got - want).abs() <= 1e-9 * want, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn coherence_matches_brute_force_over_column_pairs() {
    for (m, n, seed) in [(5, 5, 1), (7, 5, 2), (6, 9, 3), (11, 11, 4)] {
        let t = random_trajectory(m, n, seed).unwrap();
        let a = explicit_sensing(&t);
        let norms: Vec<f64> = (0..a.ncols()).map(|i| a.column(i).norm()).collect();
        let mut brute = 0.0f64;
        for i in 0..a.ncols() {
            for j in i + 1..a.ncols() {
                let ip = a.column(i).dotc(&a.column(j)).norm() / (norms[i] * norms[j]);
                brute = brute.max(ip);
            }
        }
        let direct = coherence_direct(&t).unwrap();
        let via_psf = analyze(&t).coherence;
        assert!((brute - direct).abs() < 1e-12, "{m}x{n}");
        assert!((brute - via_psf).abs() < 1e-12, "{m}x{n}");
    }
}
