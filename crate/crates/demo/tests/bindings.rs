use jcr_demo::{design_beam, sampling_psf, tradeoff};

#[test]
fn beam_view_has_requested_shape() {
    let v = design_beam(31, 0.5, 4, 50, 0, 181).unwrap();
    assert_eq!(v.sin_theta().len(), 181);
    assert_eq!(v.gain_db().len(), 181);
    assert_eq!(v.dft_magnitudes().len(), 31);
    assert!(v.gain_db().iter().all(|g| *g >= -40.0 - 1e-12 && g.is_finite()));
    // Broadside carries the communication beam.
    let mid = v.gain_db()[90];
    assert!(v.gain_db().iter().all(|g| *g <= mid + 1e-9));
}

#[test]
fn shifting_preserves_dft_magnitudes() {
    let a = design_beam(17, 0.5, 4, 30, 0, 8).unwrap().dft_magnitudes();
    let b = design_beam(17, 0.5, 4, 30, 5, 8).unwrap().dft_magnitudes();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn optimized_psf_is_flat() {
    let v = sampling_psf(13, false, 0).unwrap();
    assert!((v.coherence() - 1.0 / 13f64.sqrt()).abs() < 1e-9);
    assert_eq!(v.magnitudes().len(), 169);
    assert!(sampling_psf(12, false, 0).is_err());
    assert!(sampling_psf(12, true, 3).unwrap().coherence() > 1.0 / 12f64.sqrt());
}

#[test]
fn tradeoff_endpoints() {
    let comm = tradeoff(31, 2, -10.0, 20.0, 1.0, true).unwrap();
    assert_eq!((comm.chosen_rho(), comm.chosen_delta()), (1, 0.99));
    let radar = tradeoff(31, 2, -10.0, 20.0, 0.0, true).unwrap();
    assert_eq!(radar.chosen_rho(), 53);
    assert!(!radar.hull().is_empty());
    assert!(tradeoff(30, 2, -10.0, 20.0, 0.5, true).is_err());
}
