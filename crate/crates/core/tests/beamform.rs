mod common;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use usvar::beamform::{
    beamform, compute_delays, ebmv_pixel, ebmv_weights, estimate_covariance, mv_weights, signal_subspace,
    BeamformMethod, BeamformerConfig, CovarianceEstimate, DelayedDataMatrix,
};
use usvar::simulate::{simulate_channel_data, Acquisition, Pulse, ScattererCloud};
use usvar::{ImagingGrid, ProbeGeometry};

fn probe(n: usize) -> ProbeGeometry {
    ProbeGeometry::linear(n, 3e-4, 5e6, 20e6, 1540.0).unwrap()
}

fn cov(r: DMatrix<f64>) -> CovarianceEstimate {
    CovarianceEstimate {
        subarray_length: r.nrows(),
        r,
        loading: 0.0,
    }
}

#[test]
fn steered_delays_match_scalar_recompute() {
    let geometry = probe(16);
    let grid = ImagingGrid::from_bounds(-2e-3, 2e-3, 5e-4, 10e-3, 12e-3, 5e-4).unwrap();
    let theta = 10f64.to_radians();
    let d = compute_delays(&grid, &geometry, theta);
    let c = geometry.sound_speed;
    for (i, &z) in grid.z.iter().enumerate() {
        for (j, &x) in grid.x.iter().enumerate() {
            for (e, &xe) in geometry.element_positions.iter().enumerate() {
                let want = (z * theta.cos() + x * theta.sin()) / c + (x - xe).hypot(z) / c;
                let got = d[(i, j, e)];
                assert!(((got - want) / want).abs() <= 1e-15, "{got} vs {want}");
            }
        }
    }
}

#[test]
fn loaded_covariance_is_positive_definite() {
    for seed in 0..5 {
        let (ne, np, l) = (12, 3, 7);
        let y = DelayedDataMatrix::new(Array2::from_shape_vec((ne, np), common::normals(seed, ne * np)).unwrap());
        let c = estimate_covariance(&y, l, 0.01).unwrap();
        let min = common::jacobi_eigenvalues(&c.r)[0];
        assert!(min >= c.loading * (1.0 - 1e-12), "min eigenvalue {min} < {}", c.loading);
    }
}

#[test]
fn mv_weights_satisfy_the_constraint() {
    for seed in 0..1000 {
        let n = 2 + (seed as usize % 9);
        let w = mv_weights(&cov(common::random_spd(seed, n, 0.1))).unwrap();
        assert!((w.sum() - 1.0).abs() <= 1e-12, "seed {seed}: 1ᵀw = {}", w.sum());
    }
}

#[test]
fn eigenbasis_reconstructs_and_projects() {
    for seed in 0..20 {
        let r = common::random_spd(100 + seed, 10, 0.5);
        let basis = signal_subspace(&cov(r.clone()), 0.05).unwrap();
        let v = &basis.eigenvectors;
        let back = v * DMatrix::from_diagonal(&DVector::from_vec(basis.eigenvalues.clone())) * v.transpose();
        assert!((&back - &r).norm() / r.norm() <= 1e-10);
        let es = basis.signal_vectors();
        let p = &es * es.transpose();
        assert!((&p * &p - &p).norm() <= 1e-10);
        let oracle = common::jacobi_eigenvalues(&r);
        for (a, b) in basis.eigenvalues.iter().rev().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * oracle[oracle.len() - 1]);
        }
    }
}

#[test]
fn subspace_size_extremes() {
    let r = common::random_spd(7, 8, 0.1);
    assert_eq!(signal_subspace(&cov(r), 1e-300).unwrap().selected, 8);
    let u = DVector::from_vec(common::normals(8, 8));
    let r = &u * u.transpose() + DMatrix::identity(8, 8) * 1e-6;
    assert_eq!(signal_subspace(&cov(r), 0.05).unwrap().selected, 1);
}

#[test]
fn ebmv_projection_is_a_projection() {
    let r = common::random_spd(3, 6, 0.2);
    let c = cov(r);
    let w = mv_weights(&c).unwrap();
    let basis = signal_subspace(&c, 0.05).unwrap();
    let once = ebmv_weights(&w, &basis);
    let twice = ebmv_weights(&once, &basis);
    assert!((&once - &twice).norm() <= 1e-12 * once.norm());
}

#[test]
fn ebmv_pixel_is_scale_equivariant() {
    let cfg = BeamformerConfig {
        subarray_length: Some(5),
        ..BeamformerConfig::default()
    };
    for seed in 0..10 {
        let y = Array2::from_shape_vec((12, 1), common::normals(50 + seed, 12)).unwrap();
        let base = ebmv_pixel(&DelayedDataMatrix::new(y.clone()), &cfg).unwrap();
        for alpha in [1e-3, 0.5, 7.0, 1e4] {
            let scaled = ebmv_pixel(&DelayedDataMatrix::new(&y * alpha), &cfg).unwrap();
            assert!((scaled - alpha * base).abs() <= 1e-9 * (alpha * base).abs().max(1e-300));
        }
    }
}

fn point_scene(x0: f64, z0: f64) -> (usvar::ChannelData, ImagingGrid) {
    let geometry = probe(64);
    let mut cloud = ScattererCloud::default();
    cloud.push(x0, z0, 1.0);
    let acq = Acquisition {
        transmit_angle: 0.0,
        pulse: Pulse::new(5e6, 0.6).unwrap(),
        noise_std: 0.0,
        seed: 0,
        start_time: 0.0,
        sample_count: 400,
    };
    let data = simulate_channel_data(&cloud, &geometry, &acq).unwrap();
    let grid = ImagingGrid::from_bounds(-1.5e-3, 1.5e-3, 1e-4, 10e-3, 13e-3, 5e-5).unwrap();
    (data, grid)
}

#[test]
fn single_scatterer_is_imaged_at_its_position() {
    let (x0, z0) = (4e-4, 11.5e-3);
    let (data, grid) = point_scene(x0, z0);
    for method in [BeamformMethod::Das, BeamformMethod::Ebmv] {
        let img = beamform(method, &data, &grid, &BeamformerConfig::default()).unwrap();
        let env = usvar::signal::envelope_detect(&img).unwrap();
        let ((i, j), _) = env
            .values
            .indexed_iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((grid.x[j] - x0).abs() <= grid.dx(), "{method:?}: x {}", grid.x[j]);
        assert!((grid.z[i] - z0).abs() <= grid.dz(), "{method:?}: z {}", grid.z[i]);
    }
}
