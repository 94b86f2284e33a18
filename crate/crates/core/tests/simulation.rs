mod common;

use std::f64::consts::PI;

use usvar::simulate::{simulate_channel_data, Acquisition, Pulse, ScattererCloud};
use usvar::ProbeGeometry;

fn probe() -> ProbeGeometry {
    ProbeGeometry::linear(8, 4e-4, 5e6, 40e6, 1540.0).unwrap()
}

fn acquisition(angle: f64) -> Acquisition {
    Acquisition {
        transmit_angle: angle,
        pulse: Pulse::new(5e6, 0.6).unwrap(),
        noise_std: 0.0,
        seed: 0,
        start_time: 5e-6,
        sample_count: 600,
    }
}

/// Untruncated direct evaluation of every sample.
fn direct(cloud: &ScattererCloud, geometry: &ProbeGeometry, acq: &Acquisition) -> Vec<Vec<f64>> {
    let (c, fs, f0) = (geometry.sound_speed, geometry.sampling_frequency, acq.pulse.center_frequency);
    let s = (2.0 * 2f64.ln()).sqrt() / (PI * acq.pulse.fractional_bandwidth * f0);
    let cut = s * (2.0 * 1e4f64.ln()).sqrt();
    geometry
        .element_positions
        .iter()
        .map(|&xe| {
            (0..acq.sample_count)
                .map(|n| {
                    let t = acq.start_time + n as f64 / fs;
                    let mut sum = 0.0;
                    for (&(x, z), &a) in cloud.positions.iter().zip(&cloud.amplitudes) {
                        let tau = (z * acq.transmit_angle.cos() + x * acq.transmit_angle.sin()) / c
                            + ((x - xe).powi(2) + z * z).sqrt() / c;
                        let u = t - tau;
                        if u.abs() <= cut {
                            sum += a * (-(u * u) / (2.0 * s * s)).exp() * (2.0 * PI * f0 * u).cos();
                        }
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

#[test]
fn matches_direct_summation() {
    let geometry = probe();
    let mut cloud = ScattererCloud::default();
    let v = common::normals(5, 30);
    for k in 0..10 {
        cloud.push(v[3 * k] * 1e-3, 8e-3 + v[3 * k + 1].abs() * 1e-3, v[3 * k + 2]);
    }
    for angle in [0.0, 0.2] {
        let acq = acquisition(angle);
        let data = simulate_channel_data(&cloud, &geometry, &acq).unwrap();
        let want = direct(&cloud, &geometry, &acq);
        for (e, col) in want.iter().enumerate() {
            for (n, w) in col.iter().enumerate() {
                assert!((data.samples[(n, e)] - w).abs() <= 1e-12, "angle {angle} e {e} n {n}");
            }
        }
    }
}

#[test]
fn echo_peaks_at_the_round_trip_time() {
    let geometry = probe();
    let z0 = 9e-3;
    let mut cloud = ScattererCloud::default();
    cloud.push(0.0, z0, 1.0);
    let acq = acquisition(0.0);
    let data = simulate_channel_data(&cloud, &geometry, &acq).unwrap();
    let fs = geometry.sampling_frequency;
    for (e, &d) in geometry.element_positions.iter().enumerate() {
        let expected = z0 / 1540.0 + (z0 * z0 + d * d).sqrt() / 1540.0;
        let col = data.samples.column(e);
        let peak = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        let t = acq.start_time + peak as f64 / fs;
        assert!((t - expected).abs() <= 0.5 / fs, "element {e}: {t} vs {expected}");
    }
}
