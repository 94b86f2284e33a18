#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use usvar::rng::{fill_standard_normal, Domain};

pub fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_standard_normal(seed, Domain::Test, 0, &mut v);
    v
}

/// Analytic-signal magnitude through an O(N²) DFT.
pub fn dft_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for k in 0..n {
        for (t, &v) in x.iter().enumerate() {
            let a = -2.0 * PI * (k * t % n) as f64 / nf;
            re[k] += v * a.cos();
            im[k] += v * a.sin();
        }
    }
    let h = |k: usize| -> f64 {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        }
    };
    (0..n)
        .map(|t| {
            let (mut zr, mut zi) = (0.0, 0.0);
            for k in 0..n {
                let a = 2.0 * PI * (k * t % n) as f64 / nf;
                let (c, s) = (a.cos(), a.sin());
                zr += h(k) * (re[k] * c - im[k] * s);
                zi += h(k) * (re[k] * s + im[k] * c);
            }
            (zr * zr + zi * zi).sqrt() / nf
        })
        .collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-26 * a.norm_squared() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Random symmetric positive definite matrix `A Aᵀ + δ I`.
pub fn random_spd(seed: u64, n: usize, delta: f64) -> DMatrix<f64> {
    let a = DMatrix::from_vec(n, n, normals(seed, n * n));
    &a * a.transpose() + DMatrix::identity(n, n) * delta
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
