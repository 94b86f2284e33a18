mod common;

use usvar::phantom::{draw_reflectivity, empirical_sample, make_phantom, PhantomSpec, Primitive, SpeckleField};
use usvar::ImagingGrid;

fn unit_grid(nx: usize, nz: usize) -> ImagingGrid {
    ImagingGrid::from_bounds(0.0, (nx - 1) as f64, 1.0, 0.0, (nz - 1) as f64, 1.0).unwrap()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn unit_echogenicity_gives_unit_variance() {
    let grid = unit_grid(1000, 1000);
    let phantom = make_phantom(&PhantomSpec::default(), &grid).unwrap();
    let o = draw_reflectivity(&phantom, 2024).o;
    let var = variance(o.as_slice().unwrap());
    assert!((0.99..=1.01).contains(&var), "variance {var}");
}

#[test]
fn region_variance_is_level_squared() {
    let grid = unit_grid(400, 300);
    let spec = PhantomSpec {
        background: 1.0,
        primitives: vec![Primitive::Rectangle {
            name: Some("bright".into()),
            x_min: 0.0,
            x_max: 399.0,
            z_min: 0.0,
            z_max: 249.0,
            level: 4.0,
        }],
        points: vec![],
    };
    let phantom = make_phantom(&spec, &grid).unwrap();
    let o = draw_reflectivity(&phantom, 9).o;
    let id = phantom.label_of("bright").unwrap();
    let v: Vec<f64> = o.iter().zip(phantom.labels.iter()).filter(|(_, &l)| l == id).map(|(&x, _)| x).collect();
    assert_eq!(v.len(), 100_000);
    let var = variance(&v);
    assert!((var / 16.0 - 1.0).abs() <= 0.03, "variance {var}");
}

#[test]
fn empirical_samples_center_on_reflectivity() {
    let grid = unit_grid(2, 2);
    let spec = PhantomSpec {
        background: 2.0,
        ..PhantomSpec::default()
    };
    let phantom = make_phantom(&spec, &grid).unwrap();
    let speckle = SpeckleField::draw(&grid, 1);
    let draws: Vec<_> = (0..10_000u64).map(|k| empirical_sample(&phantom, &speckle, k).unwrap()).collect();
    for (idx, &m) in speckle.m.indexed_iter() {
        let v: Vec<f64> = draws.iter().map(|d| d.values[idx]).collect();
        let (mean, se) = common::mean_and_se(&v);
        assert!((mean - 2.0 * m).abs() <= 3.0 * se, "pixel {idx:?}: {mean} vs {}", 2.0 * m);
        let var = variance(&v);
        assert!((var / 2.0 - 1.0).abs() <= 0.05, "pixel {idx:?}: variance {var}");
    }
}
