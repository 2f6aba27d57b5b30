use rigidity::geometry::{random_points, PointSet};
use rigidity::remez::{density_remez_bound, remez_bounds, triangle, RemezDomain};
use rigidity::testfields::{empirical_sup, vanishing_on, ScalarField};
use rigidity::Error;

#[test]
fn dense_disk_grid_norms_linear_polynomials() {
    let h = 0.05;
    let steps = (1.0 / h) as i32;
    let mut pts = Vec::new();
    for i in -steps..=steps {
        for j in -steps..=steps {
            let p = vec![i as f64 * h, j as f64 * h];
            if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                pts.push(p);
            }
        }
    }
    let z = PointSet::explicit_raw(pts, "disk grid").unwrap();
    let e = remez_bounds(&z, 1, 40, RemezDomain::Ball).unwrap();
    assert!(!e.degenerate);
    assert!(e.lower >= 1.0 - 1e-9 && e.lower <= 1.05, "{}", e.lower);
    assert!(e.upper >= e.lower);
}

#[test]
fn density_bound_thresholds() {
    // |Z|·ρ = 4ρ in one dimension: exactly at the threshold.
    let z = PointSet::explicit(vec![vec![0.0], vec![0.1], vec![0.2], vec![0.3]], "four").unwrap();
    assert!(matches!(density_remez_bound(&z, 1, None), Err(Error::BelowDensityThreshold(_))));
    let z = random_points(2, 10, 4).unwrap();
    assert!(matches!(density_remez_bound(&z, 1, None), Err(Error::BelowDensityThreshold(_))));
    let pts: Vec<Vec<f64>> = (0..60).map(|k| vec![-0.3 + 0.01 * k as f64]).collect();
    let b = density_remez_bound(&PointSet::explicit(pts, "dense").unwrap(), 1, Some(0.01)).unwrap();
    // (d+1)!/2 · ((|Z|ρ − 4ρ)/4)^d with |Z| = 60, ρ = 0.01.
    assert!((b - (60.0 * 0.01 - 4.0 * 0.01) / 4.0).abs() < 1e-12);
}

#[test]
fn vanishing_fields() {
    let origin = PointSet::explicit(vec![vec![0.0, 0.0]], "origin").unwrap();
    let f = vanishing_on(&origin, 2, 3).unwrap();
    assert!(f.value(&[0.0, 0.0]).unwrap().abs() < 1e-12);
    let sup = empirical_sup(&f, 100_000, 9).unwrap();
    assert!((sup - 1.0).abs() <= 1e-3, "{sup}");

    let tri = triangle(0.1).unwrap();
    let f = vanishing_on(&tri, 2, 3).unwrap();
    for p in tri.points().unwrap() {
        assert!(f.value(&p).unwrap().abs() <= 1e-12);
    }
}
