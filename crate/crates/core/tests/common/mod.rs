#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidity::integral_geometry::{LineCertificate, LineThroughPoint, SelectionRule};

/// Ridders' extrapolated central difference: returns (derivative, error estimate).
pub fn ridders(f: &dyn Fn(f64) -> f64, x: f64, h0: f64) -> (f64, f64) {
    const NTAB: usize = 12;
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (best, err)
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// A line certificate with κ < 1/10, ρ ≤ κ/10 and anchors inside the admissible parameter range.
pub fn admissible_certificate(seed: u64, n: usize, d: usize) -> LineCertificate {
    scaled_certificate(seed, n, d, 1.0)
}

/// Same draws as `admissible_certificate` with every offset multiplied by `scale` ≤ 1.
pub fn scaled_certificate(seed: u64, n: usize, d: usize, scale: f64) -> LineCertificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = unit_vector(&mut rng, n);
    let target: Vec<f64> = unit_vector(&mut rng, n).iter().map(|x| x * rng.gen_range(0.0..0.3)).collect();
    let line = LineThroughPoint::toward(&z0, &target).expect("target inside the small ball");
    let kappa = rng.gen_range(0.02..0.08);
    let rho = kappa / 10.0 * rng.gen_range(0.0..1.0);
    let mut tau = rng.gen_range(0.5 * kappa..0.6);
    let mut points = Vec::new();
    for _ in 0..=d {
        let mut w = unit_vector(&mut rng, n);
        let p: f64 = w.iter().zip(&line.direction).map(|(a, b)| a * b).sum();
        for (wi, vi) in w.iter_mut().zip(&line.direction) {
            *wi -= p * vi;
        }
        let r = w.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let len = scale * rho * rng.gen_range(0.0..1.0);
        points.push(line.point(tau).iter().zip(&w).map(|(a, b)| a + b / r * len).collect::<Vec<f64>>());
        tau += kappa * rng.gen_range(1.0..1.2);
    }
    LineCertificate::from_points(line, points, 0, 0.001, SelectionRule::Given).unwrap()
}
