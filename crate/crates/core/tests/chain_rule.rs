mod common;

use rigidity::chain_rule::{
    check_composition_inequality, compose_derivative, default_constants, expand, intermediate_derivative_bound,
};
use rigidity::curves::{build_curve, default_bump};
use rigidity::integral_geometry::{LineCertificate, LineThroughPoint, SelectionRule};
use rigidity::testfields::{PolyCurve, TestField};

fn poly(n: usize, terms: &[(&[u32], f64)]) -> TestField {
    TestField::Polynomial { n, terms: terms.iter().map(|(a, c)| (a.to_vec(), *c)).collect() }
}

#[test]
fn constants_from_expansions() {
    let c = default_constants(1, 2).unwrap();
    assert_eq!((c.b1, c.b2), (3.0, 3.0));
    let c = default_constants(1, 4).unwrap();
    assert_eq!((c.b1, c.b2), (7.0, 15.0));
    let e = expand(1, 5).unwrap();
    assert_eq!(e.terms.len(), 7);
    assert_eq!(e.max_coefficient(), 15);
    for n in 1..=3 {
        let c = default_constants(n, 1).unwrap();
        assert!((c.c4 - 0.2 * c.c1).abs() <= 1e-15 * c.c1);
    }
}

#[test]
fn composition_examples() {
    // Linear f along a straight line.
    let f = poly(2, &[(&[1, 0], 0.7), (&[0, 1], -1.3), (&[0, 0], 0.2)]);
    let line = PolyCurve { coeffs: vec![vec![0.1, -0.2], vec![0.3, 0.5]] };
    for m in 2..=5 {
        assert_eq!(compose_derivative(&f, &line, 0.4, m).unwrap(), 0.0);
    }

    // x³ along t²: g(t) = t⁶.
    let f = poly(1, &[(&[3], 1.0)]);
    let c = PolyCurve { coeffs: vec![vec![0.0], vec![0.0], vec![1.0]] };
    assert!((compose_derivative(&f, &c, 1.0, 3).unwrap() - 120.0).abs() < 1e-12);

    // sin x · cos y along (t²/2, t/3), third derivative at 0 by five-point differences of g.
    let f =
        TestField::TrigProduct { amplitude: 1.0, freq: vec![1.0, 1.0], phase: vec![0.0, std::f64::consts::FRAC_PI_2] };
    let c = PolyCurve { coeffs: vec![vec![0.0, 0.0], vec![0.0, 1.0 / 3.0], vec![0.5, 0.0]] };
    let exact = compose_derivative(&f, &c, 0.0, 3).unwrap();
    let g = |t: f64| (t * t / 2.0).sin() * (t / 3.0).cos();
    let h = 1e-2;
    let fd = (g(2.0 * h) - 2.0 * g(h) + 2.0 * g(-h) - g(-2.0 * h)) / (2.0 * h * h * h);
    let second = |t: f64| {
        let g2 = |s: f64| (g(s + 1e-4) - 2.0 * g(s) + g(s - 1e-4)) / 1e-8;
        g2(t)
    };
    let (ridders, _) = common::ridders(&second, 0.0, 0.05);
    assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "{exact} vs {fd}");
    assert!((exact - ridders).abs() <= 1e-6 * exact.abs().max(1.0), "{exact} vs {ridders}");
}

#[test]
fn straight_curve_inequality() {
    let line = LineThroughPoint::new(vec![1.0, 0.0], vec![-1.0, 0.0]).unwrap();
    let cert = LineCertificate::from_points(line, vec![vec![0.2, 0.0], vec![0.1, 0.0]], 0, 0.001, SelectionRule::Given)
        .unwrap();
    let spec = build_curve(&cert, default_bump()).unwrap();
    let c = default_constants(2, 1).unwrap();
    let f = poly(2, &[(&[2, 0], 1.0), (&[1, 1], -0.5), (&[0, 2], 2.0), (&[1, 0], 0.3)]);
    for i in 0..=10 {
        let eta = -1.0 + i as f64 / 5.0;
        let r = check_composition_inequality(&f, &spec, &c, eta).unwrap();
        assert_eq!(r.nu_d, 0.0);
        assert!((r.rhs - c.c1 * r.g_derivative.abs() / r.velocity.powi(2)).abs() <= 1e-12 * r.rhs.abs().max(1.0));
        assert!(r.slack >= 0.0);
    }
}

#[test]
fn low_degree_fields_have_no_top_derivative() {
    for seed in 0..20u64 {
        let d = 1 + (seed % 3) as usize;
        let cert = common::admissible_certificate(500 + seed, 2, d);
        let mut spec = build_curve(&cert, default_bump()).unwrap();
        if spec.nu_d > 1.0 {
            spec = build_curve(&common::scaled_certificate(500 + seed, 2, d, 0.9 / spec.nu_d), default_bump()).unwrap();
        }
        let c = default_constants(2, d).unwrap();
        let terms: Vec<(Vec<u32>, f64)> = rigidity::multi::graded_lex(2, d as u32)
            .into_iter()
            .enumerate()
            .map(|(i, a)| (a, 0.3 + 0.1 * i as f64))
            .collect();
        let f = TestField::Polynomial { n: 2, terms };
        for i in 0..=10 {
            let r = check_composition_inequality(&f, &spec, &c, -1.0 + i as f64 / 5.0).unwrap();
            assert_eq!(r.lhs, 0.0);
            assert!(r.rhs <= 1e-12);
            assert!(r.g_derivative.abs() <= c.c2 * r.mu_d * r.nu_d + 1e-12);
        }
    }
}

#[test]
fn chebyshev_intermediate_derivatives() {
    // T_{d+1}(x) = cos((d+1)·arccos x): sup 1 on [−1, 1], top derivative (d+1)!·2^d.
    for d in 1..=3usize {
        let c = default_constants(1, d).unwrap();
        let cheb: [&[f64]; 3] = [&[-1.0, 0.0, 2.0], &[0.0, -3.0, 0.0, 4.0], &[1.0, 0.0, -8.0, 0.0, 8.0]];
        let coeffs = cheb[d - 1];
        let top = rigidity::multi::factorial(d as u32 + 1) * 2f64.powi(d as i32);
        let bounds = intermediate_derivative_bound(d, 1.0, top, &c).unwrap();
        for k in 1..=d {
            let mk = (0..=20_000)
                .map(|i| -1.0 + i as f64 / 10_000.0)
                .map(|x| {
                    coeffs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j >= k)
                        .map(|(j, a)| {
                            let fall: f64 = ((j - k + 1)..=j).map(|q| q as f64).product();
                            a * fall * x.powi((j - k) as i32)
                        })
                        .sum::<f64>()
                        .abs()
                })
                .fold(0.0, f64::max);
            assert!(mk <= bounds[k - 1], "d = {d}, k = {k}: {mk} > {}", bounds[k - 1]);
        }
    }
}
