mod common;

use proptest::prelude::*;
use rigidity::certifier::one_d_lower_bound;
use rigidity::chain_rule::expand;
use rigidity::curves::{build_curve, curve_eval, default_bump};
use rigidity::geometry::{covering_number, GridSpec, PointSet};
use rigidity::multi::factorial;
use rigidity::remez::{remez_bounds, RemezDomain};
use rigidity::testfields::{exact_partials, random_field};

/// Number of set partitions of {1..m} whose block sizes form the multiset `sizes`.
fn partition_count(sizes: &[u32]) -> u64 {
    let m: u32 = sizes.iter().sum();
    let mut count = factorial(m);
    for &s in sizes {
        count /= factorial(s);
    }
    let mut run = 1;
    for w in sizes.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            count /= factorial(run);
            run = 1;
        }
    }
    count /= factorial(run);
    count.round() as u64
}

fn compositions(m: u32, max_part: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if m == 0 {
        out.push(prefix.clone());
        return;
    }
    let lo = prefix.last().copied().unwrap_or(1);
    for p in lo..=m.min(max_part) {
        prefix.push(p);
        compositions(m - p, max_part, prefix, out);
        prefix.pop();
    }
}

#[test]
fn univariate_coefficients_count_set_partitions() {
    for m in 1..=6 {
        let e = expand(1, m).unwrap();
        let mut shapes = Vec::new();
        compositions(m, m, &mut Vec::new(), &mut shapes);
        for s in shapes {
            assert_eq!(e.coefficient_1d(&s), partition_count(&s), "m = {m}, shape {s:?}");
        }
    }
    assert_eq!(partition_count(&[1, 1, 3]), 10);
}

fn point_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.33f64..0.33, n).prop_map(|p| {
        let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1.0 / 3.0 {
            p.iter().map(|x| x / r / 3.0 * 0.999).collect()
        } else {
            p
        }
    })
}

proptest! {
    #[test]
    fn one_d_bound_holds(
        d in 1usize..=4,
        raw in prop::collection::vec(-1.0f64 / 3.0..1.0 / 3.0, 5),
        t0 in -1.0f64..1.0,
        sign in prop::bool::ANY,
    ) {
        let mut zeros: Vec<f64> = raw[..=d].to_vec();
        zeros.sort_by(f64::total_cmp);
        prop_assume!(zeros.windows(2).all(|w| w[1] - w[0] > 1e-9));
        prop_assume!(zeros.iter().all(|z| (z - t0).abs() > 1e-9));
        let v = if sign { 1.0 } else { -1.0 };
        let b = one_d_lower_bound(t0, &zeros, v).unwrap();
        prop_assert!(b >= factorial(d as u32 + 1) / 2f64.powi(d as i32 + 1) * (1.0 - 1e-12));
    }

    #[test]
    fn covering_is_monotone_and_bounded(
        n in 1usize..=3,
        pts in prop::collection::vec(point_strategy(3), 1..60),
        k in 0usize..6,
        cut in 0usize..60,
    ) {
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p[..n].to_vec()).collect();
        let eps = 0.1 / 2f64.powi(k as i32);
        let g = GridSpec::new(eps).unwrap();
        let all = covering_number(&PointSet::explicit(pts.clone(), "all").unwrap(), g).unwrap();
        let sub = &pts[..cut.clamp(1, pts.len())];
        let part = covering_number(&PointSet::explicit(sub.to_vec(), "sub").unwrap(), g).unwrap();
        prop_assert!(part <= all);
        prop_assert!(all >= 1);
        prop_assert!(all <= (pts.len() as u128) << n);
    }

    #[test]
    fn field_partials_match_differences(n in 1usize..=3, seed in 0u64..1000, x in point_strategy(3), axis in 0usize..3) {
        let axis = axis % n;
        let x = x[..n].to_vec();
        let f = random_field(n, seed);
        for order in 0..=3u32 {
            let mut alpha = vec![0u32; n];
            alpha[axis] = order;
            let mut next = alpha.clone();
            next[axis] += 1;
            let exact = exact_partials(&f, &x, &next).unwrap();
            let g = |t: f64| {
                let mut y = x.clone();
                y[axis] = t;
                exact_partials(&f, &y, &alpha).unwrap()
            };
            let (fd, _) = common::ridders(&g, x[axis], 0.05);
            prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "order {} exact {} fd {}", order + 1, exact, fd);
        }
    }

    #[test]
    fn curve_interpolates_its_anchors(seed in 0u64..10_000, n in 2usize..=4, d in 1usize..=3) {
        let cert = common::admissible_certificate(seed, n, d);
        let curve = build_curve(&cert, default_bump()).unwrap();
        let at = curve_eval(&curve, curve.z0_parameter(), 0).unwrap();
        for (a, b) in at.iter().zip(&cert.line.z0) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for (eta, p) in curve.anchor_parameters().iter().zip(&cert.selected) {
            let at = curve_eval(&curve, *eta, 0).unwrap();
            for (a, b) in at.iter().zip(p) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
        prop_assert!(curve.m1 <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn remez_constant_shrinks_on_supersets(
        pts in prop::collection::vec(point_strategy(2), 4..9),
        extra in prop::collection::vec(point_strategy(2), 1..4),
    ) {
        let small = PointSet::explicit(pts.clone(), "small").unwrap();
        let mut all = pts;
        all.extend(extra);
        let big = PointSet::explicit(all, "big").unwrap();
        let a = remez_bounds(&small, 1, 24, RemezDomain::Ball).unwrap();
        let b = remez_bounds(&big, 1, 24, RemezDomain::Ball).unwrap();
        prop_assume!(!a.degenerate);
        prop_assert!(!b.degenerate);
        prop_assert!(b.lower <= a.lower * (1.0 + 1e-6) + 1e-9, "{} > {}", b.lower, a.lower);
        prop_assert!(b.upper <= a.upper * (1.0 + 1e-6) + 1e-9, "{} > {}", b.upper, a.upper);
    }
}
