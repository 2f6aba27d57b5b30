use rigidity::certifier::{certify, thickness_upper_bound, CertifyConfig, CertifyOutcome, Route};
use rigidity::chain_rule::default_constants;
use rigidity::geometry::{random_points, ImplicitGrid, PointSet};
use rigidity::integral_geometry::{LineThroughPoint, SearchBudget};
use rigidity::multi::factorial;
use rigidity::Error;

// At ε = h every cube holds one grid point, M·ε² = s², and κ = 8·10⁻⁴ meets both the
// covering condition M ≥ ξ₁κε⁻² and ε < κ/(10√2).
const H: f64 = 5e-5;
const KAPPA: f64 = 8e-4;

fn fine_grid() -> (ImplicitGrid, PointSet) {
    let g = ImplicitGrid { s: 0.2, h: H, offset: vec![H / 2.0; 2], corner: vec![-0.1, -0.1] };
    (g.clone(), PointSet::grid(g, "fine grid").unwrap())
}

#[test]
fn thickness_through_a_grid_row_is_zero() {
    let (g, z) = fine_grid();
    let y = g.coord(1, 2000);
    let z0 = vec![(1.0 - y * y).sqrt(), y];
    let line = LineThroughPoint::new(z0.clone(), vec![-1.0, 0.0]).unwrap();
    let c = default_constants(2, 1).unwrap();
    let r = thickness_upper_bound(&z, &z0, 1, H, KAPPA, &c, Some(&line), SearchBudget::default(), 0).unwrap();
    assert_eq!(r.certificate.rho, 0.0);
    assert_eq!(r.nu_d, 0.0);
    assert!(r.certificate.kappa >= KAPPA);
}

#[test]
fn thickness_meets_the_entropy_bound() {
    let (_, z) = fine_grid();
    let c = default_constants(2, 1).unwrap();
    for (i, z0) in [[1.0, 0.0], [0.6, 0.8], [-0.28, -0.96]].iter().enumerate() {
        let r = thickness_upper_bound(&z, z0, 1, H, KAPPA, &c, None, SearchBudget::default(), i as u64).unwrap();
        assert!(r.search.as_ref().unwrap().reached);
        assert!(r.covering_number as f64 >= r.covering_required);
        assert!(r.certificate.rho <= 2f64.sqrt() * H);
        assert!(r.nu_d <= r.nu_bound, "{} > {}", r.nu_d, r.nu_bound);
        assert!((r.nu_bound - c.xi2 * H / KAPPA.powi(2)).abs() <= 1e-12 * r.nu_bound);
    }
}

#[test]
fn sparse_sets_fail_the_covering_gate() {
    let z = random_points(2, 10, 1).unwrap();
    let c = default_constants(2, 1).unwrap();
    let r = thickness_upper_bound(&z, &[1.0, 0.0], 1, 0.001, 0.05, &c, None, SearchBudget::default(), 0);
    assert!(matches!(r, Err(Error::DensityInsufficient(_))));
}

#[test]
fn one_dimensional_certify() {
    let cfg = CertifyConfig::default();
    let two = PointSet::explicit(vec![vec![0.1], vec![-0.2]], "two").unwrap();
    assert!(matches!(certify(&two, 2, 4, &cfg).unwrap(), CertifyOutcome::NoCertificate(_)));
    let three = PointSet::explicit(vec![vec![0.1], vec![-0.2], vec![0.3]], "three").unwrap();
    match certify(&three, 2, 4, &cfg).unwrap() {
        CertifyOutcome::Certificate(c) => {
            assert_eq!(c.route, Route::OneD);
            assert_eq!(c.bound, factorial(3) / 8.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn sparse_random_points_have_no_certificate() {
    let z = random_points(2, 10, 11).unwrap();
    match certify(&z, 1, 4, &CertifyConfig::default()).unwrap() {
        CertifyOutcome::NoCertificate(nc) => {
            assert_eq!(nc.bottleneck, "zeta_d = 0");
            assert_eq!(nc.profile.unwrap().zeta_d, 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn outcome_json_round_trip() {
    let z = random_points(2, 10, 11).unwrap();
    let out = certify(&z, 1, 4, &CertifyConfig::default()).unwrap();
    let json = serde_json::to_string(&out).unwrap();
    assert!(json.contains("\"outcome\":\"no_certificate\""));
    let back: CertifyOutcome = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out);

    // Covering numbers of fine grids exceed 2^64.
    let h = 0.1 / 2f64.powi(32);
    let g = ImplicitGrid { s: 0.2, h, offset: vec![0.37 * h; 2], corner: vec![-0.1, -0.1] };
    let z = PointSet::grid(g, "fine").unwrap();
    let out = certify(&z, 1, 1, &CertifyConfig::default()).unwrap();
    let json = serde_json::to_string(&out).unwrap();
    let back: CertifyOutcome = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out);
    let CertifyOutcome::Certificate(c) = back else { panic!("expected a certificate") };
    assert_eq!(rigidity::certifier::verify_certificate(&c, &z).unwrap(), c.bound);
}
