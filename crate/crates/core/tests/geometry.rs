use rigidity::chain_rule::default_constants;
use rigidity::geometry::{
    box_dimension_estimate, cantor_set, covering_number, covering_profile_with_xi1, default_ladder, dyadic_ladder,
    random_points, GridSpec, ImplicitGrid, PointSet,
};

#[test]
fn fine_grid_profile_is_admissible_at_spacing() {
    let (s, h) = (0.2, 5e-5);
    let grid = ImplicitGrid { s, h, offset: vec![h / 2.0; 2], corner: vec![-0.1, -0.1] };
    let z = PointSet::grid(grid, "fine").unwrap();
    let xi1 = default_constants(2, 1).unwrap().xi1;
    let ladder = vec![0.1, 0.01, 1e-3, h];
    let p = covering_profile_with_xi1(&z, 1, &ladder, xi1).unwrap();
    let at_h = p.entries.iter().find(|e| e.epsilon == h).unwrap();
    let side = (s / h).round();
    assert!(at_h.covering_number as f64 >= side * side);
    // κ = M h²/ξ₁ against the admissibility threshold 10√2·h.
    assert!(at_h.kappa >= 10.0 * 2f64.sqrt() * h);
    assert!(at_h.admissible);
    assert!(p.zeta_d >= side * side * h.powf(1.5));
}

#[test]
fn sparse_random_profile_has_no_admissible_scale() {
    let z = random_points(2, 10, 3).unwrap();
    let xi1 = default_constants(2, 1).unwrap().xi1;
    let p = covering_profile_with_xi1(&z, 1, &default_ladder(), xi1).unwrap();
    assert!(p.entries.iter().all(|e| !e.admissible));
    assert_eq!(p.zeta_d, 0.0);
    assert_eq!(p.argmax, None);
}

#[test]
fn box_dimension_examples() {
    let point = PointSet::explicit(vec![vec![0.01, 0.02]], "point").unwrap();
    let slope = box_dimension_estimate(&point, &dyadic_ladder(0.1, 6)).unwrap().slope;
    assert!(slope.abs() < 1e-12);

    let h = 1e-3;
    let grid =
        PointSet::grid(ImplicitGrid { s: 0.2, h, offset: vec![h / 2.0; 2], corner: vec![-0.1, -0.1] }, "g").unwrap();
    let ladder: Vec<f64> = dyadic_ladder(0.1, 12).into_iter().filter(|e| *e >= h).collect();
    let slope = box_dimension_estimate(&grid, &ladder).unwrap().slope;
    assert!((slope - 2.0).abs() <= 0.15, "{slope}");

    let cantor = cantor_set(8, 2).unwrap();
    let ladder: Vec<f64> = (2..=7).map(|k| (2.0 / 3.0) / 3f64.powi(k) * 0.999).collect();
    let slope = box_dimension_estimate(&cantor, &ladder).unwrap().slope;
    assert!((slope - 2f64.ln() / 3f64.ln()).abs() <= 0.05, "{slope}");
}

#[test]
fn implicit_and_explicit_grids_agree_off_lattice_scales() {
    let grid = ImplicitGrid { s: 0.15, h: 0.0031, offset: vec![0.0007, 0.0011], corner: vec![-0.07, -0.02] };
    let z = PointSet::grid(grid, "g").unwrap();
    let x = z.to_explicit().unwrap();
    for eps in [0.07, 0.013, 0.0031, 0.0009] {
        let g = GridSpec::new(eps).unwrap();
        assert_eq!(covering_number(&z, g).unwrap(), covering_number(&x, g).unwrap(), "eps = {eps}");
    }
}
