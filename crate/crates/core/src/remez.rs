//! Remez constants of finite sets against polynomials of degree d.
//!
//! `R_d(Z)` is the least `K` with `sup_D |P| ≤ K·sup_Z |P|` for every
//! polynomial of degree at most d. The lower bound maximizes `P(x*)` over
//! sample points `x*` of the domain subject to `|P| ≤ 1` on Z, one linear
//! program per sample point. The upper bound pads the sampled maximum with
//! the Markov inequality for the domain.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::multi::{factorial, graded_lex, monomial};
use crate::testfields::TestField;

/// Largest polynomial space handled.
pub const MAX_MONOMIALS: usize = 200;

const COEFF_BOX: f64 = 1e9;
const LP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemezDomain {
    /// Unit ball `B^n`.
    #[default]
    Ball,
    /// Cube `[−1, 1]^n`.
    Cube,
}

mod extended {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Marker(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_infinite() {
            Repr::Marker(if *x > 0.0 { "inf".into() } else { "-inf".into() }).serialize(s)
        } else {
            Repr::Finite(*x).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(x) => Ok(x),
            Repr::Marker(m) if m == "inf" => Ok(f64::INFINITY),
            Repr::Marker(m) if m == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!("unexpected marker {m}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezEstimate {
    pub n: usize,
    pub d: usize,
    #[serde(with = "extended")]
    pub lower: f64,
    #[serde(with = "extended")]
    pub upper: f64,
    /// Z lies in the zero set of a nonzero polynomial of degree ≤ d.
    pub degenerate: bool,
    /// Graded-lex monomial exponents.
    pub basis: Vec<Vec<u32>>,
    /// Witness coefficients: the maximizer, or a null polynomial when degenerate.
    pub witness: Vec<f64>,
    /// Sample point where the witness attains `lower`.
    pub argmax: Vec<f64>,
    pub domain: RemezDomain,
    pub resolution: usize,
    pub sample_points: usize,
    /// `upper/lower` from the Markov pad.
    #[serde(with = "extended")]
    pub pad: f64,
}

fn vandermonde(points: &[Vec<f64>], basis: &[Vec<u32>]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), basis.len(), |r, c| monomial(&points[r], &basis[c]))
}

/// Sample points of the domain and their covering radius bound factor.
fn domain_samples(n: usize, domain: RemezDomain, resolution: usize) -> Vec<Vec<f64>> {
    let r = resolution.max(2);
    let delta = 2.0 / (r - 1) as f64;
    let total = r.pow(n as u32);
    let reach = delta * (n as f64).sqrt();
    (0..total)
        .filter_map(|mut k| {
            let mut p = vec![0.0; n];
            for x in p.iter_mut() {
                *x = -1.0 + delta * (k % r) as f64;
                k /= r;
            }
            match domain {
                RemezDomain::Cube => Some(p),
                RemezDomain::Ball => {
                    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm <= 1.0 {
                        Some(p)
                    } else if norm <= 1.0 + reach {
                        Some(p.iter().map(|x| x / norm).collect())
                    } else {
                        None
                    }
                }
            }
        })
        .collect()
}

/// `max P(x)` subject to `|P| ≤ 1` on Z, by constraint generation.
fn maximize_at(x: &[f64], vz: &DMatrix<f64>, basis: &[Vec<u32>], seed_rows: &[usize]) -> Result<(f64, Vec<f64>)> {
    let m = basis.len();
    let obj: Vec<f64> = basis.iter().map(|a| monomial(x, a)).collect();
    let mut active: Vec<usize> = seed_rows.to_vec();
    let mut in_active = vec![false; vz.nrows()];
    for &r in &active {
        in_active[r] = true;
    }
    loop {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = obj.iter().map(|&o| lp.add_var(o, (-COEFF_BOX, COEFF_BOX))).collect();
        for &r in &active {
            let row: Vec<_> = (0..m).map(|c| (vars[c], vz[(r, c)])).collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, 1.0);
            lp.add_constraint(row.as_slice(), ComparisonOp::Ge, -1.0);
        }
        let sol = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
        let coeffs: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
        let mut violated: Vec<(f64, usize)> = (0..vz.nrows())
            .filter(|&r| !in_active[r])
            .filter_map(|r| {
                let p: f64 = (0..m).map(|c| vz[(r, c)] * coeffs[c]).sum();
                (p.abs() > 1.0 + LP_TOL).then_some((p.abs(), r))
            })
            .collect();
        if violated.is_empty() {
            if coeffs.iter().any(|c| c.abs() >= COEFF_BOX * 0.999) {
                return Err(Error::Solver("coefficient box reached; Z does not bound the polynomial".into()));
            }
            // Rescale so the returned polynomial is feasible despite solver round-off.
            let sup_z =
                (0..vz.nrows()).map(|r| (0..m).map(|c| vz[(r, c)] * coeffs[c]).sum::<f64>().abs()).fold(1.0, f64::max);
            let value: f64 = obj.iter().zip(&coeffs).map(|(o, c)| o * c).sum();
            let coeffs: Vec<f64> = coeffs.iter().map(|c| c / sup_z).collect();
            return Ok((value / sup_z, coeffs));
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, r) in violated.iter().take(2 * m) {
            in_active[r] = true;
            active.push(r);
        }
    }
}

/// Rows of `vz` chosen greedily to span the column space.
fn spanning_rows(vz: &DMatrix<f64>) -> Vec<usize> {
    let m = vz.ncols();
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut residual_norms: Vec<f64>;
    let rows: Vec<Vec<f64>> = (0..vz.nrows()).map(|r| vz.row(r).iter().cloned().collect()).collect();
    while chosen.len() < m.min(rows.len()) {
        residual_norms = rows
            .iter()
            .map(|row| {
                let mut v = row.clone();
                for b in &basis {
                    let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= p * bi;
                    }
                }
                v.iter().map(|a| a * a).sum::<f64>().sqrt()
            })
            .collect();
        let (best, norm) =
            residual_norms.iter().enumerate().fold((0, -1.0), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        if norm <= 1e-12 {
            break;
        }
        let mut v = rows[best].clone();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= p * bi;
            }
        }
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        basis.push(v.iter().map(|a| a / r).collect());
        chosen.push(best);
    }
    chosen
}

pub fn remez_bounds(z: &PointSet, d: usize, resolution: usize, domain: RemezDomain) -> Result<RemezEstimate> {
    let n = z.n;
    let points = z.points().map_err(|_| Error::TooLarge("Remez bounds need a finite explicit set".into()))?;
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let basis = graded_lex(n, d as u32);
    if basis.len() > MAX_MONOMIALS {
        return Err(Error::TooLarge(format!("{} monomials, at most {MAX_MONOMIALS}", basis.len())));
    }
    let vz = vandermonde(&points, &basis);
    let svd = vz.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
    let resolution = resolution.max(2);
    if rank < basis.len() {
        let witness = null_vector(&vz);
        return Ok(RemezEstimate {
            n,
            d,
            lower: f64::INFINITY,
            upper: f64::INFINITY,
            degenerate: true,
            basis,
            witness,
            argmax: vec![],
            domain,
            resolution,
            sample_points: 0,
            pad: f64::INFINITY,
        });
    }
    let seed_rows = spanning_rows(&vz);
    let samples = domain_samples(n, domain, resolution);
    let results: Vec<(f64, Vec<f64>)> =
        samples.par_iter().map(|x| maximize_at(x, &vz, &basis, &seed_rows)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
    }
    let lower = results[best].0.max(1.0);
    let delta = 2.0 / (resolution - 1) as f64;
    let dd = (d * d) as f64;
    let loss = match domain {
        RemezDomain::Cube => n as f64 * delta * dd / 2.0,
        RemezDomain::Ball => delta * (n as f64).sqrt() * dd / 2.0,
    };
    let upper = if loss < 1.0 { lower / (1.0 - loss) } else { f64::INFINITY };
    Ok(RemezEstimate {
        n,
        d,
        lower,
        upper,
        degenerate: false,
        basis,
        witness: results[best].1.clone(),
        argmax: samples[best].clone(),
        domain,
        resolution,
        sample_points: samples.len(),
        pad: upper / lower,
    })
}

fn null_vector(vz: &DMatrix<f64>) -> Vec<f64> {
    let m = vz.ncols();
    let gram = vz.transpose() * vz;
    let eig = gram.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    (0..m).map(|r| eig.eigenvectors[(r, idx)]).collect()
}

/// Interval information on the rigidity constant from a Remez estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezRigidity {
    pub d: usize,
    /// `(d+1)!/2 · 1/upper`.
    pub lower: f64,
    /// With ρ given, the upper bound is `C(n,d)·upper_factor`; C(n,d) is not known numerically.
    pub upper_factor: Option<f64>,
    pub upper_symbolic: Option<String>,
}

pub fn rigidity_from_remez(est: &RemezEstimate, d: usize, rho_min: Option<f64>) -> RemezRigidity {
    let lower = if est.upper.is_finite() { factorial(d as u32 + 1) / 2.0 / est.upper } else { 0.0 };
    let upper_factor = rho_min.filter(|r| *r > 0.0).map(|rho| {
        if est.lower.is_finite() {
            1.0 / (est.lower * rho.powi(d as i32 + 1))
        } else {
            0.0
        }
    });
    let upper_symbolic = upper_factor.map(|f| format!("C({}, {d}) * {f:e}", est.n));
    RemezRigidity { d, lower, upper_factor, upper_symbolic }
}

/// Smallest pairwise Euclidean distance (sweep along the first coordinate).
pub fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut order: Vec<&Vec<f64>> = points.iter().collect();
    order.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best = f64::INFINITY;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[j][0] - order[i][0] >= best {
                break;
            }
            let d = order[i].iter().zip(order[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Density lower bound `(d+1)!/2·((|Z|ρⁿ − (4d)ⁿρ)/(4n))^d`.
pub fn density_remez_bound(z: &PointSet, d: usize, rho: Option<f64>) -> Result<f64> {
    let n = z.n;
    let points = z.points()?;
    let count = points.len() as f64;
    let rho = match rho {
        Some(r) => r,
        None => min_pairwise_distance(&points),
    };
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::BelowDensityThreshold("need two distinct points".into()));
    }
    let four_d_n = (4.0 * d as f64).powi(n as i32);
    let excess = count * rho.powi(n as i32) - four_d_n * rho;
    if excess <= 0.0 {
        return Err(Error::BelowDensityThreshold(format!(
            "|Z| = {count} does not exceed (4d)^n (1/rho)^(n-1) = {}",
            four_d_n * rho.powi(1 - n as i32)
        )));
    }
    Ok(factorial(d as u32 + 1) / 2.0 * (excess / (4.0 * n as f64)).powi(d as i32))
}

/// `K₁ = 2·3^{n−1}·(4d)ⁿ`.
pub fn k1(n: usize, d: usize) -> f64 {
    2.0 * 3f64.powi(n as i32 - 1) * (4.0 * d as f64).powi(n as i32)
}

/// Bound `(d+1)!/2·(s/(12n))^{nd}` for h-dense sets with `h ≤ sⁿ/K₁`.
pub fn hdense_remez_bound(n: usize, d: usize, s: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && s > 0.0 && h <= s) {
        return Err(Error::InvalidInput("need 0 < h <= s".into()));
    }
    let limit = s.powi(n as i32) / k1(n, d);
    if h > limit {
        return Err(Error::BelowDensityThreshold(format!("h = {h} above s^n/K1 = {limit}")));
    }
    Ok(factorial(d as u32 + 1) / 2.0 * (s / (12.0 * n as f64)).powi((n * d) as i32))
}

/// The triangle `{(−½, 0), (0, h), (½, 0)}`.
pub fn triangle(h: f64) -> Result<PointSet> {
    PointSet::explicit_raw(vec![vec![-0.5, 0.0], vec![0.0, h], vec![0.5, 0.0]], format!("triangle h={h}"))
}

/// `Q = y + 4h(x² − ¼)`, vanishing on the triangle.
pub fn triangle_witness(h: f64) -> TestField {
    TestField::Polynomial { n: 2, terms: vec![(vec![0, 1], 1.0), (vec![2, 0], 4.0 * h), (vec![0, 0], -h)] }
}

/// `M₂(Q)/|Q(0, −1)| = 8h/(1+h)`, an upper bound on the first rigidity constant of the triangle.
pub fn triangle_upper_bound(h: f64) -> f64 {
    8.0 * h / (1.0 + h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfields::ScalarField;

    #[test]
    fn collinear_is_degenerate() {
        let z = PointSet::explicit(vec![vec![0.0, 0.0], vec![0.1, 0.1], vec![0.2, 0.2]], "c").unwrap();
        let e = remez_bounds(&z, 1, 20, RemezDomain::Ball).unwrap();
        assert!(e.degenerate && e.upper.is_infinite());
        let nv: f64 = e.witness.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((nv - 1.0).abs() < 1e-9);
        assert_eq!(rigidity_from_remez(&e, 1, None).lower, 0.0);
        let json = serde_json::to_string(&e).unwrap();
        let back: RemezEstimate = serde_json::from_str(&json).unwrap();
        assert!(back.lower.is_infinite());
    }

    #[test]
    fn triangle_linear_program() {
        // Over the square the maximum of |a + bx + cy| under the three constraints is 2/h + 1, at (1, −1).
        let h = 0.1;
        let e = remez_bounds(&triangle(h).unwrap(), 1, 41, RemezDomain::Cube).unwrap();
        assert!((e.lower - (2.0 / h + 1.0)).abs() < 1e-6, "{}", e.lower);
        let q = triangle_witness(h);
        for p in triangle(h).unwrap().points().unwrap() {
            assert!(q.value(&p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_norming() {
        let e = RemezEstimate {
            n: 1,
            d: 2,
            lower: 1.0,
            upper: 1.0,
            degenerate: false,
            basis: vec![],
            witness: vec![],
            argmax: vec![],
            domain: RemezDomain::Ball,
            resolution: 2,
            sample_points: 0,
            pad: 1.0,
        };
        assert_eq!(rigidity_from_remez(&e, 2, None).lower, 3.0);
    }

    #[test]
    fn hdense_arithmetic() {
        let b = hdense_remez_bound(2, 1, 0.2, 1e-5).unwrap();
        assert!((b - (0.2f64 / 24.0).powi(2)).abs() < 1e-18);
        assert!(hdense_remez_bound(2, 1, 0.2, 1e-2).is_err());
    }
}
