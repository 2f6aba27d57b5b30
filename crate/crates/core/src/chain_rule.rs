//! Higher-order chain rule for `g = f ∘ ω` and the constants built on it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::curves::{self, BumpFunction, Curve, CurveSpec};
use crate::error::{Error, Result};
use crate::integral_geometry::{theta, LineOrientation};
use crate::testfields::ScalarField;

/// One monomial `coefficient · ∂^α f(ω) · Π ω_{i}^{(k)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    /// Multi-index of the derivative of `f`.
    pub alpha: Vec<u32>,
    /// Curve-derivative factors `(order k, coordinate i)`, sorted.
    pub factors: Vec<(u32, u32)>,
    pub coefficient: u64,
}

impl Term {
    /// Total derivative order of `f` (the group index k).
    pub fn f_order(&self) -> u32 {
        self.alpha.iter().sum()
    }

    /// Sum of the factor orders.
    pub fn weight(&self) -> u32 {
        self.factors.iter().map(|f| f.0).sum()
    }
}

/// All terms of `d^m/dt^m f(ω(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionExpansion {
    pub n: usize,
    pub m: u32,
    /// Ordered by decreasing `f` order, then by multi-index and factors.
    pub terms: Vec<Term>,
}

type Key = (Vec<u32>, Vec<(u32, u32)>);

/// Chain-rule expansion by repeated symbolic differentiation.
pub fn expand(n: usize, m: u32) -> Result<CompositionExpansion> {
    if !(1..=4).contains(&n) {
        return Err(Error::OrderOutOfRange(format!("dimension {n} outside 1..=4")));
    }
    if !(1..=6).contains(&m) {
        return Err(Error::OrderOutOfRange(format!("order {m} outside 1..=6")));
    }
    let mut current: BTreeMap<Key, u64> = BTreeMap::new();
    for i in 0..n {
        let mut alpha = vec![0u32; n];
        alpha[i] = 1;
        current.insert((alpha, vec![(1, i as u32)]), 1);
    }
    for _ in 1..m {
        let mut next: BTreeMap<Key, u64> = BTreeMap::new();
        for ((alpha, factors), &c) in &current {
            for i in 0..n {
                let mut a = alpha.clone();
                a[i] += 1;
                let mut f = factors.clone();
                f.push((1, i as u32));
                f.sort_unstable();
                *next.entry((a, f)).or_insert(0) += c;
            }
            for j in 0..factors.len() {
                let mut f = factors.clone();
                f[j].0 += 1;
                f.sort_unstable();
                *next.entry((alpha.clone(), f)).or_insert(0) += c;
            }
        }
        current = next;
    }
    let mut terms: Vec<Term> =
        current.into_iter().map(|((alpha, factors), coefficient)| Term { alpha, factors, coefficient }).collect();
    terms.sort_by(|a, b| {
        b.f_order().cmp(&a.f_order()).then_with(|| b.alpha.cmp(&a.alpha)).then_with(|| a.factors.cmp(&b.factors))
    });
    Ok(CompositionExpansion { n, m, terms })
}

impl CompositionExpansion {
    /// Terms whose `f` derivative has total order `k`.
    pub fn group(&self, k: u32) -> Vec<&Term> {
        self.terms.iter().filter(|t| t.f_order() == k).collect()
    }

    /// Coefficient of a term, or 0 when absent.
    pub fn coefficient(&self, alpha: &[u32], factors: &[(u32, u32)]) -> u64 {
        let mut f = factors.to_vec();
        f.sort_unstable();
        self.terms.iter().find(|t| t.alpha == alpha && t.factors == f).map(|t| t.coefficient).unwrap_or(0)
    }

    /// One-dimensional coefficient of `f^{(k)} · Π ω^{(orders)}`.
    pub fn coefficient_1d(&self, orders: &[u32]) -> u64 {
        let k = orders.len() as u32;
        let factors: Vec<(u32, u32)> = orders.iter().map(|&o| (o, 0)).collect();
        self.coefficient(&[k], &factors)
    }

    pub fn max_coefficient(&self) -> u64 {
        self.terms.iter().map(|t| t.coefficient).max().unwrap_or(0)
    }

    /// Sum of the coefficients of the top-order group.
    pub fn leading_sum(&self) -> u64 {
        self.group(self.m).iter().map(|t| t.coefficient).sum()
    }

    /// Human-readable listing, one term per line.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            let f = if self.n == 1 {
                format!("f^({})", t.alpha[0])
            } else {
                let a: Vec<String> = t.alpha.iter().map(|v| v.to_string()).collect();
                format!("D^({})f", a.join(","))
            };
            let w: Vec<String> = t
                .factors
                .iter()
                .map(|(k, i)| if self.n == 1 { format!("w^({k})") } else { format!("w{}^({k})", i + 1) })
                .collect();
            let _ = writeln!(out, "{} * {} * {}", t.coefficient, f, w.join(" * "));
        }
        out
    }

    /// Contract the expansion against partials of `f` at `ω(η)` and the
    /// curve derivatives `derivs[k] = ω^{(k)}(η)`.
    pub fn evaluate(&self, partial: impl Fn(&[u32]) -> f64, derivs: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let w: f64 = t.factors.iter().map(|&(k, i)| derivs[k as usize][i as usize]).product();
                t.coefficient as f64 * partial(&t.alpha) * w
            })
            .sum()
    }
}

/// `θ_n` for unoriented lines.
pub fn theta_n(n: usize) -> f64 {
    theta(n, LineOrientation::Unoriented)
}

/// `ξ₁ = 2·θ_n·n²·(d+1)`.
pub fn xi1(n: usize, d: usize) -> f64 {
    2.0 * theta_n(n) * (n * n) as f64 * (d as f64 + 1.0)
}

/// Choice of the intermediate-derivative constants `(B5, B6)` in
/// `M_k(f) ≤ B5·M_0(f) + B6·M_{d+1}(f)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntermediateBound {
    /// Taylor polynomial of degree d plus iterated Kellogg inequality on the
    /// unit ball: `B5 = (d!)²`, `B6 = (d!)²·(2√n)^{d+1}/(d+1)!`.
    #[default]
    TaylorKellogg,
    Fixed {
        b5: f64,
        b6: f64,
    },
}

impl IntermediateBound {
    pub fn values(&self, n: usize, d: usize) -> (f64, f64) {
        match *self {
            IntermediateBound::TaylorKellogg => {
                let df = crate::multi::factorial(d as u32);
                let b5 = df * df;
                let b6 = b5 * (2.0 * (n as f64).sqrt()).powi(d as i32 + 1) / crate::multi::factorial(d as u32 + 1);
                (b5, b6)
            }
            IntermediateBound::Fixed { b5, b6 } => (b5, b6),
        }
    }
}

/// Constants of the composition inequality and the density thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleConstants {
    pub n: usize,
    pub d: usize,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub b6: f64,
    pub b7: f64,
    pub b8: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub theta_n: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub xi: f64,
    pub dbar: f64,
    /// `D_k = L_max^k·M_k(φ)` for k = 2..=d+1.
    pub d_k: Vec<f64>,
    pub bump_half_width: f64,
    pub intermediate: IntermediateBound,
    pub provenance: BTreeMap<String, String>,
}

/// Constants for `(n, d)` with the default bump and `(B5, B6)`.
pub fn default_constants(n: usize, d: usize) -> Result<ChainRuleConstants> {
    compute_constants(n, d, curves::default_bump(), IntermediateBound::default())
}

pub fn compute_constants(
    n: usize,
    d: usize,
    bump: &BumpFunction,
    intermediate: IntermediateBound,
) -> Result<ChainRuleConstants> {
    if d == 0 || d > 5 {
        return Err(Error::OrderOutOfRange(format!("d = {d} outside 1..=5")));
    }
    let m = d as u32 + 1;
    let exp = expand(n, m)?;
    if bump.max_order() < d + 1 {
        return Err(Error::OrderOutOfRange(format!(
            "bump table stops at order {} but d+1 = {}",
            bump.max_order(),
            d + 1
        )));
    }
    let b1 = exp.terms.len() as f64;
    let b2 = exp.max_coefficient() as f64;
    let b3 = exp
        .terms
        .iter()
        .filter(|t| t.f_order() < m)
        .map(|t| (n as f64).powi(t.factors.len() as i32))
        .fold(1.0, f64::max);
    let b4 = exp.leading_sum() as f64;
    let (b5, b6) = intermediate.values(n, d);
    let c1 = 1.0 / b4;
    let c2 = d as f64 * b1 * b2 * b3;
    let b7 = c1 * c2 * b5;
    let b8 = c1 * c2 * b6;
    let c3 = (1.0 / (2.0 * b7)).min(1.0 / (2.0 * b8)).min(c1 / (10.0 * b7));
    let fact = crate::multi::factorial(m);
    let c4 = 0.5 * c1 * (fact / 2f64.powi(m as i32) - 0.1);
    let theta_n = theta_n(n);
    let xi1 = 2.0 * theta_n * (n * n) as f64 * (d as f64 + 1.0);
    let d_k: Vec<f64> = (2..=d + 1).map(|k| curves::L_MAX.powi(k as i32) * bump.m(k)).collect();
    let dbar = d_k.iter().cloned().fold(0.0, f64::max);
    let xi2 = (n as f64).sqrt() * dbar;
    let xi3 = xi2.powf(1.0 / (d as f64 + 1.0)) * xi1;
    let xi = c3 / (2.0 * xi3.powi(d as i32 + 1));
    let mut provenance = BTreeMap::new();
    let mut note = |k: &str, v: &str| {
        provenance.insert(k.to_string(), v.to_string());
    };
    note("b1", "number of monomials in the expansion of order d+1 in dimension n");
    note("b2", "largest integer coefficient of that expansion");
    note("b3", "max over non-leading monomials of n^(number of curve factors)");
    note("b4", "sum of the leading-group coefficients (= n^(d+1))");
    match intermediate {
        IntermediateBound::TaylorKellogg => {
            note("b5", "(d!)^2: Kellogg's gradient inequality iterated on the Taylor polynomial");
            note("b6", "(d!)^2 (2 sqrt n)^(d+1)/(d+1)!: Taylor remainder over the unit ball");
        }
        IntermediateBound::Fixed { .. } => {
            note("b5", "caller-supplied");
            note("b6", "caller-supplied");
        }
    }
    note("b7", "C1*C2*B5");
    note("b8", "C1*C2*B6");
    note("c1", "1/B4");
    note("c2", "d*B1*B2*B3");
    note("c3", "min{1/(2 B7), 1/(2 B8), C1/(10 B7)}");
    note("c4", "C1/2 * ((d+1)!/2^(d+1) - 1/10)");
    note(
        "theta_n",
        "2^(3(n-1)) * cap measure of lines through a unit-sphere point meeting B^ / unit (n-1)-ball volume",
    );
    note("xi1", "2 theta_n n^2 (d+1)");
    note("xi2", "sqrt(n) * Dbar");
    note("xi3", "xi2^(1/(d+1)) * xi1");
    note("xi", "C3 / (2 xi3^(d+1))");
    note("dbar", "max_k (23/15)^k M_k(phi), k = 2..d+1, from the certified bump table");
    Ok(ChainRuleConstants {
        n,
        d,
        b1,
        b2,
        b3,
        b4,
        b5,
        b6,
        b7,
        b8,
        c1,
        c2,
        c3,
        c4,
        theta_n,
        xi1,
        xi2,
        xi3,
        xi,
        dbar,
        d_k,
        bump_half_width: bump.a,
        intermediate,
        provenance,
    })
}

impl ChainRuleConstants {
    /// Largest relative deviation among the defining identities.
    pub fn identity_residual(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        let d = self.d as f64;
        let n = self.n as f64;
        let fact = crate::multi::factorial(self.d as u32 + 1);
        [
            rel(self.c2, d * self.b1 * self.b2 * self.b3),
            rel(self.c1, 1.0 / self.b4),
            rel(self.b7, self.c1 * self.c2 * self.b5),
            rel(self.b8, self.c1 * self.c2 * self.b6),
            rel(self.c3, (1.0 / (2.0 * self.b7)).min(1.0 / (2.0 * self.b8)).min(self.c1 / (10.0 * self.b7))),
            rel(self.c4, 0.5 * self.c1 * (fact / 2f64.powi(self.d as i32 + 1) - 0.1)),
            rel(self.xi1, 2.0 * self.theta_n * n * n * (d + 1.0)),
            rel(self.xi2, n.sqrt() * self.dbar),
            rel(self.xi3, self.xi2.powf(1.0 / (d + 1.0)) * self.xi1),
            rel(self.xi, self.c3 / (2.0 * self.xi3.powi(self.d as i32 + 1))),
            rel(self.theta_n, theta_n(self.n)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `g^{(m)}(η)` for `g = f ∘ ω`.
pub fn compose_derivative(f: &dyn ScalarField, curve: &dyn Curve, eta: f64, m: u32) -> Result<f64> {
    if f.dim() != curve.dim() {
        return Err(Error::InvalidInput("field and curve dimensions differ".into()));
    }
    if m as usize > f.max_order() {
        return Err(Error::OrderOutOfRange(format!(
            "field supplies derivatives up to order {}, need {m}",
            f.max_order()
        )));
    }
    let exp = expand(f.dim(), m)?;
    compose_with(&exp, f, curve, eta)
}

fn compose_with(exp: &CompositionExpansion, f: &dyn ScalarField, curve: &dyn Curve, eta: f64) -> Result<f64> {
    let m = exp.m;
    let derivs: Vec<Vec<f64>> = (0..=m as usize).map(|k| curve.derivative(eta, k)).collect::<Result<Vec<_>>>()?;
    let jet = f.jet(&derivs[0], m)?;
    Ok(exp.evaluate(|a| jet.partial(a).expect("order within jet"), &derivs))
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Both sides of the pointwise composition inequality at one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub eta: f64,
    /// `‖d^{d+1} f(ω(η))‖`.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub g_derivative: f64,
    pub mu_d: f64,
    pub nu_d: f64,
    pub velocity: f64,
}

/// Max over `1 ≤ |α| ≤ d` (or `|α| = k` exactly) of `|∂^α f|` from a jet.
fn partial_max(jet: &crate::multi::Jet, from: u32, to: u32) -> f64 {
    let space = jet.space().clone();
    space
        .indices
        .iter()
        .filter(|a| {
            let s: u32 = a.iter().sum();
            s >= from && s <= to
        })
        .map(|a| jet.partial(a).expect("index in space").abs())
        .fold(0.0, f64::max)
}

/// Pointwise check of `‖d^{d+1}f‖ ≥ C1/‖ω′‖^{d+1}·(|g^{(d+1)}| − C2·μ_d·ν_d)`.
pub fn check_composition_inequality(
    f: &dyn ScalarField,
    spec: &CurveSpec,
    constants: &ChainRuleConstants,
    eta: f64,
) -> Result<CompositionReport> {
    let d = constants.d;
    if spec.m1 > 1.0 || spec.nu_d > 1.0 {
        return Err(Error::Precondition(format!(
            "curve needs M1 <= 1 and nu_d <= 1, has {} and {}",
            spec.m1, spec.nu_d
        )));
    }
    if spec.d < d {
        return Err(Error::Precondition("curve built for a smaller d".into()));
    }
    let m = d as u32 + 1;
    let exp = expand(constants.n, m)?;
    let derivs: Vec<Vec<f64>> = (0..=m as usize).map(|k| spec.derivative(eta, k)).collect::<Result<Vec<_>>>()?;
    let jet = f.jet(&derivs[0], m)?;
    let g = exp.evaluate(|a| jet.partial(a).expect("order within jet"), &derivs);
    let lhs = partial_max(&jet, m, m);
    let mu_d = partial_max(&jet, 1, d as u32);
    let nu_d = (2..=m as usize).map(|k| sup_norm(&derivs[k])).fold(0.0, f64::max);
    let velocity = sup_norm(&derivs[1]);
    let bracket = g.abs() - constants.c2 * mu_d * nu_d;
    let rhs = if velocity > 0.0 {
        constants.c1 / velocity.powi(m as i32) * bracket
    } else if bracket > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    Ok(CompositionReport { eta, lhs, rhs, slack: lhs - rhs, g_derivative: g, mu_d, nu_d, velocity })
}

/// Sampled aggregate forms along the curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Sampled `max ‖d^{d+1} f‖` over the curve points.
    pub md1_f: f64,
    /// Sampled `max |g^{(d+1)}|`.
    pub md1_g: f64,
    /// Sampled `max μ_d(f, ω(η))`.
    pub mu_d_f: f64,
    /// Certified `ν_d(ω)`.
    pub nu_d: f64,
    /// `C1·(M_{d+1}(g) − C2·μ_d(f)·ν_d(ω))`.
    pub aggregate_rhs: f64,
    /// `½·C1·(M_{d+1}(g) − 1/10)` when `ν_d(ω) ≤ C3`.
    pub small_thickness_rhs: Option<f64>,
}

pub fn composition_aggregate(
    f: &dyn ScalarField,
    spec: &CurveSpec,
    constants: &ChainRuleConstants,
    samples: usize,
) -> Result<AggregateReport> {
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let mut md1_f: f64 = 0.0;
    let mut md1_g: f64 = 0.0;
    let mut mu: f64 = 0.0;
    for i in 0..samples {
        let eta = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
        let r = check_composition_inequality(f, spec, constants, eta)?;
        md1_f = md1_f.max(r.lhs);
        md1_g = md1_g.max(r.g_derivative.abs());
        mu = mu.max(r.mu_d);
    }
    let aggregate_rhs = constants.c1 * (md1_g - constants.c2 * mu * spec.nu_d);
    let small_thickness_rhs = (spec.nu_d <= constants.c3).then(|| 0.5 * constants.c1 * (md1_g - 0.1));
    Ok(AggregateReport { md1_f, md1_g, mu_d_f: mu, nu_d: spec.nu_d, aggregate_rhs, small_thickness_rhs })
}

/// `B5·M0 + B6·M_{d+1}` for each k = 1..=d.
pub fn intermediate_derivative_bound(d: usize, m0: f64, md1: f64, constants: &ChainRuleConstants) -> Result<Vec<f64>> {
    if m0 < 0.0 || md1 < 0.0 {
        return Err(Error::InvalidInput("norms must be non-negative".into()));
    }
    Ok(vec![constants.b5 * m0 + constants.b6 * md1; d])
}

/// Distinct one-dimensional shapes (factor order lists) of an expansion.
pub fn shapes(exp: &CompositionExpansion) -> BTreeSet<(u32, Vec<u32>)> {
    exp.terms.iter().map(|t| (t.f_order(), t.factors.iter().map(|f| f.0).collect())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_n1_m3() {
        let e = expand(1, 3).unwrap();
        assert_eq!(e.terms.len(), 3);
        assert_eq!(e.coefficient_1d(&[1, 1, 1]), 1);
        assert_eq!(e.coefficient_1d(&[1, 2]), 3);
        assert_eq!(e.coefficient_1d(&[3]), 1);
    }

    #[test]
    fn expand_n2_m2() {
        let e = expand(2, 2).unwrap();
        assert_eq!(e.coefficient(&[1, 1], &[(1, 0), (1, 1)]), 2);
        assert_eq!(e.coefficient(&[2, 0], &[(1, 0), (1, 0)]), 1);
        assert_eq!(e.coefficient(&[1, 0], &[(2, 0)]), 1);
        assert_eq!(e.terms.len(), 5);
    }

    #[test]
    fn errors() {
        assert!(expand(1, 0).is_err());
        assert!(expand(1, 7).is_err());
        assert!(expand(5, 2).is_err());
    }

    #[test]
    fn intermediate_examples() {
        let c = default_constants(2, 1).unwrap();
        assert_eq!(intermediate_derivative_bound(1, 1.0, 0.0, &c).unwrap(), vec![c.b5]);
        assert_eq!(intermediate_derivative_bound(1, 0.0, 2.0, &c).unwrap(), vec![2.0 * c.b6]);
    }
}
