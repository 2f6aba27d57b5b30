//! Bump-function curves through a boundary point and d+1 selected points.
//!
//! The base bump is `ψ(u) = exp(1 − 1/(1 − u²))` on `|u| < 1`, rescaled to
//! `φ(t) = ψ(t/a)`. Its derivatives are `ψ^{(k)} = P_k(u)·ψ(u)/(1 − u²)^{2k}`
//! with integer polynomials `P_k`, evaluated in log form so that nothing
//! overflows near the edge of the support.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integral_geometry::LineCertificate;

/// Upper bound on the reparametrized interval length, `4/3 + 1/5`.
pub const L_MAX: f64 = 23.0 / 15.0;
/// Largest derivative order with a stored polynomial.
pub const MAX_BUMP_ORDER: usize = 9;
/// Grid size used to certify the derivative table.
pub const BUMP_GRID: usize = 1_000_000;
/// Largest `M_1(φ)` for which every admissible curve keeps `M_1(ω) < 1`:
/// `(23/30)·sqrt(1 + (M_1/5)²) < 1`.
pub const M1_CAP: f64 = 4.18;

fn bump_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..MAX_BUMP_ORDER {
            let p = &polys[k];
            let dp: Vec<f64> = (1..p.len()).map(|i| p[i] * i as f64).collect();
            // (P' w + 4k u P) w − 2u P with w = 1 − u²
            let mut inner = vec![0.0; p.len() + 2];
            for (i, &c) in dp.iter().enumerate() {
                inner[i] += c;
                inner[i + 2] -= c;
            }
            for (i, &c) in p.iter().enumerate() {
                inner[i + 1] += 4.0 * k as f64 * c;
            }
            let mut next = vec![0.0; inner.len() + 2];
            for (i, &c) in inner.iter().enumerate() {
                next[i] += c;
                next[i + 2] -= c;
            }
            for (i, &c) in p.iter().enumerate() {
                next[i + 1] -= 2.0 * c;
            }
            while next.len() > 1 && next[next.len() - 1] == 0.0 {
                next.pop();
            }
            polys.push(next);
        }
        polys
    })
}

fn horner(p: &[f64], u: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

/// `ψ^{(k)}(u)` for the unit bump.
pub fn psi_derivative(u: f64, k: usize) -> f64 {
    assert!(k <= MAX_BUMP_ORDER, "bump derivative order {k} unsupported");
    let w = 1.0 - u * u;
    if w <= 0.0 {
        return 0.0;
    }
    let log = 1.0 - 1.0 / w - 2.0 * k as f64 * w.ln();
    horner(&bump_polys()[k], u) * log.exp()
}

/// `φ^{(k)}(t)` for the bump of half-width `a`.
pub fn bump_derivative(a: f64, t: f64, k: usize) -> f64 {
    psi_derivative(t / a, k) / a.powi(k as i32)
}

/// Bump `φ(t) = ψ(t/a)` with a certified table of `M_k(φ) = max |φ^{(k)}|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub a: f64,
    /// Certified upper bounds, index k = 0..=max_order.
    pub table: Vec<f64>,
    /// Raw grid maxima, index k = 0..=max_order+1.
    pub grid_max: Vec<f64>,
}

impl BumpFunction {
    pub fn value(&self, t: f64) -> f64 {
        bump_derivative(self.a, t, 0)
    }

    pub fn derivative(&self, t: f64, k: usize) -> f64 {
        bump_derivative(self.a, t, k)
    }

    /// Certified `M_k(φ)`.
    pub fn m(&self, k: usize) -> f64 {
        self.table[k]
    }

    pub fn max_order(&self) -> usize {
        self.table.len() - 1
    }
}

/// Builds the bump and certifies `M_k(φ)` for `k ≤ d_max` as the maximum
/// over a uniform grid of the support plus `M_{k+1}·δ/2` (δ = grid step).
pub fn build_bump(a: f64, d_max: usize) -> Result<BumpFunction> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidInput(format!("bump half-width {a} outside (0, 1]")));
    }
    if d_max + 1 > MAX_BUMP_ORDER {
        return Err(Error::OrderOutOfRange(format!("bump order {d_max} too large")));
    }
    let orders = d_max + 2;
    let step = 2.0 / BUMP_GRID as f64;
    let grid_max = (0..BUMP_GRID + 1)
        .into_par_iter()
        .with_min_len(4096)
        .fold(
            || vec![0.0f64; orders],
            |mut acc, i| {
                let u = -1.0 + i as f64 * step;
                for (k, slot) in acc.iter_mut().enumerate() {
                    *slot = slot.max(psi_derivative(u, k).abs());
                }
                acc
            },
        )
        .reduce(|| vec![0.0f64; orders], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    let grid_max: Vec<f64> = grid_max.iter().enumerate().map(|(k, g)| g / a.powi(k as i32)).collect();
    let delta = step * a;
    let table: Vec<f64> = (0..=d_max).map(|k| grid_max[k] + 1.05 * grid_max[k + 1] * delta / 2.0).collect();
    if table[1] >= M1_CAP {
        return Err(Error::BumpCertification(format!("M1(phi) = {} exceeds the velocity cap {M1_CAP}", table[1])));
    }
    Ok(BumpFunction { a, table, grid_max })
}

/// Bump with `a = 0.9` certified up to order 7, built once.
pub fn default_bump() -> &'static BumpFunction {
    static BUMP: OnceLock<BumpFunction> = OnceLock::new();
    BUMP.get_or_init(|| build_bump(0.9, 7).expect("default bump certifies"))
}

/// A parametrized curve `[−1, 1] → Rⁿ` with closed-form derivatives.
pub trait Curve: Sync {
    fn dim(&self) -> usize;
    /// `ω^{(k)}(η)`.
    fn derivative(&self, eta: f64, k: usize) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Projection parameter along the line.
    pub tau: f64,
    /// Offset from the line, orthogonal to the direction.
    pub offset: Vec<f64>,
    /// The interpolated point `z0 + τ·v + offset`.
    pub point: Vec<f64>,
}

/// `ω(η) = z0 + t·v + Σ v_i·φ(2(t − τ_i)/κ)` with `t = c + (L/2)·η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub n: usize,
    pub d: usize,
    pub z0: Vec<f64>,
    pub v: Vec<f64>,
    pub anchors: Vec<Anchor>,
    pub kappa: f64,
    pub rho: f64,
    pub mu_d: f64,
    /// Midpoint `c` of the parameter interval `[−1/10, τ_{d+1} + 1/10]`.
    pub center: f64,
    /// Interval length `L`.
    pub length: f64,
    pub bump_half_width: f64,
    /// Certified `M_k(φ)` used, k = 0..=d+1.
    pub bump_table: Vec<f64>,
    /// Certified `M_k(ω)`, index k−1 for k = 1..=d+1.
    pub m_k: Vec<f64>,
    pub m1: f64,
    pub nu_d: f64,
    /// `D_k = L^k·M_k(φ)`, index k−2 for k = 2..=d+1.
    pub d_k: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn build_curve(cert: &LineCertificate, bump: &BumpFunction) -> Result<CurveSpec> {
    let kappa = cert.kappa;
    let rho = cert.rho;
    if !(kappa < 0.1 && kappa >= 10.0 * rho && kappa > 0.0) {
        return Err(Error::RegimeViolated(format!("kappa = {kappa}, rho = {rho}")));
    }
    let d = cert.selected.len().saturating_sub(1);
    if d == 0 {
        return Err(Error::InvalidInput("certificate needs at least two points".into()));
    }
    if bump.max_order() < d + 1 {
        return Err(Error::OrderOutOfRange(format!(
            "bump certified to order {}, curve needs {}",
            bump.max_order(),
            d + 1
        )));
    }
    let z0 = cert.line.z0.clone();
    let v = cert.line.direction.clone();
    let n = z0.len();
    let mut anchors: Vec<Anchor> = cert
        .selected
        .iter()
        .map(|y| {
            let rel: Vec<f64> = y.iter().zip(&z0).map(|(a, b)| a - b).collect();
            let tau = dot(&rel, &v);
            let offset: Vec<f64> = rel.iter().zip(&v).map(|(r, vi)| r - tau * vi).collect();
            Anchor { tau, offset, point: y.clone() }
        })
        .collect();
    anchors.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    for w in anchors.windows(2) {
        if w[1].tau - w[0].tau < kappa * (1.0 - 1e-12) {
            return Err(Error::RegimeViolated("projection gaps below kappa".into()));
        }
    }
    if anchors[0].tau <= bump.a * kappa / 2.0 {
        return Err(Error::RegimeViolated("first bump reaches the boundary point".into()));
    }
    let last = anchors[d].tau;
    let length = last + 0.2;
    let center = last / 2.0;
    let max_off_sup = anchors.iter().map(|a| sup_norm(&a.offset)).fold(0.0, f64::max);
    let max_off = anchors.iter().map(|a| dot(&a.offset, &a.offset).sqrt()).fold(0.0, f64::max);
    let m1 = (length / 2.0) * (1.0 + (2.0 * bump.m(1) * max_off / kappa).powi(2)).sqrt() * (1.0 + 1e-12);
    if m1 >= 1.0 {
        return Err(Error::RegimeViolated(format!("velocity bound {m1} is not below 1")));
    }
    let mut m_k = vec![m1];
    for k in 2..=d + 1 {
        m_k.push((length / kappa).powi(k as i32) * bump.m(k) * max_off_sup);
    }
    let nu_d = m_k[1..].iter().cloned().fold(0.0, f64::max);
    let d_k = (2..=d + 1).map(|k| length.powi(k as i32) * bump.m(k)).collect();
    Ok(CurveSpec {
        n,
        d,
        z0,
        v,
        anchors,
        kappa,
        rho,
        mu_d: cert.mu_d,
        center,
        length,
        bump_half_width: bump.a,
        bump_table: bump.table[..=d + 1].to_vec(),
        m_k,
        m1,
        nu_d,
        d_k,
    })
}

impl CurveSpec {
    /// Curve parameter at which the curve passes through `z0`.
    pub fn z0_parameter(&self) -> f64 {
        -self.center / (self.length / 2.0)
    }

    /// Curve parameters at which the curve passes through the anchors.
    pub fn anchor_parameters(&self) -> Vec<f64> {
        self.anchors.iter().map(|a| (a.tau - self.center) / (self.length / 2.0)).collect()
    }

    fn eval(&self, eta: f64, k: usize) -> Vec<f64> {
        let half = self.length / 2.0;
        let t = self.center + half * eta;
        let a = self.bump_half_width;
        let scale = 2.0 / self.kappa;
        let mut out = vec![0.0; self.n];
        match k {
            0 => {
                for i in 0..self.n {
                    out[i] = self.z0[i] + t * self.v[i];
                }
            }
            1 => out.clone_from(&self.v),
            _ => {}
        }
        for anc in &self.anchors {
            let s = scale * (t - anc.tau);
            if s.abs() >= a {
                continue;
            }
            let b = bump_derivative(a, s, k) * scale.powi(k as i32);
            for i in 0..self.n {
                out[i] += anc.offset[i] * b;
            }
        }
        let factor = half.powi(k as i32);
        if k > 0 {
            for x in &mut out {
                *x *= factor;
            }
        }
        out
    }
}

impl Curve for CurveSpec {
    fn dim(&self) -> usize {
        self.n
    }

    fn derivative(&self, eta: f64, k: usize) -> Result<Vec<f64>> {
        curve_eval(self, eta, k)
    }
}

/// `ω^{(k)}(η)` for `η ∈ [−1, 1]`, `k ≤ d+1`.
pub fn curve_eval(spec: &CurveSpec, eta: f64, k: usize) -> Result<Vec<f64>> {
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&eta) {
        return Err(Error::InvalidInput(format!("parameter {eta} outside [-1, 1]")));
    }
    if k > spec.d + 1 {
        return Err(Error::OrderOutOfRange(format!("order {k} above d+1 = {}", spec.d + 1)));
    }
    Ok(spec.eval(eta, k))
}

/// Certified `ν_d(ω) = max_{k=2..d+1} M_k(ω)` for `d ≤ spec.d`.
pub fn nu_d_of_curve(spec: &CurveSpec, d: usize) -> Result<f64> {
    if d == 0 || d > spec.d {
        return Err(Error::OrderOutOfRange(format!("d = {d} outside 1..={}", spec.d)));
    }
    Ok(spec.m_k[1..=d].iter().cloned().fold(0.0, f64::max))
}

/// One sample of a curve for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub eta: f64,
    pub point: Vec<f64>,
    /// `‖ω^{(k)}(η)‖_∞` for k = 1..=d+1.
    pub norms: Vec<f64>,
}

pub fn sample_curve(spec: &CurveSpec, count: usize) -> Vec<CurveSample> {
    let count = count.max(2);
    (0..count)
        .map(|i| {
            let eta = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
            CurveSample {
                eta,
                point: spec.eval(eta, 0),
                norms: (1..=spec.d + 1).map(|k| sup_norm(&spec.eval(eta, k))).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polys_match_closed_form_first_derivative() {
        // ψ'(u) = ψ(u)·(−2u)/(1 − u²)², so P_1 = −2u.
        assert_eq!(bump_polys()[1], vec![0.0, -2.0]);
        for &u in &[-0.7, -0.2, 0.0, 0.35, 0.9] {
            let w: f64 = 1.0 - u * u;
            let psi = (1.0 - 1.0 / w).exp();
            let want = psi * (-2.0 * u) / (w * w);
            assert!((psi_derivative(u, 1) - want).abs() <= 1e-14);
        }
    }

    #[test]
    fn bump_support_and_center() {
        let b = default_bump();
        assert_eq!(b.value(0.0), 1.0);
        for k in 0..=3 {
            assert_eq!(b.derivative(0.9, k), 0.0);
            assert_eq!(b.derivative(-0.9, k), 0.0);
            assert!(b.derivative(0.899, k).abs() < 1e-100);
        }
    }

    #[test]
    fn bump_first_derivative_table_vs_closed_form_grid() {
        // Closed form |φ'(t)| = φ(t)·2|t|/a²·(1 − (t/a)²)^{-2}.
        let b = default_bump();
        let a = b.a;
        let mut best: f64 = 0.0;
        for i in 0..=200_000 {
            let t = -a + 2.0 * a * i as f64 / 200_000.0;
            let u = t / a;
            let w = 1.0 - u * u;
            if w <= 0.0 {
                continue;
            }
            best = best.max((1.0 - 1.0 / w).exp() * 2.0 * t.abs() / (a * a) / (w * w));
        }
        assert!(b.m(1) >= best);
        assert!(b.m(1) <= best * 1.001);
    }

    #[test]
    fn bad_half_width() {
        assert!(build_bump(0.0, 3).is_err());
        assert!(build_bump(1.5, 3).is_err());
    }
}
