//! Closed-form smooth fields and curves with exact derivatives.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::geometry::{PointSet, Representation};
use crate::multi::{Jet, JetSpace};

/// Highest derivative order served by the fields in this module.
pub const MAX_FIELD_ORDER: usize = 6;

/// Largest explicit set accepted by [`vanishing_on`].
pub const VANISHING_CAP: u128 = 1000;

/// A smooth scalar field on Rⁿ with Taylor jets of bounded order.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn max_order(&self) -> usize;
    /// Taylor jet of order `order` at `x`.
    fn jet(&self, x: &[f64], order: u32) -> Result<Jet>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.jet(x, 0)?.value())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestField {
    /// `Σ c·x^α`.
    Polynomial { n: usize, terms: Vec<(Vec<u32>, f64)> },
    /// `A·Π sin(ω_i x_i + φ_i)`.
    TrigProduct { amplitude: f64, freq: Vec<f64>, phase: Vec<f64> },
    /// `scale·(1 + ½ sin(w·x + φ))·Π_j (1 − b(|x − c_j|²/σ_j²))`, `b(s) = e^{1 − 1/(1−s)}`.
    BumpProduct { scale: f64, wave: Vec<f64>, phase: f64, centers: Vec<Vec<f64>>, widths: Vec<f64> },
    /// `sin(π(x_a − base)/h)·cos(w·x_b + φ)`, vanishing on the lattice `base + hZ` along axis `a`.
    GridWave { n: usize, axis: usize, base: f64, h: f64, other: usize, w: f64, phase: f64 },
}

/// `sin^{(k)}(t)` for k = 0..=order, times `c^k`.
fn sin_derivs(t: f64, c: f64, order: u32) -> Vec<f64> {
    let (s, co) = t.sin_cos();
    let cycle = [s, co, -s, -co];
    (0..=order).map(|k| cycle[k as usize % 4] * c.powi(k as i32)).collect()
}

/// Derivatives of `b(s) = exp(1 − 1/(1 − s))` for `s < 1`.
fn bump_profile_derivs(s: f64, order: u32) -> Vec<f64> {
    let m = order as usize;
    let w = 1.0 - s;
    if w <= 0.0 || 1.0 - 1.0 / w < -700.0 {
        return vec![0.0; m + 1];
    }
    // g = 1 − 1/w, g^{(k)} = −k!/w^{k+1}; h = e^g, h^{(k+1)} = Σ C(k,j) h^{(j)} g^{(k+1−j)}.
    let g: Vec<f64> = (0..=m)
        .map(|k| if k == 0 { 1.0 - 1.0 / w } else { -crate::multi::factorial(k as u32) / w.powi(k as i32 + 1) })
        .collect();
    let mut h = vec![g[0].exp(); 1];
    for k in 0..m {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            acc += binom * h[j] * g[k + 1 - j];
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        h.push(acc);
    }
    h
}

impl TestField {
    fn n(&self) -> usize {
        match self {
            TestField::Polynomial { n, .. } | TestField::GridWave { n, .. } => *n,
            TestField::TrigProduct { freq, .. } => freq.len(),
            TestField::BumpProduct { wave, .. } => wave.len(),
        }
    }

    fn jet_impl(&self, x: &[f64], order: u32) -> Result<Jet> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::InvalidInput(format!("point has dimension {}, field {n}", x.len())));
        }
        if order as usize > MAX_FIELD_ORDER {
            return Err(Error::OrderOutOfRange(format!("order {order} above {MAX_FIELD_ORDER}")));
        }
        let space = JetSpace::get(n, order);
        match self {
            TestField::Polynomial { terms, .. } => {
                let vars: Vec<Jet> = (0..n).map(|i| Jet::variable(&space, i, x[i])).collect();
                let mut out = Jet::zero(&space);
                for (alpha, c) in terms {
                    let mut t = Jet::constant(&space, *c);
                    for (i, &a) in alpha.iter().enumerate() {
                        for _ in 0..a {
                            t = t.mul(&vars[i]);
                        }
                    }
                    out = out.add(&t);
                }
                Ok(out)
            }
            TestField::TrigProduct { amplitude, freq, phase } => {
                let mut out = Jet::constant(&space, *amplitude);
                for i in 0..n {
                    let d = sin_derivs(freq[i] * x[i] + phase[i], freq[i], order);
                    out = out.mul(&Jet::univariate(&space, i, &d));
                }
                Ok(out)
            }
            TestField::BumpProduct { scale, wave, phase, centers, widths } => {
                let vars: Vec<Jet> = (0..n).map(|i| Jet::variable(&space, i, x[i])).collect();
                let mut lin = Jet::constant(&space, *phase);
                for i in 0..n {
                    lin = lin.add(&vars[i].scale(wave[i]));
                }
                let mut out = lin.compose(&sin_derivs(lin.value(), 1.0, order)).scale(0.5).add_constant(1.0);
                for (c, &sigma) in centers.iter().zip(widths) {
                    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    if r2 >= sigma * sigma {
                        continue;
                    }
                    let mut s = Jet::zero(&space);
                    for i in 0..n {
                        let dx = vars[i].add_constant(-c[i]);
                        s = s.add(&dx.mul(&dx));
                    }
                    let s = s.scale(1.0 / (sigma * sigma));
                    let b = s.compose(&bump_profile_derivs(s.value(), order));
                    out = out.mul(&b.scale(-1.0).add_constant(1.0));
                }
                Ok(out.scale(*scale))
            }
            TestField::GridWave { axis, base, h, other, w, phase, .. } => {
                let r = x[*axis] - base;
                let j = (r / h).round();
                let sign = if (j as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let t = PI * (r - j * h) / h;
                let d: Vec<f64> = sin_derivs(t, PI / h, order).into_iter().map(|v| sign * v).collect();
                let mut out = Jet::univariate(&space, *axis, &d);
                if n > 1 {
                    let c = sin_derivs(w * x[*other] + phase + PI / 2.0, *w, order);
                    out = out.mul(&Jet::univariate(&space, *other, &c));
                }
                Ok(out)
            }
        }
    }
}

impl ScalarField for TestField {
    fn dim(&self) -> usize {
        self.n()
    }

    fn max_order(&self) -> usize {
        MAX_FIELD_ORDER
    }

    fn jet(&self, x: &[f64], order: u32) -> Result<Jet> {
        self.jet_impl(x, order)
    }
}

/// `∂^α f(x)` from the closed form.
pub fn exact_partials(field: &dyn ScalarField, x: &[f64], alpha: &[u32]) -> Result<f64> {
    let order: u32 = alpha.iter().sum();
    if order as usize > field.max_order() {
        return Err(Error::OrderOutOfRange(format!("order {order} above {}", field.max_order())));
    }
    if alpha.len() != field.dim() {
        return Err(Error::InvalidInput("multi-index length differs from dimension".into()));
    }
    let jet = field.jet(x, order)?;
    jet.partial(alpha).ok_or_else(|| Error::Internal("multi-index missing from jet".into()))
}

fn ball_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return p;
        }
    }
}

fn project_to_ball(mut p: Vec<f64>) -> Vec<f64> {
    let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r > 1.0 {
        for x in &mut p {
            *x /= r;
        }
    }
    p
}

/// Sampled `max_{B^n} |f|` with pattern-search refinement from the best samples.
pub fn empirical_sup(field: &dyn ScalarField, samples: usize, seed: u64) -> Result<f64> {
    let n = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..samples).map(|_| ball_point(&mut rng, n)).collect();
    let vals: Vec<f64> = pts.par_iter().map(|p| field.value(p).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let spacing = 2.0 / (samples as f64).powf(1.0 / n as f64);
    let refined: Vec<f64> = order
        .iter()
        .take(16)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            let mut p = pts[i].clone();
            let mut best = vals[i];
            let mut step = spacing;
            while step > 1e-9 {
                let mut moved = false;
                for axis in 0..n {
                    for s in [-1.0, 1.0] {
                        let mut q = p.clone();
                        q[axis] += s * step;
                        let q = project_to_ball(q);
                        let v = field.value(&q)?.abs();
                        if v > best {
                            best = v;
                            p = q;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step /= 2.0;
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(refined.into_iter().chain(vals.iter().cloned()).fold(0.0, f64::max))
}

/// Sampled `max_{B^n} max_{|α| = k} |∂^α f|`.
pub fn empirical_derivative_norm(field: &dyn ScalarField, k: u32, samples: usize, seed: u64) -> Result<f64> {
    let n = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..samples).map(|_| ball_point(&mut rng, n)).collect();
    let idx = crate::multi::indices_of_degree(n, k);
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|p| {
            let jet = field.jet(p, k)?;
            Ok(idx.iter().map(|a| jet.partial(a).unwrap_or(0.0).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// A field with derivatives through `smoothness`, vanishing on Z, normalized to `M_0 ≈ 1`.
pub fn vanishing_on(z: &PointSet, smoothness: usize, seed: u64) -> Result<TestField> {
    if smoothness > MAX_FIELD_ORDER {
        return Err(Error::OrderOutOfRange(format!("smoothness {smoothness} above {MAX_FIELD_ORDER}")));
    }
    let n = z.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1e1d);
    match &z.repr {
        Representation::Grid(g) => {
            let axis = rng.gen_range(0..n);
            let other = if n > 1 { (axis + rng.gen_range(1..n)) % n } else { axis };
            Ok(TestField::GridWave {
                n,
                axis,
                base: g.base(axis),
                h: g.h,
                other,
                w: rng.gen_range(0.5..4.0),
                phase: rng.gen_range(0.0..2.0 * PI),
            })
        }
        Representation::Explicit(points) => {
            if points.len() as u128 > VANISHING_CAP {
                return Err(Error::TooLarge(format!("{} points, at most {VANISHING_CAP}", points.len())));
            }
            if points.is_empty() {
                return Err(Error::EmptySet);
            }
            let mut min_gap = f64::INFINITY;
            for (i, p) in points.iter().enumerate() {
                for q in &points[i + 1..] {
                    let d = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if d > 0.0 {
                        min_gap = min_gap.min(d);
                    }
                }
            }
            let base_width = (min_gap / 2.0).min(0.5);
            let widths: Vec<f64> = points.iter().map(|_| base_width * rng.gen_range(0.6..1.0)).collect();
            let wave: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let phase = rng.gen_range(0.0..2.0 * PI);
            let mut field = TestField::BumpProduct { scale: 1.0, wave, phase, centers: points.clone(), widths };
            let sup = empirical_sup(&field, 100_000, rng.gen())?;
            if let TestField::BumpProduct { scale, .. } = &mut field {
                *scale = 1.0 / sup;
            }
            Ok(field)
        }
    }
}

/// Random polynomial or trigonometric field in dimension `n`.
pub fn random_field(n: usize, seed: u64) -> TestField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if rng.gen_bool(0.5) {
        let terms = crate::multi::graded_lex(n, 5)
            .into_iter()
            .filter_map(|a| {
                let keep = rng.gen_bool(0.6);
                let c = rng.gen_range(-1.0..1.0);
                keep.then_some((a, c))
            })
            .collect();
        TestField::Polynomial { n, terms }
    } else {
        TestField::TrigProduct {
            amplitude: rng.gen_range(0.5..2.0),
            freq: (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            phase: (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        }
    }
}

/// `ω(η) = Σ_k c_k η^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCurve {
    /// `coeffs[k][i]` multiplies `η^k` in coordinate i.
    pub coeffs: Vec<Vec<f64>>,
}

/// `ω_i(η) = a_i + b_i·sin(f_i η + φ_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigCurve {
    pub offset: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub freq: Vec<f64>,
    pub phase: Vec<f64>,
}

impl Curve for PolyCurve {
    fn dim(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.len())
    }

    fn derivative(&self, eta: f64, k: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (p, c) in self.coeffs.iter().enumerate().skip(k) {
            let falling: f64 = ((p - k + 1)..=p).map(|j| j as f64).product();
            let w = falling * eta.powi((p - k) as i32);
            for i in 0..n {
                out[i] += c[i] * w;
            }
        }
        Ok(out)
    }
}

impl Curve for TrigCurve {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn derivative(&self, eta: f64, k: usize) -> Result<Vec<f64>> {
        Ok((0..self.dim())
            .map(|i| {
                let d = sin_derivs(self.freq[i] * eta + self.phase[i], self.freq[i], k as u32)[k];
                self.amplitude[i] * d + if k == 0 { self.offset[i] } else { 0.0 }
            })
            .collect())
    }
}

/// A curve inside the ball of radius 0.9 for η ∈ [−1, 1].
pub fn random_curve(n: usize, seed: u64) -> Box<dyn Curve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if rng.gen_bool(0.5) {
        let mut coeffs: Vec<Vec<f64>> = (0..=4).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let total: f64 = coeffs.iter().flatten().map(|c| c.abs()).sum::<f64>();
        let s = 0.9 / (total.max(1e-12) * (n as f64).sqrt()).max(1.0);
        for c in coeffs.iter_mut().flatten() {
            *c *= s;
        }
        Box::new(PolyCurve { coeffs })
    } else {
        let r = 0.45 / (n as f64).sqrt();
        Box::new(TrigCurve {
            offset: (0..n).map(|_| rng.gen_range(-r..r)).collect(),
            amplitude: (0..n).map(|_| rng.gen_range(-r..r)).collect(),
            freq: (0..n).map(|_| rng.gen_range(-2.5..2.5)).collect(),
            phase: (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        })
    }
}
