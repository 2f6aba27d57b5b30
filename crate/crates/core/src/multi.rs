//! Multi-indices and truncated multivariate Taylor jets.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// `k!` as f64.
pub fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// `α! = Π α_i!`.
pub fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

/// All multi-indices of length `n` with total degree exactly `k`,
/// in descending lexicographic order (x₁ᵏ first).
pub fn indices_of_degree(n: usize, k: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=k).rev() {
            prefix.push(a);
            rec(n, k - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, k, &mut Vec::with_capacity(n), &mut out);
    out
}

/// All multi-indices of total degree ≤ `max_order` in graded-lex order.
pub fn graded_lex(n: usize, max_order: u32) -> Vec<Vec<u32>> {
    (0..=max_order).flat_map(|k| indices_of_degree(n, k)).collect()
}

/// Number of multi-indices of length `n` and degree ≤ `d`: C(n+d, d).
pub fn monomial_count(n: usize, d: u32) -> usize {
    let mut c: u128 = 1;
    for j in 1..=d as u128 {
        c = c * (n as u128 + j) / j;
    }
    c as usize
}

/// Evaluate the monomial `x^α`.
pub fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter().zip(alpha).map(|(&xi, &a)| xi.powi(a as i32)).product()
}

/// Index tables for jets of a fixed dimension and order.
#[derive(Debug)]
pub struct JetSpace {
    pub n: usize,
    pub order: u32,
    pub indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
    products: Vec<(usize, usize, usize)>,
}

impl JetSpace {
    fn build(n: usize, order: u32) -> Self {
        let indices = graded_lex(n, order);
        let lookup: HashMap<Vec<u32>, usize> = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let da: u32 = a.iter().sum();
            for (j, b) in indices.iter().enumerate() {
                let db: u32 = b.iter().sum();
                if da + db > order {
                    continue;
                }
                let s: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i, j, lookup[&s]));
            }
        }
        JetSpace { n, order, indices, lookup, products }
    }

    /// Shared table for `(n, order)`.
    pub fn get(n: usize, order: u32) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet cache poisoned");
        guard.entry((n, order)).or_insert_with(|| Arc::new(JetSpace::build(n, order))).clone()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

/// Truncated Taylor expansion `f(x + h) ≈ Σ c_α h^α` around a base point.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Jet { space: space.clone(), coeffs: vec![0.0; space.len()] }
    }

    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Self {
        let mut j = Jet::zero(space);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate function `x_i` expanded at a point with `x_i = value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Self {
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u32; space.n];
            e[i] = 1;
            let idx = space.index_of(&e).expect("unit index present");
            j.coeffs[idx] = 1.0;
        }
        j
    }

    /// Jet of a function of one coordinate, given `g^{(k)}(x_i)` for k = 0..=order.
    pub fn univariate(space: &Arc<JetSpace>, i: usize, derivs: &[f64]) -> Self {
        let mut j = Jet::zero(space);
        let mut e = vec![0u32; space.n];
        for k in 0..=space.order {
            e[i] = k;
            let idx = space.index_of(&e).expect("axis index present");
            j.coeffs[idx] = derivs[k as usize] / factorial(k);
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn taylor_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∂^α f` at the base point.
    pub fn partial(&self, alpha: &[u32]) -> Option<f64> {
        self.space.index_of(alpha).map(|i| self.coeffs[i] * multi_factorial(alpha))
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Jet { space: self.space.clone(), coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { space: self.space.clone(), coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    pub fn add_constant(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += c;
        j
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut out = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            out[k] += self.coeffs[i] * other.coeffs[j];
        }
        Jet { space: self.space.clone(), coeffs: out }
    }

    /// `g ∘ self` where `derivs[k] = g^{(k)}(self.value())`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut result = Jet::constant(&self.space, derivs[0]);
        let mut power = Jet::constant(&self.space, 1.0);
        for k in 1..=self.space.order {
            power = power.mul(&delta);
            result = result.add(&power.scale(derivs[k as usize] / factorial(k)));
        }
        result
    }
}
