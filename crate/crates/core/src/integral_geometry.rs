//! Lines through a boundary point crossing many occupied ε-cubes, and the
//! selection of well-separated points near such a line.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closed_cells, CubeFilter, GridSpec, Occupancy, PointSet, INNER_RADIUS, NEIGHBORHOOD};

/// Largest number of cells walked one by one along a line.
pub const TRAVERSAL_CAP: f64 = 4.0e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineOrientation {
    /// A line is counted once, through its direction pointing into the ball.
    #[default]
    Unoriented,
    /// Both unit directions of a line are counted.
    Bidirectional,
}

/// Half-angle of the cone of directions from a unit-sphere point that hit B̂ⁿ.
pub fn cap_half_angle() -> f64 {
    INNER_RADIUS.asin()
}

/// Volume of the unit ball in dimension `k ≤ 3`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unit ball volume only tabulated for k <= 3"),
    }
}

/// Area of the unit sphere `S^{n−1}`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => panic!("sphere area only tabulated for n <= 4"),
    }
}

/// Measure of the set of lines through a unit-sphere point meeting B̂ⁿ.
pub fn beta_bar(n: usize, orientation: LineOrientation) -> f64 {
    let a = cap_half_angle();
    let cap = match n {
        1 => 1.0,
        2 => 2.0 * a,
        3 => 2.0 * PI * (1.0 - a.cos()),
        4 => 2.0 * PI * (a - a.sin() * a.cos()),
        _ => panic!("dimension {n} unsupported"),
    };
    match orientation {
        LineOrientation::Unoriented => cap,
        LineOrientation::Bidirectional => 2.0 * cap,
    }
}

/// `θ_n = 2^{3(n−1)}·β̄_{n−1}/β_{n−1}`.
pub fn theta(n: usize, orientation: LineOrientation) -> f64 {
    8f64.powi(n as i32 - 1) * beta_bar(n, orientation) / unit_ball_volume(n - 1)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let r = norm(a);
    a.iter().map(|x| x / r).collect()
}

/// Line `{z0 + t·v}` through a point of the unit sphere, `v` pointing into the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineThroughPoint {
    pub z0: Vec<f64>,
    pub direction: Vec<f64>,
}

impl LineThroughPoint {
    pub fn new(z0: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        if z0.len() != direction.len() || z0.is_empty() {
            return Err(Error::InvalidInput("z0 and direction must share a dimension".into()));
        }
        if (norm(&z0) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("z0 must lie on the unit sphere".into()));
        }
        if (norm(&direction) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("direction must be a unit vector".into()));
        }
        let b = dot(&z0, &direction);
        let miss = dot(&z0, &z0) - b * b;
        if b >= 0.0 || miss > INNER_RADIUS * INNER_RADIUS * (1.0 + 1e-12) {
            return Err(Error::InvalidInput("line does not meet the ball of radius 1/3".into()));
        }
        Ok(LineThroughPoint { z0, direction })
    }

    /// Line from `z0` toward `target`, both normalized as needed.
    pub fn toward(z0: &[f64], target: &[f64]) -> Result<Self> {
        let z0 = normalized(z0);
        let v: Vec<f64> = target.iter().zip(&z0).map(|(t, z)| t - z).collect();
        LineThroughPoint::new(z0, normalized(&v))
    }

    pub fn n(&self) -> usize {
        self.z0.len()
    }

    /// Parameter range of the segment inside the 1/10-neighbourhood of B̂ⁿ.
    pub fn clip(&self) -> (f64, f64) {
        let r = INNER_RADIUS + NEIGHBORHOOD;
        let b = dot(&self.z0, &self.direction);
        let c = dot(&self.z0, &self.z0) - r * r;
        let disc = (b * b - c).max(0.0).sqrt();
        (-b - disc, -b + disc)
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.z0.iter().zip(&self.direction).map(|(z, v)| z + t * v).collect()
    }

    /// Projection parameter of `y` along the line.
    pub fn project(&self, y: &[f64]) -> f64 {
        let rel: Vec<f64> = y.iter().zip(&self.z0).map(|(a, b)| a - b).collect();
        dot(&rel, &self.direction)
    }

    /// Euclidean distance from `y` to the line.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let tau = self.project(y);
        y.iter().zip(&self.z0).zip(&self.direction).map(|((a, z), v)| (a - z - tau * v).powi(2)).sum::<f64>().sqrt()
    }

    /// Coordinate of largest `|v_i|`, lower index on ties.
    pub fn dominant_axis(&self) -> usize {
        let mut best = 0;
        for i in 1..self.n() {
            if self.direction[i].abs() > self.direction[best].abs() {
                best = i;
            }
        }
        best
    }
}

/// Closed cubes met by the segment `z0 + t·v`, `t ∈ [t0, t1]`, in order of first contact.
pub fn touched_cells(line: &LineThroughPoint, t0: f64, t1: f64, eps: f64) -> Result<Vec<Vec<i64>>> {
    let n = line.n();
    let z0 = &line.z0;
    let v = &line.direction;
    let estimate: f64 = v.iter().map(|x| x.abs()).sum::<f64>() * (t1 - t0) / eps + 2.0;
    if estimate * 2f64.powi(n as i32) > TRAVERSAL_CAP {
        return Err(Error::TooLarge(format!("about {estimate:.3e} cells along the line")));
    }
    let q = |i: usize, t: f64| (z0[i] + t * v[i]) / eps;
    let mut events: Vec<(f64, usize)> = Vec::new();
    let mut state: Vec<Vec<i64>> = Vec::with_capacity(n);
    for i in 0..n {
        if v[i] == 0.0 {
            let (lo, hi) = closed_cells(z0[i], eps);
            state.push((lo..=hi).collect());
            continue;
        }
        let (a, b) = (q(i, t0), q(i, t1));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let first = lo.floor() as i64 + 1;
        let last = hi.ceil() as i64 - 1;
        for p in first..=last {
            events.push(((p as f64 * eps - z0[i]) / v[i], i));
        }
        let k = if v[i] > 0.0 { a.floor() as i64 } else { a.ceil() as i64 - 1 };
        state.push(vec![k]);
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut out: Vec<Vec<i64>> = Vec::new();
    let push_product = |sets: &[Vec<i64>], seen: &mut HashSet<Vec<i64>>, out: &mut Vec<Vec<i64>>| {
        let mut idx = vec![0usize; n];
        loop {
            let cell: Vec<i64> = (0..n).map(|i| sets[i][idx[i]]).collect();
            if seen.insert(cell.clone()) {
                out.push(cell);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < sets[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    };
    let endpoint = |t: f64| -> Vec<Vec<i64>> {
        (0..n)
            .map(|i| {
                let (lo, hi) = closed_cells(z0[i] + t * v[i], eps);
                (lo..=hi).collect()
            })
            .collect()
    };
    push_product(&endpoint(t0), &mut seen, &mut out);
    push_product(&state, &mut seen, &mut out);
    let mut e = 0;
    while e < events.len() {
        let t = events[e].0;
        let mut f = e;
        let mut touch = state.clone();
        while f < events.len() && events[f].0 == t {
            let i = events[f].1;
            let k = state[i][0];
            let next = if v[i] > 0.0 { k + 1 } else { k - 1 };
            touch[i] = vec![k.min(next), k.max(next)];
            state[i] = vec![next];
            f += 1;
        }
        push_product(&touch, &mut seen, &mut out);
        push_product(&state, &mut seen, &mut out);
        e = f;
    }
    push_product(&endpoint(t1), &mut seen, &mut out);
    Ok(out)
}

/// Occupied cubes crossed by a line, in traversal order, with representatives.
#[derive(Clone, Debug)]
pub enum CrossedCubes {
    Listed(Vec<(Vec<i64>, Vec<f64>)>),
    Box(BoxCrossing),
}

/// Closed-form crossing data for a box-shaped occupied region.
#[derive(Clone, Debug)]
pub struct BoxCrossing {
    line: LineThroughPoint,
    eps: f64,
    ta: f64,
    tb: f64,
    start: Vec<i64>,
    statics: Vec<Vec<i64>>,
    moving: Vec<bool>,
    count_moving: u128,
    ranges: Vec<(i64, i64)>,
    occ: Occupancy,
}

impl BoxCrossing {
    fn static_factor(&self) -> u128 {
        self.statics.iter().zip(&self.moving).filter(|(_, &m)| !m).map(|(s, _)| s.len() as u128).product()
    }

    fn axis_cell(&self, i: usize, t: f64) -> i64 {
        let v = self.line.direction[i];
        let q = (self.line.z0[i] + t * v) / self.eps;
        let k = if v > 0.0 { q.floor() } else { q.ceil() - 1.0 };
        (k as i64).clamp(self.ranges[i].0, self.ranges[i].1)
    }

    fn crossed_by(&self, t: f64) -> Vec<u128> {
        (0..self.line.n())
            .map(|i| if self.moving[i] { self.axis_cell(i, t).abs_diff(self.start[i]) as u128 } else { 0 })
            .collect()
    }

    fn cell_after(&self, pos: u128) -> Vec<i64> {
        let total = |t: f64| -> u128 { self.crossed_by(t).iter().sum() };
        let (mut lo, mut hi) = (self.ta, self.tb);
        if pos > 0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if total(mid) >= pos {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        } else {
            hi = self.ta;
        }
        let crossed = self.crossed_by(hi);
        (0..self.line.n())
            .map(|i| {
                if !self.moving[i] {
                    return self.start[i];
                }
                let c = crossed[i] as i64;
                if self.line.direction[i] > 0.0 {
                    self.start[i] + c
                } else {
                    self.start[i] - c
                }
            })
            .collect()
    }
}

impl CrossedCubes {
    pub fn len(&self) -> u128 {
        match self {
            CrossedCubes::Listed(v) => v.len() as u128,
            CrossedCubes::Box(b) => {
                let f = b.static_factor();
                b.count_moving * f
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `j`-th crossed cube and its representative.
    pub fn get(&self, j: u128) -> Option<(Vec<i64>, Vec<f64>)> {
        match self {
            CrossedCubes::Listed(v) => v.get(j as usize).cloned(),
            CrossedCubes::Box(b) => {
                if j >= self.len() {
                    return None;
                }
                let f = b.static_factor();
                let (pos, mut combo) = (j / f, j % f);
                let mut cell = b.cell_after(pos);
                for (i, s) in b.statics.iter().enumerate() {
                    if !b.moving[i] {
                        let l = s.len() as u128;
                        cell[i] = s[(combo % l) as usize];
                        combo /= l;
                    }
                }
                let rep = b.occ.representative(&cell)?;
                Some((cell, rep))
            }
        }
    }
}

fn box_crossing(line: &LineThroughPoint, occ: &Occupancy, ranges: &[(i64, i64)]) -> BoxCrossing {
    let n = line.n();
    let eps = occ.epsilon;
    let (t0, t1) = line.clip();
    let (mut ta, mut tb) = (t0, t1);
    let mut statics = vec![Vec::new(); n];
    let mut moving = vec![false; n];
    for i in 0..n {
        let (lo, hi) = ranges[i];
        let (a, b) = (lo as f64 * eps, (hi + 1) as f64 * eps);
        let v = line.direction[i];
        if v == 0.0 {
            let (c0, c1) = closed_cells(line.z0[i], eps);
            statics[i] = (c0..=c1).filter(|k| (lo..=hi).contains(k)).collect();
        } else {
            moving[i] = true;
            let (s, e) = ((a - line.z0[i]) / v, (b - line.z0[i]) / v);
            ta = ta.max(s.min(e));
            tb = tb.min(s.max(e));
        }
    }
    let empty = ta > tb || statics.iter().zip(&moving).any(|(s, &m)| !m && s.is_empty());
    let mut b = BoxCrossing {
        line: line.clone(),
        eps,
        ta,
        tb,
        start: vec![0; n],
        statics,
        moving,
        count_moving: 0,
        ranges: ranges.to_vec(),
        occ: occ.clone(),
    };
    if !empty {
        b.count_moving = 1;
        for i in 0..n {
            if !b.moving[i] {
                b.start[i] = b.statics[i][0];
                continue;
            }
            b.start[i] = b.axis_cell(i, ta);
            b.count_moving += b.axis_cell(i, tb).abs_diff(b.start[i]) as u128;
        }
    }
    b
}

fn sign_key(line: &LineThroughPoint, rep: &[f64]) -> f64 {
    let dom = line.dominant_axis();
    if line.direction[dom] >= 0.0 {
        rep[dom]
    } else {
        -rep[dom]
    }
}

/// Occupied cubes met by the clipped line, ordered along the dominant coordinate.
pub fn crossed_cubes(line: &LineThroughPoint, occ: &Occupancy) -> Result<CrossedCubes> {
    let (t0, t1) = line.clip();
    if let Some(ranges) = occ.box_ranges() {
        let estimate: f64 = line.direction.iter().map(|x| x.abs()).sum::<f64>() * (t1 - t0) / occ.epsilon;
        if estimate * 2f64.powi(line.n() as i32) > TRAVERSAL_CAP {
            return Ok(CrossedCubes::Box(box_crossing(line, occ, &ranges)));
        }
    }
    let cells = touched_cells(line, t0, t1, occ.epsilon)?;
    let mut listed: Vec<(Vec<i64>, Vec<f64>)> =
        cells.into_iter().filter_map(|c| occ.representative(&c).map(|r| (c, r))).collect();
    listed.sort_by(|a, b| sign_key(line, &a.1).total_cmp(&sign_key(line, &b.1)));
    Ok(CrossedCubes::Listed(listed))
}

/// Number of occupied cubes met by the clipped line.
pub fn crossing_count_occ(line: &LineThroughPoint, occ: &Occupancy) -> Result<u128> {
    let (t0, t1) = line.clip();
    if let Some(ranges) = occ.box_ranges() {
        let estimate: f64 = line.direction.iter().map(|x| x.abs()).sum::<f64>() * (t1 - t0) / occ.epsilon;
        if estimate * 2f64.powi(line.n() as i32) > TRAVERSAL_CAP {
            return Ok(CrossedCubes::Box(box_crossing(line, occ, &ranges)).len());
        }
    }
    let cells = touched_cells(line, t0, t1, occ.epsilon)?;
    Ok(cells.iter().filter(|c| occ.contains(c)).count() as u128)
}

/// Number of occupied cubes of Z (inside B̂ⁿ) met by the clipped line.
pub fn crossing_count(line: &LineThroughPoint, z: &PointSet, g: GridSpec) -> Result<u128> {
    let occ = Occupancy::build(z, g, CubeFilter::default())?;
    crossing_count_occ(line, &occ)
}

/// Monte-Carlo estimate of the mean crossing count over lines through `z0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageCrossing {
    /// Mean crossing count over directions that hit B̂ⁿ.
    pub mean: f64,
    pub std_error: f64,
    /// Estimated measure of the set of such directions.
    pub beta_bar: f64,
    pub beta_bar_exact: f64,
    /// `mean·β̄`, the estimated integral of the crossing count.
    pub integral: f64,
    pub integral_std_error: f64,
    pub samples: usize,
    pub draws: usize,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn hits_inner_ball(z0: &[f64], v: &[f64]) -> bool {
    let b = dot(z0, v);
    b < 0.0 && dot(z0, z0) - b * b <= INNER_RADIUS * INNER_RADIUS
}

pub fn average_crossing(z0: &[f64], z: &PointSet, g: GridSpec, samples: usize, seed: u64) -> Result<AverageCrossing> {
    let occ = Occupancy::build(z, g, CubeFilter::default())?;
    average_crossing_occ(z0, &occ, samples, seed)
}

pub fn average_crossing_occ(z0: &[f64], occ: &Occupancy, samples: usize, seed: u64) -> Result<AverageCrossing> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 samples, got {samples}")));
    }
    let n = z0.len();
    if n != occ.n {
        return Err(Error::InvalidInput("z0 dimension mismatch".into()));
    }
    let z0 = normalized(z0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    let mut draws = 0usize;
    while dirs.len() < samples {
        draws += 1;
        let g: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let r = norm(&g);
        if r == 0.0 {
            continue;
        }
        let v: Vec<f64> = g.iter().map(|x| x / r).collect();
        if hits_inner_ball(&z0, &v) {
            dirs.push(v);
        }
    }
    let counts: Vec<f64> = dirs
        .par_iter()
        .map(|v| {
            let line = LineThroughPoint { z0: z0.clone(), direction: v.clone() };
            crossing_count_occ(&line, occ).map(|c| c as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / k;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let area = sphere_area(n);
    let beta_hat = area * k / draws as f64;
    let sum: f64 = counts.iter().sum();
    let all_mean = sum / draws as f64;
    let sq: f64 = counts.iter().map(|c| c * c).sum();
    let all_var = (sq / draws as f64 - all_mean * all_mean).max(0.0) * draws as f64 / (draws as f64 - 1.0);
    Ok(AverageCrossing {
        mean,
        std_error: (var / k).sqrt(),
        beta_bar: beta_hat,
        beta_bar_exact: beta_bar(n, LineOrientation::Unoriented),
        integral: area * all_mean,
        integral_std_error: area * (all_var / draws as f64).sqrt(),
        samples,
        draws,
    })
}

/// Direction-search parameters for [`find_line`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Sweep size; `None` picks a sweep finer than the angular size of a cube.
    pub directions: Option<usize>,
    pub max_directions: usize,
    pub refine_rounds: usize,
    pub chunk: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { directions: None, max_directions: 1 << 20, refine_rounds: 40, chunk: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub line: LineThroughPoint,
    #[serde(with = "crate::count")]
    pub achieved: u128,
    #[serde(with = "crate::count")]
    pub target: u128,
    pub reached: bool,
    pub directions_tried: usize,
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Orthonormal basis of the complement of `u`.
fn complement_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for e in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut w = vec![0.0; n];
        w[e] = 1.0;
        let p = dot(&w, u);
        for (wi, ui) in w.iter_mut().zip(u) {
            *wi -= p * ui;
        }
        for b in &basis {
            let p = dot(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= p * bi;
            }
        }
        let r = norm(&w);
        if r > 1e-6 {
            basis.push(w.iter().map(|x| x / r).collect());
        }
    }
    basis
}

struct Cap {
    u: Vec<f64>,
    basis: Vec<Vec<f64>>,
    alpha: f64,
}

impl Cap {
    fn new(z0: &[f64]) -> Self {
        let u: Vec<f64> = z0.iter().map(|x| -x).collect();
        Cap { basis: complement_basis(&u), u, alpha: cap_half_angle() }
    }

    /// Direction for tangent coordinates `p` (exponential map at `u`).
    fn direction(&self, p: &[f64]) -> Vec<f64> {
        let r = norm(p);
        if r == 0.0 {
            return self.u.clone();
        }
        let (s, c) = r.sin_cos();
        let mut v: Vec<f64> = self.u.iter().map(|x| c * x).collect();
        for (pj, b) in p.iter().zip(&self.basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += s * pj / r * bi;
            }
        }
        normalized(&v)
    }

    /// `k`-th low-discrepancy tangent point of the cap (k = 0 is the center).
    fn sample(&self, k: u64, shift: &[f64]) -> Vec<f64> {
        let dim = self.basis.len();
        if k == 0 || dim == 0 {
            return vec![0.0; dim];
        }
        const PRIMES: [u64; 3] = [2, 3, 5];
        let x: Vec<f64> = (0..dim).map(|j| (radical_inverse(k, PRIMES[j]) + shift[j]).fract()).collect();
        let a = self.alpha;
        match dim {
            1 => vec![a * (2.0 * x[0] - 1.0)],
            2 => {
                let cos_phi = 1.0 - x[0] * (1.0 - a.cos());
                let phi = cos_phi.clamp(-1.0, 1.0).acos();
                let psi = 2.0 * PI * x[1];
                vec![phi * psi.cos(), phi * psi.sin()]
            }
            _ => {
                let cdf = |p: f64| p - p.sin() * p.cos();
                let target = x[0] * cdf(a);
                let (mut lo, mut hi) = (0.0, a);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let phi = 0.5 * (lo + hi);
                let zc = 2.0 * x[1] - 1.0;
                let rr = (1.0 - zc * zc).max(0.0).sqrt();
                let psi = 2.0 * PI * x[2];
                vec![phi * rr * psi.cos(), phi * rr * psi.sin(), phi * zc]
            }
        }
    }
}

fn better(a: &(u128, Vec<f64>), b: &(u128, Vec<f64>)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    for (x, y) in a.1.iter().zip(&b.1) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Searches lines through `z0` for one crossing at least `target` occupied cubes.
pub fn find_line(
    z0: &[f64],
    z: &PointSet,
    g: GridSpec,
    target: u128,
    budget: SearchBudget,
    seed: u64,
) -> Result<LineSearch> {
    let occ = Occupancy::build(z, g, CubeFilter::default())?;
    find_line_occ(z0, &occ, target, budget, seed)
}

pub fn find_line_occ(z0: &[f64], occ: &Occupancy, target: u128, budget: SearchBudget, seed: u64) -> Result<LineSearch> {
    let n = z0.len();
    if n != occ.n {
        return Err(Error::InvalidInput("z0 dimension mismatch".into()));
    }
    if (norm(z0) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput("z0 must lie on the unit sphere".into()));
    }
    let z0 = normalized(z0);
    let cap = Cap::new(&z0);
    let dim = cap.basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
    let total = if dim == 0 {
        1
    } else {
        budget
            .directions
            .unwrap_or_else(|| {
                let per_axis = (4.0 * cap.alpha / occ.epsilon).ceil();
                (2.0 * per_axis.powi(dim as i32)).min(budget.max_directions as f64) as usize
            })
            .clamp(1, budget.max_directions)
    };
    let eval = |p: &[f64]| -> Result<(u128, Vec<f64>)> {
        let v = cap.direction(p);
        let line = LineThroughPoint { z0: z0.clone(), direction: v.clone() };
        Ok((crossing_count_occ(&line, occ)?, v))
    };
    let mut best: Option<(u128, Vec<f64>, Vec<f64>)> = None;
    let mut tried = 0usize;
    let chunk = budget.chunk.max(1);
    let mut start = 0usize;
    while start < total {
        let end = (start + chunk).min(total);
        let results: Vec<(u128, Vec<f64>, Vec<f64>)> = (start..end)
            .into_par_iter()
            .map(|k| {
                let p = cap.sample(k as u64, &shift);
                eval(&p).map(|(c, v)| (c, v, p))
            })
            .collect::<Result<Vec<_>>>()?;
        tried += end - start;
        for r in results {
            let replace = match &best {
                None => true,
                Some(b) => better(&(r.0, r.1.clone()), &(b.0, b.1.clone())),
            };
            if replace {
                best = Some(r);
            }
        }
        if best.as_ref().is_some_and(|b| b.0 >= target) {
            break;
        }
        start = end;
    }
    let (mut count, mut dir, mut p) = best.expect("at least one direction evaluated");
    if count < target && dim > 0 {
        let mut step = 2.0 * cap.alpha / (total as f64).powf(1.0 / dim as f64);
        for _ in 0..budget.refine_rounds {
            let candidates: Vec<Vec<f64>> = (0..dim)
                .flat_map(|j| {
                    [-1.0, 1.0].into_iter().map({
                        let p = p.clone();
                        move |s| {
                            let mut q = p.clone();
                            q[j] += s * step;
                            q
                        }
                    })
                })
                .filter(|q| norm(q) <= cap.alpha)
                .collect();
            let results: Vec<(u128, Vec<f64>, Vec<f64>)> =
                candidates.into_par_iter().map(|q| eval(&q).map(|(c, v)| (c, v, q))).collect::<Result<Vec<_>>>()?;
            tried += results.len();
            let mut improved = false;
            for r in results {
                if better(&(r.0, r.1.clone()), &(count, dir.clone())) && r.0 > count {
                    count = r.0;
                    dir = r.1;
                    p = r.2;
                    improved = true;
                }
            }
            if count >= target {
                break;
            }
            if !improved {
                step /= 2.0;
            }
        }
    }
    Ok(LineSearch {
        line: LineThroughPoint { z0, direction: dir },
        achieved: count,
        target,
        reached: count >= target,
        directions_tried: tried,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Every s-th crossed cube with `s = ⌊2n²κ/ε⌋`.
    PaperStride,
    /// First point, then each next point at projection gap ≥ κ.
    GreedyGap,
    /// Points supplied directly.
    Given,
}

/// A line and d+1 points of Z near it with separated projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineCertificate {
    pub line: LineThroughPoint,
    /// Selected points, by increasing projection parameter.
    pub selected: Vec<Vec<f64>>,
    pub projections: Vec<f64>,
    pub rho: f64,
    pub kappa: f64,
    pub mu_d: f64,
    #[serde(with = "crate::count")]
    pub crossing_count: u128,
    pub epsilon: f64,
    pub rule: SelectionRule,
}

impl LineCertificate {
    /// Computes ρ, κ and μ_d from the line and points.
    pub fn from_points(
        line: LineThroughPoint,
        mut points: Vec<Vec<f64>>,
        crossing_count: u128,
        epsilon: f64,
        rule: SelectionRule,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("need at least two points".into()));
        }
        points.sort_by(|a, b| line.project(a).total_cmp(&line.project(b)));
        let projections: Vec<f64> = points.iter().map(|p| line.project(p)).collect();
        let rho = points.iter().map(|p| line.distance(p)).fold(0.0, f64::max);
        let kappa = projections.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let d = points.len() - 1;
        let mu_d = rho / kappa.powi(d as i32);
        Ok(LineCertificate { line, selected: points, projections, rho, kappa, mu_d, crossing_count, epsilon, rule })
    }

    pub fn d(&self) -> usize {
        self.selected.len() - 1
    }

    /// Largest discrepancy between stored and recomputed ρ, κ, μ_d.
    pub fn recheck(&self) -> f64 {
        let r = LineCertificate::from_points(
            self.line.clone(),
            self.selected.clone(),
            self.crossing_count,
            self.epsilon,
            self.rule,
        )
        .expect("stored certificate has points");
        [(r.rho - self.rho).abs(), (r.kappa - self.kappa).abs(), (r.mu_d - self.mu_d).abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `N = ⌈2n²(d+1)κ/ε⌉`.
pub fn required_crossings(n: usize, d: usize, kappa: f64, eps: f64) -> u128 {
    (2.0 * (n * n) as f64 * (d as f64 + 1.0) * kappa / eps).ceil() as u128
}

/// Picks d+1 points near `line` with projections at least `kappa_target` apart.
pub fn select_separated_points(
    line: &LineThroughPoint,
    z: &PointSet,
    g: GridSpec,
    d: usize,
    kappa_target: f64,
) -> Result<LineCertificate> {
    let occ = Occupancy::build(z, g, CubeFilter::default())?;
    select_separated_points_occ(line, &occ, d, kappa_target)
}

pub fn select_separated_points_occ(
    line: &LineThroughPoint,
    occ: &Occupancy,
    d: usize,
    kappa_target: f64,
) -> Result<LineCertificate> {
    let n = line.n();
    let eps = occ.epsilon;
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    if kappa_target <= 10.0 * (n as f64).sqrt() * eps {
        return Err(Error::Precondition(format!(
            "kappa_target {kappa_target} must exceed 10 sqrt(n) eps = {}",
            10.0 * (n as f64).sqrt() * eps
        )));
    }
    let crossed = crossed_cubes(line, occ)?;
    let count = crossed.len();
    let big_n = required_crossings(n, d, kappa_target, eps);
    let stride = (2.0 * (n * n) as f64 * kappa_target / eps).floor() as u128;
    let acceptable =
        |c: &LineCertificate| c.kappa >= kappa_target && c.rho <= (n as f64).sqrt() * eps && c.kappa > 10.0 * c.rho;
    if count >= big_n && stride >= 1 && stride * (d as u128 + 1) <= count {
        let picks: Vec<Vec<f64>> = (1..=d as u128 + 1)
            .map(|i| crossed.get(stride * i - 1).map(|e| e.1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Internal("crossed cube without representative".into()))?;
        let cert = LineCertificate::from_points(line.clone(), picks, count, eps, SelectionRule::PaperStride)?;
        if acceptable(&cert) {
            return Ok(cert);
        }
    }
    let CrossedCubes::Listed(list) = &crossed else {
        return Err(Error::InsufficientCrossings("stride selection failed on a closed-form crossing".into()));
    };
    let mut reps: Vec<(f64, Vec<f64>)> = list.iter().map(|(_, r)| (line.project(r), r.clone())).collect();
    reps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut picks: Vec<Vec<f64>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (tau, r) in &reps {
        if picks.is_empty() || tau - last >= kappa_target {
            picks.push(r.clone());
            last = *tau;
            if picks.len() == d + 1 {
                break;
            }
        }
    }
    if picks.len() < d + 1 {
        return Err(Error::InsufficientCrossings(format!(
            "only {} of {} points at separation {kappa_target} among {count} crossed cubes",
            picks.len(),
            d + 1
        )));
    }
    let cert = LineCertificate::from_points(line.clone(), picks, count, eps, SelectionRule::GreedyGap)?;
    if !(cert.kappa > 10.0 * cert.rho) {
        return Err(Error::InsufficientCrossings(format!(
            "selected points too far from the line: rho = {}, kappa = {}",
            cert.rho, cert.kappa
        )));
    }
    Ok(cert)
}
