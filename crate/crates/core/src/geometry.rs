//! Point sets, ε-cube covering numbers, the density functional ζ_d and
//! box-dimension estimates.
//!
//! Cubes are closed and anchored at the origin: cube `k` along an axis is
//! `[kε, (k+1)ε]`. Membership is decided on `q = x / ε`, so a point with
//! integral `q` belongs to both neighbouring cubes.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius of the inner ball B̂ⁿ that must contain Z.
pub const INNER_RADIUS: f64 = 1.0 / 3.0;
/// Width of the neighbourhood of B̂ⁿ used to clip lines.
pub const NEIGHBORHOOD: f64 = 0.1;
/// Per-axis grid size above which counts switch to closed form.
pub const AXIS_ENUM_CAP: u64 = 1 << 22;
/// Maximum number of occupied cells listed one by one.
pub const CELL_LIST_CAP: u128 = 4_000_000;
/// Maximum number of points materialized from an implicit grid.
pub const MATERIALIZE_CAP: u128 = 10_000_000;

const BALL_TOL: f64 = 1e-12;

/// Regular grid `corner_i + offset_i + j·h`, `0 ≤ offset_i + j·h ≤ s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitGrid {
    pub s: f64,
    pub h: f64,
    pub offset: Vec<f64>,
    pub corner: Vec<f64>,
}

impl ImplicitGrid {
    pub fn n(&self) -> usize {
        self.corner.len()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.offset.len() != n || self.corner.len() != n {
            return Err(Error::InvalidInput(format!("grid offset/corner must have length {n}")));
        }
        let finite =
            self.s.is_finite() && self.h.is_finite() && self.offset.iter().chain(&self.corner).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite grid parameter".into()));
        }
        if !(self.h > 0.0 && self.h <= self.s) {
            return Err(Error::InvalidInput(format!("grid requires 0 < h <= s, got h={} s={}", self.h, self.s)));
        }
        for &o in &self.offset {
            if !(0.0..=self.s).contains(&o) {
                return Err(Error::InvalidInput(format!("grid offset {o} outside [0, s]")));
            }
        }
        Ok(())
    }

    /// First coordinate along axis `i`.
    pub fn base(&self, i: usize) -> f64 {
        self.corner[i] + self.offset[i]
    }

    /// Coordinate of the `j`-th point along axis `i`.
    pub fn coord(&self, i: usize, j: u64) -> f64 {
        self.base(i) + j as f64 * self.h
    }

    /// Number of grid positions along axis `i`.
    pub fn axis_len(&self, i: usize) -> u64 {
        let o = self.offset[i];
        let fits = |j: u64| o + j as f64 * self.h <= self.s;
        let mut m = ((self.s - o) / self.h).floor().max(0.0) as u64 + 1;
        while fits(m) {
            m += 1;
        }
        while m > 0 && !fits(m - 1) {
            m -= 1;
        }
        m
    }

    pub fn len(&self) -> u128 {
        (0..self.n()).map(|i| self.axis_len(i) as u128).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Explicit point list in lexicographic index order.
    pub fn materialize(&self) -> Result<Vec<Vec<f64>>> {
        let total = self.len();
        if total > MATERIALIZE_CAP {
            return Err(Error::TooLarge(format!("{total} grid points exceed the materialization cap")));
        }
        let n = self.n();
        let lens: Vec<u64> = (0..n).map(|i| self.axis_len(i)).collect();
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0u64; n];
        if total == 0 {
            return Ok(out);
        }
        loop {
            out.push((0..n).map(|i| self.coord(i, idx[i])).collect());
            let mut axis = n;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < lens[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

/// Explicit point cloud or implicit grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    Explicit(Vec<Vec<f64>>),
    Grid(ImplicitGrid),
}

/// A point set Z in dimension `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PointSetJson", into = "PointSetJson")]
pub struct PointSet {
    pub n: usize,
    pub repr: Representation,
    pub label: String,
    /// Skips the B̂ⁿ containment check (generation fixtures, Remez tests).
    pub raw: bool,
}

#[derive(Serialize, Deserialize)]
struct PointSetJson {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<ImplicitGrid>,
    #[serde(default)]
    label: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    raw: bool,
}

impl TryFrom<PointSetJson> for PointSet {
    type Error = Error;
    fn try_from(j: PointSetJson) -> Result<Self> {
        let repr = match (j.points, j.grid) {
            (Some(p), None) => Representation::Explicit(p),
            (None, Some(g)) => Representation::Grid(g),
            _ => return Err(Error::InvalidInput("point set needs exactly one of \"points\" or \"grid\"".into())),
        };
        PointSet::new(j.n, repr, j.label, j.raw)
    }
}

impl From<PointSet> for PointSetJson {
    fn from(p: PointSet) -> Self {
        let (points, grid) = match p.repr {
            Representation::Explicit(v) => (Some(v), None),
            Representation::Grid(g) => (None, Some(g)),
        };
        PointSetJson { n: p.n, points, grid, label: p.label, raw: p.raw }
    }
}

impl PointSet {
    pub fn new(n: usize, repr: Representation, label: impl Into<String>, raw: bool) -> Result<Self> {
        if !(1..=4).contains(&n) {
            return Err(Error::InvalidInput(format!("dimension {n} outside 1..=4")));
        }
        match &repr {
            Representation::Explicit(points) => {
                for p in points {
                    if p.len() != n {
                        return Err(Error::InvalidInput(format!("point of length {} in dimension {n}", p.len())));
                    }
                    if p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidInput("non-finite coordinate".into()));
                    }
                    if !raw && norm(p) > INNER_RADIUS + BALL_TOL {
                        return Err(Error::InvalidInput(format!("point {p:?} lies outside the ball of radius 1/3")));
                    }
                }
            }
            Representation::Grid(g) => {
                g.validate(n)?;
                if !raw {
                    let far: f64 =
                        (0..n).map(|i| g.corner[i].abs().max((g.corner[i] + g.s).abs()).powi(2)).sum::<f64>().sqrt();
                    if far > INNER_RADIUS + BALL_TOL {
                        return Err(Error::InvalidInput("grid cube is not contained in the ball of radius 1/3".into()));
                    }
                }
            }
        }
        Ok(PointSet { n, repr, label: label.into(), raw })
    }

    pub fn explicit(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let n = points.first().map(|p| p.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::EmptySet);
        }
        PointSet::new(n, Representation::Explicit(points), label, false)
    }

    pub fn explicit_raw(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let n = points.first().map(|p| p.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::EmptySet);
        }
        PointSet::new(n, Representation::Explicit(points), label, true)
    }

    pub fn grid(grid: ImplicitGrid, label: impl Into<String>) -> Result<Self> {
        let n = grid.n();
        PointSet::new(n, Representation::Grid(grid), label, false)
    }

    pub fn len(&self) -> u128 {
        match &self.repr {
            Representation::Explicit(p) => p.len() as u128,
            Representation::Grid(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points as an explicit list (materializes grids up to the cap).
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        match &self.repr {
            Representation::Explicit(p) => Ok(p.clone()),
            Representation::Grid(g) => g.materialize(),
        }
    }

    /// Same set in explicit form.
    pub fn to_explicit(&self) -> Result<PointSet> {
        Ok(PointSet {
            n: self.n,
            repr: Representation::Explicit(self.points()?),
            label: self.label.clone(),
            raw: self.raw,
        })
    }

    pub fn as_grid(&self) -> Option<&ImplicitGrid> {
        match &self.repr {
            Representation::Grid(g) => Some(g),
            Representation::Explicit(_) => None,
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Side length of the origin-anchored closed cube grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub epsilon: f64,
}

impl GridSpec {
    /// Accepts `0 < ε ≤ 1/10`.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.1 && epsilon.is_finite()) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        Ok(GridSpec { epsilon })
    }
}

/// Indices of the closed cubes containing coordinate `x`.
pub fn closed_cells(x: f64, eps: f64) -> (i64, i64) {
    let q = x / eps;
    let k = q.floor();
    if q == k {
        (k as i64 - 1, k as i64)
    } else {
        (k as i64, k as i64)
    }
}

fn for_each_cell(p: &[f64], eps: f64, mut f: impl FnMut(&[i64])) {
    let n = p.len();
    let ranges: Vec<(i64, i64)> = p.iter().map(|&x| closed_cells(x, eps)).collect();
    let mut cell: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&cell);
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cell[axis] < ranges[axis].1 {
                cell[axis] += 1;
                break;
            }
            cell[axis] = ranges[axis].0;
        }
    }
}

// Exact dyadic arithmetic for closed-form grid counts.

fn decompose(x: f64) -> (BigInt, i32) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let e = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if e == 0 { (frac, -1074) } else { (frac | (1u64 << 52), e - 1075) };
    (BigInt::from(mant) * sign, exp)
}

fn to_common(values: &[f64]) -> Vec<BigInt> {
    let parts: Vec<(BigInt, i32)> = values.iter().map(|&v| decompose(v)).collect();
    let e_min = parts.iter().filter(|(m, _)| !m.is_zero()).map(|p| p.1).min().unwrap_or(0);
    parts.into_iter().map(|(m, e)| if m.is_zero() { m } else { m << ((e - e_min) as usize) }).collect()
}

struct ExactAxis {
    base: BigInt,
    step: BigInt,
    eps: BigInt,
}

impl ExactAxis {
    fn new(base: f64, h: f64, eps: f64) -> Self {
        let v = to_common(&[base, h, eps]);
        ExactAxis { base: v[0].clone(), step: v[1].clone(), eps: v[2].clone() }
    }

    fn numerator(&self, j: u64) -> BigInt {
        &self.base + &self.step * BigInt::from(j)
    }

    fn min_cell(&self, j: u64) -> i64 {
        let (q, r) = self.numerator(j).div_mod_floor(&self.eps);
        let q = q.to_i64().expect("cell index fits i64");
        if r.is_zero() {
            q - 1
        } else {
            q
        }
    }

    fn max_cell(&self, j: u64) -> i64 {
        self.numerator(j).div_floor(&self.eps).to_i64().expect("cell index fits i64")
    }

    /// Number of `j < m` with `(base + j·h)/ε` an integer.
    fn boundary_hits(&self, m: u64) -> u128 {
        let g = self.step.gcd(&self.eps);
        if !(&self.base % &g).is_zero() {
            return 0;
        }
        let step = &self.step / &g;
        let modulus = &self.eps / &g;
        if modulus.is_one() {
            return m as u128;
        }
        let b = &self.base / &g;
        let ext = step.extended_gcd(&modulus);
        let inv = ext.x.mod_floor(&modulus);
        let j0 = (-b * inv).mod_floor(&modulus);
        let mm = BigInt::from(m);
        if j0 >= mm {
            return 0;
        }
        let count: BigInt = (mm - BigInt::one() - j0) / &modulus + BigInt::one();
        count.abs().to_u128().expect("count fits u128")
    }
}

/// Occupied cube indices along one axis of a grid.
#[derive(Clone, Debug)]
pub enum AxisSet {
    /// Indices with the smallest grid coordinate inside each cube, ascending.
    Listed(Vec<(i64, f64)>),
    /// Contiguous block `lo..=hi` of a grid with spacing ≤ ε.
    Range { lo: i64, hi: i64, base: f64, h: f64, m: u64 },
    /// Count only (sparse grids too large to list).
    Count(u128),
}

impl AxisSet {
    pub fn count(&self) -> u128 {
        match self {
            AxisSet::Listed(v) => v.len() as u128,
            AxisSet::Range { lo, hi, .. } => (hi - lo + 1) as u128,
            AxisSet::Count(c) => *c,
        }
    }

    pub fn contains(&self, k: i64) -> bool {
        match self {
            AxisSet::Listed(v) => v.binary_search_by_key(&k, |e| e.0).is_ok(),
            AxisSet::Range { lo, hi, .. } => (*lo..=*hi).contains(&k),
            AxisSet::Count(_) => false,
        }
    }

    /// Smallest grid coordinate inside cube `k`.
    pub fn representative(&self, k: i64, eps: f64) -> Option<f64> {
        match self {
            AxisSet::Listed(v) => v.binary_search_by_key(&k, |e| e.0).ok().map(|i| v[i].1),
            AxisSet::Range { lo, hi, base, h, m } => {
                if k < *lo || k > *hi {
                    return None;
                }
                let x = |j: u64| base + j as f64 * h;
                let kf = k as f64;
                let mut j = ((kf * eps - base) / h).ceil().max(0.0).min((*m - 1) as f64) as u64;
                while j > 0 && x(j - 1) / eps >= kf {
                    j -= 1;
                }
                while j + 1 < *m && x(j) / eps < kf {
                    j += 1;
                }
                Some(x(j))
            }
            AxisSet::Count(_) => None,
        }
    }

    /// `(lo, hi)` when the set is a contiguous block.
    pub fn as_range(&self) -> Option<(i64, i64)> {
        match self {
            AxisSet::Range { lo, hi, .. } => Some((*lo, *hi)),
            AxisSet::Listed(v) if !v.is_empty() => {
                let lo = v[0].0;
                let hi = v[v.len() - 1].0;
                ((hi - lo + 1) as usize == v.len()).then_some((lo, hi))
            }
            _ => None,
        }
    }
}

/// Occupied cubes along axis `i` of a grid.
pub fn grid_axis_set(g: &ImplicitGrid, i: usize, eps: f64) -> AxisSet {
    let m = g.axis_len(i);
    if m == 0 {
        return AxisSet::Listed(Vec::new());
    }
    if m <= AXIS_ENUM_CAP {
        let mut out: Vec<(i64, f64)> = Vec::new();
        for j in 0..m {
            let x = g.coord(i, j);
            let (lo, hi) = closed_cells(x, eps);
            for k in lo..=hi {
                if out.last().is_none_or(|e| e.0 < k) {
                    out.push((k, x));
                }
            }
        }
        return AxisSet::Listed(out);
    }
    let exact = ExactAxis::new(g.base(i), g.h, eps);
    if g.h <= eps {
        AxisSet::Range { lo: exact.min_cell(0), hi: exact.max_cell(m - 1), base: g.base(i), h: g.h, m }
    } else {
        AxisSet::Count(m as u128 + exact.boundary_hits(m))
    }
}

/// M(ε, Z): number of closed origin-anchored ε-cubes meeting Z.
pub fn covering_number(z: &PointSet, g: GridSpec) -> Result<u128> {
    GridSpec::new(g.epsilon)?;
    if z.is_empty() {
        return Err(Error::EmptySet);
    }
    let eps = g.epsilon;
    match &z.repr {
        Representation::Explicit(points) => {
            let mut cells: HashSet<Vec<i64>> = HashSet::with_capacity(points.len());
            for p in points {
                for_each_cell(p, eps, |c| {
                    if !cells.contains(c) {
                        cells.insert(c.to_vec());
                    }
                });
            }
            Ok(cells.len() as u128)
        }
        Representation::Grid(grid) => Ok((0..z.n).map(|i| grid_axis_set(grid, i, eps).count()).product()),
    }
}

/// Which occupied cubes take part in line crossing counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeFilter {
    /// Cubes contained in the closed ball of radius 1/3.
    #[default]
    InsideBall,
    /// Cubes meeting the 1/10-neighbourhood of that ball.
    BallNeighborhood,
}

impl CubeFilter {
    pub fn accepts(&self, cell: &[i64], eps: f64) -> bool {
        match self {
            CubeFilter::InsideBall => {
                let far: f64 = cell
                    .iter()
                    .map(|&k| {
                        let a = (k as f64 * eps).abs();
                        let b = ((k + 1) as f64 * eps).abs();
                        a.max(b).powi(2)
                    })
                    .sum();
                far <= INNER_RADIUS * INNER_RADIUS * (1.0 + 1e-12)
            }
            CubeFilter::BallNeighborhood => {
                let near: f64 = cell
                    .iter()
                    .map(|&k| {
                        let a = k as f64 * eps;
                        let b = (k + 1) as f64 * eps;
                        if a <= 0.0 && b >= 0.0 {
                            0.0
                        } else {
                            a.abs().min(b.abs()).powi(2)
                        }
                    })
                    .sum();
                let r = INNER_RADIUS + NEIGHBORHOOD;
                near <= r * r
            }
        }
    }
}

/// Occupied cubes of Z at scale ε after filtering, with the
/// lexicographically smallest point of Z in each cube.
#[derive(Clone, Debug)]
pub struct Occupancy {
    pub n: usize,
    pub epsilon: f64,
    kind: OccupancyKind,
}

#[derive(Clone, Debug)]
enum OccupancyKind {
    Cells(HashMap<Vec<i64>, Vec<f64>>),
    Product(Vec<AxisSet>),
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

impl Occupancy {
    pub fn build(z: &PointSet, g: GridSpec, filter: CubeFilter) -> Result<Self> {
        GridSpec::new(g.epsilon)?;
        if z.is_empty() {
            return Err(Error::EmptySet);
        }
        let eps = g.epsilon;
        match &z.repr {
            Representation::Explicit(points) => {
                let mut cells: HashMap<Vec<i64>, Vec<f64>> = HashMap::new();
                for p in points {
                    for_each_cell(p, eps, |c| {
                        if !filter.accepts(c, eps) {
                            return;
                        }
                        match cells.get_mut(c) {
                            Some(rep) => {
                                if lex_less(p, rep) {
                                    *rep = p.clone();
                                }
                            }
                            None => {
                                cells.insert(c.to_vec(), p.clone());
                            }
                        }
                    });
                }
                Ok(Occupancy { n: z.n, epsilon: eps, kind: OccupancyKind::Cells(cells) })
            }
            Representation::Grid(grid) => {
                let axes: Vec<AxisSet> = (0..z.n).map(|i| grid_axis_set(grid, i, eps)).collect();
                if axes.iter().any(|a| matches!(a, AxisSet::Count(_))) {
                    return Err(Error::TooLarge("grid spacing exceeds epsilon on an axis too long to list".into()));
                }
                let ranges: Vec<(i64, i64)> = axes
                    .iter()
                    .map(|a| match a {
                        AxisSet::Listed(v) if !v.is_empty() => (v[0].0, v[v.len() - 1].0),
                        AxisSet::Range { lo, hi, .. } => (*lo, *hi),
                        _ => (0, -1),
                    })
                    .collect();
                let corners_ok = {
                    let mut all = true;
                    let mut c = vec![0i64; z.n];
                    for mask in 0..(1u32 << z.n) {
                        for i in 0..z.n {
                            c[i] = if mask >> i & 1 == 1 { ranges[i].1 } else { ranges[i].0 };
                        }
                        all &= filter.accepts(&c, eps);
                    }
                    all
                };
                if corners_ok {
                    return Ok(Occupancy { n: z.n, epsilon: eps, kind: OccupancyKind::Product(axes) });
                }
                let total: u128 = axes.iter().map(|a| a.count()).product();
                if total > CELL_LIST_CAP {
                    return Err(Error::TooLarge(format!("{total} occupied cubes straddle the filter boundary")));
                }
                let mut cells = HashMap::new();
                let lists: Vec<Vec<(i64, f64)>> = axes
                    .iter()
                    .map(|a| match a {
                        AxisSet::Listed(v) => v.clone(),
                        AxisSet::Range { lo, hi, .. } => {
                            (*lo..=*hi).map(|k| (k, a.representative(k, eps).expect("in range"))).collect()
                        }
                        AxisSet::Count(_) => unreachable!(),
                    })
                    .collect();
                let mut idx = vec![0usize; z.n];
                if lists.iter().all(|l| !l.is_empty()) {
                    'outer: loop {
                        let cell: Vec<i64> = (0..z.n).map(|i| lists[i][idx[i]].0).collect();
                        if filter.accepts(&cell, eps) {
                            let rep: Vec<f64> = (0..z.n).map(|i| lists[i][idx[i]].1).collect();
                            cells.insert(cell, rep);
                        }
                        let mut axis = z.n;
                        loop {
                            if axis == 0 {
                                break 'outer;
                            }
                            axis -= 1;
                            idx[axis] += 1;
                            if idx[axis] < lists[axis].len() {
                                break;
                            }
                            idx[axis] = 0;
                        }
                    }
                }
                Ok(Occupancy { n: z.n, epsilon: eps, kind: OccupancyKind::Cells(cells) })
            }
        }
    }

    /// Occupancy given directly by a list of cubes (test fixtures).
    pub fn from_cells(n: usize, epsilon: f64, cells: HashMap<Vec<i64>, Vec<f64>>) -> Self {
        Occupancy { n, epsilon, kind: OccupancyKind::Cells(cells) }
    }

    pub fn count(&self) -> u128 {
        match &self.kind {
            OccupancyKind::Cells(c) => c.len() as u128,
            OccupancyKind::Product(a) => a.iter().map(|x| x.count()).product(),
        }
    }

    pub fn contains(&self, cell: &[i64]) -> bool {
        match &self.kind {
            OccupancyKind::Cells(c) => c.contains_key(cell),
            OccupancyKind::Product(a) => a.iter().zip(cell).all(|(s, &k)| s.contains(k)),
        }
    }

    pub fn representative(&self, cell: &[i64]) -> Option<Vec<f64>> {
        match &self.kind {
            OccupancyKind::Cells(c) => c.get(cell).cloned(),
            OccupancyKind::Product(a) => a.iter().zip(cell).map(|(s, &k)| s.representative(k, self.epsilon)).collect(),
        }
    }

    /// Per-axis contiguous index blocks when the occupied set is a full box.
    pub fn box_ranges(&self) -> Option<Vec<(i64, i64)>> {
        match &self.kind {
            OccupancyKind::Product(a) => a.iter().map(|s| s.as_range()).collect(),
            OccupancyKind::Cells(_) => None,
        }
    }

    /// Occupied cells in sorted order (only for listed occupancies).
    pub fn cells(&self) -> Option<Vec<Vec<i64>>> {
        match &self.kind {
            OccupancyKind::Cells(c) => {
                let mut v: Vec<Vec<i64>> = c.keys().cloned().collect();
                v.sort();
                Some(v)
            }
            OccupancyKind::Product(_) => None,
        }
    }
}

/// One rung of the covering profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub epsilon: f64,
    #[serde(with = "crate::count")]
    pub covering_number: u128,
    pub kappa: f64,
    pub admissible: bool,
    /// `M·ε^{n−1/(d+1)}`.
    pub zeta_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringProfile {
    pub n: usize,
    pub d: usize,
    pub xi1: f64,
    pub entries: Vec<ProfileEntry>,
    pub zeta_d: f64,
    /// Index of the admissible entry attaining `zeta_d`.
    pub argmax: Option<usize>,
}

impl CoveringProfile {
    pub fn epsilon0(&self) -> Option<f64> {
        self.argmax.map(|i| self.entries[i].epsilon)
    }

    pub fn kappa0(&self) -> Option<f64> {
        self.argmax.map(|i| self.entries[i].kappa)
    }
}

/// `κ(ε) = M·εⁿ/ξ₁`.
pub fn kappa_of(m: u128, eps: f64, n: usize, xi1: f64) -> f64 {
    m as f64 * eps.powi(n as i32) / xi1
}

/// Admissibility of a scale: `ε ≤ 1/10` and `κ(ε) ≥ 10√n·ε`.
pub fn admissible(eps: f64, kappa: f64, n: usize) -> bool {
    eps <= 0.1 && kappa >= 10.0 * (n as f64).sqrt() * eps
}

/// `M·ε^{n−1/(d+1)}`.
pub fn zeta_term(m: u128, eps: f64, n: usize, d: usize) -> f64 {
    m as f64 * eps.powf(n as f64 - 1.0 / (d as f64 + 1.0))
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::DegenerateLadder("empty ladder".into()));
    }
    for w in ladder.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::DegenerateLadder("ladder must be strictly decreasing".into()));
        }
    }
    for &e in ladder {
        GridSpec::new(e)?;
    }
    Ok(())
}

/// Covering profile using the `ξ₁` of the default constants for `(n, d)`.
pub fn covering_profile(z: &PointSet, d: usize, ladder: &[f64]) -> Result<CoveringProfile> {
    let xi1 = crate::chain_rule::xi1(z.n, d);
    covering_profile_with_xi1(z, d, ladder, xi1)
}

pub fn covering_profile_with_xi1(z: &PointSet, d: usize, ladder: &[f64], xi1: f64) -> Result<CoveringProfile> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    check_ladder(ladder)?;
    let n = z.n;
    let counts: Vec<u128> =
        ladder.par_iter().map(|&e| covering_number(z, GridSpec { epsilon: e })).collect::<Result<Vec<_>>>()?;
    let entries: Vec<ProfileEntry> = ladder
        .iter()
        .zip(counts)
        .map(|(&epsilon, m)| {
            let kappa = kappa_of(m, epsilon, n, xi1);
            ProfileEntry {
                epsilon,
                covering_number: m,
                kappa,
                admissible: admissible(epsilon, kappa, n),
                zeta_term: zeta_term(m, epsilon, n, d),
            }
        })
        .collect();
    let mut argmax: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if e.admissible && argmax.is_none_or(|j| e.zeta_term > entries[j].zeta_term) {
            argmax = Some(i);
        }
    }
    let zeta_d = argmax.map(|i| entries[i].zeta_term).unwrap_or(0.0);
    Ok(CoveringProfile { n, d, xi1, entries, zeta_d, argmax })
}

/// `start·2^{−k}` for `k = 0..count`.
pub fn dyadic_ladder(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start / 2f64.powi(k as i32)).collect()
}

/// Forty dyadic scales from 1/10 down.
pub fn default_ladder() -> Vec<f64> {
    dyadic_ladder(0.1, 40)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub scales: usize,
}

/// Least-squares slope of `log M(ε)` against `log(1/ε)`.
pub fn box_dimension_estimate(z: &PointSet, ladder: &[f64]) -> Result<DimensionEstimate> {
    if ladder.len() < 3 {
        return Err(Error::DegenerateLadder("need at least 3 scales".into()));
    }
    check_ladder(ladder)?;
    let pts: Vec<(f64, f64)> = ladder
        .par_iter()
        .map(|&e| covering_number(z, GridSpec { epsilon: e }).map(|m| ((1.0 / e).ln(), (m as f64).ln())))
        .collect::<Result<Vec<_>>>()?;
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateLadder("scales do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DimensionEstimate { slope, intercept, residual, scales: pts.len() })
}

fn cells_per_side(s: f64, h: f64) -> Result<i64> {
    let r = s / h;
    let c = r.round();
    if c < 1.0 || (r - c).abs() > 1e-9 * c.max(1.0) {
        return Err(Error::InvalidInput(format!("side {s} is not a multiple of {h}")));
    }
    Ok(c as i64)
}

fn relative_cells(x: f64, corner: f64, h: f64, cells: i64) -> (i64, i64) {
    let (lo, hi) = closed_cells(x - corner, h);
    (lo.max(0), hi.min(cells - 1))
}

/// Every closed `h`-sub-cube of `corner + [0, s]ⁿ` (aligned at `corner`)
/// contains a point of Z. `s` must be a multiple of `h`.
pub fn is_h_dense(z: &PointSet, corner: &[f64], s: f64, h: f64) -> Result<bool> {
    if corner.len() != z.n || !(h > 0.0 && h <= s) {
        return Err(Error::InvalidInput("bad h-density parameters".into()));
    }
    let c = cells_per_side(s, h)?;
    match &z.repr {
        Representation::Explicit(points) => {
            let total = (c as u128).pow(z.n as u32);
            if total > CELL_LIST_CAP {
                return Err(Error::TooLarge(format!("{total} sub-cubes")));
            }
            let mut hit: HashSet<Vec<i64>> = HashSet::new();
            for p in points {
                let ranges: Vec<(i64, i64)> = (0..z.n).map(|i| relative_cells(p[i], corner[i], h, c)).collect();
                if ranges.iter().any(|r| r.0 > r.1) {
                    continue;
                }
                let mut cell: Vec<i64> = ranges.iter().map(|r| r.0).collect();
                'cells: loop {
                    hit.insert(cell.clone());
                    let mut axis = z.n;
                    loop {
                        if axis == 0 {
                            break 'cells;
                        }
                        axis -= 1;
                        if cell[axis] < ranges[axis].1 {
                            cell[axis] += 1;
                            break;
                        }
                        cell[axis] = ranges[axis].0;
                    }
                }
            }
            Ok(hit.len() as u128 == total)
        }
        Representation::Grid(g) => {
            for i in 0..z.n {
                let m = g.axis_len(i);
                if m == 0 {
                    return Ok(false);
                }
                if m <= AXIS_ENUM_CAP {
                    let mut next = 0i64;
                    for j in 0..m {
                        let (lo, hi) = relative_cells(g.coord(i, j), corner[i], h, c);
                        if lo <= next && hi >= next {
                            next = hi + 1;
                        } else if lo > next {
                            return Ok(false);
                        }
                    }
                    if next < c {
                        return Ok(false);
                    }
                } else if g.h <= h {
                    let first = (g.coord(i, 0) - corner[i]) / h;
                    let last = (g.coord(i, m - 1) - corner[i]) / h;
                    if !(first >= 0.0 && first <= 1.0 && last >= (c - 1) as f64 && last <= c as f64) {
                        return Ok(false);
                    }
                } else {
                    return Err(Error::TooLarge("sparse grid axis too long to check".into()));
                }
            }
            Ok(true)
        }
    }
}

/// Regular `h/2`-grid of the cube `[−s/2, s/2]ⁿ`, each point moved by a
/// seeded offset of sup-norm ≤ `perturbation`. `s` must be a multiple of `h`.
pub fn generate_h_dense(n: usize, s: f64, h: f64, perturbation: f64, seed: u64) -> Result<PointSet> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidInput(format!("dimension {n} outside 1..=4")));
    }
    if !(h > 0.0 && h <= s && s.is_finite()) {
        return Err(Error::InvalidInput("generation requires 0 < h <= s".into()));
    }
    if !(0.0..=h / 8.0).contains(&perturbation) {
        return Err(Error::InvalidInput("perturbation must lie in [0, h/8]".into()));
    }
    cells_per_side(s, h)?;
    let grid = h_dense_grid(n, s, h);
    let raw = s * (n as f64).sqrt() / 2.0 > INNER_RADIUS;
    let mut points = grid.materialize()?;
    if perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut points {
            for x in p.iter_mut() {
                *x += rng.gen_range(-perturbation..=perturbation);
            }
        }
    }
    let z = PointSet::new(
        n,
        Representation::Explicit(points),
        format!("h-dense n={n} s={s} h={h} perturbation={perturbation} seed={seed}"),
        raw,
    )?;
    if !is_h_dense(&z, &grid.corner, s, h)? {
        return Err(Error::Internal("generated set failed the h-density check".into()));
    }
    Ok(z)
}

/// The unperturbed `h/2`-grid of `generate_h_dense` in implicit form.
pub fn h_dense_grid(n: usize, s: f64, h: f64) -> ImplicitGrid {
    let spacing = h / 2.0;
    ImplicitGrid { s, h: spacing, offset: vec![spacing / 2.0; n], corner: vec![-s / 2.0; n] }
}

/// Uniform random points in the ball of radius 1/3.
pub fn random_points(n: usize, count: usize, seed: u64) -> Result<PointSet> {
    if !(1..=4).contains(&n) || count == 0 {
        return Err(Error::InvalidInput("need 1 <= n <= 4 and count > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-INNER_RADIUS..INNER_RADIUS)).collect();
        if norm(&p) <= INNER_RADIUS {
            pts.push(p);
        }
    }
    PointSet::new(n, Representation::Explicit(pts), format!("random n={n} count={count} seed={seed}"), false)
}

/// Centers of the `2^level` middle-thirds intervals of `[−1/3, 1/3]`,
/// placed on the first axis of `Rⁿ` (other coordinates fixed off-grid).
pub fn cantor_set(level: u32, n: usize) -> Result<PointSet> {
    if !(1..=4).contains(&n) || level > 20 {
        return Err(Error::InvalidInput("need 1 <= n <= 4 and level <= 20".into()));
    }
    let mut intervals = vec![(0.0f64, 1.0f64)];
    for _ in 0..level {
        intervals = intervals
            .into_iter()
            .flat_map(|(a, b)| {
                let t = (b - a) / 3.0;
                [(a, a + t), (b - t, b)]
            })
            .collect();
    }
    let side = 0.001_234_567;
    let pts: Vec<Vec<f64>> = intervals
        .iter()
        .map(|(a, b)| {
            let mut p = vec![side; n];
            p[0] = -INNER_RADIUS + (a + b) / 3.0;
            p
        })
        .collect();
    PointSet::new(n, Representation::Explicit(pts), format!("cantor level={level}"), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> PointSet {
        PointSet::explicit(v.iter().map(|p| p.to_vec()).collect(), "t").unwrap()
    }

    #[test]
    fn covering_examples() {
        let g = GridSpec::new(0.1).unwrap();
        assert_eq!(covering_number(&pts(&[&[0.05, 0.05]]), g).unwrap(), 1);
        assert_eq!(covering_number(&pts(&[&[0.1, 0.1]]), g).unwrap(), 4);
    }

    #[test]
    fn implicit_grid_400() {
        let grid = ImplicitGrid { s: 0.2, h: 0.01, offset: vec![0.005; 2], corner: vec![-0.1; 2] };
        let z = PointSet::grid(grid, "g").unwrap();
        assert_eq!(z.len(), 400);
        let g = GridSpec::new(0.01).unwrap();
        assert_eq!(covering_number(&z, g).unwrap(), 400);
        assert_eq!(covering_number(&z.to_explicit().unwrap(), g).unwrap(), 400);
    }

    #[test]
    fn errors() {
        let z = pts(&[&[0.0, 0.0]]);
        assert_eq!(covering_number(&z, GridSpec { epsilon: 0.0 }), Err(Error::EpsilonOutOfRange(0.0)));
        let empty = PointSet::new(2, Representation::Explicit(vec![]), "e", false).unwrap();
        assert_eq!(covering_number(&empty, GridSpec { epsilon: 0.1 }), Err(Error::EmptySet));
        assert!(PointSet::explicit(vec![vec![0.5, 0.0]], "far").is_err());
    }

    #[test]
    fn exact_axis_matches_enumeration() {
        // Closed-form counts against direct enumeration on dyadic axes, where
        // floating-point and exact arithmetic agree.
        for &(base, h, eps) in &[
            (-0.25 + 3.0 / 4096.0, 1.0 / 4096.0, 1.0 / 1024.0),
            (-0.25 + 3.0 / 1024.0, 1.0 / 256.0, 1.0 / 1024.0),
            (-0.25, 3.0 / 1024.0, 1.0 / 512.0),
            (0.0, 0.125, 0.0625),
            (-0.25, 0.0625, 0.125),
        ] {
            let m = 200u64;
            let ex = ExactAxis::new(base, h, eps);
            let mut set = std::collections::BTreeSet::new();
            for j in 0..m {
                let (lo, hi) = closed_cells(base + j as f64 * h, eps);
                set.extend(lo..=hi);
            }
            if h <= eps {
                let lo = ex.min_cell(0);
                let hi = ex.max_cell(m - 1);
                assert_eq!((hi - lo + 1) as usize, set.len(), "dense {base} {h} {eps}");
            } else {
                assert_eq!(m as u128 + ex.boundary_hits(m), set.len() as u128, "sparse {base} {h} {eps}");
            }
        }
    }

    #[test]
    fn profile_single_point_never_admissible() {
        let z = pts(&[&[0.01, 0.02]]);
        let p = covering_profile_with_xi1(&z, 1, &default_ladder(), 43.5).unwrap();
        assert_eq!(p.zeta_d, 0.0);
        assert!(p.argmax.is_none());
        assert!(p.entries.iter().all(|e| !e.admissible));
    }

    #[test]
    fn h_dense_examples() {
        let z = generate_h_dense(2, 0.2, 0.02, 0.0, 0).unwrap();
        assert_eq!(z.len(), 400);
        let z = generate_h_dense(2, 0.2, 0.02, 0.02 / 8.0, 1).unwrap();
        assert!(is_h_dense(&z, &[-0.1, -0.1], 0.2, 0.02).unwrap());
        let z = generate_h_dense(1, 0.2, 0.05, 0.0, 0).unwrap();
        assert_eq!(z.len(), 8);
    }

    #[test]
    fn h_density_one_dim_oracle() {
        // Every closed sub-interval [kh, (k+1)h] checked directly.
        let z = generate_h_dense(1, 0.2, 0.05, 0.05 / 8.0, 7).unwrap();
        let p = z.points().unwrap();
        for k in 0..4 {
            let lo = -0.1 + k as f64 * 0.05;
            assert!(p.iter().any(|x| x[0] >= lo && x[0] <= lo + 0.05));
        }
        let sparse = pts(&[&[-0.09], &[0.09]]);
        assert!(!is_h_dense(&sparse, &[-0.1], 0.2, 0.05).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let z = pts(&[&[0.1, 0.2], &[0.0, -0.1]]);
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"n":2,"points":[[0.1,0.2],[0.0,-0.1]],"label":"t"}"#);
        let back: PointSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        let g = PointSet::grid(h_dense_grid(2, 0.2, 0.02), "g").unwrap();
        let back: PointSet = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<PointSet>(r#"{"n":2}"#).is_err());
    }
}
