//! From a point set to a certified lower bound on its rigidity constant.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain_rule::{compute_constants, ChainRuleConstants, IntermediateBound};
use crate::curves::{build_bump, build_curve, default_bump, BumpFunction, CurveSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    covering_number, covering_profile_with_xi1, default_ladder, is_h_dense, CoveringProfile, CubeFilter, GridSpec,
    Occupancy, PointSet, Representation,
};
use crate::integral_geometry::{
    find_line_occ, required_crossings, select_separated_points_occ, LineCertificate, LineSearch, LineThroughPoint,
    SearchBudget,
};
use crate::multi::factorial;
use crate::remez::{remez_bounds, rigidity_from_remez, RemezDomain, RemezRigidity};
use crate::testfields::{empirical_derivative_norm, empirical_sup, vanishing_on, ScalarField, TestField};

/// `(d+1)!·|g(t0)|/Π|t0 − τ_j|`.
pub fn one_d_lower_bound(t0: f64, zeros: &[f64], value_at_t0: f64) -> Result<f64> {
    if zeros.is_empty() {
        return Err(Error::InvalidInput("need at least one zero".into()));
    }
    if !(-1.0..=1.0).contains(&t0) {
        return Err(Error::InvalidInput(format!("t0 = {t0} outside [-1, 1]")));
    }
    if (value_at_t0.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("|g(t0)| must be 1".into()));
    }
    let third = 1.0 / 3.0;
    if zeros.iter().any(|z| !(-third..=third).contains(z)) {
        return Err(Error::InvalidInput("zeros must lie in [-1/3, 1/3]".into()));
    }
    for (i, a) in zeros.iter().enumerate() {
        if zeros[i + 1..].contains(a) {
            return Err(Error::InvalidInput(format!("coincident zeros at {a}")));
        }
    }
    let prod: f64 = zeros.iter().map(|z| (t0 - z).abs()).product();
    if prod == 0.0 {
        return Err(Error::InvalidInput("t0 coincides with a zero".into()));
    }
    Ok(factorial(zeros.len() as u32) * value_at_t0.abs() / prod)
}

/// The gate `h ≤ ξ·s^{n(d+1)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HDenseCheck {
    pub passes: bool,
    pub threshold: f64,
    /// `threshold − h`.
    pub margin: f64,
}

/// `ξ·s^{n(d+1)}`.
pub fn hdense_threshold(constants: &ChainRuleConstants, s: f64) -> f64 {
    constants.xi * s.powi((constants.n * (constants.d + 1)) as i32)
}

pub fn h_dense_check(n: usize, d: usize, s: f64, h: f64, constants: &ChainRuleConstants) -> Result<HDenseCheck> {
    if !(h > 0.0 && h <= s && s <= 0.2) {
        return Err(Error::InvalidInput(format!("need 0 < h <= s <= 0.2, got h = {h}, s = {s}")));
    }
    if constants.n != n || constants.d != d {
        return Err(Error::InvalidInput("constants snapshot is for another (n, d)".into()));
    }
    let threshold = hdense_threshold(constants, s);
    Ok(HDenseCheck { passes: h <= threshold, threshold, margin: threshold - h })
}

/// Witness chain of one thickness probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    pub z0: Vec<f64>,
    pub epsilon: f64,
    pub kappa: f64,
    #[serde(with = "crate::count")]
    pub covering_number: u128,
    /// `ξ₁·κ·ε^{−n}`.
    pub covering_required: f64,
    pub search: Option<LineSearch>,
    pub certificate: LineCertificate,
    pub curve: CurveSpec,
    pub nu_d: f64,
    /// `ξ₂·ε/κ^{d+1}`.
    pub nu_bound: f64,
}

/// Builds a curve through `z0` and d+1 points of Z and reports its `ν_d`.
#[allow(clippy::too_many_arguments)]
pub fn thickness_upper_bound(
    z: &PointSet,
    z0: &[f64],
    d: usize,
    eps: f64,
    kappa: f64,
    constants: &ChainRuleConstants,
    line: Option<&LineThroughPoint>,
    budget: SearchBudget,
    seed: u64,
) -> Result<ThicknessReport> {
    thickness_with_bump(z, z0, d, eps, kappa, constants, line, budget, seed, default_bump())
}

#[allow(clippy::too_many_arguments)]
fn thickness_with_bump(
    z: &PointSet,
    z0: &[f64],
    d: usize,
    eps: f64,
    kappa: f64,
    constants: &ChainRuleConstants,
    line: Option<&LineThroughPoint>,
    budget: SearchBudget,
    seed: u64,
    bump: &BumpFunction,
) -> Result<ThicknessReport> {
    let n = z.n;
    if z0.len() != n {
        return Err(Error::InvalidInput("z0 dimension mismatch".into()));
    }
    if !(eps > 0.0 && eps < kappa / (10.0 * (n as f64).sqrt())) {
        return Err(Error::Precondition(format!("need 0 < eps < kappa/(10 sqrt n); eps = {eps}, kappa = {kappa}")));
    }
    let g = GridSpec::new(eps)?;
    let m = covering_number(z, g)?;
    let required = constants.xi1 * kappa * eps.powi(-(n as i32));
    if (m as f64) < required {
        return Err(Error::DensityInsufficient(format!("M(eps, Z) = {m} < xi1 kappa eps^-n = {required}")));
    }
    let occ = Occupancy::build(z, g, CubeFilter::default())?;
    let (line, search) = match line {
        Some(l) => (l.clone(), None),
        None => {
            let target = required_crossings(n, d, kappa, eps);
            let s = find_line_occ(z0, &occ, target, budget, seed)?;
            if !s.reached {
                return Err(Error::Internal(format!(
                    "line search reached {} of {target} crossings in the guaranteed regime",
                    s.achieved
                )));
            }
            (s.line.clone(), Some(s))
        }
    };
    let certificate = select_separated_points_occ(&line, &occ, d, kappa)?;
    let curve = build_curve(&certificate, bump)?;
    let nu_d = curve.nu_d;
    Ok(ThicknessReport {
        z0: line.z0.clone(),
        epsilon: eps,
        kappa,
        covering_number: m,
        covering_required: required,
        search,
        certificate,
        curve,
        nu_d,
        nu_bound: constants.xi2 * eps / kappa.powi(d as i32 + 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    ThicknessC3,
    EntropyZeta,
    HDense,
    OneD,
    RemezRoute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyWitness {
    pub zeta_d: f64,
    pub xi3: f64,
    /// `(ξ₃/ζ_d)^{d+1}`.
    pub nu_bound: f64,
    pub c3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HDenseWitness {
    pub corner: Vec<f64>,
    pub s: f64,
    pub h: f64,
    pub check: HDenseCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneDWitness {
    /// d+1 distinct points of Z.
    pub points: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub constants: ChainRuleConstants,
    pub ladder: Vec<f64>,
    pub profile: Option<CoveringProfile>,
    pub entropy: Option<EntropyWitness>,
    pub hdense: Option<HDenseWitness>,
    pub one_d: Option<OneDWitness>,
    pub remez: Option<RemezRigidity>,
    /// Thickness probes, one per probed z₀.
    pub probes: Vec<ThicknessReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityCertificate {
    pub n: usize,
    pub d: usize,
    pub bound: f64,
    pub route: Route,
    /// "uniform" when the argument covers every z₀, "sampled-z0" otherwise.
    pub coverage: String,
    pub probed_z0: Vec<Vec<f64>>,
    pub witnesses: Witnesses,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoCertificate {
    pub n: usize,
    pub d: usize,
    pub bottleneck: String,
    pub profile: Option<CoveringProfile>,
    pub probed_z0: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CertifyOutcome {
    Certificate(RigidityCertificate),
    NoCertificate(NoCertificate),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub ladder: Vec<f64>,
    pub seed: u64,
    pub search: SearchBudget,
    pub intermediate: IntermediateBound,
    pub bump_half_width: f64,
    /// Probe one z₀ by the thickness construction when the entropy route fires.
    pub entropy_probe: bool,
    pub remez: bool,
    pub remez_resolution: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            ladder: default_ladder(),
            seed: 0,
            search: SearchBudget::default(),
            intermediate: IntermediateBound::default(),
            bump_half_width: 0.9,
            entropy_probe: true,
            remez: false,
            remez_resolution: 200,
        }
    }
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

/// `count` low-discrepancy points of the unit sphere `S^{n−1}`.
pub fn sphere_probes(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|k| {
            let u = |b: u64| radical_inverse(k + 1, b);
            match n {
                1 => vec![if k % 2 == 0 { 1.0 } else { -1.0 }],
                2 => {
                    let t = 2.0 * PI * u(2);
                    vec![t.cos(), t.sin()]
                }
                3 => {
                    let z = 1.0 - 2.0 * u(2);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let t = 2.0 * PI * u(3);
                    vec![r * t.cos(), r * t.sin(), z]
                }
                _ => {
                    let (a, b, c) = (u(2), u(3), u(5));
                    let (r1, r2) = ((1.0 - a).sqrt(), a.sqrt());
                    let (t1, t2) = (2.0 * PI * b, 2.0 * PI * c);
                    vec![r1 * t1.sin(), r1 * t1.cos(), r2 * t2.sin(), r2 * t2.cos()]
                }
            }
        })
        .collect()
}

fn distinct_sorted(points: &[Vec<f64>]) -> Vec<f64> {
    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn constants_for(n: usize, d: usize, config: &CertifyConfig) -> Result<(ChainRuleConstants, BumpFunction)> {
    let bump =
        if config.bump_half_width == 0.9 { default_bump().clone() } else { build_bump(config.bump_half_width, d + 1)? };
    let c = compute_constants(n, d, &bump, config.intermediate)?;
    Ok((c, bump))
}

/// The `(ε₀, κ₀)` used for probes, with κ₀ shrunk to keep the covering gate strict.
fn probe_scale(profile: &CoveringProfile) -> Option<(f64, f64)> {
    Some((profile.epsilon0()?, profile.kappa0()? * (1.0 - 1e-12)))
}

pub fn certify(z: &PointSet, d: usize, z0_samples: usize, config: &CertifyConfig) -> Result<CertifyOutcome> {
    let n = z.n;
    let (constants, bump) = constants_for(n, d, config)?;
    let mut witnesses = Witnesses {
        constants: constants.clone(),
        ladder: config.ladder.clone(),
        profile: None,
        entropy: None,
        hdense: None,
        one_d: None,
        remez: None,
        probes: vec![],
    };
    let mut candidates: Vec<RigidityCertificate> = Vec::new();
    let no_cert = |bottleneck: String, profile: Option<CoveringProfile>, probed: Vec<Vec<f64>>| {
        CertifyOutcome::NoCertificate(NoCertificate { n, d, bottleneck, profile, probed_z0: probed })
    };

    if config.remez {
        if let Ok(pts) = z.points() {
            if pts.len() <= 1000 {
                let est = remez_bounds(z, d, config.remez_resolution, RemezDomain::Ball)?;
                let r = rigidity_from_remez(&est, d, None);
                if r.lower > 0.0 {
                    let mut w = witnesses.clone();
                    w.remez = Some(r.clone());
                    candidates.push(RigidityCertificate {
                        n,
                        d,
                        bound: r.lower,
                        route: Route::RemezRoute,
                        coverage: "uniform".into(),
                        probed_z0: vec![],
                        witnesses: w,
                    });
                }
            }
        }
    }

    if n == 1 {
        let pts = z.points()?;
        let xs = distinct_sorted(&pts);
        if xs.len() > d {
            let mut w = witnesses.clone();
            w.one_d = Some(OneDWitness { points: xs[..=d].to_vec() });
            candidates.push(RigidityCertificate {
                n,
                d,
                bound: factorial(d as u32 + 1) / 2f64.powi(d as i32 + 1),
                route: Route::OneD,
                coverage: "uniform".into(),
                probed_z0: vec![],
                witnesses: w,
            });
        }
        return Ok(match best_of(candidates) {
            Some(c) => CertifyOutcome::Certificate(c),
            None => no_cert(format!("only {} distinct points, need d+1 = {}", xs.len(), d + 1), None, vec![]),
        });
    }

    let profile = covering_profile_with_xi1(z, d, &config.ladder, constants.xi1)?;
    witnesses.profile = Some(profile.clone());
    let c4 = constants.c4;

    if profile.zeta_d > 0.0 {
        let nu_bound = (constants.xi3 / profile.zeta_d).powi(d as i32 + 1);
        if nu_bound <= constants.c3 {
            let mut w = witnesses.clone();
            w.entropy = Some(EntropyWitness { zeta_d: profile.zeta_d, xi3: constants.xi3, nu_bound, c3: constants.c3 });
            let mut probed = vec![];
            if config.entropy_probe {
                if let Some((eps0, kappa0)) = probe_scale(&profile) {
                    let z0 = sphere_probes(n, 1).remove(0);
                    let report = thickness_with_bump(
                        z,
                        &z0,
                        d,
                        eps0,
                        kappa0,
                        &constants,
                        None,
                        config.search,
                        config.seed,
                        &bump,
                    )?;
                    probed.push(report.z0.clone());
                    w.probes.push(report);
                }
            }
            candidates.push(RigidityCertificate {
                n,
                d,
                bound: c4,
                route: Route::EntropyZeta,
                coverage: "uniform".into(),
                probed_z0: probed,
                witnesses: w,
            });
            return Ok(CertifyOutcome::Certificate(best_of(candidates).expect("entropy candidate")));
        }
    }

    if let Representation::Grid(g) = &z.repr {
        if g.s <= 0.2 && g.h <= g.s {
            let check = h_dense_check(n, d, g.s, g.h, &constants)?;
            if check.passes && is_h_dense(z, &g.corner, g.s, g.h).unwrap_or(false) {
                let mut w = witnesses.clone();
                w.hdense = Some(HDenseWitness { corner: g.corner.clone(), s: g.s, h: g.h, check });
                candidates.push(RigidityCertificate {
                    n,
                    d,
                    bound: c4,
                    route: Route::HDense,
                    coverage: "uniform".into(),
                    probed_z0: vec![],
                    witnesses: w,
                });
                return Ok(CertifyOutcome::Certificate(best_of(candidates).expect("h-dense candidate")));
            }
        }
    }

    let Some((eps0, kappa0)) = probe_scale(&profile) else {
        return Ok(match best_of(candidates) {
            Some(c) => CertifyOutcome::Certificate(c),
            None => no_cert("zeta_d = 0".into(), Some(profile), vec![]),
        });
    };
    let probes = sphere_probes(n, z0_samples.max(1));
    let reports: Vec<std::result::Result<ThicknessReport, Error>> = probes
        .par_iter()
        .enumerate()
        .map(|(i, z0)| {
            thickness_with_bump(
                z,
                z0,
                d,
                eps0,
                kappa0,
                &constants,
                None,
                config.search,
                config.seed.wrapping_add(i as u64),
                &bump,
            )
        })
        .collect();
    let mut failure: Option<String> = None;
    let mut ok = Vec::new();
    for (z0, r) in probes.iter().zip(reports) {
        match r {
            Ok(rep) if rep.nu_d <= constants.c3 => ok.push(rep),
            Ok(rep) => {
                failure
                    .get_or_insert(format!("nu_d = {:e} exceeds C3 = {:e} at z0 = {:?}", rep.nu_d, constants.c3, z0));
            }
            Err(e) => {
                failure.get_or_insert(format!("probe at z0 = {z0:?} failed: {e}"));
            }
        }
    }
    if failure.is_none() {
        let mut w = witnesses.clone();
        w.probes = ok;
        candidates.push(RigidityCertificate {
            n,
            d,
            bound: c4,
            route: Route::ThicknessC3,
            coverage: "sampled-z0".into(),
            probed_z0: probes.clone(),
            witnesses: w,
        });
    }
    Ok(match best_of(candidates) {
        Some(c) => CertifyOutcome::Certificate(c),
        None => no_cert(failure.unwrap_or_else(|| "no route applies".into()), Some(profile), probes),
    })
}

fn best_of(candidates: Vec<RigidityCertificate>) -> Option<RigidityCertificate> {
    candidates.into_iter().reduce(|a, b| if b.bound > a.bound { b } else { a })
}

/// Re-derives the bound of a certificate from its witnesses and Z.
pub fn verify_certificate(cert: &RigidityCertificate, z: &PointSet) -> Result<f64> {
    let w = &cert.witnesses;
    let (n, d) = (cert.n, cert.d);
    if z.n != n {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let bump = if w.constants.bump_half_width == 0.9 {
        default_bump().clone()
    } else {
        build_bump(w.constants.bump_half_width, d + 1)?
    };
    let constants = compute_constants(n, d, &bump, w.constants.intermediate)?;
    if constants != w.constants {
        return Err(Error::Internal("constants snapshot does not replay".into()));
    }
    let err = |m: &str| Error::Internal(format!("replay failed: {m}"));
    let check_probe = |p: &ThicknessReport| -> Result<()> {
        if p.certificate.recheck() > 1e-15 {
            return Err(err("line certificate"));
        }
        let curve = build_curve(&p.certificate, &bump)?;
        if curve != p.curve || curve.nu_d != p.nu_d {
            return Err(err("curve"));
        }
        Ok(())
    };
    let bound = match cert.route {
        Route::OneD => {
            let wd = w.one_d.as_ref().ok_or_else(|| Error::Internal("missing 1-D witness".into()))?;
            let xs = distinct_sorted(&z.points()?);
            if wd.points.len() != d + 1 || wd.points.iter().any(|p| !xs.contains(p)) {
                return Err(err("1-D points"));
            }
            factorial(d as u32 + 1) / 2f64.powi(d as i32 + 1)
        }
        Route::EntropyZeta => {
            let profile = covering_profile_with_xi1(z, d, &w.ladder, constants.xi1)?;
            if Some(&profile) != w.profile.as_ref() {
                return Err(err("covering profile"));
            }
            let e = w.entropy.as_ref().ok_or_else(|| Error::Internal("missing entropy witness".into()))?;
            let nu = (constants.xi3 / profile.zeta_d).powi(d as i32 + 1);
            if !(profile.zeta_d > 0.0 && nu == e.nu_bound && nu <= constants.c3) {
                return Err(err("entropy inequality"));
            }
            for p in &w.probes {
                check_probe(p)?;
            }
            constants.c4
        }
        Route::HDense => {
            let hw = w.hdense.as_ref().ok_or_else(|| Error::Internal("missing h-dense witness".into()))?;
            let check = h_dense_check(n, d, hw.s, hw.h, &constants)?;
            if !(check.passes && check == hw.check && is_h_dense(z, &hw.corner, hw.s, hw.h)?) {
                return Err(err("h-density"));
            }
            constants.c4
        }
        Route::ThicknessC3 => {
            if w.probes.is_empty() {
                return Err(err("no probes"));
            }
            for p in &w.probes {
                check_probe(p)?;
                if p.nu_d > constants.c3 {
                    return Err(err("thickness above C3"));
                }
            }
            constants.c4
        }
        Route::RemezRoute => {
            let r = w.remez.as_ref().ok_or_else(|| Error::Internal("missing Remez witness".into()))?;
            r.lower
        }
    };
    if bound.to_bits() != cert.bound.to_bits() {
        return Err(err("bound differs"));
    }
    Ok(bound)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessSample {
    pub seed: u64,
    pub m0: f64,
    pub md1: f64,
    /// `M_{d+1}/M_0`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub bound: f64,
    pub samples: Vec<SoundnessSample>,
    pub min_ratio: f64,
    pub counterexample: bool,
}

/// Samples functions vanishing on Z and compares their `M_{d+1}/M_0` with the bound.
pub fn soundness_check(bound: f64, z: &PointSet, d: usize, count: usize, seed: u64) -> Result<SoundnessReport> {
    let samples: Vec<SoundnessSample> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let f: TestField = vanishing_on(z, d + 1, s)?;
            for p in z.points().ok().into_iter().flatten() {
                if f.value(&p)?.abs() > 1e-12 {
                    return Err(Error::Internal("sampled field does not vanish on Z".into()));
                }
            }
            let m0 = match f {
                TestField::GridWave { .. } => 1.0,
                _ => empirical_sup(&f, 20_000, s ^ 0xa5a5)?,
            };
            let md1 = empirical_derivative_norm(&f, d as u32 + 1, 20_000, s ^ 0x5a5a)?;
            Ok(SoundnessSample { seed: s, m0, md1, ratio: md1 / m0 })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    Ok(SoundnessReport { bound, counterexample: min_ratio < bound, samples, min_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_examples() {
        assert!((one_d_lower_bound(1.0, &[-1.0 / 3.0, 1.0 / 3.0], 1.0).unwrap() - 2.25).abs() < 1e-14);
        assert!((one_d_lower_bound(1.0, &[-1.0 / 3.0, 0.0, 1.0 / 3.0], -1.0).unwrap() - 6.75).abs() < 1e-13);
        assert!(one_d_lower_bound(1.0, &[0.1, 0.1], 1.0).is_err());
    }

    #[test]
    fn h_dense_gate_edges() {
        let c = crate::chain_rule::default_constants(2, 1).unwrap();
        let t = hdense_threshold(&c, 0.2);
        assert!((t - c.xi * 0.0016).abs() < 1e-12 * t);
        let at = h_dense_check(2, 1, 0.2, t, &c).unwrap();
        assert!(at.passes && at.margin == 0.0, "{at:?} {t}");
        assert!(!h_dense_check(2, 1, 0.2, 2.0 * t, &c).unwrap().passes);
    }

    #[test]
    fn probes_on_sphere() {
        for n in 1..=4 {
            for p in sphere_probes(n, 17) {
                let r: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }
}
