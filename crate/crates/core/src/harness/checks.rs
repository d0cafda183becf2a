//! Invariant suite run by the `checks` subcommand.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brt::{weighted_sphere_chart, BRTChart, MetricGram};
use crate::coefficients::{coefficients_at, expansion_prediction, local_bergman_coefficients, sum_factor};
use crate::curvature::{curvature_report, rigid_scalar_curvature, tw_scalar};
use crate::error::Result;
use crate::exec::Exec;
use crate::jet::C64;
use crate::models::{MetricPreset, WeightedSphere};

use super::config::{resolve_points, ModelSpec, PointSpec, Tolerances};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Random chart points with every coordinate in the disc of radius `r`.
pub fn random_chart_points(n: usize, count: usize, r: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| C64::from_polar(r * rng.random::<f64>().sqrt(), rng.random_range(-PI..PI)))
                .collect()
        })
        .collect()
}

/// Levi-metric charts of the model used by the curvature checks.
fn levi_charts(sphere: &WeightedSphere) -> Result<Vec<BRTChart>> {
    let mut out = Vec::new();
    if sphere.weights.iter().all(|&p| p == 1) {
        out.push(BRTChart::hopf(sphere.n));
    }
    for pivot in 0..=sphere.n {
        out.push(weighted_sphere_chart(&sphere.weights, pivot, MetricGram::Levi)?);
    }
    Ok(out)
}

fn s_l_identity(sphere: &WeightedSphere) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (i, ch) in levi_charts(sphere)?.iter().enumerate() {
        for z in random_chart_points(ch.n, 10, 0.8, 11 + i as u64) {
            let s = rigid_scalar_curvature(ch, &z)?;
            let r = tw_scalar(ch, &z)?;
            worst = worst.max(rel(s, 4.0 * PI * r));
            count += 1;
        }
    }
    Ok(Check::new("S_L=4πR", worst <= 1e-8, format!("max rel err {worst:.2e} over {count} chart points")))
}

/// Coefficients of `prod_{k=1}^n (m + k) / (2 pi^{n+1})` in `m^n, m^{n-1}, m^{n-2}`.
pub fn round_coefficients(n: usize) -> [f64; 3] {
    let c = 1.0 / (2.0 * PI.powi(n as i32 + 1));
    let e1: f64 = (1..=n).map(|k| k as f64).sum();
    let e2: f64 = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i * j) as f64)).sum();
    [c, c * e1, c * e2]
}

/// Closed-form `S_m` of the round sphere with the ambient-round metric.
pub fn round_kernel(n: usize, m: u64) -> f64 {
    (1..=n).map(|k| (m + k as u64) as f64).product::<f64>() / (2.0 * PI.powi(n as i32 + 1))
}

fn round_checks(sphere: &WeightedSphere, tol: &Tolerances, out: &mut Vec<Check>) -> Result<()> {
    let n = sphere.n;
    let chart = weighted_sphere_chart(&sphere.weights, 0, MetricGram::AmbientRound { weights: sphere.weights.clone(), pivot: 0 })?;
    let want = round_coefficients(n);
    let pts = random_chart_points(n, 20, 0.9, 3);
    let mut worst = 0.0f64;
    for z in &pts {
        let c = coefficients_at(&chart, z)?;
        for (a, b) in c.as_array().iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(Check::new("round coefficients", worst <= 1e-8, format!("max abs err {worst:.2e} at {} points", pts.len())));

    let xs = resolve_points(&PointSpec::Random { samples: 5, seed: 5 }, sphere);
    let ms: Vec<u64> = (0..=200).step_by(if n == 1 { 1 } else { 10 }).collect();
    let bases: Vec<_> = sphere.exec.map(&ms, |&m| sphere.monomial_norms(m)).into_iter().collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut resid = 0.0f64;
    let coeffs = crate::coefficients::CoefficientSet { n, b0: want[0], b1: want[1], b2: want[2], provenance: "closed form".into() };
    for b in &bases {
        for x in &xs {
            let v = b.szego_value(x);
            worst = worst.max(rel(v, round_kernel(n, b.m)));
            if b.m >= 20 {
                let p = expansion_prediction(&coeffs, b.m, 1, 3)?.value;
                resid = resid.max((v - p).abs() / (b.m as f64).powi(n as i32));
            }
        }
    }
    out.push(Check::new("round kernel closed form", worst <= 1e-10, format!("max rel err {worst:.2e}, m <= 200")));
    out.push(Check::new(
        "expansion residual N=3",
        resid <= tol.expansion,
        format!("max |S_m - prediction| / m^n = {resid:.2e} for m in [20, 200]"),
    ));

    let mut worst = 0.0f64;
    for z in pts.iter().take(10) {
        let rep = curvature_report(&chart, z)?;
        let cr = coefficients_at(&chart, z)?;
        let bb = local_bergman_coefficients(&chart, z)?;
        let pairs = [
            (bb.det_rdot, rep.det_rdot),
            (bb.r, rep.s_l),
            (bb.r_hat, rep.s_theta),
            (bb.lap_r, rep.lap_s_l),
            (bb.lap_r_hat, rep.lap_s_theta),
            (bb.rdet_sq, rep.norms.rdet_sq),
            (bb.ric_sq, rep.norms.ric_sq),
            (bb.ric_rdet, rep.norms.ric_rdet),
            (bb.chern_sq, rep.norms.chern_sq),
            (bb.b0, 2.0 * PI * cr.b0),
            (bb.b1, 2.0 * PI * cr.b1),
            (bb.b2, 2.0 * PI * cr.b2),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    out.push(Check::new("correspondence", worst <= 1e-8, format!("max err {worst:.2e} over 12 relations")));
    Ok(())
}

fn weighted_checks(sphere: &WeightedSphere, tol: &Tolerances, out: &mut Vec<Check>) -> Result<()> {
    let n = sphere.n;
    let info = sphere.strata();
    let k = n + 1;
    let mut ok = true;
    for mask in 1u32..(1 << k) {
        let moduli: Vec<f64> = (0..k).map(|a| if mask >> a & 1 == 1 { 1.0 } else { 0.0 }).collect();
        let x = WeightedSphere::point_from_moduli(&moduli, &[0.2, 0.5, 0.9, 1.3]);
        let r = sphere.stratum_of(&x);
        ok &= (sphere.period(&x) - 2.0 * PI / info.p_list[r] as f64).abs() < 1e-15;
    }
    out.push(Check::new("stratum consistency", ok, format!("{} support patterns, periods {:?}", (1 << k) - 1, info.p_list)));

    let mut worst = 0.0f64;
    for pivot in 0..k {
        for w in random_chart_points(n, 5, 0.8, 17 + pivot as u64) {
            worst = worst.max(sphere.tangency_residual(pivot, &w)?);
            let ch = weighted_sphere_chart(&sphere.weights, pivot, MetricGram::Levi)?;
            worst = worst.max(ch.contact_residual(&w)?);
        }
    }
    out.push(Check::new("chart validity", worst <= 1e-10, format!("max frame/contact residual {worst:.2e}")));

    let m_max: u64 = if n == 1 { 201 } else { 41 };
    let stratum_pts = resolve_points(&PointSpec::Stratum, sphere);
    let singular: Vec<(Vec<C64>, u64)> = stratum_pts
        .iter()
        .map(|x| (x.clone(), info.p_list[sphere.stratum_of(x)]))
        .filter(|(_, p)| *p > 1)
        .collect();
    let ms: Vec<u64> = (1..=m_max).collect();
    let bases: Vec<_> = sphere.exec.map(&ms, |&m| sphere.monomial_norms(m)).into_iter().collect::<Result<_>>()?;
    let mut cancel_ok = true;
    let mut zero_count = 0;
    for (x, p) in &singular {
        for b in bases.iter().filter(|b| b.m % p != 0) {
            cancel_ok &= b.szego_value(x) == 0.0;
            zero_count += 1;
        }
    }
    out.push(Check::new("cancellation", cancel_ok, format!("{zero_count} values S_m = 0 exactly, m <= {m_max}")));

    let mut dev_ok = true;
    let mut detail = Vec::new();
    for (x, p) in &singular {
        let cp = sphere.brt_chart_at(x)?;
        let c = coefficients_at(&cp.chart, &cp.w)?;
        let devs: Vec<(u64, f64)> = bases
            .iter()
            .filter(|b| b.m % p == 0 && b.m >= 10)
            .map(|b| {
                let mf = b.m as f64;
                let lead = sum_factor(b.m, *p) as f64 * (c.b0 * mf.powi(n as i32) + c.b1 * mf.powi(n as i32 - 1));
                (b.m, (b.szego_value(x) / lead - 1.0).abs())
            })
            .collect();
        if let (Some(first), Some(last)) = (devs.first(), devs.last()) {
            dev_ok &= last.1 < first.1;
            if n == 1 {
                dev_ok &= last.1 <= tol.doubling;
            }
            detail.push(format!("p_r={p}: {:.2e} at m={} -> {:.2e} at m={}", first.1, first.0, last.1, last.0));
        }
    }
    out.push(Check::new("stratum sum factor", dev_ok, detail.join("; ")));
    Ok(())
}

fn common_checks(sphere: &WeightedSphere, out: &mut Vec<Check>) -> Result<()> {
    let mut ok = true;
    for p in 1..=12u64 {
        for m in 1..=500u64 {
            let s: C64 = (0..p).map(|s| C64::from_polar(1.0, 2.0 * PI * ((s * m) % p) as f64 / p as f64)).sum();
            ok &= (s - C64::new(sum_factor(m, p) as f64, 0.0)).norm() < 1e-12;
        }
    }
    out.push(Check::new("sum factor", ok, "integer factor vs exponential sum, p <= 12, m <= 500".into()));

    let xs = resolve_points(&PointSpec::Random { samples: 3, seed: 9 }, sphere);
    let b = sphere.monomial_norms(17)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for x in &xs {
        let y = sphere.act(rng.random_range(-PI..PI), x);
        worst = worst.max(rel(b.szego_value(&y), b.szego_value(x)));
    }
    out.push(Check::new("circle invariance", worst <= 1e-13, format!("max rel change {worst:.2e} at m = 17")));
    Ok(())
}

/// Runs the invariant suite for a model.
pub fn run_checks(model: &ModelSpec, tol: &Tolerances, exec: Exec) -> Result<Vec<Check>> {
    let sphere = model.sphere(exec)?;
    let mut out = Vec::new();
    out.push(s_l_identity(&sphere)?);
    if model.preset == MetricPreset::AmbientRound {
        round_checks(&sphere, tol, &mut out)?;
    } else {
        weighted_checks(&sphere, tol, &mut out)?;
    }
    common_checks(&sphere, &mut out)?;
    Ok(out)
}
