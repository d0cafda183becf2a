//! Experiment driver: expansion verification, coefficient fits, decay scans
//! and the circle-Fourier localization demo on the flat model.

pub mod checks;
pub mod config;
pub mod output;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{coefficients_at, expansion_prediction, sum_factor, CoefficientSet};
use crate::error::{Error, Result};
use crate::jet::C64;
use crate::models::quadrature::log_factorials;
use crate::models::{MonomialBasis, WeightedSphere};

pub use checks::{run_checks, Check};
pub use config::{ExperimentConfig, ModelSpec, PointSpec, Tolerances};
pub use output::{fmt_f64, Series, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct PointData {
    pub x: Vec<C64>,
    pub stratum: usize,
    pub p_r: u64,
    /// Round distance to `X^r_sing`.
    pub distance: f64,
    pub coefficients: CoefficientSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionRow {
    pub m: u64,
    pub point: usize,
    pub stratum: usize,
    pub sum_factor: u64,
    pub exact: f64,
    pub prediction: f64,
    pub residual: f64,
    pub distance: f64,
    /// `|residual|` exceeds twice the envelope fitted on the lower half of `m`.
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    pub n: usize,
    pub truncation: usize,
    pub points: Vec<PointData>,
    pub rows: Vec<ExpansionRow>,
    /// Fitted `(b0, b1, b2)` per point, when enough nonzero-factor rows exist.
    pub fits: Vec<Option<[f64; 3]>>,
    pub eps_hat: Option<f64>,
    /// `C` of `C (m^{n-N} + m^n e^{-eps m d^2})`, fitted on `m <= median`.
    pub envelope_c: f64,
    pub violations: usize,
}

/// Point-level data shared by the expansion and decay experiments.
pub fn point_data(sphere: &WeightedSphere, x: &[C64]) -> Result<PointData> {
    sphere.check_point(x)?;
    let stratum = sphere.stratum_of(x);
    let p_r = sphere.strata().p_list[stratum];
    let cp = sphere.brt_chart_at(x)?;
    let coefficients = coefficients_at(&cp.chart, &cp.w)?;
    Ok(PointData { x: x.to_vec(), stratum, p_r, distance: sphere.distance_to_stratum(x, stratum), coefficients })
}

fn bases(sphere: &WeightedSphere, ms: &[u64]) -> Result<Vec<MonomialBasis>> {
    sphere.exec.map(ms, |&m| sphere.monomial_norms(m)).into_iter().collect()
}

pub fn run_expansion(cfg: &ExperimentConfig) -> Result<ExpansionReport> {
    cfg.validate()?;
    let sphere = cfg.sphere()?;
    let n = sphere.n;
    let big_n = cfg.truncation;
    let xs = cfg.resolve_points(&sphere);
    let points: Vec<PointData> =
        sphere.exec.map(&xs, |x| point_data(&sphere, x)).into_iter().collect::<Result<_>>()?;
    let bs = bases(&sphere, &cfg.m_values)?;

    let mut rows = Vec::new();
    for (i, pd) in points.iter().enumerate() {
        for b in &bs {
            let exact = b.szego_value(&pd.x);
            let pred = if b.m == 0 { None } else { Some(expansion_prediction(&pd.coefficients, b.m, pd.p_r, big_n)?) };
            let (prediction, sf) = pred.map_or((f64::NAN, sum_factor(0, pd.p_r)), |p| (p.value, p.sum_factor));
            rows.push(ExpansionRow {
                m: b.m,
                point: i,
                stratum: pd.stratum,
                sum_factor: sf,
                exact,
                prediction,
                residual: exact - prediction,
                distance: pd.distance,
                violation: false,
            });
        }
    }

    let fits = (0..points.len())
        .map(|i| {
            let samples: Vec<(u64, f64)> = rows
                .iter()
                .filter(|r| r.point == i && r.sum_factor > 0 && r.m > 0)
                .map(|r| (r.m, r.exact / r.sum_factor as f64))
                .collect();
            fit_coefficients(&samples, n).ok()
        })
        .collect();

    let decay: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.distance > 0.0 && r.residual.is_finite() && r.residual != 0.0)
        .map(|r| (r.m as f64, r.distance, r.residual.abs()))
        .collect();
    let eps_hat = fit_decay(&decay, n).ok().map(|(e, _)| e);

    let env = |r: &ExpansionRow| {
        let m = r.m as f64;
        let e = eps_hat.unwrap_or(0.0).max(0.0);
        m.powi(n as i32 - big_n as i32) + m.powi(n as i32) * (-e * m * r.distance * r.distance).exp()
    };
    let mut ms: Vec<u64> = cfg.m_values.clone();
    ms.sort_unstable();
    let median = ms[ms.len() / 2];
    let envelope_c = rows
        .iter()
        .filter(|r| r.m > 0 && r.m <= median && r.residual.is_finite())
        .map(|r| r.residual.abs() / env(r))
        .fold(0.0, f64::max);
    let mut violations = 0;
    for r in rows.iter_mut().filter(|r| r.m > median && r.residual.is_finite()) {
        if r.residual.abs() > 2.0 * envelope_c * env(r) && r.residual.abs() > 1e-12 * (r.m as f64).powi(n as i32) {
            r.violation = true;
            violations += 1;
        }
    }
    Ok(ExpansionReport { n, truncation: big_n, points, rows, fits, eps_hat, envelope_c, violations })
}

impl ExpansionReport {
    pub fn table(&self) -> Table {
        let n1 = self.points.first().map_or(0, |p| p.x.len());
        let mut header: Vec<String> = vec!["m".into(), "point".into()];
        for a in 0..n1 {
            header.push(format!("re_z{}", a + 1));
            header.push(format!("im_z{}", a + 1));
        }
        for h in ["stratum", "sum_factor", "exact", "prediction", "residual", "distance", "violation"] {
            header.push(h.into());
        }
        let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut t = Table::new(&hdr);
        for r in &self.rows {
            let mut row = vec![r.m.to_string(), r.point.to_string()];
            for v in &self.points[r.point].x {
                row.push(fmt_f64(v.re));
                row.push(fmt_f64(v.im));
            }
            row.push((r.stratum + 1).to_string());
            row.push(r.sum_factor.to_string());
            row.push(fmt_f64(r.exact));
            row.push(fmt_f64(r.prediction));
            row.push(fmt_f64(r.residual));
            row.push(fmt_f64(r.distance));
            row.push(r.violation.to_string());
            t.push(row);
        }
        t
    }

    pub fn svg(&self) -> String {
        let series: Vec<Series> = (0..self.points.len())
            .map(|i| Series {
                label: format!("point {i}"),
                points: self
                    .rows
                    .iter()
                    .filter(|r| r.point == i)
                    .map(|r| (r.m as f64, r.residual.abs()))
                    .collect(),
            })
            .collect();
        output::svg_loglog("|S_m - prediction|", "m", "|residual|", &series)
    }
}

/// Least-squares fit of `v_m ~ c0 m^n + c1 m^{n-1} + c2 m^{n-2}` from
/// `(m, v_m)` samples with at least six distinct `m`. Columns are scaled to
/// unit norm before the SVD solve.
pub fn fit_coefficients(samples: &[(u64, f64)], n: usize) -> Result<[f64; 3]> {
    let mut ms: Vec<u64> = samples.iter().map(|s| s.0).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < 6 {
        return Err(Error::RankDeficient(format!("{} distinct m values (need 6)", ms.len())));
    }
    if ms[0] == 0 {
        return Err(Error::RankDeficient("m = 0 in fit rows".into()));
    }
    let rows = samples.len();
    let mut a = DMatrix::<f64>::from_fn(rows, 3, |i, j| (samples[i].0 as f64).powi(n as i32 - j as i32));
    let b = DVector::<f64>::from_iterator(rows, samples.iter().map(|s| s.1));
    let scale: Vec<f64> = (0..3).map(|j| a.column(j).norm()).collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-13 * smax) {
        return Err(Error::RankDeficient(format!("singular values {smax:.3e} / {smin:.3e}")));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    Ok([x[0] / scale[0], x[1] / scale[1], x[2] / scale[2]])
}

/// Fits `ln(q / m^n) = ln C - eps m d^2` from `(m, d, q)` triples; returns `(eps, ln C)`.
pub fn fit_decay(samples: &[(f64, f64, f64)], n: usize) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.2 > 0.0)
        .map(|&(m, d, q)| (m * d * d, (q / m.powi(n as i32)).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::RankDeficient("decay fit needs two rows".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::RankDeficient("all rows share m d^2".into()));
    }
    let slope = sxy / sxx;
    Ok((-slope, my - slope * mx))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub m: u64,
    pub point: usize,
    /// `|z_1|`.
    pub modulus: f64,
    pub distance: f64,
    pub d_hat: f64,
    pub exact: f64,
    pub prediction: f64,
    pub residual: f64,
    /// Norm of the gradient of `S_m` tangent to the sphere.
    pub gradient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub n: usize,
    pub rows: Vec<DecayRow>,
    pub eps_hat: f64,
    pub log_c: f64,
    /// Polynomial constant `C_N`: median of `|residual| m^{N-n}` over the
    /// quarter of rows with the largest `m d^2`.
    pub poly_constant: f64,
    /// Rows with `|residual| >= 10 C_N m^{n-N}`, used for the rate fit.
    pub exp_rows: usize,
    /// Exponential constant with factor-2 slack, `2 e^{log_c}`.
    pub envelope_c: f64,
    /// `max |residual| / (envelope_c m^n e^{-eps m d^2 / 2} + 2 C_N m^{n-N})` over all rows.
    pub envelope_ratio: f64,
    /// The same ratio without the polynomial term, over the exponential rows.
    pub exp_envelope_ratio: f64,
    pub envelope_holds: bool,
    /// `max |grad S_m| / m^{n+1/2}` over the lower and upper halves of `m`.
    pub gradient_constants: (f64, f64),
    /// Range of `d_hat / d` over the grid.
    pub dhat_ratio: (f64, f64),
}

/// Component of `g` orthogonal to `x` in `R^{2n+2}`.
fn tangential(g: &[C64], x: &[C64]) -> f64 {
    let radial: f64 = g.iter().zip(x).map(|(a, b)| (a * b.conj()).re).sum();
    g.iter().zip(x).map(|(a, b)| (a - b * radial).norm_sqr()).sum::<f64>().sqrt()
}

/// Decay of `S_m - prediction` near the singular strata.
///
/// The expansion residual, not `S_m` itself, is what the exponential term
/// bounds: at points of the regular stratum `S_m` grows like `m^n`. The rate
/// is fitted on rows where the residual clears the polynomial floor
/// `C_N m^{n-N}` by a factor of ten; the envelope check uses both terms.
pub fn decay_scan(cfg: &ExperimentConfig) -> Result<DecayReport> {
    cfg.validate()?;
    let sphere = cfg.sphere()?;
    let n = sphere.n;
    let t = sphere.strata().p_list.len();
    let xs = cfg.resolve_points(&sphere);
    let delta = cfg.delta_or_default(&sphere);
    for x in &xs {
        let r = sphere.stratum_of(x);
        if r + 1 >= t {
            return Err(Error::EmptyStratum);
        }
        if sphere.distance_to_stratum(x, r) <= 0.0 {
            return Err(Error::Domain("decay scan points must lie off the singular strata".into()));
        }
    }
    let points: Vec<PointData> =
        sphere.exec.map(&xs, |x| point_data(&sphere, x)).into_iter().collect::<Result<_>>()?;
    let dhats: Vec<f64> =
        points.iter().map(|p| sphere.d_hat(&p.x, p.stratum, delta)).collect::<Result<_>>()?;
    let bs = bases(&sphere, &cfg.m_values)?;
    let mut rows = Vec::new();
    for (i, pd) in points.iter().enumerate() {
        for b in bs.iter().filter(|b| b.m > 0) {
            let exact = b.szego_value(&pd.x);
            let prediction = expansion_prediction(&pd.coefficients, b.m, pd.p_r, cfg.truncation)?.value;
            let gradient = tangential(&b.szego_gradient(&pd.x), &pd.x);
            rows.push(DecayRow {
                m: b.m,
                point: i,
                modulus: pd.x[0].norm(),
                distance: pd.distance,
                d_hat: dhats[i],
                exact,
                prediction,
                residual: exact - prediction,
                gradient,
            });
        }
    }
    let nf = n as i32;
    let big_n = cfg.truncation as i32;
    let x_of = |r: &DecayRow| r.m as f64 * r.distance * r.distance;
    let mut xs_sorted: Vec<f64> = rows.iter().map(x_of).collect();
    xs_sorted.sort_by(f64::total_cmp);
    let x_far = xs_sorted[(3 * xs_sorted.len()) / 4];
    let mut far: Vec<f64> = rows
        .iter()
        .filter(|r| x_of(r) >= x_far)
        .map(|r| r.residual.abs() * (r.m as f64).powi(big_n - nf))
        .collect();
    far.sort_by(f64::total_cmp);
    let poly_constant = far[far.len() / 2];
    let floor = |r: &DecayRow| poly_constant * (r.m as f64).powi(nf - big_n);
    let exp_set: Vec<&DecayRow> = rows.iter().filter(|r| r.residual.abs() >= 10.0 * floor(r)).collect();
    let samples: Vec<(f64, f64, f64)> =
        exp_set.iter().map(|r| (r.m as f64, r.distance, r.residual.abs())).collect();
    let (eps_hat, log_c) = fit_decay(&samples, n)?;
    let envelope_c = 2.0 * log_c.exp();
    let exp_env = |r: &DecayRow| {
        let m = r.m as f64;
        envelope_c * m.powi(nf) * (-0.5 * eps_hat * x_of(r)).exp()
    };
    let envelope_ratio =
        rows.iter().map(|r| r.residual.abs() / (exp_env(r) + 2.0 * floor(r))).fold(0.0, f64::max);
    let exp_envelope_ratio = exp_set.iter().map(|r| r.residual.abs() / exp_env(r)).fold(0.0, f64::max);
    let exp_rows = exp_set.len();
    let mut ms: Vec<u64> = rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let median = ms[ms.len() / 2];
    let gc = |pred: &dyn Fn(u64) -> bool| {
        rows.iter()
            .filter(|r| pred(r.m))
            .map(|r| r.gradient / (r.m as f64).powf(n as f64 + 0.5))
            .fold(0.0, f64::max)
    };
    let gradient_constants = (gc(&|m| m < median), gc(&|m| m >= median));
    let ratios = points.iter().zip(&dhats).map(|(p, d)| d / p.distance);
    let dhat_ratio = ratios.fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r), b.max(r)));
    Ok(DecayReport {
        n,
        rows,
        eps_hat,
        log_c,
        poly_constant,
        exp_rows,
        envelope_c,
        envelope_ratio,
        exp_envelope_ratio,
        envelope_holds: eps_hat > 0.0 && envelope_ratio <= 1.0,
        gradient_constants,
        dhat_ratio,
    })
}

impl DecayReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "m", "point", "abs_z1", "distance", "d_hat", "exact", "prediction", "residual", "gradient",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.m.to_string(),
                r.point.to_string(),
                fmt_f64(r.modulus),
                fmt_f64(r.distance),
                fmt_f64(r.d_hat),
                fmt_f64(r.exact),
                fmt_f64(r.prediction),
                fmt_f64(r.residual),
                fmt_f64(r.gradient),
            ]);
        }
        t
    }

    pub fn svg(&self) -> String {
        let mut pts: Vec<usize> = self.rows.iter().map(|r| r.point).collect();
        pts.dedup();
        let series: Vec<Series> = pts
            .into_iter()
            .map(|i| {
                let rows: Vec<&DecayRow> = self.rows.iter().filter(|r| r.point == i).collect();
                Series {
                    label: format!("|z1| = {:.3}", rows[0].modulus),
                    points: rows.iter().map(|r| (r.m as f64, r.residual.abs())).collect(),
                }
            })
            .collect();
        output::svg_loglog("decay of S_m - prediction", "m", "|residual|", &series)
    }
}

/// `P_m(z, w) = (2m/pi)^n e^{m(2 z.conj(w) - |z|^2 - |w|^2)}` of the flat model.
pub fn bargmann_fock_kernel(m: u64, z: &[C64], w: &[C64]) -> C64 {
    let mf = m as f64;
    let zw: C64 = z.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
    let zz: f64 = z.iter().map(|a| a.norm_sqr()).sum();
    let ww: f64 = w.iter().map(|a| a.norm_sqr()).sum();
    (2.0 * mf / PI).powi(z.len() as i32) * (mf * (2.0 * zw - zz - ww)).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatoryResult {
    pub m: u64,
    pub p: u32,
    pub order: usize,
    pub i_quad: C64,
    pub i_exact: f64,
    /// `|I(2K) - I(K)|`.
    pub aliasing_change: f64,
}

/// `(1/2pi) int_0^{2pi} P_m(z, e^{ipu} z) e^{imu} du` by the `order`-point
/// trapezoid rule, against the weight-`m` Fourier mode in closed form.
pub fn oscillatory_demo(z: &[C64], p: u32, m: u64, order: usize) -> Result<OscillatoryResult> {
    if p == 0 || m == 0 || order == 0 || z.is_empty() {
        return Err(Error::Domain("oscillatory demo needs p, m, order >= 1".into()));
    }
    let trap = |k: usize| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut comp = C64::new(0.0, 0.0);
        for j in 0..k {
            let u = 2.0 * PI * j as f64 / k as f64;
            let rot = C64::from_polar(1.0, p as f64 * u);
            let w: Vec<C64> = z.iter().map(|a| a * rot).collect();
            let v = bargmann_fock_kernel(m, z, &w) * C64::from_polar(1.0, m as f64 * u);
            // Neumaier on both parts
            let s = acc + v;
            for (c, (a, b, t)) in [(&mut comp.re, (acc.re, v.re, s.re)), (&mut comp.im, (acc.im, v.im, s.im))] {
                *c += if a.abs() >= b.abs() { (a - t) + b } else { (b - t) + a };
            }
            acc = s;
        }
        (acc + comp) / k as f64
    };
    let i_quad = trap(order);
    let i_fine = trap(2 * order);
    let aliasing_change = (i_fine - i_quad).norm();
    let nf = z.len() as i32;
    let scale = (2.0 * m as f64 / PI).powi(nf);
    if aliasing_change > 1e-11 * scale {
        return Err(Error::Quadrature { change: aliasing_change, order });
    }
    let zz: f64 = z.iter().map(|a| a.norm_sqr()).sum();
    let i_exact = if m % p as u64 != 0 {
        0.0
    } else {
        let k = (m / p as u64) as usize;
        if zz == 0.0 {
            0.0
        } else {
            let mf = m as f64;
            let lf = log_factorials(k);
            (nf as f64 * (2.0 * mf / PI).ln() - 2.0 * mf * zz + k as f64 * (2.0 * mf * zz).ln() - lf[k]).exp()
        }
    };
    Ok(OscillatoryResult { m, p, order, i_quad, i_exact, aliasing_change })
}
