//! The expansion coefficients `b_0, b_1, b_2`, their chart-local Bergman
//! counterparts, and truncated predictions of `S_m`.

use std::f64::consts::PI;

use crate::brt::BRTChart;
use crate::curvature::{curvature_report, CurvatureReport, REPORT_ORDER};
use crate::error::{Error, Result};
use crate::jet::{Jet, JetMatrix, C64};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub n: usize,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// Chart label and metric that produced the values.
    pub provenance: String,
}

impl CoefficientSet {
    pub fn as_array(&self) -> [f64; 3] {
        [self.b0, self.b1, self.b2]
    }

    pub fn scaled(&self, s: f64) -> [f64; 3] {
        [s * self.b0, s * self.b1, s * self.b2]
    }
}

/// The bracket of the `b_2` formula, before the `b_0` prefactor.
fn b2_bracket(
    s: f64,
    st: f64,
    lap_st: f64,
    lap_s: f64,
    rdet_sq: f64,
    ric_rdet: f64,
    ric_sq: f64,
    chern_sq: f64,
) -> f64 {
    let p2 = PI * PI;
    s * s / (128.0 * p2) - s * st / (32.0 * p2) + st * st / (32.0 * p2) - lap_st / (32.0 * p2)
        - rdet_sq / (8.0 * p2)
        + ric_rdet / (8.0 * p2)
        + lap_s / (96.0 * p2)
        - ric_sq / (24.0 * p2)
        + chern_sq / (96.0 * p2)
}

/// Assembles `b_0, b_1, b_2` from a curvature report.
pub fn coefficients_from_report(rep: &CurvatureReport, provenance: impl Into<String>) -> CoefficientSet {
    let n = rep.n as i32;
    let b0 = (2.0 * PI).powi(-n - 1) * rep.det_rdot;
    let b1 = b0 * (rep.s_theta / (4.0 * PI) - rep.s_l / (8.0 * PI));
    let b2 = b0
        * b2_bracket(
            rep.s_l,
            rep.s_theta,
            rep.lap_s_theta,
            rep.lap_s_l,
            rep.norms.rdet_sq,
            rep.norms.ric_rdet,
            rep.norms.ric_sq,
            rep.norms.chern_sq,
        );
    CoefficientSet { n: rep.n, b0, b1, b2, provenance: provenance.into() }
}

/// `b_0, b_1, b_2` at chart point `z` for the chart's rigid metric.
pub fn coefficients_at(chart: &BRTChart, z: &[C64]) -> Result<CoefficientSet> {
    let rep = curvature_report(chart, z)?;
    Ok(coefficients_from_report(&rep, chart.label.clone()))
}

/// Kähler-side quantities of the chart with weight `e^{-2 phi}` and the
/// Hermitian metric `Theta_jk = H_jk`.
#[derive(Clone, Debug, PartialEq)]
pub struct BergmanCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub det_rdot: f64,
    pub r: f64,
    pub r_hat: f64,
    pub lap_r: f64,
    pub lap_r_hat: f64,
    pub rdet_sq: f64,
    pub ric_sq: f64,
    pub ric_rdet: f64,
    pub chern_sq: f64,
}

/// `Delta_omega f = -2 sum_jk (hk^{-1})_jk d_j d_kbar f` as a field, where
/// `hk = omega^T`.
fn kahler_laplacian(f: &Jet, hk_inv: &JetMatrix) -> Result<Jet> {
    let n = hk_inv.dim();
    let mut acc: Option<Jet> = None;
    for j in 0..n {
        let dj = f.dz(j)?;
        for k in 0..n {
            let t = hk_inv.get(j, k) * &dj.dzb(k)?;
            acc = Some(match acc {
                None => t,
                Some(a) => a + t,
            });
        }
    }
    Ok(acc.expect("n >= 1").scale_re(-2.0))
}

/// `|A|^2` of a (1,1)-form `sum A_jk dz_j ^ dzbar_k` by contraction with the
/// inverse metric `hk^{-1}`.
fn contract_forms(a: &CMat, b: &CMat, hk_inv: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            for p in 0..n {
                for q in 0..n {
                    s += a[(j, k)] * b[(p, q)].conj() * hk_inv[(j, p)] * hk_inv[(k, q)].conj();
                }
            }
        }
    }
    s.re
}

/// Chart-local Bergman coefficients from the Kähler-side formulas.
pub fn local_bergman_coefficients(chart: &BRTChart, z: &[C64]) -> Result<BergmanCoefficients> {
    let n = chart.n;
    let jets = chart.local_jets(z, REPORT_ORDER)?;
    // R^L = 2 d dbar phi, omega_jk = R^L_jk / 2 pi, hk = omega^T
    let rl = JetMatrix::from_fn(n, |j, k| {
        jets.phi.dz(j).and_then(|x| x.dzb(k)).expect("order >= 2").scale_re(2.0)
    });
    let omega = rl.map(|x| x.scale_re(1.0 / (2.0 * PI)));
    let hk = omega.transpose();
    linalg::cholesky_lower(&omega.value(), "curvature form")?;
    let hk_inv = hk.inverse()?;
    let theta = jets.gram_or_levi()?;

    let v_omega = omega.det();
    let v_theta = theta.det();
    if !(v_omega.value().re > 0.0 && v_theta.value().re > 0.0) {
        return Err(Error::SingularMetric("non-positive volume density".into()));
    }
    let log_vo = v_omega.ln()?;
    let log_vt = v_theta.ln()?;
    let r_field = kahler_laplacian(&log_vo, &hk_inv)?;
    let rh_field = kahler_laplacian(&log_vt, &hk_inv)?;
    let r = r_field.value().re;
    let r_hat = rh_field.value().re;
    let lap_r = kahler_laplacian(&r_field, &hk_inv)?.value().re;
    let lap_r_hat = kahler_laplacian(&rh_field, &hk_inv)?.value().re;

    let rdet = CMat::from_fn(n, n, |j, k| {
        log_vt.dz(j).and_then(|x| x.dzb(k)).map(|x| x.value()).unwrap_or_default()
    });

    // alpha_p = hk^{-1} d_p hk, F_{ab,pq} = -d_qbar (alpha_p)_ab
    let mut f = vec![C64::new(0.0, 0.0); n * n * n * n];
    let idx = |a: usize, b: usize, p: usize, q: usize| ((a * n + b) * n + p) * n + q;
    for p in 0..n {
        let alpha = hk_inv.mul(&hk.try_map(|x| x.dz(p))?);
        for a in 0..n {
            for b in 0..n {
                for q in 0..n {
                    f[idx(a, b, p, q)] = -alpha.get(a, b).dzb(q)?.value();
                }
            }
        }
    }
    let ric = CMat::from_fn(n, n, |b, q| -(0..n).map(|a| f[idx(a, b, a, q)]).sum::<C64>());

    let m = hk.value();
    let mi = hk_inv.value();
    let mut chern_sq = C64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            for p in 0..n {
                for q in 0..n {
                    let x = f[idx(a, b, p, q)];
                    for a2 in 0..n {
                        for b2 in 0..n {
                            for p2 in 0..n {
                                for q2 in 0..n {
                                    chern_sq += x
                                        * f[idx(a2, b2, p2, q2)].conj()
                                        * m[(a2, a)]
                                        * mi[(b, b2)]
                                        * mi[(p, p2)]
                                        * mi[(q2, q)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // <Rdot V, W>_Theta = <R^L, V ^ conj W>  =>  Rdot = (Theta^T)^{-1} (R^L)^T
    let th = theta.value();
    let rdot = linalg::inverse(&th.transpose(), "Theta")? * rl.value().transpose();
    let det_rdot = rdot.determinant().re;

    let rdet_sq = contract_forms(&rdet, &rdet, &mi);
    let ric_sq = contract_forms(&ric, &ric, &mi);
    let ric_rdet = contract_forms(&ric, &rdet, &mi);
    let chern_sq = chern_sq.re;
    let b0 = (2.0 * PI).powi(-(n as i32)) * det_rdot;
    let b1 = b0 * (r_hat / (4.0 * PI) - r / (8.0 * PI));
    let b2 = b0 * b2_bracket(r, r_hat, lap_r_hat, lap_r, rdet_sq, ric_rdet, ric_sq, chern_sq);
    Ok(BergmanCoefficients {
        b0,
        b1,
        b2,
        det_rdot,
        r,
        r_hat,
        lap_r,
        lap_r_hat,
        rdet_sq,
        ric_sq,
        ric_rdet,
        chern_sq,
    })
}

/// `sum_{s=1}^{p} e^{2 pi i (s-1) m / p}`, which is `p` when `p | m` and `0` otherwise.
pub fn sum_factor(m: u64, p: u64) -> u64 {
    assert!(p >= 1, "period denominator must be positive");
    if m % p == 0 {
        p
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPrediction {
    pub m: u64,
    /// Period denominator `p_r` of the stratum.
    pub p_r: u64,
    pub terms: Vec<f64>,
    pub sum_factor: u64,
    pub value: f64,
}

/// `sum_factor(m, p_r) * sum_{j < N} b_j m^{n-j}`.
pub fn expansion_prediction(c: &CoefficientSet, m: u64, p_r: u64, big_n: usize) -> Result<ExpansionPrediction> {
    if !(1..=3).contains(&big_n) {
        return Err(Error::Unsupported(format!("truncation N = {big_n} (only N <= 3)")));
    }
    if m == 0 {
        return Err(Error::Domain("expansion prediction needs m >= 1".into()));
    }
    let b = c.as_array();
    let mf = m as f64;
    let terms: Vec<f64> = (0..big_n).map(|j| b[j] * mf.powi(c.n as i32 - j as i32)).collect();
    let sf = sum_factor(m, p_r);
    let value = sf as f64 * terms.iter().sum::<f64>();
    Ok(ExpansionPrediction { m, p_r, terms, sum_factor: sf, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_factor_examples() {
        assert_eq!(sum_factor(6, 2), 2);
        assert_eq!(sum_factor(7, 2), 0);
        assert!((1..50).all(|m| sum_factor(m, 1) == 1));
    }

    #[test]
    fn prediction_s3() {
        let c = CoefficientSet {
            n: 1,
            b0: 1.0 / (2.0 * PI * PI),
            b1: 1.0 / (2.0 * PI * PI),
            b2: 0.0,
            provenance: "test".into(),
        };
        let p = expansion_prediction(&c, 10, 1, 2).unwrap();
        assert!((p.value - 11.0 / (2.0 * PI * PI)).abs() < 1e-15);
        assert_eq!(expansion_prediction(&c, 7, 2, 3).unwrap().value, 0.0);
        assert!(expansion_prediction(&c, 7, 1, 4).is_err());
    }

    #[test]
    fn levi_b0_is_universal() {
        let ch = BRTChart::hopf(2);
        let c = coefficients_at(&ch, &[C64::new(0.3, 0.1), C64::new(-0.4, 0.2)]).unwrap();
        assert!((c.b0 - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }
}

#[cfg(test)]
mod sphere_tests {
    use super::*;
    use crate::brt::{weighted_sphere_chart, MetricGram};

    #[test]
    fn round_spheres() {
        let pts = [C64::new(0.3, -0.2), C64::new(-0.5, 0.4)];
        let s3 = weighted_sphere_chart(&[1, 1], 0, MetricGram::AmbientRound { weights: vec![1, 1], pivot: 0 }).unwrap();
        let c = coefficients_at(&s3, &pts[..1]).unwrap();
        let k = 1.0 / (2.0 * PI * PI);
        assert!((c.b0 - k).abs() < 1e-12 && (c.b1 - k).abs() < 1e-12 && c.b2.abs() < 1e-12, "{c:?}");
        let bb = local_bergman_coefficients(&s3, &pts[..1]).unwrap();
        assert!((bb.b0 - 2.0 * PI * c.b0).abs() < 1e-12 && bb.b2.abs() < 1e-11, "{bb:?}");

        let s5 = weighted_sphere_chart(&[1, 1, 1], 2, MetricGram::AmbientRound { weights: vec![1, 1, 1], pivot: 2 }).unwrap();
        let c = coefficients_at(&s5, &pts).unwrap();
        let k = 1.0 / (2.0 * PI.powi(3));
        assert!((c.b0 - k).abs() < 1e-12 && (c.b1 - 3.0 * k).abs() < 1e-11 && (c.b2 - 2.0 * k).abs() < 1e-10, "{c:?}");
        let bb = local_bergman_coefficients(&s5, &pts).unwrap();
        assert!((bb.b2 - 2.0 * PI * c.b2).abs() < 1e-10, "{bb:?}");
    }
}
