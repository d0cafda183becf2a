//! Rigid CR curvature at a point of a canonical chart, and the Tanaka-Webster
//! scalar curvature computed along a separate path.
//!
//! Matrix conventions: `g_jk = 2 d_j d_kbar phi`, the Levi metric is
//! `h = g / 2 pi`, and the rigid metric Gram matrix is `H_jk = <Z_j | Z_k>`.
//! The Levi Laplacian is `-2 tr(h^{-1} F)` with `F_jk = d_j d_kbar f`.

use std::f64::consts::PI;

use crate::brt::BRTChart;
use crate::error::{Error, Result};
use crate::jet::{Jet, JetMatrix, C64};
use crate::linalg::{self, CMat};

/// Jet order needed for every quantity in [`CurvatureReport`].
pub const REPORT_ORDER: usize = 6;

/// Curvature coefficients `Omega_{ab,jk}` of the Chern connection of the Levi
/// metric: the endomorphism part is `(a, b)` acting on the frame as
/// `R Z_a = sum_b Omega_ab Z_b`, the form part is `dz_j ^ dzbar_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChernCurvature {
    pub n: usize,
    data: Vec<C64>,
}

impl ChernCurvature {
    pub fn get(&self, a: usize, b: usize, j: usize, k: usize) -> C64 {
        let n = self.n;
        self.data[((a * n + b) * n + j) * n + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureNorms {
    /// `|R^det|^2`
    pub rdet_sq: f64,
    /// `|Ric|^2`
    pub ric_sq: f64,
    /// `<Ric | R^det>`
    pub ric_rdet: f64,
    /// `|R^{T^{1,0}}|^2`
    pub chern_sq: f64,
}

#[derive(Clone, Debug)]
pub struct ThetaQuantities {
    pub b_density: f64,
    pub s_theta: f64,
    pub rdet: CMat,
}

#[derive(Clone, Debug)]
pub struct ChernPackage {
    pub curvature: ChernCurvature,
    pub ricci: CMat,
    pub norms: CurvatureNorms,
}

/// Every rigid invariant at one chart point.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub n: usize,
    pub g: CMat,
    pub h: CMat,
    pub h_inv: CMat,
    pub gram: CMat,
    pub a_density: f64,
    pub b_density: f64,
    pub s_l: f64,
    pub s_theta: f64,
    pub lap_s_l: f64,
    pub lap_s_theta: f64,
    pub rdet: CMat,
    pub chern: ChernCurvature,
    pub ricci: CMat,
    pub norms: CurvatureNorms,
    pub rdot: CMat,
    pub det_rdot: f64,
    pub tw_scalar: f64,
}

fn levi_inverse(g: &CMat) -> Result<CMat> {
    linalg::cholesky_lower(g, "Levi form")?;
    let h = g.scale(1.0 / (2.0 * PI));
    linalg::inverse(&h, "Levi metric")
}

/// `Delta_L f` at the base point of `f`, given the Levi matrix `g` there.
pub fn laplacian_levi(f: &Jet, g: &CMat) -> Result<f64> {
    let h_inv = levi_inverse(g)?;
    let n = g.nrows();
    let mut s = C64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            s += h_inv[(k, j)] * f.d2(j, k)?;
        }
    }
    Ok(-2.0 * s.re)
}

/// `Delta_L f` as a field, from jets of `h^{-1}`.
fn laplacian_field(f: &Jet, h_inv: &JetMatrix) -> Result<Jet> {
    let hess = f.levi_hessian()?;
    Ok(h_inv.mul(&hess).trace().scale_re(-2.0))
}

fn determinant_real(m: &JetMatrix, scale: f64, what: &str) -> Result<Jet> {
    let d = m.det().scale_re(scale);
    let v = d.value();
    if !(v.re > 0.0) || v.im.abs() > 1e-10 * v.re {
        return Err(Error::SingularMetric(format!("{what} has non-positive determinant {v}")));
    }
    Ok(d)
}

struct Fields {
    n: usize,
    g: JetMatrix,
    h: JetMatrix,
    h_inv: JetMatrix,
    gram: JetMatrix,
}

fn fields(chart: &BRTChart, z: &[C64], order: usize) -> Result<Fields> {
    let jets = chart.local_jets(z, order)?;
    let g = jets.levi()?;
    levi_inverse(&g.value())?;
    let h = g.map(|x| x.scale_re(1.0 / (2.0 * PI)));
    let h_inv = h.inverse()?;
    let gram = jets.gram_or_levi()?;
    linalg::cholesky_lower(&gram.value(), "rigid metric")?;
    Ok(Fields { n: chart.n, g, h, h_inv, gram })
}

fn scalar_pair(field: &Jet, f: &Fields) -> Result<(f64, f64)> {
    let s = laplacian_field(field, &f.h_inv)?;
    let lap = laplacian_field(&s, &f.h_inv)?;
    Ok((s.value().re, lap.value().re))
}

/// `S_L = Delta_L log a` with `a = det g / pi^n`.
pub fn rigid_scalar_curvature(chart: &BRTChart, z: &[C64]) -> Result<f64> {
    let f = fields(chart, z, 4)?;
    let log_a = determinant_real(&f.g, PI.powi(-(f.n as i32)), "Levi form")?.ln()?;
    Ok(laplacian_field(&log_a, &f.h_inv)?.value().re)
}

/// Density `b = 2^n det H`, `S^Theta_L = Delta_L log b` and `R^det = d dbar log b`.
pub fn theta_quantities(chart: &BRTChart, z: &[C64]) -> Result<ThetaQuantities> {
    let f = fields(chart, z, 4)?;
    let b = determinant_real(&f.gram, 2f64.powi(f.n as i32), "rigid metric")?;
    let log_b = b.ln()?;
    Ok(ThetaQuantities {
        b_density: b.value().re,
        s_theta: laplacian_field(&log_b, &f.h_inv)?.value().re,
        rdet: log_b.levi_hessian()?.value(),
    })
}

fn chern_from_fields(f: &Fields) -> Result<ChernCurvature> {
    let n = f.n;
    let mut data = vec![C64::new(0.0, 0.0); n * n * n * n];
    for j in 0..n {
        let dh = f.h.try_map(|x| x.dz(j))?;
        let theta = dh.mul(&f.h_inv);
        for a in 0..n {
            for b in 0..n {
                for k in 0..n {
                    data[((a * n + b) * n + j) * n + k] = -theta.get(a, b).dzb(k)?.value();
                }
            }
        }
    }
    Ok(ChernCurvature { n, data })
}

fn ricci_of(c: &ChernCurvature) -> CMat {
    let n = c.n;
    CMat::from_fn(n, n, |a, k| -(0..n).map(|j| c.get(a, j, j, k)).sum::<C64>())
}

fn chern_norm_sq(c: &ChernCurvature, p: &CMat) -> Result<f64> {
    let n = c.n;
    let p_inv = linalg::inverse(p, "frame")?;
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            // curvature evaluated on (conj e_j, e_k)
            let omega = CMat::from_fn(n, n, |a, b| {
                let mut s = C64::new(0.0, 0.0);
                for q in 0..n {
                    for r in 0..n {
                        s += c.get(a, b, q, r) * p[(q, k)] * p[(r, j)].conj();
                    }
                }
                -s
            });
            let m = &p_inv * omega.transpose() * p;
            total += m.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
    }
    Ok(total)
}

/// Chern curvature of the Levi metric, its Ricci form and the curvature norms.
pub fn chern_package(chart: &BRTChart, z: &[C64]) -> Result<ChernPackage> {
    let f = fields(chart, z, 4)?;
    let curvature = chern_from_fields(&f)?;
    let ricci = ricci_of(&curvature);
    let theta = theta_quantities(chart, z)?;
    let p = linalg::orthonormal_frame(&f.h.value())?;
    let norms = CurvatureNorms {
        rdet_sq: linalg::form_norm_sq(&theta.rdet, &p),
        ric_sq: linalg::form_norm_sq(&ricci, &p),
        ric_rdet: linalg::form_pairing(&ricci, &theta.rdet, &p),
        chern_sq: chern_norm_sq(&curvature, &p)?,
    };
    Ok(ChernPackage { curvature, ricci, norms })
}

/// The endomorphism with `i d omega0 (V, conj W) = <Rdot V | W>` in the frame
/// `Z_j`, and its determinant.
pub fn rdot(chart: &BRTChart, z: &[C64]) -> Result<(CMat, f64)> {
    let jets = chart.local_jets(z, 2)?;
    let g = jets.levi()?.value();
    let gram = jets.gram_or_levi()?.value();
    rdot_from(&g, &gram)
}

fn rdot_from(g: &CMat, gram: &CMat) -> Result<(CMat, f64)> {
    let gram_inv = linalg::inverse(gram, "rigid metric")?;
    let r = (g * gram_inv).transpose();
    let det = g.determinant().re / gram.determinant().re;
    if !(det > 0.0) {
        return Err(Error::SingularMetric("Rdot has non-positive determinant".into()));
    }
    Ok((r, det))
}

/// Tanaka-Webster scalar curvature `R = g^{kbar a} R_{a kbar}` from the
/// curvature tensor of the pseudohermitian connection
/// `omega_a^b = g^{sbar b} d g_{a sbar}`, using raw derivatives of `phi`.
pub fn tw_scalar(chart: &BRTChart, z: &[C64]) -> Result<f64> {
    let n = chart.n;
    let phi = chart.local_jets(z, 4)?.phi;
    let deriv = |hol: &[usize], anti: &[usize]| -> Result<C64> {
        let mut a = vec![0; n];
        let mut b = vec![0; n];
        for &i in hol {
            a[i] += 1;
        }
        for &i in anti {
            b[i] += 1;
        }
        Ok(phi.wirtinger(&a, &b)? * 2.0)
    };
    let g = CMat::from_fn(n, n, |a, s| deriv(&[a], &[s]).unwrap_or_default());
    linalg::cholesky_lower(&g, "Levi form")?;
    let g_inv = linalg::inverse(&g, "Levi form")?;
    // dg[j][(a, s)] = d_j g_{a sbar}, dbg[k][(a, s)] = d_kbar g_{a sbar}
    let mut dg = Vec::with_capacity(n);
    let mut dbg = Vec::with_capacity(n);
    for j in 0..n {
        let mut m = CMat::zeros(n, n);
        let mut mb = CMat::zeros(n, n);
        for a in 0..n {
            for s in 0..n {
                m[(a, s)] = deriv(&[j, a], &[s])?;
                mb[(a, s)] = deriv(&[a], &[s, j])?;
            }
        }
        dg.push(m);
        dbg.push(mb);
    }
    let dg_inv: Vec<CMat> = dbg.iter().map(|d| -(&g_inv * d * &g_inv)).collect();
    let mut ric = CMat::zeros(n, n);
    for a in 0..n {
        for k in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                // R_{a j kbar}^{j}
                for sig in 0..n {
                    s -= g_inv[(sig, j)] * deriv(&[j, a], &[sig, k])?;
                    s -= dg[j][(a, sig)] * dg_inv[k][(sig, j)];
                }
            }
            ric[(a, k)] = s;
        }
    }
    let mut r = C64::new(0.0, 0.0);
    for a in 0..n {
        for k in 0..n {
            r += g_inv[(k, a)] * ric[(a, k)];
        }
    }
    Ok(r.re)
}

/// Full report at `z`.
pub fn curvature_report(chart: &BRTChart, z: &[C64]) -> Result<CurvatureReport> {
    let f = fields(chart, z, REPORT_ORDER)?;
    let n = f.n;
    let log_a = determinant_real(&f.g, PI.powi(-(n as i32)), "Levi form")?.ln()?;
    let b = determinant_real(&f.gram, 2f64.powi(n as i32), "rigid metric")?;
    let log_b = b.ln()?;
    let (s_l, lap_s_l) = scalar_pair(&log_a, &f)?;
    let (s_theta, lap_s_theta) = scalar_pair(&log_b, &f)?;
    let rdet = log_b.levi_hessian()?.value();
    let chern = chern_from_fields(&f)?;
    let ricci = ricci_of(&chern);
    let h = f.h.value();
    let p = linalg::orthonormal_frame(&h)?;
    let norms = CurvatureNorms {
        rdet_sq: linalg::form_norm_sq(&rdet, &p),
        ric_sq: linalg::form_norm_sq(&ricci, &p),
        ric_rdet: linalg::form_pairing(&ricci, &rdet, &p),
        chern_sq: chern_norm_sq(&chern, &p)?,
    };
    let g = f.g.value();
    let gram = f.gram.value();
    let (rdot, det_rdot) = rdot_from(&g, &gram)?;
    Ok(CurvatureReport {
        n,
        a_density: log_a.value().re.exp(),
        b_density: b.value().re,
        h_inv: f.h_inv.value(),
        h,
        g,
        gram,
        s_l,
        s_theta,
        lap_s_l,
        lap_s_theta,
        rdet,
        chern,
        ricci,
        norms,
        rdot,
        det_rdot,
        tw_scalar: tw_scalar(chart, z)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brt::MetricGram;
    use crate::jet::{Expr, JetContext};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn laplacian_examples() {
        let ctx = JetContext::new(1, 4).unwrap();
        let w = Jet::variable(&ctx, 0, c(0.0, 0.0));
        let g = CMat::identity(1, 1);
        let f = &w * &w.conj();
        assert!((laplacian_levi(&f, &g).unwrap() + 4.0 * PI).abs() < 1e-13);
        let f = f.add_const(c(1.0, 0.0)).ln().unwrap();
        assert!((laplacian_levi(&f, &g).unwrap() + 4.0 * PI).abs() < 1e-13);
        let ph = (&w * &w).re();
        assert!(laplacian_levi(&ph, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sphere_scalar_curvatures() {
        for (n, expected) in [(1usize, 8.0 * PI), (2, 24.0 * PI)] {
            let ch = BRTChart::hopf(n);
            let z = vec![c(0.3, -0.2); n];
            let s = rigid_scalar_curvature(&ch, &z).unwrap();
            assert!((s - expected).abs() < 1e-11 * expected, "{s}");
            let r = tw_scalar(&ch, &z).unwrap();
            assert!((r - expected / (4.0 * PI)).abs() < 1e-11, "{r}");
        }
    }

    #[test]
    fn flat_chart_is_flat() {
        let ch = BRTChart::bargmann_fock(2);
        let rep = curvature_report(&ch, &[c(0.4, 0.1), c(-0.2, 0.3)]).unwrap();
        assert!(rep.s_l.abs() < 1e-13 && rep.tw_scalar.abs() < 1e-13);
        assert!(rep.chern.max_abs() < 1e-13 && linalg::max_abs(&rep.ricci) < 1e-13);
        assert!((rep.det_rdot - (2.0 * PI).powi(2)).abs() < 1e-11);
    }

    #[test]
    fn s3_round_norms() {
        let ch = BRTChart::hopf(1).with_gram(MetricGram::Explicit(vec![vec![
            Expr::parse("0.5/(1 + z*zb)^2").unwrap(),
        ]]));
        let rep = curvature_report(&ch, &[c(0.2, 0.5)]).unwrap();
        let t = 16.0 * PI * PI;
        for v in [rep.norms.ric_sq, rep.norms.chern_sq, rep.norms.ric_rdet, rep.norms.rdet_sq] {
            assert!((v - t).abs() < 1e-9 * t, "{v}");
        }
        assert!((rep.s_theta - 8.0 * PI).abs() < 1e-10);
        assert!((rep.det_rdot - 2.0).abs() < 1e-12);
        let z = 0.2f64.powi(2) + 0.25;
        assert!((rep.b_density - (1.0 + z).powi(-2)).abs() < 1e-14);
    }

    #[test]
    fn indefinite_potential_rejected() {
        let ch = BRTChart::explicit(1, "bad", "-z*zb").unwrap();
        assert!(matches!(rigid_scalar_curvature(&ch, &[c(0.1, 0.0)]), Err(Error::NotPositiveDefinite(_))));
    }
}
