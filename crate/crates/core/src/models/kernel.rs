//! Monomial bases of weight-`m` CR functions and exact Szegő kernel values.

use crate::error::{Error, Result};
use crate::exec::compensated_sum;
use crate::jet::C64;

use super::quadrature::{log_factorials, SimplexRule};
use super::{MetricPreset, WeightedSphere};

/// Largest rule order tried before giving up on the norm quadrature.
fn max_rule_order(dim: usize) -> usize {
    match dim {
        1 => 2048,
        2 => 1024,
        _ => 160,
    }
}
const NORM_TOL: f64 = 1e-13;

/// The monomials `z^alpha` with `sum p_a alpha_a = m` and their squared norms.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub m: u64,
    pub exponents: Vec<Vec<u32>>,
    /// `ln ||z^alpha||^2`.
    pub log_norms: Vec<f64>,
    /// Gauss rule order used for the norms (0 for closed forms).
    pub rule_order: usize,
}

impl MonomialBasis {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|x| x.exp()).collect()
    }

    /// `ln(|x^alpha|^2 / ||z^alpha||^2)` per basis element; `None` when the term vanishes.
    fn log_terms(&self, x: &[C64]) -> Vec<Option<f64>> {
        let log_abs: Vec<f64> = x.iter().map(|v| v.norm_sqr().ln()).collect();
        self.exponents
            .iter()
            .zip(&self.log_norms)
            .map(|(alpha, ln)| {
                let mut s = -ln;
                for (a, &e) in alpha.iter().enumerate() {
                    if e > 0 {
                        if x[a].norm_sqr() == 0.0 {
                            return None;
                        }
                        s += e as f64 * log_abs[a];
                    }
                }
                Some(s)
            })
            .collect()
    }

    /// `S_m(x) = sum_alpha |x^alpha|^2 / ||z^alpha||^2` with compensated summation
    /// in the fixed exponent order.
    pub fn szego_value(&self, x: &[C64]) -> f64 {
        let terms = self.log_terms(x);
        compensated_sum(terms.into_iter().flatten().map(f64::exp))
    }

    /// Euclidean gradient of `S_m` in `C^{n+1} = R^{2n+2}`, written as the
    /// complex vector `2 dS/dzbar_a`.
    pub fn szego_gradient(&self, x: &[C64]) -> Vec<C64> {
        let terms = self.log_terms(x);
        (0..x.len())
            .map(|a| {
                if x[a].norm_sqr() == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let s = compensated_sum(
                    self.exponents
                        .iter()
                        .zip(&terms)
                        .filter_map(|(alpha, t)| t.map(|t| alpha[a] as f64 * t.exp())),
                );
                x[a] * (2.0 * s / x[a].norm_sqr())
            })
            .collect()
    }
}

/// All `alpha` with `sum_a p_a alpha_a = m`, first coordinate descending.
pub fn enumerate_exponents(weights: &[u32], m: u64) -> Vec<Vec<u32>> {
    fn rec(weights: &[u32], rem: u64, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let a = prefix.len();
        let p = weights[a] as u64;
        if a + 1 == weights.len() {
            if rem % p == 0 {
                prefix.push((rem / p) as u32);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for e in (0..=rem / p).rev() {
            prefix.push(e as u32);
            rec(weights, rem - e * p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(weights, m, &mut Vec::with_capacity(weights.len()), &mut out);
    out
}

impl WeightedSphere {
    /// Basis of weight-`m` CR functions with norms for the sphere's volume form.
    pub fn monomial_norms(&self, m: u64) -> Result<MonomialBasis> {
        let exponents = enumerate_exponents(&self.weights, m);
        let n = self.n;
        match self.preset {
            MetricPreset::AmbientRound => {
                let top = exponents.iter().map(|a| a.iter().sum::<u32>() as usize).max().unwrap_or(0);
                let lf = log_factorials(top + n + 1);
                let c = (2.0 * std::f64::consts::PI.powi(n as i32 + 1)).ln();
                let log_norms = self.exec.map(&exponents, |alpha| {
                    let s: usize = alpha.iter().map(|&e| e as usize).sum();
                    c + alpha.iter().map(|&e| lf[e as usize]).sum::<f64>() - lf[n + s]
                });
                Ok(MonomialBasis { m, exponents, log_norms, rule_order: 0 })
            }
            MetricPreset::Levi => {
                let top = exponents.iter().map(|a| a.iter().sum::<u32>() as usize).max().unwrap_or(0);
                let mut order = 64.max(top / 2 + n + 32);
                let mut coarse = self.levi_log_norms(&exponents, order);
                loop {
                    let fine_order = 2 * order;
                    let fine = self.levi_log_norms(&exponents, fine_order);
                    let change = coarse
                        .iter()
                        .zip(&fine)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if change <= NORM_TOL {
                        return Ok(MonomialBasis { m, exponents, log_norms: fine, rule_order: fine_order });
                    }
                    if 2 * fine_order > max_rule_order(self.n) {
                        return Err(Error::Quadrature { change, order: fine_order });
                    }
                    order = fine_order;
                    coarse = fine;
                }
            }
        }
    }

    /// `ln ||z^alpha||^2 = ln(2 pi int_simplex t^alpha P(t)^{-(n+1)} dt)`
    /// with `P = sum p_a t_a`.
    fn levi_log_norms(&self, exponents: &[Vec<u32>], order: usize) -> Vec<f64> {
        let rule = SimplexRule::new(self.n, order);
        let np1 = (self.n + 1) as f64;
        let log_p: Vec<f64> = rule
            .log_t
            .iter()
            .map(|lt| {
                lt.iter().zip(&self.weights).map(|(l, &p)| p as f64 * l.exp()).sum::<f64>().ln()
            })
            .collect();
        let c = (2.0 * std::f64::consts::PI).ln();
        self.exec.map(exponents, |alpha| {
            let vals: Vec<f64> = rule
                .log_t
                .iter()
                .zip(&rule.log_w)
                .zip(&log_p)
                .map(|((lt, lw), lp)| {
                    let mut s = lw - np1 * lp;
                    for (e, l) in alpha.iter().zip(lt) {
                        if *e > 0 {
                            s += *e as f64 * l;
                        }
                    }
                    s
                })
                .collect();
            c + super::quadrature::log_sum_exp(&vals)
        })
    }

    /// `S_m(x)`; builds the basis for `m`.
    pub fn szego_value(&self, m: u64, x: &[C64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.monomial_norms(m)?.szego_value(x))
    }

    pub fn szego_gradient(&self, m: u64, x: &[C64]) -> Result<Vec<C64>> {
        self.check_point(x)?;
        Ok(self.monomial_norms(m)?.szego_gradient(x))
    }

    /// Volume of the sphere for the preset volume form.
    pub fn volume(&self) -> Result<f64> {
        Ok(self.monomial_norms(0)?.log_norms[0].exp())
    }
}
