//! Truncated multivariate Taylor arithmetic in `n` complex variables.
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar field at a base point
//! in the independent Wirtinger variables `z_1..z_n, zbar_1..zbar_n`. The
//! coefficient of `dz^alpha dzbar^beta` is `d^alpha_z d^beta_zbar f / (alpha! beta!)`.
//! Coefficients live in a dense array indexed by a graded ranking of the
//! exponent pairs; the ranking and the product table are shared through the
//! [`JetContext`].

mod expr;
mod matrix;
mod solve;

pub use expr::{Expr, Sym};
pub use matrix::JetMatrix;
pub use solve::{invert_holomorphic_map, newton_jet_solve, newton_jet_solve_fn, newton_jet_solve_in};

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest number of complex variables supported by the dense tables.
pub const MAX_PAIRS: usize = 3;

struct Tables {
    n_pairs: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    /// `count_upto[d]` = number of monomials of total degree `<= d`.
    count_upto: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// `mul[i][j]` = index of `exps[i] + exps[j]`, for `j < count_upto[order - degree[i]]`.
    mul: Vec<Vec<u32>>,
    conj_perm: Vec<u32>,
    /// Per variable: `(src, dst, exponent of the variable in src)`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    /// `(parent, var)` with `exps[i] = exps[parent] + e_var`; unused for the constant.
    parent: Vec<(u32, u8)>,
    factorial_weight: Vec<f64>,
}

/// Shared shape data for jets: number of complex variables and retained order.
#[derive(Clone)]
pub struct JetContext {
    t: Arc<Tables>,
}

impl fmt::Debug for JetContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetContext(n_pairs={}, order={})", self.t.n_pairs, self.t.order)
    }
}

impl PartialEq for JetContext {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.t, &other.t)
            || (self.t.n_pairs == other.t.n_pairs && self.t.order == other.t.order)
    }
}

fn enumerate(nvars: usize, degree: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == nvars - 1 {
        prefix.push(degree as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=degree).rev() {
        prefix.push(e as u8);
        enumerate(nvars, degree - e, prefix, out);
        prefix.pop();
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl JetContext {
    pub fn new(n_pairs: usize, order: usize) -> Result<Self> {
        if n_pairs == 0 || n_pairs > MAX_PAIRS {
            return Err(Error::Unsupported(format!(
                "jets in {n_pairs} complex variables (supported: 1..={MAX_PAIRS})"
            )));
        }
        if order == 0 || order > 12 {
            return Err(Error::Unsupported(format!("jet order {order} (supported: 1..=12)")));
        }
        let nvars = 2 * n_pairs;
        let mut exps = Vec::new();
        let mut count_upto = Vec::with_capacity(order + 1);
        for d in 0..=order {
            enumerate(nvars, d, &mut Vec::with_capacity(nvars), &mut exps);
            count_upto.push(exps.len());
        }
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut mul = Vec::with_capacity(exps.len());
        for (i, ei) in exps.iter().enumerate() {
            let room = order - degree[i];
            let row: Vec<u32> = exps[..count_upto[room]]
                .iter()
                .map(|ej| {
                    let s: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                    index[&s] as u32
                })
                .collect();
            mul.push(row);
        }

        let conj_perm = exps
            .iter()
            .map(|e| {
                let mut s = e[n_pairs..].to_vec();
                s.extend_from_slice(&e[..n_pairs]);
                index[&s] as u32
            })
            .collect();

        let mut deriv = vec![Vec::new(); nvars];
        for (i, e) in exps.iter().enumerate() {
            for v in 0..nvars {
                if e[v] > 0 {
                    let mut s = e.clone();
                    s[v] -= 1;
                    deriv[v].push((i as u32, index[&s] as u32, e[v] as f64));
                }
            }
        }

        let parent = exps
            .iter()
            .map(|e| match e.iter().position(|&x| x > 0) {
                None => (0, 0),
                Some(v) => {
                    let mut s = e.clone();
                    s[v] -= 1;
                    (index[&s] as u32, v as u8)
                }
            })
            .collect();

        let factorial_weight = exps
            .iter()
            .map(|e| e.iter().map(|&x| factorial(x as usize)).product())
            .collect();

        Ok(Self {
            t: Arc::new(Tables {
                n_pairs,
                order,
                exps,
                degree,
                count_upto,
                index,
                mul,
                conj_perm,
                deriv,
                parent,
                factorial_weight,
            }),
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.t.n_pairs
    }

    pub fn order(&self) -> usize {
        self.t.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.t.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn index_of(&self, alpha: &[usize], beta: &[usize]) -> Option<usize> {
        let n = self.t.n_pairs;
        if alpha.len() != n || beta.len() != n {
            return None;
        }
        let key: Vec<u8> = alpha.iter().chain(beta).map(|&x| x as u8).collect();
        self.t.index.get(&key).copied()
    }

    /// Iterates `(alpha, beta)` exponent pairs in storage order.
    pub fn monomials(&self) -> impl Iterator<Item = (&[u8], &[u8])> + '_ {
        let n = self.t.n_pairs;
        self.t.exps.iter().map(move |e| (&e[..n], &e[n..]))
    }
}

/// Truncated Taylor expansion of a scalar field at a base point.
#[derive(Clone)]
pub struct Jet {
    ctx: JetContext,
    order: usize,
    coeffs: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .ctx
            .t
            .exps
            .iter()
            .zip(&self.coeffs)
            .take(self.ctx.t.count_upto[self.order])
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(e, c)| format!("{e:?}:{c}"))
            .collect();
        write!(f, "Jet(order={}, [{}])", self.order, terms.join(", "))
    }
}

impl Jet {
    pub fn zero(ctx: &JetContext) -> Self {
        Self { ctx: ctx.clone(), order: ctx.order(), coeffs: vec![C64::new(0.0, 0.0); ctx.len()] }
    }

    pub fn constant(ctx: &JetContext, c: C64) -> Self {
        let mut j = Self::zero(ctx);
        j.coeffs[0] = c;
        j
    }

    pub fn real(ctx: &JetContext, c: f64) -> Self {
        Self::constant(ctx, C64::new(c, 0.0))
    }

    /// The coordinate `z_j` expanded at `base`.
    pub fn variable(ctx: &JetContext, j: usize, base: C64) -> Self {
        let n = ctx.n_pairs();
        assert!(j < n, "variable index {j} out of range for {n} pairs");
        let mut alpha = vec![0; n];
        alpha[j] = 1;
        let mut out = Self::constant(ctx, base);
        let idx = ctx.index_of(&alpha, &vec![0; n]).expect("degree-one monomial");
        out.coeffs[idx] = C64::new(1.0, 0.0);
        out
    }

    /// The coordinates `z_1..z_n` expanded at `base`.
    pub fn variables(ctx: &JetContext, base: &[C64]) -> Vec<Self> {
        base.iter().enumerate().map(|(j, &b)| Self::variable(ctx, j, b)).collect()
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    /// Highest total degree whose coefficients are valid.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs[..self.ctx.t.count_upto[self.order]]
    }

    fn active(&self) -> usize {
        self.ctx.t.count_upto[self.order]
    }

    /// Taylor coefficient of `dz^alpha dzbar^beta`.
    pub fn coeff(&self, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        let requested = alpha.iter().chain(beta).sum::<usize>();
        if requested > self.order {
            return Err(Error::OrderExceeded { requested, order: self.order });
        }
        let idx = self
            .ctx
            .index_of(alpha, beta)
            .ok_or_else(|| Error::ContextMismatch("multi-index length".into()))?;
        Ok(self.coeffs[idx])
    }

    /// `d^alpha_z d^beta_zbar f` at the base point.
    pub fn wirtinger(&self, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        let c = self.coeff(alpha, beta)?;
        let w: f64 = alpha.iter().chain(beta).map(|&k| factorial(k)).product();
        Ok(c * w)
    }

    /// Mixed second derivative `d_j d_kbar f` at the base point.
    pub fn d2(&self, j: usize, k: usize) -> Result<C64> {
        let n = self.ctx.n_pairs();
        let mut a = vec![0; n];
        let mut b = vec![0; n];
        a[j] += 1;
        b[k] += 1;
        self.wirtinger(&a, &b)
    }

    /// Drops all coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut out = self.clone();
        out.order = order;
        for c in out.coeffs[self.ctx.t.count_upto[order]..].iter_mut() {
            *c = C64::new(0.0, 0.0);
        }
        out
    }

    fn check(&self, other: &Jet) {
        assert!(
            self.ctx == other.ctx,
            "jets from different contexts combined: {:?} vs {:?}",
            self.ctx,
            other.ctx
        );
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        let a = self.active();
        for c in out.coeffs[..a].iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add_const(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero(&self.ctx);
        out.order = self.order;
        for i in 0..self.active() {
            out.coeffs[self.ctx.t.conj_perm[i] as usize] = self.coeffs[i].conj();
        }
        out
    }

    /// Real part of the represented field, `(f + conj f) / 2`.
    pub fn re(&self) -> Self {
        (self + &self.conj()).scale_re(0.5)
    }

    /// Imaginary part of the represented field, `(f - conj f) / 2i`.
    pub fn im(&self) -> Self {
        (self - &self.conj()).scale(C64::new(0.0, -0.5))
    }

    /// Largest absolute deviation from the conjugate-symmetry law of real fields.
    pub fn reality_defect(&self) -> f64 {
        (self - &self.conj()).max_abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude at total degree `>= from_degree`.
    pub fn max_abs_from(&self, from_degree: usize) -> f64 {
        let start = if from_degree == 0 { 0 } else { self.ctx.t.count_upto[from_degree - 1] };
        self.coeffs[start..self.active()].iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Partial derivative with respect to storage variable `v`
    /// (`0..n` are `z_j`, `n..2n` are `zbar_j`). The order drops by one.
    fn deriv_var(&self, v: usize) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::OrderExceeded { requested: 1, order: 0 });
        }
        let mut out = Self::zero(&self.ctx);
        out.order = self.order - 1;
        let limit = self.active();
        for &(src, dst, f) in &self.ctx.t.deriv[v] {
            if (src as usize) < limit {
                out.coeffs[dst as usize] += self.coeffs[src as usize] * f;
            }
        }
        Ok(out)
    }

    /// `d f / d z_j` as a jet.
    pub fn dz(&self, j: usize) -> Result<Self> {
        self.deriv_var(j)
    }

    /// `d f / d zbar_j` as a jet.
    pub fn dzb(&self, j: usize) -> Result<Self> {
        self.deriv_var(self.ctx.n_pairs() + j)
    }

    /// Mixed Hessian `d_j d_kbar f` as jets.
    pub fn levi_hessian(&self) -> Result<JetMatrix> {
        let n = self.ctx.n_pairs();
        let mut entries = Vec::with_capacity(n * n);
        let dz: Vec<Jet> = (0..n).map(|j| self.dz(j)).collect::<Result<_>>()?;
        for dj in &dz {
            for k in 0..n {
                entries.push(dj.dzb(k)?);
            }
        }
        Ok(JetMatrix::from_entries(n, entries))
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        self.check(other);
        let order = self.order.min(other.order);
        let t = &self.ctx.t;
        let mut out = Jet::zero(&self.ctx);
        out.order = order;
        for i in 0..t.count_upto[order] {
            let a = self.coeffs[i];
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let room = t.count_upto[order - t.degree[i]];
            let row = &t.mul[i];
            for j in 0..room {
                out.coeffs[row[j] as usize] += a * other.coeffs[j];
            }
        }
        out
    }

    /// Composes with a univariate function given its Taylor coefficients at
    /// the constant term: `sum_k taylor[k] (f - f(0))^k`.
    pub fn compose_univariate(&self, taylor: &[C64]) -> Self {
        let mut nil = self.clone();
        nil.coeffs[0] = C64::new(0.0, 0.0);
        let top = self.order.min(taylor.len().saturating_sub(1));
        let mut acc = Jet::constant(&self.ctx, taylor[top]);
        acc.order = self.order;
        for k in (0..top).rev() {
            acc = acc.mul_jet(&nil).add_const(taylor[k]);
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let taylor: Vec<C64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose_univariate(&taylor)
    }

    pub fn ln(&self) -> Result<Self> {
        let a0 = self.value();
        if a0.norm() == 0.0 {
            return Err(Error::SingularArgument("log argument"));
        }
        let mut taylor = vec![a0.ln()];
        let mut p = C64::new(1.0, 0.0);
        for k in 1..=self.order {
            p /= a0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            taylor.push(p * (sign / k as f64));
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn recip(&self) -> Result<Self> {
        let a0 = self.value();
        if a0.norm() == 0.0 {
            return Err(Error::DivisionByZeroJet);
        }
        let inv = a0.inv();
        let mut taylor = Vec::with_capacity(self.order + 1);
        let mut p = inv;
        for _ in 0..=self.order {
            taylor.push(p);
            p *= -inv;
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn div(&self, other: &Jet) -> Result<Self> {
        Ok(self.mul_jet(&other.recip()?))
    }

    /// Real power; non-integer exponents require a positive real constant term.
    pub fn powf(&self, r: f64) -> Result<Self> {
        if r.fract() == 0.0 && r.abs() < 1e9 {
            return self.powi(r as i32);
        }
        let a0 = self.value();
        if !(a0.re > 0.0 && a0.im.abs() <= 1e-14 * a0.re) {
            return Err(Error::Domain(format!(
                "non-integer power {r} of a jet with constant term {a0}"
            )));
        }
        let base = a0.re;
        let mut taylor = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        let mut p = base.powf(r);
        for k in 0..=self.order {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
                p /= base;
            }
            taylor.push(C64::new(binom * p, 0.0));
        }
        Ok(self.compose_univariate(&taylor))
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    pub fn powi(&self, k: i32) -> Result<Self> {
        if k < 0 {
            return self.recip()?.powi(-k);
        }
        let mut result = Jet::real(&self.ctx, 1.0);
        result.order = self.order;
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Ok(result)
    }

    /// Substitutes `z_j -> z_j(base) + disp[j]`, where each displacement jet
    /// has zero constant term. The conjugate variables receive `conj(disp[j])`.
    /// The result lives in the displacement jets' context.
    pub fn compose(&self, disp: &[Jet]) -> Result<Jet> {
        let n = self.ctx.n_pairs();
        if disp.len() != n {
            return Err(Error::ContextMismatch(format!(
                "compose: {} displacement jets for {n} variables",
                disp.len()
            )));
        }
        let target = disp[0].ctx.clone();
        for d in disp {
            if d.ctx != target {
                return Err(Error::ContextMismatch("compose: displacement contexts differ".into()));
            }
            if d.value().norm() > 1e-12 * (1.0 + d.max_abs()) {
                return Err(Error::Domain("compose: displacement with nonzero constant term".into()));
            }
        }
        let mut vars: Vec<Jet> = disp.iter().map(|d| {
            let mut d = d.clone();
            d.coeffs[0] = C64::new(0.0, 0.0);
            d
        }).collect();
        let conj: Vec<Jet> = vars.iter().map(|d| d.conj()).collect();
        vars.extend(conj);
        let order = vars.iter().map(|v| v.order).min().unwrap_or(0).min(target.order());
        let t = &self.ctx.t;
        let limit = t.count_upto[self.order.min(order)];
        let mut powers: Vec<Jet> = Vec::with_capacity(limit);
        let mut one = Jet::real(&target, 1.0);
        one.order = order;
        let mut out = Jet::zero(&target);
        out.order = order;
        for i in 0..limit {
            let p = if i == 0 {
                one.clone()
            } else {
                let (parent, v) = t.parent[i];
                powers[parent as usize].mul_jet(&vars[v as usize])
            };
            let c = self.coeffs[i];
            if c.re != 0.0 || c.im != 0.0 {
                for (o, x) in out.coeffs.iter_mut().zip(&p.coeffs) {
                    *o += c * x;
                }
            }
            powers.push(p);
        }
        Ok(out)
    }

    /// Evaluates the Taylor polynomial at a displacement `(dz, conj dz)`.
    pub fn eval_polynomial(&self, dz: &[C64]) -> C64 {
        let n = self.ctx.n_pairs();
        let t = &self.ctx.t;
        let mut sum = C64::new(0.0, 0.0);
        for i in 0..self.active() {
            let e = &t.exps[i];
            let mut term = self.coeffs[i];
            for j in 0..n {
                if e[j] > 0 {
                    term *= dz[j].powu(e[j] as u32);
                }
                if e[n + j] > 0 {
                    term *= dz[j].conj().powu(e[n + j] as u32);
                }
            }
            sum += term;
        }
        sum
    }

    /// Derivative values `coeff * alpha! * beta!` in storage order.
    pub fn derivatives(&self) -> Vec<C64> {
        self.coeffs()
            .iter()
            .zip(&self.ctx.t.factorial_weight)
            .map(|(c, w)| c * w)
            .collect()
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check(rhs);
        let order = self.order.min(rhs.order);
        let mut out = self.truncate(order);
        let a = out.active();
        for (o, r) in out.coeffs[..a].iter_mut().zip(&rhs.coeffs) {
            *o += r;
        }
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check(rhs);
        let order = self.order.min(rhs.order);
        let mut out = self.truncate(order);
        let a = out.active();
        for (o, r) in out.coeffs[..a].iter_mut().zip(&rhs.coeffs) {
            *o -= r;
        }
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_re(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn half_log_series_at_origin() {
        let ctx = JetContext::new(1, 6).unwrap();
        let w = Jet::variable(&ctx, 0, c(0.0));
        let s = &w * &w.conj();
        let phi = s.add_const(c(1.0)).ln().unwrap().scale_re(0.5);
        assert!((phi.coeff(&[1], &[1]).unwrap() - 0.5).norm() < 1e-15);
        assert!((phi.coeff(&[2], &[2]).unwrap() + 0.25).norm() < 1e-15);
        assert!((phi.wirtinger(&[2], &[2]).unwrap() + 1.0).norm() < 1e-14);
    }

    #[test]
    fn polynomial_wirtinger() {
        let ctx = JetContext::new(1, 4).unwrap();
        let z = Jet::variable(&ctx, 0, C64::new(0.3, -0.7));
        let f = &(&z * &z) * &z.conj();
        assert!((f.wirtinger(&[2], &[1]).unwrap() - 2.0).norm() < 1e-14);
        let g = &z * &z.conj();
        assert!((g.wirtinger(&[1], &[1]).unwrap() - 1.0).norm() < 1e-15);
        assert_eq!(f.wirtinger(&[3], &[2]), Err(Error::OrderExceeded { requested: 5, order: 4 }));
    }

    #[test]
    fn exp_log_roundtrip() {
        let ctx = JetContext::new(2, 6).unwrap();
        let z = Jet::variables(&ctx, &[C64::new(0.1, 0.2), C64::new(-0.3, 0.05)]);
        let a = (&z[0] * &z[1].conj() + &z[1] * &z[1]).add_const(-C64::new(0.1, 0.2) * C64::new(-0.3, -0.05) - C64::new(-0.3, 0.05).powu(2));
        assert!(a.value().norm() < 1e-15);
        let back = a.exp().ln().unwrap();
        assert!((&back - &a).max_abs() < 1e-13);
    }

    #[test]
    fn geometric_series() {
        let ctx = JetContext::new(1, 8).unwrap();
        let s = Jet::variable(&ctx, 0, c(0.0));
        let one_plus = s.add_const(c(1.0));
        let mut geo = Jet::zero(&ctx);
        let mut p = Jet::real(&ctx, 1.0);
        for k in 0..=8 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            geo = &geo + &p.scale_re(sign);
            p = &p * &s;
        }
        let prod = &one_plus * &geo;
        assert!((prod.value() - 1.0).norm() < 1e-15);
        assert!(prod.max_abs_from(1) < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let ctx = JetContext::new(1, 3).unwrap();
        let z = Jet::variable(&ctx, 0, c(0.0));
        assert_eq!(z.ln().unwrap_err(), Error::SingularArgument("log argument"));
        assert_eq!(z.recip().unwrap_err(), Error::DivisionByZeroJet);
        assert!(matches!(z.add_const(c(-1.0)).powf(0.5), Err(Error::Domain(_))));
        assert!(JetContext::new(4, 3).is_err());
    }

    #[test]
    fn derivative_lowers_order() {
        let ctx = JetContext::new(1, 5).unwrap();
        let z = Jet::variable(&ctx, 0, c(0.5));
        let f = (&z * &z.conj()).exp();
        let d = f.dzb(0).unwrap();
        assert_eq!(d.order(), 4);
        // d/dzbar exp(|z|^2) = z exp(|z|^2)
        let expected = &z * &f;
        assert!((&d - &expected).max_abs() < 1e-13);
    }

    #[test]
    fn compose_with_inverse_shift() {
        let ctx = JetContext::new(1, 6).unwrap();
        let z = Jet::variable(&ctx, 0, C64::new(0.2, 0.1));
        let f = (&z * &z.conj()).add_const(c(1.0)).ln().unwrap();
        // substituting the identity displacement is a no-op
        let disp = z.add_const(-C64::new(0.2, 0.1));
        let g = f.compose(&[disp]).unwrap();
        assert!((&g - &f).max_abs() < 1e-14);
    }

    fn poly_strategy() -> impl Strategy<Value = Vec<(u8, u8, u8, u8, f64, f64)>> {
        prop::collection::vec((0u8..3, 0u8..2, 0u8..2, 0u8..2, -1.0f64..1.0, -1.0f64..1.0), 1..6)
    }

    fn build(ctx: &JetContext, z: &[Jet], terms: &[(u8, u8, u8, u8, f64, f64)]) -> Jet {
        let mut acc = Jet::zero(ctx);
        for &(a0, a1, b0, b1, re, im) in terms {
            let t = z[0].powi(a0 as i32).unwrap()
                * z[1].powi(a1 as i32).unwrap()
                * z[0].conj().powi(b0 as i32).unwrap()
                * z[1].conj().powi(b1 as i32).unwrap();
            acc = acc + t.scale(C64::new(re, im));
        }
        acc
    }

    proptest! {
        #[test]
        fn product_rule_matches_leibniz(f in poly_strategy(), g in poly_strategy(),
                                        x in -0.5f64..0.5, y in -0.5f64..0.5) {
            let ctx = JetContext::new(2, 6).unwrap();
            let z = Jet::variables(&ctx, &[C64::new(x, y), C64::new(y, -x)]);
            let fj = build(&ctx, &z, &f);
            let gj = build(&ctx, &z, &g);
            let prod = &fj * &gj;
            // Leibniz: coefficient convolution over all splittings of the multi-index.
            for (alpha, beta) in ctx.monomials() {
                let a: Vec<usize> = alpha.iter().map(|&v| v as usize).collect();
                let b: Vec<usize> = beta.iter().map(|&v| v as usize).collect();
                let mut conv = C64::new(0.0, 0.0);
                for a0 in 0..=a[0] { for a1 in 0..=a[1] { for b0 in 0..=b[0] { for b1 in 0..=b[1] {
                    let l = fj.coeff(&[a0, a1], &[b0, b1]).unwrap();
                    let r = gj.coeff(&[a[0]-a0, a[1]-a1], &[b[0]-b0, b[1]-b1]).unwrap();
                    conv += l * r;
                }}}}
                prop_assert!((prod.coeff(&a, &b).unwrap() - conv).norm() < 1e-12);
            }
        }

        #[test]
        fn real_fields_are_conjugate_symmetric(x in -0.8f64..0.8, y in -0.8f64..0.8, k in 0.1f64..2.0) {
            let ctx = JetContext::new(2, 6).unwrap();
            let z = Jet::variables(&ctx, &[C64::new(x, y), C64::new(0.3 * y, x)]);
            let s = &z[0] * &z[0].conj() + (&z[1] * &z[1].conj()).scale_re(k);
            let f = s.add_const(c(1.0)).ln().unwrap() + s.scale_re(-0.2).exp();
            for (alpha, beta) in ctx.monomials() {
                let a: Vec<usize> = alpha.iter().map(|&v| v as usize).collect();
                let b: Vec<usize> = beta.iter().map(|&v| v as usize).collect();
                let lhs = f.coeff(&a, &b).unwrap();
                let rhs = f.coeff(&b, &a).unwrap().conj();
                prop_assert!((lhs - rhs).norm() < 1e-13 * (1.0 + lhs.norm()));
            }
        }
    }
}
