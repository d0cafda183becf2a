//! Canonical coordinate charts `(z, theta)` for CR manifolds with a transversal
//! circle action.
//!
//! In a chart the circle generator is `T = d/dtheta`, the CR frames are
//! `Z_j = d/dz_j + i (d phi / dz_j) d/dtheta` and the contact form is
//! `omega0 = -dtheta + i d phi - i dbar phi`, for a real potential `phi(z)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::{invert_holomorphic_map, newton_jet_solve_in, Expr, Jet, JetContext, JetMatrix, Sym, C64};
use crate::linalg::{self, CMat};

/// How the potential is specified.
#[derive(Clone, Debug)]
pub enum Potential {
    /// `phi` as an expression in `z, zbar`.
    Explicit(Expr),
    /// `phi = u` where `equation(z, zbar, u) = 0`, solved by Newton from `seed`.
    Implicit { equation: Expr, seed: f64 },
}

/// The rigid Hermitian metric on the CR frames, `H_jk = <Z_j | Z_k>`.
#[derive(Clone, Debug)]
pub enum MetricGram {
    /// `H = g / 2 pi`.
    Levi,
    /// Explicit Hermitian field, row-major expressions.
    Explicit(Vec<Vec<Expr>>),
    /// Restriction of the flat metric of `C^{n+1}` to a weighted sphere chart
    /// (see [`weighted_sphere_chart`]); `pivot` is the ambient coordinate
    /// eliminated by the chart.
    AmbientRound { weights: Vec<u32>, pivot: usize },
}

/// Holomorphic change of chart coordinates `w = map(z)`.
///
/// The optional holomorphic `shift = F(z)` records a potential change
/// `phi_B(map(z)) = phi_A(z) + Re F(z)` with `gamma = theta - Im F(z)`.
#[derive(Clone, Debug)]
pub struct Transition {
    pub map: Vec<Expr>,
    pub shift: Option<Expr>,
}

impl Transition {
    pub fn new(map: Vec<Expr>) -> Self {
        Self { map, shift: None }
    }

    pub fn with_shift(mut self, shift: Expr) -> Self {
        self.shift = Some(shift);
        self
    }

    /// Largest `dbar` derivative of the map components at `z` over all
    /// retained orders; zero for holomorphic maps.
    pub fn holomorphy_residual(&self, z: &[C64], order: usize) -> Result<f64> {
        let ctx = JetContext::new(z.len(), order)?;
        let vars = Jet::variables(&ctx, z);
        let mut worst = 0.0f64;
        for m in self.map.iter().chain(self.shift.iter()) {
            let j = m.eval_jet(&vars, None)?;
            for k in 0..z.len() {
                worst = worst.max(j.dzb(k)?.max_abs());
            }
        }
        Ok(worst)
    }

    pub fn apply(&self, z: &[C64]) -> Result<Vec<C64>> {
        let zb: Vec<C64> = z.iter().map(|x| x.conj()).collect();
        self.map.iter().map(|m| m.eval_value(z, &zb, None)).collect()
    }

    /// Holomorphic Jacobian `dw_j / dz_k` at `z`.
    pub fn jacobian(&self, z: &[C64]) -> Result<CMat> {
        let n = z.len();
        let zb: Vec<C64> = z.iter().map(|x| x.conj()).collect();
        let mut out = CMat::zeros(n, n);
        for (j, m) in self.map.iter().enumerate() {
            for k in 0..n {
                out[(j, k)] = m.diff(Sym::Var(k)).eval_value(z, &zb, None)?;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
enum ChartKind {
    Direct { potential: Potential, gram: MetricGram },
    Transformed { inner: Box<BRTChart>, transition: Transition, seed_offset: Vec<C64> },
}

/// A canonical-coordinate chart with potential and rigid metric.
#[derive(Clone, Debug)]
pub struct BRTChart {
    pub n: usize,
    pub label: String,
    /// Polydisc center and radius of the chart domain.
    pub center: Vec<C64>,
    pub radius: f64,
    kind: ChartKind,
}

/// Jets of the chart data at a point.
#[derive(Clone, Debug)]
pub struct LocalJets {
    pub phi: Jet,
    /// Rigid metric Gram field; `None` means the Levi metric `g / 2 pi`.
    pub gram: Option<JetMatrix>,
}

impl LocalJets {
    /// `g = 2 d dbar phi`.
    pub fn levi(&self) -> Result<JetMatrix> {
        Ok(self.phi.levi_hessian()?.map(|x| x.scale_re(2.0)))
    }

    /// The rigid metric Gram field, resolving the Levi default.
    pub fn gram_or_levi(&self) -> Result<JetMatrix> {
        match &self.gram {
            Some(h) => Ok(h.clone()),
            None => Ok(self.levi()?.map(|x| x.scale_re(1.0 / (2.0 * PI)))),
        }
    }
}

/// Coefficients of `omega0` at a point: `omega0 = dtheta_coeff dtheta + sum dz[j] dz_j + sum dzb[j] dzbar_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactData {
    pub dtheta: C64,
    pub dz: Vec<C64>,
    pub dzb: Vec<C64>,
}

/// A tangent vector in chart components `(d/dz, d/dzbar, d/dtheta)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartVector {
    pub dz: Vec<C64>,
    pub dzb: Vec<C64>,
    pub dtheta: C64,
}

impl ContactData {
    pub fn pair(&self, v: &ChartVector) -> C64 {
        let mut s = self.dtheta * v.dtheta;
        for j in 0..self.dz.len() {
            s += self.dz[j] * v.dz[j] + self.dzb[j] * v.dzb[j];
        }
        s
    }
}

impl BRTChart {
    pub fn new(n: usize, label: impl Into<String>, potential: Potential, gram: MetricGram) -> Self {
        Self {
            n,
            label: label.into(),
            center: vec![C64::new(0.0, 0.0); n],
            radius: f64::INFINITY,
            kind: ChartKind::Direct { potential, gram },
        }
    }

    pub fn with_domain(mut self, center: Vec<C64>, radius: f64) -> Self {
        self.center = center;
        self.radius = radius;
        self
    }

    /// Chart with explicit potential and Levi metric.
    pub fn explicit(n: usize, label: &str, phi: &str) -> Result<Self> {
        Ok(Self::new(n, label, Potential::Explicit(Expr::parse(phi)?), MetricGram::Levi))
    }

    /// Flat model `phi = |z|^2`.
    pub fn bargmann_fock(n: usize) -> Self {
        let mut e = Expr::real(0.0);
        for j in 0..n {
            e = Expr::Add(
                Box::new(e),
                Box::new(Expr::Mul(Box::new(Expr::Var(j)), Box::new(Expr::ConjVar(j)))),
            );
        }
        Self::new(n, "bargmann-fock", Potential::Explicit(e), MetricGram::Levi)
    }

    /// Hopf chart of the round sphere `S^{2n+1}`, `phi = log(1 + |w|^2) / 2`.
    pub fn hopf(n: usize) -> Self {
        let mut s = Expr::real(1.0);
        for j in 0..n {
            s = Expr::Add(
                Box::new(s),
                Box::new(Expr::Mul(Box::new(Expr::Var(j)), Box::new(Expr::ConjVar(j)))),
            );
        }
        let phi = Expr::Mul(Box::new(Expr::real(0.5)), Box::new(Expr::Log(Box::new(s))));
        Self::new(n, format!("hopf-s{}", 2 * n + 1), Potential::Explicit(phi), MetricGram::Levi)
    }

    pub fn with_gram(mut self, gram: MetricGram) -> Self {
        if let ChartKind::Direct { gram: g, .. } = &mut self.kind {
            *g = gram;
        }
        self
    }

    /// The chart in new coordinates `w = t.map(z)`. Keeps the domain of `self`;
    /// widen it with `with_domain` when the map enlarges the ball.
    pub fn transformed(&self, t: Transition, label: &str) -> Self {
        let radius = self.radius;
        Self {
            n: self.n,
            label: label.into(),
            center: self.center.clone(),
            radius,
            kind: ChartKind::Transformed {
                inner: Box::new(self.clone()),
                transition: t,
                seed_offset: vec![C64::new(0.0, 0.0); self.n],
            },
        }
    }

    pub fn uses_levi_metric(&self) -> bool {
        match &self.kind {
            ChartKind::Direct { gram, .. } => matches!(gram, MetricGram::Levi),
            ChartKind::Transformed { inner, .. } => inner.uses_levi_metric(),
        }
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        z.len() == self.n && z.iter().zip(&self.center).all(|(a, c)| (a - c).norm() < self.radius)
    }

    fn check_domain(&self, z: &[C64]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Domain(format!(
                "chart {} has {} coordinates, point has {}",
                self.label,
                self.n,
                z.len()
            )));
        }
        if !self.contains(z) {
            return Err(Error::Domain(format!("point outside the domain of chart {}", self.label)));
        }
        Ok(())
    }

    /// Jets of the potential and of the rigid metric at `z`, potential to `order`
    /// and metric to `order - 2`.
    pub fn local_jets(&self, z: &[C64], order: usize) -> Result<LocalJets> {
        self.check_domain(z)?;
        if order < 2 {
            return Err(Error::OrderExceeded { requested: 2, order });
        }
        let ctx = JetContext::new(self.n, order)?;
        match &self.kind {
            ChartKind::Direct { potential, gram } => {
                let vars = Jet::variables(&ctx, z);
                let phi = match potential {
                    Potential::Explicit(e) => e.eval_jet(&vars, None)?,
                    Potential::Implicit { equation, seed } => {
                        newton_jet_solve_in(&vars, equation, C64::new(*seed, 0.0))?
                    }
                };
                let gram = match gram {
                    MetricGram::Levi => None,
                    MetricGram::Explicit(rows) => {
                        let mut entries = Vec::with_capacity(self.n * self.n);
                        for row in rows {
                            for e in row {
                                entries.push(e.eval_jet(&vars, None)?.truncate(order - 2));
                            }
                        }
                        if entries.len() != self.n * self.n {
                            return Err(Error::Config(format!(
                                "gram of chart {} must be {}x{}",
                                self.label, self.n, self.n
                            )));
                        }
                        Some(JetMatrix::from_entries(self.n, entries))
                    }
                    MetricGram::AmbientRound { weights, pivot } => {
                        Some(ambient_round_gram(&vars, &phi, weights, *pivot)?.map(|x| x.truncate(order - 2)))
                    }
                };
                Ok(LocalJets { phi, gram })
            }
            ChartKind::Transformed { inner, transition, seed_offset } => {
                let w = Jet::variables(&ctx, z);
                let seed: Vec<C64> = z.iter().zip(seed_offset).map(|(a, b)| a + b).collect();
                let u = invert_holomorphic_map(&transition.map, &w, &seed)?;
                let u0: Vec<C64> = u.iter().map(|x| x.value()).collect();
                let inner_jets = inner.local_jets(&u0, order)?;
                let disp: Vec<Jet> = u.iter().map(|x| x.add_const(-x.value())).collect();
                let mut phi_a = inner_jets.phi.clone();
                if let Some(f) = &transition.shift {
                    let vars = Jet::variables(&ctx, &u0);
                    phi_a = &phi_a + &f.eval_jet(&vars, None)?.re();
                }
                let phi = phi_a.compose(&disp)?;
                let gram = match &inner_jets.gram {
                    None => None,
                    Some(ha) => {
                        let hc = ha.try_map(|x| x.compose(&disp))?;
                        // K[j][a] = d u_a / d w_j
                        let k: Vec<Vec<Jet>> = (0..self.n)
                            .map(|j| u.iter().map(|ua| ua.dz(j)).collect::<Result<_>>())
                            .collect::<Result<_>>()?;
                        let n = self.n;
                        let entries = (0..n * n)
                            .map(|idx| {
                                let (j, l) = (idx / n, idx % n);
                                let mut acc = Jet::zero(&ctx);
                                for a in 0..n {
                                    for b in 0..n {
                                        acc = acc + &(&k[j][a] * hc.get(a, b)) * &k[l][b].conj();
                                    }
                                }
                                acc.truncate(order - 2)
                            })
                            .collect();
                        Some(JetMatrix::from_entries(n, entries))
                    }
                };
                Ok(LocalJets { phi, gram })
            }
        }
    }

    /// `g = 2 d dbar phi` at `z`; fails if not positive definite.
    pub fn levi_matrix(&self, z: &[C64]) -> Result<CMat> {
        let jets = self.local_jets(z, 2)?;
        let g = jets.levi()?.value();
        linalg::cholesky_lower(&g, &format!("Levi form of chart {}", self.label))?;
        Ok(g)
    }

    /// Volume density `a = det g / pi^n`.
    pub fn levi_density(&self, z: &[C64]) -> Result<f64> {
        let g = self.levi_matrix(z)?;
        Ok(g.determinant().re / PI.powi(self.n as i32))
    }

    /// Closed-form contact form coefficients at `z`.
    pub fn contact_data(&self, z: &[C64]) -> Result<ContactData> {
        let phi = self.local_jets(z, 2)?.phi;
        let i = C64::new(0.0, 1.0);
        let dz = (0..self.n).map(|j| Ok(i * phi.dz(j)?.value())).collect::<Result<_>>()?;
        let dzb = (0..self.n).map(|j| Ok(-i * phi.dzb(j)?.value())).collect::<Result<_>>()?;
        Ok(ContactData { dtheta: C64::new(-1.0, 0.0), dz, dzb })
    }

    /// Frames `Z_j` at `z`.
    pub fn frames(&self, z: &[C64]) -> Result<Vec<ChartVector>> {
        let phi = self.local_jets(z, 2)?.phi;
        let i = C64::new(0.0, 1.0);
        (0..self.n)
            .map(|j| {
                let mut dz = vec![C64::new(0.0, 0.0); self.n];
                dz[j] = C64::new(1.0, 0.0);
                Ok(ChartVector { dz, dzb: vec![C64::new(0.0, 0.0); self.n], dtheta: i * phi.dz(j)?.value() })
            })
            .collect()
    }

    /// Worst violation of `<omega0, Z_j> = 0`, `<omega0, conj Z_j> = 0`, `<omega0, T> = -1`.
    pub fn contact_residual(&self, z: &[C64]) -> Result<f64> {
        let c = self.contact_data(z)?;
        let mut worst = (c.pair(&ChartVector {
            dz: vec![C64::new(0.0, 0.0); self.n],
            dzb: vec![C64::new(0.0, 0.0); self.n],
            dtheta: C64::new(1.0, 0.0),
        }) + 1.0)
            .norm();
        for f in self.frames(z)? {
            worst = worst.max(c.pair(&f).norm());
            let fb = ChartVector {
                dz: f.dzb.iter().map(|x| x.conj()).collect(),
                dzb: f.dz.iter().map(|x| x.conj()).collect(),
                dtheta: f.dtheta.conj(),
            };
            worst = worst.max(c.pair(&fb).norm());
        }
        Ok(worst)
    }
}

/// Flat `C^{n+1}` metric restricted to the CR frames of a weighted sphere chart.
///
/// With `z_a = e^{i p_a theta} w_a e^{-p_a phi}` (and `w_pivot = 1`), the frame
/// derivative is `Z_j z_a = d_{w_j} z_a - p_a phi_j z_a` and
/// `H_jl = 1/2 sum_a (Z_j z_a) conj(Z_l z_a)`.
fn ambient_round_gram(vars: &[Jet], phi: &Jet, weights: &[u32], pivot: usize) -> Result<JetMatrix> {
    let n = vars.len();
    if weights.len() != n + 1 || pivot > n {
        return Err(Error::Model("ambient metric needs n+1 weights and a valid pivot".into()));
    }
    let ctx = phi.context().clone();
    let mut amb = Vec::with_capacity(n + 1);
    let mut j = 0;
    for (a, &p) in weights.iter().enumerate() {
        let e = phi.scale_re(-(p as f64)).exp();
        if a == pivot {
            amb.push((e, p));
        } else {
            amb.push((&vars[j] * &e, p));
            j += 1;
        }
    }
    let dphi: Vec<Jet> = (0..n).map(|j| phi.dz(j)).collect::<Result<_>>()?;
    let mut zz: Vec<Vec<Jet>> = vec![Vec::with_capacity(n + 1); n];
    for (j, row) in zz.iter_mut().enumerate() {
        for (za, p) in &amb {
            row.push(za.dz(j)? - &(&dphi[j] * za).scale_re(*p as f64));
        }
    }
    let mut entries = Vec::with_capacity(n * n);
    for j in 0..n {
        for l in 0..n {
            let mut acc = Jet::zero(&ctx);
            for a in 0..=n {
                acc = acc + &zz[j][a] * &zz[l][a].conj();
            }
            entries.push(acc.scale_re(0.5));
        }
    }
    Ok(JetMatrix::from_entries(n, entries))
}

/// `dbar_b` of `e^{i m theta} u(z)`: the `dzbar_j` coefficients
/// `d u / d zbar_j + m (d phi / d zbar_j) u`, as jets.
pub fn dbar_b(phi: &Jet, m: i64, u: &Jet) -> Result<Vec<Jet>> {
    let n = phi.context().n_pairs();
    (0..n)
        .map(|j| Ok(u.dzb(j)? + (&phi.dzb(j)? * u).scale_re(m as f64)))
        .collect()
}

/// `| a_B(H(z)) |det dH/dz|^2 - a_A(z) |` for `chart_b = chart_a` seen through `t`.
pub fn transition_density_check(t: &Transition, chart_a: &BRTChart, chart_b: &BRTChart, z: &[C64]) -> Result<f64> {
    if !chart_a.contains(z) {
        return Err(Error::OverlapViolation(format!("point not in chart {}", chart_a.label)));
    }
    let w = t.apply(z)?;
    if !chart_b.contains(&w) {
        return Err(Error::OverlapViolation(format!("image point not in chart {}", chart_b.label)));
    }
    let a = chart_a.levi_density(z)?;
    let b = chart_b.levi_density(&w)?;
    let jac = t.jacobian(z)?.determinant().norm_sqr();
    Ok((b * jac - a).abs())
}

/// The chart of a weighted sphere around the locus where coordinate `pivot`
/// dominates: `z_a = e^{i p_a theta} w_a e^{-p_a phi}` for `a != pivot`,
/// `z_pivot = e^{i p_pivot theta} e^{-p_pivot phi}`, with `phi` solving
/// `sum_{a != pivot} |w_a|^2 e^{-2 p_a phi} + e^{-2 p_pivot phi} = 1`.
pub fn weighted_sphere_chart(weights: &[u32], pivot: usize, gram: MetricGram) -> Result<BRTChart> {
    let n = weights.len().checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| {
        Error::Model("a weighted sphere needs at least two weights".into())
    })?;
    if pivot > n {
        return Err(Error::Model(format!("pivot {pivot} out of range")));
    }
    let b = Box::new;
    let expo = |p: u32| Expr::Exp(b(Expr::Mul(b(Expr::real(-2.0 * p as f64)), b(Expr::Unknown))));
    let mut eq = Expr::Sub(b(expo(weights[pivot])), b(Expr::real(1.0)));
    let mut j = 0;
    for (a, &p) in weights.iter().enumerate() {
        if a == pivot {
            continue;
        }
        let term = Expr::Mul(b(Expr::Mul(b(Expr::Var(j)), b(Expr::ConjVar(j)))), b(expo(p)));
        eq = Expr::Add(b(eq), b(term));
        j += 1;
    }
    let label = format!("weighted{:?}-pivot{}", weights, pivot + 1);
    Ok(BRTChart::new(n, label, Potential::Implicit { equation: eq, seed: 0.0 }, gram))
}
