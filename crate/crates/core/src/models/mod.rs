//! Weighted spheres `S^{2n+1}` with the circle action
//! `e^{i theta} z = (e^{i p_1 theta} z_1, ..., e^{i p_{n+1} theta} z_{n+1})`.

pub mod kernel;
pub mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::brt::{weighted_sphere_chart, BRTChart, MetricGram};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::jet::{Jet, C64};

pub use kernel::{enumerate_exponents, MonomialBasis};

/// Support threshold for period detection.
pub const SUPPORT_EPS: f64 = 1e-10;

/// Rigid metric used for volume forms and the `Theta` quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricPreset {
    /// Levi metric `g / 2 pi`; admissible for every weight vector.
    Levi,
    /// Flat metric of `C^{n+1}` restricted to the sphere; needs unit weights.
    AmbientRound,
}

impl FromStr for MetricPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "levi" => Ok(Self::Levi),
            "round" | "ambient-round" | "ambient_round" => Ok(Self::AmbientRound),
            other => Err(Error::Config(format!("unknown metric preset `{other}`"))),
        }
    }
}

impl fmt::Display for MetricPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Levi => "levi",
            Self::AmbientRound => "ambient-round",
        })
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn gcd_of(it: impl IntoIterator<Item = u64>) -> u64 {
    it.into_iter().fold(0, gcd)
}

#[derive(Clone, Debug)]
pub struct WeightedSphere {
    pub n: usize,
    pub weights: Vec<u32>,
    pub preset: MetricPreset,
    pub exec: Exec,
}

/// Period data of the action.
#[derive(Clone, Debug, PartialEq)]
pub struct StratumInfo {
    /// Distinct period denominators `p_1 < ... < p_t`.
    pub p_list: Vec<u64>,
}

/// A point of the sphere in a canonical chart.
#[derive(Clone, Debug)]
pub struct ChartPoint {
    pub chart: BRTChart,
    pub w: Vec<C64>,
    pub theta: f64,
    pub pivot: usize,
}

impl WeightedSphere {
    pub fn new(weights: Vec<u32>, preset: MetricPreset) -> Result<Self> {
        if weights.len() < 2 || weights.len() > crate::jet::MAX_PAIRS + 1 {
            return Err(Error::Model(format!(
                "weighted spheres need 2..={} weights, got {}",
                crate::jet::MAX_PAIRS + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|&p| p == 0) {
            return Err(Error::Model("weights must be positive".into()));
        }
        if gcd_of(weights.iter().map(|&p| p as u64)) != 1 {
            return Err(Error::Model(format!("weights {weights:?} must have gcd 1")));
        }
        if preset == MetricPreset::AmbientRound && weights.iter().any(|&p| p != 1) {
            return Err(Error::Model(
                "the ambient-round metric needs unit weights (otherwise <T|T> != 1)".into(),
            ));
        }
        Ok(Self { n: weights.len() - 1, weights, preset, exec: Exec::default() })
    }

    pub fn round(n: usize) -> Self {
        Self::new(vec![1; n + 1], MetricPreset::AmbientRound).expect("unit weights are valid")
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn check_point(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.n + 1 {
            return Err(Error::Domain(format!("point needs {} coordinates", self.n + 1)));
        }
        let r: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if (r - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("point is not on the unit sphere (|z| = {r})")));
        }
        Ok(())
    }

    /// `e^{i theta} x`.
    pub fn act(&self, theta: f64, x: &[C64]) -> Vec<C64> {
        x.iter()
            .zip(&self.weights)
            .map(|(v, &p)| v * C64::from_polar(1.0, p as f64 * theta))
            .collect()
    }

    pub fn support(&self, x: &[C64]) -> Vec<usize> {
        (0..x.len()).filter(|&a| x[a].norm() > SUPPORT_EPS).collect()
    }

    /// `q` with period `2 pi / q`: the gcd of the weights on the support.
    pub fn period_denominator(&self, x: &[C64]) -> u64 {
        gcd_of(self.support(x).into_iter().map(|a| self.weights[a] as u64))
    }

    pub fn period(&self, x: &[C64]) -> f64 {
        2.0 * PI / self.period_denominator(x) as f64
    }

    fn subset_gcds(&self) -> Vec<(u32, u64)> {
        let k = self.weights.len();
        (1u32..(1 << k))
            .map(|mask| {
                let g = gcd_of((0..k).filter(|a| mask >> a & 1 == 1).map(|a| self.weights[a] as u64));
                (mask, g)
            })
            .collect()
    }

    pub fn strata(&self) -> StratumInfo {
        let mut p: Vec<u64> = self.subset_gcds().into_iter().map(|(_, g)| g).collect();
        p.sort_unstable();
        p.dedup();
        StratumInfo { p_list: p }
    }

    /// Index `r` (zero-based) with `x in X_{p_r}`.
    pub fn stratum_of(&self, x: &[C64]) -> usize {
        let q = self.period_denominator(x);
        self.strata().p_list.iter().position(|&p| p == q).expect("period is a subset gcd")
    }

    /// Whether `x` lies in the closure of `X^r_sing = union_{j > r} X_{p_j}`.
    pub fn in_singular_closure(&self, x: &[C64], r: usize) -> bool {
        let pr = self.strata().p_list[r];
        let supp = self.support(x);
        self.subset_gcds()
            .into_iter()
            .any(|(mask, g)| g > pr && supp.iter().all(|&a| mask >> a & 1 == 1))
    }

    /// Round great-circle distance from `x` to `X^r_sing`; zero when that set is empty.
    pub fn distance_to_stratum(&self, x: &[C64], r: usize) -> f64 {
        let pr = self.strata().p_list[r];
        let mut best: Option<f64> = None;
        for (mask, g) in self.subset_gcds() {
            if g <= pr {
                continue;
            }
            let proj: f64 = (0..x.len())
                .filter(|a| mask >> a & 1 == 1)
                .map(|a| x[a].norm_sqr())
                .sum::<f64>()
                .sqrt();
            let d = proj.clamp(-1.0, 1.0).acos();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
        best.unwrap_or(0.0)
    }

    /// Upper end of the admissible window for `delta`.
    pub fn delta_bound(&self) -> f64 {
        let p = self.strata().p_list;
        let t = p.len();
        let mut bound = PI / p[t - 1] as f64;
        for w in p.windows(2) {
            bound = bound.min((2.0 * PI / w[0] as f64 - 2.0 * PI / w[1] as f64).abs());
        }
        bound
    }

    /// `inf { d(x, e^{-i theta} x) : delta <= theta <= 2 pi / p_r - delta }` with
    /// the round distance; grid search refined by golden-section minimization.
    pub fn d_hat(&self, x: &[C64], r: usize, delta: f64) -> Result<f64> {
        let bound = self.delta_bound();
        if !(delta > 0.0 && delta < bound) {
            return Err(Error::InvalidDelta { delta, bound });
        }
        let p = self.strata().p_list;
        if r + 1 >= p.len() {
            return Ok(0.0);
        }
        let hi = 2.0 * PI / p[r] as f64 - delta;
        let lo = delta;
        let mass: Vec<(f64, f64)> = x.iter().zip(&self.weights).map(|(v, &w)| (v.norm_sqr(), w as f64)).collect();
        let f = |th: f64| -> f64 {
            let c: f64 = mass.iter().map(|(m, w)| m * (w * th).cos()).sum();
            c.clamp(-1.0, 1.0).acos()
        };
        let steps = 2000;
        let h = (hi - lo) / steps as f64;
        let (mut best_i, mut best) = (0usize, f64::INFINITY);
        for i in 0..=steps {
            let v = f(lo + h * i as f64);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        let (mut a, mut b) = ((lo + h * (best_i as f64 - 1.0)).max(lo), (lo + h * (best_i as f64 + 1.0)).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        Ok(best.min(f(0.5 * (a + b))))
    }

    fn gram(&self, pivot: usize) -> MetricGram {
        match self.preset {
            MetricPreset::Levi => MetricGram::Levi,
            MetricPreset::AmbientRound => MetricGram::AmbientRound { weights: self.weights.clone(), pivot },
        }
    }

    /// Canonical chart around `x`, with the pivot at the largest coordinate.
    pub fn brt_chart_at(&self, x: &[C64]) -> Result<ChartPoint> {
        self.check_point(x)?;
        let pivot = (0..x.len())
            .max_by(|&a, &b| x[a].norm().total_cmp(&x[b].norm()))
            .expect("nonempty point");
        self.chart_with_pivot(x, pivot)
    }

    /// Canonical chart around `x` eliminating coordinate `pivot`.
    pub fn chart_with_pivot(&self, x: &[C64], pivot: usize) -> Result<ChartPoint> {
        self.check_point(x)?;
        let zk = x[pivot];
        if zk.norm() < 1e-8 {
            return Err(Error::Domain("pivot coordinate vanishes at the point".into()));
        }
        let pk = self.weights[pivot] as f64;
        let theta = zk.arg() / pk;
        let phi = -zk.norm().ln() / pk;
        let w: Vec<C64> = (0..x.len())
            .filter(|&a| a != pivot)
            .map(|a| {
                let p = self.weights[a] as f64;
                x[a] * C64::from_polar((p * phi).exp(), -p * theta)
            })
            .collect();
        let chart = weighted_sphere_chart(&self.weights, pivot, self.gram(pivot))?;
        Ok(ChartPoint { chart, w, theta, pivot })
    }

    /// Ambient point of chart coordinates `(w, theta)` for `pivot`.
    pub fn embed(&self, pivot: usize, w: &[C64], theta: f64) -> Result<Vec<C64>> {
        let chart = weighted_sphere_chart(&self.weights, pivot, MetricGram::Levi)?;
        let phi = chart.local_jets(w, 2)?.phi.value().re;
        let mut out = Vec::with_capacity(self.n + 1);
        let mut j = 0;
        for (a, &p) in self.weights.iter().enumerate() {
            let p = p as f64;
            let rot = C64::from_polar((-p * phi).exp(), p * theta);
            if a == pivot {
                out.push(rot);
            } else {
                out.push(w[j] * rot);
                j += 1;
            }
        }
        Ok(out)
    }

    /// Worst value of `Z_j conj(z_a)` over frames and ambient coordinates at
    /// chart point `w`: the frames are tangent of type (1,0) iff this vanishes.
    pub fn tangency_residual(&self, pivot: usize, w: &[C64]) -> Result<f64> {
        let chart = weighted_sphere_chart(&self.weights, pivot, MetricGram::Levi)?;
        let phi = chart.local_jets(w, 3)?.phi;
        let ctx = phi.context().clone();
        let vars = Jet::variables(&ctx, w);
        let mut worst = 0.0f64;
        let mut j = 0;
        for (a, &p) in self.weights.iter().enumerate() {
            let e = phi.scale_re(-(p as f64)).exp();
            let za = if a == pivot {
                e
            } else {
                j += 1;
                &vars[j - 1] * &e
            };
            let zb = za.conj();
            for k in 0..self.n {
                let r = zb.dz(k)? + (&phi.dz(k)? * &zb).scale_re(p as f64);
                worst = worst.max(r.value().norm());
            }
        }
        Ok(worst)
    }

    /// Density of the preset volume form against the round measure on the sphere.
    pub fn volume_density(&self, x: &[C64]) -> f64 {
        match self.preset {
            MetricPreset::AmbientRound => 1.0,
            MetricPreset::Levi => {
                let p: f64 = x.iter().zip(&self.weights).map(|(v, &w)| w as f64 * v.norm_sqr()).sum();
                PI.powi(-(self.n as i32)) * p.powi(-(self.n as i32 + 1))
            }
        }
    }

    /// A unit vector with the given moduli `|z_a|` and phases.
    pub fn point_from_moduli(moduli: &[f64], phases: &[f64]) -> Vec<C64> {
        let r: f64 = moduli.iter().map(|m| m * m).sum::<f64>().sqrt();
        moduli
            .iter()
            .zip(phases.iter().chain(std::iter::repeat(&0.0)))
            .map(|(m, ph)| C64::from_polar(m / r, *ph))
            .collect()
    }
}
