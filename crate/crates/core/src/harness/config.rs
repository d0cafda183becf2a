//! Flat `key = value` experiment configuration.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::jet::C64;
use crate::models::{MetricPreset, WeightedSphere};

pub const CONFIG_HELP: &str = "\
Config file: UTF-8, one `key = value` per line, `#` starts a comment, arrays comma-separated.
  manifold       weighted_sphere (only value)
  model          s3 | s5 | weighted (shorthand; s3/s5 imply unit weights and ambient-round)
  n              CR dimension (checked against weights)
  weights        e.g. 1,2
  metric_preset  levi | ambient-round
  m              list `5,10,20`, range `a:b`, or stepped range `a:step:b`
  N              truncation order 1..=3
  points         stratum | grid | random | explicit
  grid           min,max,count for |z_1| (points = grid)
  samples, seed  per-stratum random samples (points = random)
  point          explicit point `re,im,re,im,...`; may be repeated
  delta          window parameter of d_hat
  csv, svg       output paths
  sequential     true | false
  tol_expansion, tol_doubling, tol_oscillatory_rel, tol_oscillatory_abs";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub weights: Vec<u32>,
    pub preset: MetricPreset,
}

impl ModelSpec {
    pub fn named(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "s3" => Ok(Self { weights: vec![1, 1], preset: MetricPreset::AmbientRound }),
            "s5" => Ok(Self { weights: vec![1, 1, 1], preset: MetricPreset::AmbientRound }),
            "s7" => Ok(Self { weights: vec![1, 1, 1, 1], preset: MetricPreset::AmbientRound }),
            "weighted" => Ok(Self { weights: vec![1, 2], preset: MetricPreset::Levi }),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }

    pub fn sphere(&self, exec: Exec) -> Result<WeightedSphere> {
        Ok(WeightedSphere::new(self.weights.clone(), self.preset)?.with_exec(exec))
    }

    pub fn n(&self) -> usize {
        self.weights.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointSpec {
    /// One point per stratum: equal moduli on a support realizing `p_r`.
    Stratum,
    /// `|z_1|` from `min` to `max`, remaining mass spread evenly.
    Grid { min: f64, max: f64, count: usize },
    /// Random points per stratum.
    Random { samples: usize, seed: u64 },
    Explicit(Vec<Vec<C64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    /// Residual bound relative to `m^n` for exactly polynomial kernels.
    pub expansion: f64,
    /// Doubling deviation at the largest `m`.
    pub doubling: f64,
    pub oscillatory_rel: f64,
    /// Absolute bound for vanishing modes, relative to `m^n`.
    pub oscillatory_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { expansion: 1e-9, doubling: 0.02, oscillatory_rel: 1e-10, oscillatory_abs: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub points: PointSpec,
    pub m_values: Vec<u64>,
    pub truncation: usize,
    pub delta: Option<f64>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::named("s3").expect("builtin"),
            points: PointSpec::Random { samples: 4, seed: 7 },
            m_values: (5..=100).step_by(5).collect(),
            truncation: 3,
            delta: None,
            csv: None,
            svg: None,
            tolerances: Tolerances::default(),
            exec: Exec::default(),
        }
    }
}

pub fn parse_m_range(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad m range `{s}`"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let out: Vec<u64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (a, step, b) = match parts.as_slice() {
            [a, b] => (num(a)?, 1, num(b)?),
            [a, st, b] => (num(a)?, num(st)?, num(b)?),
            _ => return Err(bad()),
        };
        if step == 0 {
            return Err(bad());
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(Error::Config("m range is empty".into()));
    }
    Ok(out)
}

pub fn parse_weights(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| Error::Config(format!("bad weight `{t}`"))))
        .collect()
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_point(v: &str) -> Result<Vec<C64>> {
    let xs: Vec<f64> = v.split(',').map(|t| parse_f64("point", t)).collect::<Result<_>>()?;
    if xs.len() % 2 != 0 || xs.is_empty() {
        return Err(Error::Config("`point` needs re,im pairs".into()));
    }
    Ok(xs.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut weights: Option<Vec<u32>> = None;
        let mut preset: Option<MetricPreset> = None;
        let mut n: Option<usize> = None;
        let mut points_kind: Option<String> = None;
        let mut grid = (0.05, 0.4, 8usize);
        let mut samples = 4usize;
        let mut seed = 7u64;
        let mut explicit = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "manifold" => {
                    if value != "weighted_sphere" {
                        return Err(Error::Config(format!("unsupported manifold `{value}`")));
                    }
                }
                "model" => cfg.model = ModelSpec::named(value)?,
                "n" => n = Some(value.parse().map_err(|_| Error::Config(format!("bad n `{value}`")))?),
                "weights" => weights = Some(parse_weights(value)?),
                "metric_preset" | "metric" => preset = Some(value.parse()?),
                "m" | "m_range" => cfg.m_values = parse_m_range(value)?,
                "N" | "truncation" => {
                    cfg.truncation = value.parse().map_err(|_| Error::Config(format!("bad N `{value}`")))?
                }
                "points" => points_kind = Some(value.to_ascii_lowercase()),
                "grid" => {
                    let g: Vec<&str> = value.split(',').collect();
                    if g.len() != 3 {
                        return Err(Error::Config("`grid` expects min,max,count".into()));
                    }
                    grid = (
                        parse_f64(key, g[0])?,
                        parse_f64(key, g[1])?,
                        g[2].trim().parse().map_err(|_| Error::Config("bad grid count".into()))?,
                    );
                }
                "samples" => samples = value.parse().map_err(|_| Error::Config("bad samples".into()))?,
                "seed" => seed = value.parse().map_err(|_| Error::Config("bad seed".into()))?,
                "point" => explicit.push(parse_point(value)?),
                "delta" => cfg.delta = Some(parse_f64(key, value)?),
                "csv" => cfg.csv = Some(PathBuf::from(value)),
                "svg" => cfg.svg = Some(PathBuf::from(value)),
                "sequential" => {
                    if value.parse::<bool>().map_err(|_| Error::Config("bad bool".into()))? {
                        cfg.exec = Exec::Sequential;
                    }
                }
                "tol_expansion" => cfg.tolerances.expansion = parse_f64(key, value)?,
                "tol_doubling" => cfg.tolerances.doubling = parse_f64(key, value)?,
                "tol_oscillatory_rel" => cfg.tolerances.oscillatory_rel = parse_f64(key, value)?,
                "tol_oscillatory_abs" => cfg.tolerances.oscillatory_abs = parse_f64(key, value)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if let Some(w) = weights {
            cfg.model.weights = w;
            if preset.is_none() {
                cfg.model.preset = MetricPreset::Levi;
            }
        }
        if let Some(p) = preset {
            cfg.model.preset = p;
        }
        if let Some(n) = n {
            if n != cfg.model.n() {
                return Err(Error::Config(format!("n = {n} does not match {} weights", cfg.model.weights.len())));
            }
        }
        cfg.points = match points_kind.as_deref() {
            None if !explicit.is_empty() => PointSpec::Explicit(explicit),
            None => cfg.points,
            Some("stratum") => PointSpec::Stratum,
            Some("grid") => PointSpec::Grid { min: grid.0, max: grid.1, count: grid.2 },
            Some("random") => PointSpec::Random { samples, seed },
            Some("explicit") => PointSpec::Explicit(explicit),
            Some(other) => return Err(Error::Config(format!("unknown point set `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::Config("m range is empty".into()));
        }
        if !(1..=3).contains(&self.truncation) {
            return Err(Error::Config(format!("N = {} must be 1, 2 or 3", self.truncation)));
        }
        let sphere = self.model.sphere(self.exec)?;
        if let Some(d) = self.delta {
            let bound = sphere.delta_bound();
            if !(d > 0.0 && d < bound) {
                return Err(Error::InvalidDelta { delta: d, bound });
            }
        }
        if let PointSpec::Grid { min, max, count } = self.points {
            if !(0.0 < min && min <= max && max < 1.0 && count >= 1) {
                return Err(Error::Config("grid needs 0 < min <= max < 1 and count >= 1".into()));
            }
        }
        if let PointSpec::Explicit(ps) = &self.points {
            if ps.is_empty() {
                return Err(Error::Config("no explicit points given".into()));
            }
            for p in ps {
                sphere.check_point(p).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn sphere(&self) -> Result<WeightedSphere> {
        self.model.sphere(self.exec)
    }

    /// Window parameter for `d_hat`: the configured value or half the bound.
    pub fn delta_or_default(&self, sphere: &WeightedSphere) -> f64 {
        self.delta.unwrap_or(0.5 * sphere.delta_bound())
    }

    pub fn resolve_points(&self, sphere: &WeightedSphere) -> Vec<Vec<C64>> {
        resolve_points(&self.points, sphere)
    }
}

/// Largest support realizing period denominator `p`, first in mask order.
fn support_for(sphere: &WeightedSphere, p: u64) -> Vec<usize> {
    let k = sphere.weights.len();
    let mut best: Vec<usize> = Vec::new();
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|a| mask >> a & 1 == 1).collect();
        let g = s.iter().fold(0u64, |g, &a| num_gcd(g, sphere.weights[a] as u64));
        if g == p && s.len() > best.len() {
            best = s;
        }
    }
    best
}

fn num_gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

pub fn resolve_points(spec: &PointSpec, sphere: &WeightedSphere) -> Vec<Vec<C64>> {
    let k = sphere.n + 1;
    let phases: Vec<f64> = (0..k).map(|a| 0.3 * (a + 1) as f64).collect();
    match spec {
        PointSpec::Explicit(ps) => ps.clone(),
        PointSpec::Stratum => sphere
            .strata()
            .p_list
            .iter()
            .map(|&p| {
                let s = support_for(sphere, p);
                let moduli: Vec<f64> = (0..k).map(|a| if s.contains(&a) { 1.0 } else { 0.0 }).collect();
                WeightedSphere::point_from_moduli(&moduli, &phases)
            })
            .collect(),
        PointSpec::Grid { min, max, count } => (0..*count)
            .map(|i| {
                let t = if *count == 1 { *min } else { min + (max - min) * i as f64 / (*count - 1) as f64 };
                let rest = ((1.0 - t * t) / (k - 1) as f64).sqrt();
                let moduli: Vec<f64> = (0..k).map(|a| if a == 0 { t } else { rest }).collect();
                WeightedSphere::point_from_moduli(&moduli, &phases)
            })
            .collect(),
        PointSpec::Random { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::new();
            for &p in &sphere.strata().p_list {
                let s = support_for(sphere, p);
                for _ in 0..*samples {
                    let moduli: Vec<f64> =
                        (0..k).map(|a| if s.contains(&a) { rng.random_range(0.2..1.0) } else { 0.0 }).collect();
                    let ph: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
                    out.push(WeightedSphere::point_from_moduli(&moduli, &ph));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_ranges() {
        assert_eq!(parse_m_range("2:2:8").unwrap(), vec![2, 4, 6, 8]);
        assert_eq!(parse_m_range("3:5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_m_range("7, 9").unwrap(), vec![7, 9]);
        assert!(parse_m_range("5:1").is_err());
        assert!(parse_m_range("a").is_err());
    }

    #[test]
    fn parse_config() {
        let cfg = ExperimentConfig::parse(
            "# comment\nmanifold = weighted_sphere\nweights = 1,2\nm = 11:10:51\nN = 2\npoints = grid\ngrid = 0.1,0.3,3\n",
        )
        .unwrap();
        assert_eq!(cfg.model.weights, vec![1, 2]);
        assert_eq!(cfg.model.preset, MetricPreset::Levi);
        assert_eq!(cfg.m_values, vec![11, 21, 31, 41, 51]);
        assert_eq!(cfg.points, PointSpec::Grid { min: 0.1, max: 0.3, count: 3 });
        assert!(ExperimentConfig::parse("N = 4").is_err());
        assert!(ExperimentConfig::parse("weights = 1,2\nmetric_preset = round").is_err());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("weights = 1,2\ndelta = 9").is_err());
    }

    #[test]
    fn stratum_points() {
        let s = WeightedSphere::new(vec![1, 2], MetricPreset::Levi).unwrap();
        let ps = resolve_points(&PointSpec::Stratum, &s);
        assert_eq!(ps.len(), 2);
        assert_eq!(s.period_denominator(&ps[0]), 1);
        assert_eq!(s.period_denominator(&ps[1]), 2);
        let ps = resolve_points(&PointSpec::Random { samples: 3, seed: 1 }, &s);
        assert_eq!(ps.len(), 6);
        assert!(ps.iter().all(|p| s.check_point(p).is_ok()));
    }
}
