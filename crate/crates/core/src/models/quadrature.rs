//! Gauss-Legendre rules and product rules on the standard simplex.

use std::f64::consts::PI;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let k = i as f64 + 1.0;
        let mut x = (PI * (k - 0.25) / (nf + 0.5)).cos() * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre(order, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[order - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[order - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Product Gauss rule on the simplex `{t in R^{dim+1}_{>0}, sum t = 1}`
/// (Lebesgue measure in the first `dim` coordinates), via the collapsed
/// coordinates `t_k = u_k prod_{i<k} (1 - u_i)`.
#[derive(Clone, Debug)]
pub struct SimplexRule {
    pub dim: usize,
    pub order: usize,
    /// Per node, `log t_a` for `a = 0..=dim`.
    pub log_t: Vec<Vec<f64>>,
    /// Per node, log of weight times Jacobian.
    pub log_w: Vec<f64>,
}

impl SimplexRule {
    pub fn new(dim: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre_unit(order);
        let total = order.pow(dim as u32);
        let mut log_t = Vec::with_capacity(total);
        let mut log_w = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut lt = Vec::with_capacity(dim + 1);
            let mut rest = 0.0f64; // log prod (1 - u_i)
            let mut lw = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                let u = x[i];
                lt.push(rest + u.ln());
                lw += w[i].ln() + (dim - 1 - k) as f64 * (1.0 - u).ln();
                rest += (1.0 - u).ln();
            }
            lt.push(rest);
            log_t.push(lt);
            log_w.push(lw);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < order {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self { dim, order, log_t, log_w }
    }

    /// `log of integral of exp(f(log t))` over the simplex, evaluated stably.
    pub fn log_integral(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let vals: Vec<f64> = self.log_t.iter().zip(&self.log_w).map(|(lt, lw)| f(lt) + lw).collect();
        log_sum_exp(&vals)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    let s = crate::exec::compensated_sum(v.iter().map(|x| (x - top).exp()));
    top + s.ln()
}

/// `ln k!` for `k = 0..=max`.
pub fn log_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(20);
        for deg in 0..40 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn large_rule_weights_sum_to_one() {
        let (_, w) = gauss_legendre_unit(513);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn simplex_dirichlet_moments() {
        // int_simplex t^alpha = alpha! / (dim + |alpha|)!
        let lf = log_factorials(40);
        let rule = SimplexRule::new(2, 24);
        let alpha = [3usize, 5, 2];
        let v = rule.log_integral(|lt| alpha.iter().zip(lt).map(|(a, l)| *a as f64 * l).sum());
        let exact = lf[3] + lf[5] + lf[2] - lf[2 + 10];
        assert!((v - exact).abs() < 1e-13);
    }
}
