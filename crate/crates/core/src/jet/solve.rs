//! Newton iteration on jets: implicit scalar equations and holomorphic inverses.

use nalgebra::DMatrix;

use super::{C64, Expr, Jet, JetContext, JetMatrix, Sym};
use crate::error::{Error, Result};

const MAX_ITERS: usize = 100;

fn settled(step: f64, prev: f64, size: f64) -> bool {
    step <= 1e-15 * size.max(1.0) || (step >= prev && step <= 1e-9 * size.max(1.0))
}

/// Solves `f(u) = 0` for a jet `u` by Newton's method, starting from the
/// constant `seed`. Each step roughly doubles the number of correct orders.
pub fn newton_jet_solve_fn<F, D>(ctx: &JetContext, f: F, df: D, seed: C64) -> Result<Jet>
where
    F: Fn(&Jet) -> Result<Jet>,
    D: Fn(&Jet) -> Result<Jet>,
{
    let mut u = Jet::constant(ctx, seed);
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let d = df(&u)?;
        if d.value().norm() <= 1e-300 {
            return Err(Error::DegenerateDerivative);
        }
        let step = f(&u)?.div(&d)?;
        u = &u - &step;
        let s = step.max_abs();
        if !s.is_finite() {
            return Err(Error::NonConvergence(MAX_ITERS));
        }
        if settled(s, prev, u.max_abs()) {
            return Ok(u);
        }
        prev = s;
    }
    Err(Error::NonConvergence(MAX_ITERS))
}

/// Solves `equation(z, zbar, u) = 0` for `u` as a jet at the point whose
/// coordinate jets are `vars`.
pub fn newton_jet_solve_in(vars: &[Jet], equation: &Expr, seed: C64) -> Result<Jet> {
    let ctx = vars
        .first()
        .map(|v| v.context().clone())
        .ok_or_else(|| Error::ContextMismatch("no coordinate jets".into()))?;
    let deriv = equation.diff(Sym::Unknown);
    newton_jet_solve_fn(
        &ctx,
        |u| equation.eval_jet(vars, Some(u)),
        |u| deriv.eval_jet(vars, Some(u)),
        seed,
    )
}

/// [`newton_jet_solve_in`] at the coordinate point `base`.
pub fn newton_jet_solve(ctx: &JetContext, base: &[C64], equation: &Expr, seed: C64) -> Result<Jet> {
    let vars = Jet::variables(ctx, base);
    newton_jet_solve_in(&vars, equation, seed)
}

/// Solves `map(u) = target` for holomorphic jets `u_1..u_n` by multivariate
/// Newton, starting from the constant point `seed`.
pub fn invert_holomorphic_map(map: &[Expr], target: &[Jet], seed: &[C64]) -> Result<Vec<Jet>> {
    let n = map.len();
    if target.len() != n || seed.len() != n {
        return Err(Error::ContextMismatch("inverse map dimension mismatch".into()));
    }
    let ctx = target[0].context().clone();
    let jac: Vec<Vec<Expr>> =
        map.iter().map(|m| (0..n).map(|k| m.diff(Sym::Var(k))).collect()).collect();
    let mut u: Vec<Jet> = seed.iter().map(|&s| Jet::constant(&ctx, s)).collect();
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let resid: Vec<Jet> = map
            .iter()
            .zip(target)
            .map(|(m, t)| Ok(m.eval_jet(&u, None)? - t))
            .collect::<Result<_>>()?;
        let mut entries = Vec::with_capacity(n * n);
        for row in &jac {
            for e in row {
                entries.push(e.eval_jet(&u, None)?);
            }
        }
        let j = JetMatrix::from_entries(n, entries);
        let jv: DMatrix<C64> = j.value();
        if jv.determinant().norm() <= 1e-300 {
            return Err(Error::DegenerateDerivative);
        }
        let jinv = j.inverse().map_err(|_| Error::DegenerateDerivative)?;
        let mut s = 0.0f64;
        let mut next = Vec::with_capacity(n);
        for a in 0..n {
            let mut step = jinv.get(a, 0) * &resid[0];
            for b in 1..n {
                step = step + jinv.get(a, b) * &resid[b];
            }
            s = s.max(step.max_abs());
            next.push(&u[a] - &step);
        }
        u = next;
        if !s.is_finite() {
            return Err(Error::NonConvergence(MAX_ITERS));
        }
        let size = u.iter().map(|x| x.max_abs()).fold(0.0, f64::max);
        if settled(s, prev, size) {
            return Ok(u);
        }
        prev = s;
    }
    Err(Error::NonConvergence(MAX_ITERS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_quadratic_derivative() {
        // b^2 + s b = 1 with s = |w|^2: b(0) = 1 and db/ds(0) = -1/2.
        let ctx = JetContext::new(1, 6).unwrap();
        let eq = Expr::parse("u^2 + z*zb*u - 1").unwrap();
        let b = newton_jet_solve(&ctx, &[C64::new(0.0, 0.0)], &eq, C64::new(1.0, 0.0)).unwrap();
        assert!((b.value() - 1.0).norm() < 1e-15);
        assert!((b.coeff(&[1], &[1]).unwrap() + 0.5).norm() < 1e-15);
        // closed form b = (sqrt(s^2 + 4) - s) / 2: coefficient of s^2 is 1/8
        assert!((b.coeff(&[2], &[2]).unwrap() - 0.125).norm() < 1e-14);
    }

    #[test]
    fn degenerate_derivative_detected() {
        let ctx = JetContext::new(1, 3).unwrap();
        let eq = Expr::parse("u^2 - z*zb").unwrap();
        let r = newton_jet_solve(&ctx, &[C64::new(0.0, 0.0)], &eq, C64::new(0.0, 0.0));
        assert_eq!(r.unwrap_err(), Error::DegenerateDerivative);
    }

    #[test]
    fn inverse_of_polynomial_map() {
        let ctx = JetContext::new(2, 5).unwrap();
        let map = vec![Expr::parse("z1 + z2^2").unwrap(), Expr::parse("z2 - 0.5*z1*z2").unwrap()];
        let base = [C64::new(0.1, 0.0), C64::new(0.2, 0.1)];
        let w0: Vec<C64> = map
            .iter()
            .map(|m| m.eval_value(&base, &[base[0].conj(), base[1].conj()], None).unwrap())
            .collect();
        let w = Jet::variables(&ctx, &w0);
        let u = invert_holomorphic_map(&map, &w, &w0).unwrap();
        for (m, t) in map.iter().zip(&w) {
            assert!((m.eval_jet(&u, None).unwrap() - t).max_abs() < 1e-13);
        }
        assert!((u[0].value() - base[0]).norm() < 1e-13);
    }
}
