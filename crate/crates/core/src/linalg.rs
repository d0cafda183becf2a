//! Dense complex matrix helpers shared by the curvature code.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jet::C64;

pub type CMat = DMatrix<C64>;

/// Largest entry of `a - a^*`, relative to the largest entry of `a`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    (a - a.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max) / scale
}

/// Symmetrized copy, removing rounding-level anti-Hermitian parts.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(a: &CMat, what: &str) -> Result<CMat> {
    let h = hermitian_part(a);
    let eig = h.clone().symmetric_eigenvalues();
    let top = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if eig.iter().any(|&x| !(x > 1e-13 * top)) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not positive definite")));
    }
    h.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what} is not positive definite")))
}

pub fn inverse(a: &CMat, what: &str) -> Result<CMat> {
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let det = a.determinant().norm();
    if !(det > 1e-14 * scale.powi(a.nrows() as i32)) {
        return Err(Error::SingularMetric(format!("{what} is singular")));
    }
    a.clone().try_inverse().ok_or_else(|| Error::SingularMetric(format!("{what} is singular")))
}

/// Columns of `P = (L^{-1})^T` for `h = L L^*`; they form an `h`-orthonormal
/// frame: `P^T h conj(P) = I`.
pub fn orthonormal_frame(h: &CMat) -> Result<CMat> {
    let l = cholesky_lower(h, "metric")?;
    let linv = inverse(&l, "Cholesky factor")?;
    Ok(linv.transpose())
}

/// Coefficients of a (1,1)-form `sum A_jk dz_j ^ dzbar_k` in the coframe dual to `P`.
pub fn form_in_frame(a: &CMat, p: &CMat) -> CMat {
    p.transpose() * a * p.map(|x| x.conj())
}

/// Squared norm of a (1,1)-form in the metric whose orthonormal frame is `P`.
pub fn form_norm_sq(a: &CMat, p: &CMat) -> f64 {
    form_in_frame(a, p).iter().map(|x| x.norm_sqr()).sum()
}

/// Real inner product of two (1,1)-forms.
pub fn form_pairing(a: &CMat, b: &CMat, p: &CMat) -> f64 {
    let a1 = form_in_frame(a, p);
    let b1 = form_in_frame(b, p);
    a1.iter().zip(b1.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        let h = CMat::from_row_slice(2, 2, &[
            C64::new(2.0, 0.0), C64::new(0.3, 0.4),
            C64::new(0.3, -0.4), C64::new(1.0, 0.0),
        ]);
        let p = orthonormal_frame(&h).unwrap();
        let id = p.transpose() * &h * p.map(|x| x.conj());
        assert!(max_abs(&(id - CMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn one_dimensional_norm_anchor() {
        // |c dw ^ dwbar|^2 = |c|^2 (h^{11})^2
        let h = CMat::from_element(1, 1, C64::new(0.25, 0.0));
        let c = CMat::from_element(1, 1, C64::new(3.0, 1.0));
        let p = orthonormal_frame(&h).unwrap();
        assert!((form_norm_sq(&c, &p) - 10.0 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let h = CMat::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0), C64::new(2.0, 0.0),
            C64::new(2.0, 0.0), C64::new(1.0, 0.0),
        ]);
        assert!(matches!(orthonormal_frame(&h), Err(Error::NotPositiveDefinite(_))));
    }
}
