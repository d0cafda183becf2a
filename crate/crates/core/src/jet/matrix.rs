//! Small square matrices of jets.

use nalgebra::DMatrix;

use super::{C64, Jet};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct JetMatrix {
    n: usize,
    data: Vec<Jet>,
}

impl JetMatrix {
    /// Row-major entries.
    pub fn from_entries(n: usize, data: Vec<Jet>) -> Self {
        assert_eq!(data.len(), n * n, "JetMatrix needs n*n entries");
        Self { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Jet) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.data[i * self.n + j]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn value(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).value())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(i, j).conj())
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> Self {
        Self { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&Jet) -> Result<Jet>) -> Result<Self> {
        Ok(Self { n: self.n, data: self.data.iter().map(f).collect::<Result<_>>()? })
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut acc = self.get(i, 0) * other.get(0, j);
            for k in 1..n {
                acc = acc + self.get(i, k) * other.get(k, j);
            }
            acc
        })
    }

    pub fn trace(&self) -> Jet {
        let mut acc = self.get(0, 0).clone();
        for i in 1..self.n {
            acc = acc + self.get(i, i);
        }
        acc
    }

    /// Determinant by cofactor expansion (dimensions stay at most three).
    pub fn det(&self) -> Jet {
        match self.n {
            1 => self.get(0, 0).clone(),
            2 => self.get(0, 0) * self.get(1, 1) - self.get(0, 1) * self.get(1, 0),
            _ => {
                let mut acc: Option<Jet> = None;
                for c in 0..self.n {
                    let minor = self.minor(0, c).det();
                    let term = self.get(0, c) * &minor;
                    acc = Some(match acc {
                        None => term,
                        Some(a) if c % 2 == 1 => a - term,
                        Some(a) => a + term,
                    });
                }
                acc.expect("nonempty matrix")
            }
        }
    }

    fn minor(&self, r: usize, c: usize) -> Self {
        let mut data = Vec::with_capacity((self.n - 1) * (self.n - 1));
        for i in (0..self.n).filter(|&i| i != r) {
            for j in (0..self.n).filter(|&j| j != c) {
                data.push(self.get(i, j).clone());
            }
        }
        Self { n: self.n - 1, data }
    }

    /// Gauss-Jordan inverse with partial pivoting on the constant terms.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let ctx = self.data[0].context().clone();
        let scale = self.data.iter().map(|j| j.value().norm()).fold(0.0, f64::max);
        let mut a: Vec<Vec<Jet>> = (0..n).map(|i| (0..n).map(|j| self.get(i, j).clone()).collect()).collect();
        let mut inv: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| Jet::real(&ctx, if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x][col].value().norm().total_cmp(&a[y][col].value().norm()))
                .expect("nonempty range");
            if a[pivot][col].value().norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularMetric("singular jet matrix".into()));
            }
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let p = a[col][col].recip()?;
            for j in 0..n {
                a[col][j] = &a[col][j] * &p;
                inv[col][j] = &inv[col][j] * &p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = &a[r][j] - &(&f * &a[col][j]);
                    inv[r][j] = &inv[r][j] - &(&f * &inv[col][j]);
                }
            }
        }
        Ok(Self { n, data: inv.into_iter().flatten().collect() })
    }
}
