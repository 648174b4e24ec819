//! The periodic action, its gradient and Hessian, and a small dense
//! symmetric eigensolver.
//!
//! The action of one period is `W(x) = Σ_{k=0}^{q−1} h(x_k, x_{k+1})` with
//! `x_q = x₀ + p`. Its Hessian is cyclic tridiagonal; for q = 2 the two
//! couplings between the same pair of sites add up, and for q = 1 both fold
//! onto the diagonal.

use crate::configspace::Configuration;
use crate::model::GeneratingModel;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    Asymmetric(f64),
    #[error("Jacobi sweep limit reached before convergence")]
    NoConvergence,
    #[error("matrix rows are ragged or empty")]
    BadShape,
}

/// `W(x) = Σ h(x_k, x_{k+1})` over one period.
pub fn action(model: &GeneratingModel, c: &Configuration) -> f64 {
    let q = c.q() as i64;
    (0..q).map(|k| model.h(c.extend(k), c.extend(k + 1))).sum()
}

/// Gradient of the action; component `i` is
/// `h₂(x_{i−1}, x_i) + h₁(x_i, x_{i+1})`.
///
/// For the quadratic-coupling family this is
/// `(2x_i − x_{i−1} − x_{i+1}) + U′(x_i)`; zeros are the stationary
/// (p,q)-configurations.
pub fn gradient(model: &GeneratingModel, c: &Configuration) -> Vec<f64> {
    let q = c.q() as i64;
    (0..q)
        .map(|i| {
            model.h2(c.extend(i - 1), c.extend(i)) + model.h1(c.extend(i), c.extend(i + 1))
        })
        .collect()
}

pub fn gradient_inf_norm(model: &GeneratingModel, c: &Configuration) -> f64 {
    gradient(model, c).iter().fold(0.0f64, |m, g| m.max(g.abs()))
}

/// Dense symmetric matrix, row-major. Small: q stays modest here.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

/// Alias used where the matrix is specifically an action Hessian.
pub type HessianMatrix = SymMatrix;

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    /// Validates symmetry to 1e−10 and symmetrizes the stored copy.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EigenError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(EigenError::BadShape);
        }
        let mut worst = 0.0f64;
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((v - rows[j][i]).abs());
            }
        }
        if worst > 1e-10 {
            return Err(EigenError::Asymmetric(worst));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.a[i * n + j] = 0.5 * (v + rows[j][i]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.a[i * self.n + i] += v;
        } else {
            self.a[i * self.n + j] += v;
            self.a[j * self.n + i] += v;
        }
    }

    pub fn determinant(&self) -> f64 {
        // LU with partial pivoting; n is tiny so this is plenty.
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        det
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum())
            .collect()
    }
}

/// Hessian of the action at `c`.
///
/// Diagonal: `h₁₁(x_i, x_{i+1}) + h₂₂(x_{i−1}, x_i) = 2 + U″(x_i)`.
/// Each neighbor coupling contributes `h₁₂ = −1`, placed cyclically; the
/// q = 1 and q = 2 corner cases fold couplings together.
pub fn hessian(model: &GeneratingModel, c: &Configuration) -> HessianMatrix {
    let q = c.q();
    let mut m = SymMatrix::zeros(q);
    for i in 0..q as i64 {
        let d = model.h11(c.extend(i)) + model.h22();
        m.set_sym(i as usize, i as usize, d);
    }
    for i in 0..q as i64 {
        let a = i as usize;
        let b = ((i + 1).rem_euclid(q as i64)) as usize;
        if a == b {
            // q = 1: both off-diagonal couplings fold onto the diagonal.
            m.add_sym(a, a, 2.0 * model.h12());
        } else {
            m.add_sym(a, b, model.h12());
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[j]` is the orthonormal eigenvector paired with `values[j]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a dense symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius mass drops below 1e−14; the
/// matrices here are small enough that dense iteration is the simplest
/// deterministic choice.
pub fn eigen_sym(m: &SymMatrix) -> Result<SymmetricEigen, EigenError> {
    const OFF_TOL: f64 = 1e-14;
    const MAX_SWEEPS: usize = 500;

    let n = m.n;
    let mut a = m.a.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off_mass = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if off_mass(&a) < OFF_TOL {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cos * akp - sin * akq;
                    a[k * n + q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cos * apk - sin * aqk;
                    a[q * n + k] = sin * apk + cos * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = cos * vkp - sin * vkq;
                    v[k * n + q] = sin * vkp + cos * vkq;
                }
            }
        }
    }
    if !converged && off_mass(&a) >= OFF_TOL {
        return Err(EigenError::NoConvergence);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i].partial_cmp(&a[j * n + j]).expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Morse data of the action at a stationary configuration: the count of
/// eigenvalues below `−degeneracy_tol`, and whether any eigenvalue sits
/// within `±degeneracy_tol` of zero.
pub fn morse_index(
    model: &GeneratingModel,
    c: &Configuration,
    degeneracy_tol: f64,
) -> Result<(usize, bool), EigenError> {
    let eig = eigen_sym(&hessian(model, c))?;
    Ok(index_from_eigenvalues(&eig.values, degeneracy_tol))
}

pub fn index_from_eigenvalues(values: &[f64], degeneracy_tol: f64) -> (usize, bool) {
    let index = values.iter().filter(|&&v| v < -degeneracy_tol).count();
    let degenerate = values.iter().any(|v| v.abs() <= degeneracy_tol);
    (index, degenerate)
}
