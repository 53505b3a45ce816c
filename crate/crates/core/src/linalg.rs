//! Small dense linear algebra for low-dimensional estimation problems:
//! least-squares solves, symmetric eigenvalues, and vector helpers.
//!
//! Everything here assumes d is small (tens at most), so robustness wins
//! over asymptotic speed: eigenvalues come from cyclic Jacobi sweeps and
//! rank-deficient systems fall back to the minimum-norm solution.

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff for rank decisions when (pseudo-)inverting
/// a Gram matrix.
pub const RANK_CUTOFF_REL: f64 = 1e-10;

const SYM_TOL_REL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// a + c*b
pub fn axpy(a: &[f64], c: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + c * y).collect()
}

/// Dense symmetric d x d matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    pub d: usize,
    pub data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(d: usize) -> Self {
        SymMat {
            d,
            data: vec![0.0; d * d],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let mut m = SymMat::zeros(d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Argument("matrix is not square".into()));
            }
            for (j, v) in row.iter().enumerate() {
                m.data[i * d + j] = *v;
            }
        }
        m.check_symmetric()?;
        Ok(m)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
    }

    /// Rank-one update: M += x x^T.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                self.data[i * self.d + j] += x[i] * x[j];
            }
        }
    }

    pub fn check_symmetric(&self) -> Result<()> {
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if (self.get(i, j) - self.get(j, i)).abs() > SYM_TOL_REL * scale {
                    return Err(Error::Argument(format!(
                        "matrix asymmetric at ({i},{j}) beyond tolerance"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Eigen-decomposition by cyclic Jacobi sweeps.
    /// Returns (eigenvalues, eigenvectors as columns), unsorted.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.d;
        let mut a = self.data.clone();
        // v starts as identity; columns accumulate the rotations.
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }
        let idx = |i: usize, j: usize| i * d + j;
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    off += a[idx(i, j)] * a[idx(i, j)];
                }
            }
            if off.sqrt() < 1e-14 * (1.0 + self.frob_norm()) {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[idx(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[idx(p, p)];
                    let aqq = a[idx(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[idx(k, p)];
                        let akq = a[idx(k, q)];
                        a[idx(k, p)] = c * akp - s * akq;
                        a[idx(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[idx(p, k)];
                        let aqk = a[idx(q, k)];
                        a[idx(p, k)] = c * apk - s * aqk;
                        a[idx(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..d {
                        let vkp = v[idx(k, p)];
                        let vkq = v[idx(k, q)];
                        v[idx(k, p)] = c * vkp - s * vkq;
                        v[idx(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let eigvals: Vec<f64> = (0..d).map(|i| a[idx(i, i)]).collect();
        let eigvecs: Vec<Vec<f64>> = (0..d)
            .map(|col| (0..d).map(|row| v[idx(row, col)]).collect())
            .collect();
        (eigvals, eigvecs)
    }

    fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Minimum-norm solve of M y = b via eigen pseudo-inverse, with
    /// eigenvalues below `RANK_CUTOFF_REL` of the largest treated as zero.
    pub fn pinv_solve(&self, b: &[f64]) -> Vec<f64> {
        let (vals, vecs) = self.eigen();
        let lmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cutoff = RANK_CUTOFF_REL * lmax;
        let mut y = vec![0.0; self.d];
        for (lam, vec) in vals.iter().zip(&vecs) {
            if lam.abs() <= cutoff {
                continue;
            }
            let c = dot(vec, b) / lam;
            for (yi, vi) in y.iter_mut().zip(vec) {
                *yi += c * vi;
            }
        }
        y
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &SymMat) -> Result<f64> {
    m.check_symmetric()?;
    let (vals, _) = m.eigen();
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// Ordinary least squares: theta minimizing sum (<x, theta> - r)^2.
/// Rank-deficient designs yield the minimum-norm least-squares solution.
pub fn ols_fit(data: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    let Some((first, _)) = data.first() else {
        return Err(Error::Argument("ols_fit: empty data".into()));
    };
    let d = first.len();
    let mut gram = SymMat::zeros(d);
    let mut b = vec![0.0; d];
    for (x, r) in data {
        if x.len() != d {
            return Err(Error::Argument("ols_fit: dimension mismatch".into()));
        }
        gram.add_outer(x);
        for (bi, xi) in b.iter_mut().zip(x) {
            *bi += r * xi;
        }
    }
    Ok(gram.pinv_solve(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn ols_orthonormal_interpolation() {
        let data = vec![(vec![1.0, 0.0], 2.0), (vec![0.0, 1.0], -1.0)];
        let theta = ols_fit(&data).unwrap();
        assert_close(theta[0], 2.0, 1e-12);
        assert_close(theta[1], -1.0, 1e-12);
    }

    #[test]
    fn ols_min_norm_rank_deficient() {
        let data = vec![(vec![1.0, 0.0], 3.0)];
        let theta = ols_fit(&data).unwrap();
        assert_close(theta[0], 3.0, 1e-12);
        assert_close(theta[1], 0.0, 1e-12);
    }

    #[test]
    fn ols_empty_and_mismatch_errors() {
        assert!(ols_fit(&[]).is_err());
        let data = vec![(vec![1.0, 0.0], 1.0), (vec![1.0], 1.0)];
        assert!(ols_fit(&data).is_err());
    }

    // Independent oracle: normal equations solved by Gaussian elimination
    // with full pivoting.
    fn normal_eq_full_pivot(data: &[(Vec<f64>, f64)]) -> Vec<f64> {
        let d = data[0].0.len();
        let mut a = vec![vec![0.0; d + 1]; d];
        for (x, r) in data {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
                a[i][d] += x[i] * r;
            }
        }
        let mut col_of = (0..d).collect::<Vec<_>>();
        for k in 0..d {
            let (mut pi, mut pj, mut pv) = (k, k, 0.0f64);
            for i in k..d {
                for j in k..d {
                    if a[i][j].abs() > pv {
                        pv = a[i][j].abs();
                        pi = i;
                        pj = j;
                    }
                }
            }
            a.swap(k, pi);
            for row in a.iter_mut() {
                row.swap(k, pj);
            }
            col_of.swap(k, pj);
            for i in (k + 1)..d {
                let f = a[i][k] / a[k][k];
                for j in k..=d {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
        let mut y = vec![0.0; d];
        for k in (0..d).rev() {
            let mut s = a[k][d];
            for j in (k + 1)..d {
                s -= a[k][j] * y[j];
            }
            y[k] = s / a[k][k];
        }
        let mut theta = vec![0.0; d];
        for (k, &c) in col_of.iter().enumerate() {
            theta[c] = y[k];
        }
        theta
    }

    fn ball_sample(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&g);
        let r: f64 = rng.gen::<f64>().powf(1.0 / d as f64);
        scale(&g, r / n)
    }

    #[test]
    fn ols_noiseless_matches_full_pivot_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta = vec![0.4, -0.3];
        let data: Vec<(Vec<f64>, f64)> = (0..50)
            .map(|_| {
                let x = ball_sample(2, &mut rng);
                let r = dot(&theta, &x);
                (x, r)
            })
            .collect();
        let fit = ols_fit(&data).unwrap();
        let oracle = normal_eq_full_pivot(&data);
        for i in 0..2 {
            assert_close(fit[i], theta[i], 1e-8);
            assert_close(fit[i], oracle[i], 1e-8);
        }
    }

    #[test]
    fn ols_recovers_generating_theta_many_dims() {
        // 100 seeded noiseless instances across d in 2..=8.
        for seed in 0..100u64 {
            let d = 2 + (seed % 7) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let theta = ball_sample(d, &mut rng);
            let data: Vec<(Vec<f64>, f64)> = (0..(4 * d))
                .map(|_| {
                    let x = ball_sample(d, &mut rng);
                    let r = dot(&theta, &x);
                    (x, r)
                })
                .collect();
            let fit = ols_fit(&data).unwrap();
            assert!(norm2(&sub(&fit, &theta)) <= 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn min_eigen_identity_and_diag() {
        let id = SymMat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_close(min_eigenvalue(&id).unwrap(), 1.0, 1e-12);
        let diag = SymMat::from_rows(&[vec![2.0, 0.0], vec![0.0, 5.0]]).unwrap();
        assert_close(min_eigenvalue(&diag).unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn min_eigen_rejects_asymmetric() {
        let m = SymMat {
            d: 2,
            data: vec![1.0, 0.5, -0.5, 1.0],
        };
        assert!(min_eigenvalue(&m).is_err());
    }

    #[test]
    fn min_eigen_construct_then_recover() {
        // Q Lambda Q^T with Lambda = diag(0.1, 1, 7); Q from QR of a seeded
        // Gaussian matrix (Gram-Schmidt).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let d = 3;
        let mut q: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        for i in 0..d {
            for j in 0..i {
                let proj = dot(&q[i], &q[j]);
                q[i] = axpy(&q[i], -proj, &q[j].clone());
            }
            let n = norm2(&q[i]);
            q[i] = scale(&q[i], 1.0 / n);
        }
        let lambda = [0.1, 1.0, 7.0];
        let mut m = SymMat::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let v = m.get(i, j) + lambda[k] * q[k][i] * q[k][j];
                    m.set(i, j, v);
                }
            }
        }
        assert_close(min_eigenvalue(&m).unwrap(), 0.1, 1e-9);
    }

    #[test]
    fn min_eigen_agrees_with_quadratic_root_2d() {
        // Closed-form characteristic-polynomial oracle for d=2.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            let c: f64 = rng.gen_range(-3.0..3.0);
            let m = SymMat::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let tr = a + c;
            let det = a * c - b * b;
            let root = (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
            assert_close(min_eigenvalue(&m).unwrap(), root, 1e-9);
        }
    }

    #[test]
    fn psd_gram_min_eigen_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = rng.gen_range(2..6);
            let mut m = SymMat::zeros(d);
            for _ in 0..rng.gen_range(1..20) {
                let x = ball_sample(d, &mut rng);
                m.add_outer(&x);
            }
            assert!(min_eigenvalue(&m).unwrap() >= -1e-9);
        }
    }
}
