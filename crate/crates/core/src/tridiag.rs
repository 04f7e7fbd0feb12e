//! Symmetric tridiagonal linear algebra: matrix-vector products, shifted
//! complex solves for Crank-Nicolson, and a full eigendecomposition.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real symmetric tridiagonal matrix with a constant off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl SymTridiag {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert!(x.len() >= n);
        (0..n)
            .map(|i| {
                let mut y = x[i] * self.diag[i];
                if i > 0 {
                    y += x[i - 1] * self.off;
                }
                if i + 1 < n {
                    y += x[i + 1] * self.off;
                }
                y
            })
            .collect()
    }

    /// `Re <x, A x>` for complex `x` (only the first `dim` entries are used).
    pub fn quadratic(&self, x: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i].norm_sqr();
            if i + 1 < n {
                acc += 2.0 * self.off * (x[i].conj() * x[i + 1]).re;
            }
        }
        acc
    }

    /// Crude bound on the spectral radius (Gershgorin).
    pub fn norm_bound(&self) -> f64 {
        self.diag
            .iter()
            .map(|d| d.abs() + 2.0 * self.off.abs())
            .fold(0.0, f64::max)
    }
}

/// LU factors of `I + i s A` for real symmetric tridiagonal `A`, reused across
/// many right-hand sides.
#[derive(Debug, Clone)]
pub struct ShiftedFactor {
    off: Complex64,
    // Thomas sweep coefficients: inverse pivots and the upper multipliers.
    inv_pivot: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl ShiftedFactor {
    /// Factor `I + i s A`.
    pub fn new(a: &SymTridiag, s: f64) -> Result<Self> {
        let n = a.dim();
        let off = Complex64::new(0.0, s * a.off);
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut prev_upper = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let d = Complex64::new(1.0, s * a.diag[i]);
            let pivot = if i == 0 { d } else { d - off * prev_upper };
            if pivot.norm() == 0.0 || !pivot.re.is_finite() {
                return Err(Error::SingularPivot(i));
            }
            let ip = pivot.inv();
            inv_pivot.push(ip);
            prev_upper = off * ip;
            upper.push(prev_upper);
        }
        Ok(Self {
            off,
            inv_pivot,
            upper,
        })
    }

    /// Solve in place.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.inv_pivot.len();
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let y = (rhs[i] - self.off * prev) * self.inv_pivot[i];
            rhs[i] = y;
            prev = y;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.upper[i] * next;
        }
    }
}

/// Solve `(I + s A) x = rhs` in place for real `s >= 0` with `I + s A`
/// positive definite (no pivoting needed).
pub fn solve_shifted_real(a: &SymTridiag, s: f64, rhs: &mut [f64]) {
    let n = a.dim();
    let off = s * a.off;
    let mut upper = vec![0.0; n];
    let mut prev_upper = 0.0;
    let mut prev = 0.0;
    for i in 0..n {
        let pivot = 1.0 + s * a.diag[i] - off * prev_upper;
        debug_assert!(pivot > 0.0);
        prev_upper = off / pivot;
        upper[i] = prev_upper;
        prev = (rhs[i] - off * prev) / pivot;
        rhs[i] = prev;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let next = rhs[i + 1];
        rhs[i] -= upper[i] * next;
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method,
/// returned in ascending order.
pub fn eigenvalues(a: &SymTridiag) -> Vec<f64> {
    let n = a.dim();
    let mut d = a.diag.clone();
    if n == 0 {
        return d;
    }
    let mut e = vec![a.off; n];
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    d
}

/// Full eigendecomposition `A = V diag(lambda) V^T`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Row-major: vector `k` occupies `vectors[k*n..(k+1)*n]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

/// Eigenvalues by QL, eigenvectors by inverse iteration with local
/// reorthogonalization inside clusters of nearby eigenvalues.
pub fn eigendecompose(a: &SymTridiag) -> Eigen {
    let n = a.dim();
    let values = eigenvalues(a);
    let scale = a.norm_bound().max(f64::MIN_POSITIVE);
    let cluster = 1e-3 * scale;
    let mut vectors = vec![0.0; n * n];

    for k in 0..n {
        let lambda = values[k];
        // Deterministic, non-degenerate start vector.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.7548776662 + k as f64 * 0.5698402910).fract() - 0.5))
            .collect();
        for _ in 0..3 {
            x = shifted_solve_pivoted(a, lambda, &x, scale);
            normalize(&mut x);
        }
        // Orthogonalize against the earlier members of this cluster (twice).
        let mut j0 = k;
        while j0 > 0 && lambda - values[j0 - 1] < cluster {
            j0 -= 1;
        }
        for _ in 0..2 {
            for j in j0..k {
                let vj = &vectors[j * n..(j + 1) * n];
                let dot: f64 = vj.iter().zip(&x).map(|(p, q)| p * q).sum();
                for (xi, vi) in x.iter_mut().zip(vj) {
                    *xi -= dot * vi;
                }
            }
            normalize(&mut x);
        }
        // Sign convention: the largest component is positive.
        let imax = x
            .iter()
            .enumerate()
            .max_by(|p, q| p.1.abs().partial_cmp(&q.1.abs()).unwrap())
            .map(|p| p.0)
            .unwrap_or(0);
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        vectors[k * n..(k + 1) * n].copy_from_slice(&x);
    }
    Eigen { values, vectors, n }
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

/// Solve `(A - shift I) x = b` by Gaussian elimination with partial pivoting.
/// Zero pivots are replaced by `eps * scale` (standard inverse-iteration trick).
fn shifted_solve_pivoted(a: &SymTridiag, shift: f64, b: &[f64], scale: f64) -> Vec<f64> {
    let n = a.dim();
    let tiny = f64::EPSILON * scale;
    // Row i holds coefficients for columns i, i+1, i+2 after pivoting.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut rhs = b.to_vec();

    // Working copy of the current row (columns i, i+1) and the next row.
    let mut cur0 = a.diag[0] - shift;
    let mut cur1 = if n > 1 { a.off } else { 0.0 };
    let mut cur2 = 0.0;
    for i in 0..n {
        if i + 1 < n {
            let nxt0 = a.off;
            let nxt1 = a.diag[i + 1] - shift;
            let nxt2 = if i + 2 < n { a.off } else { 0.0 };
            if nxt0.abs() > cur0.abs() {
                // Swap rows i and i+1.
                let (p0, p1, p2) = (nxt0, nxt1, nxt2);
                let (q0, q1, q2) = (cur0, cur1, cur2);
                rhs.swap(i, i + 1);
                let m = q0 / p0;
                u0[i] = p0;
                u1[i] = p1;
                u2[i] = p2;
                cur0 = q1 - m * p1;
                cur1 = q2 - m * p2;
                cur2 = 0.0;
                rhs[i + 1] -= m * rhs[i];
            } else {
                let piv = if cur0 == 0.0 { tiny } else { cur0 };
                let m = nxt0 / piv;
                u0[i] = piv;
                u1[i] = cur1;
                u2[i] = cur2;
                cur0 = nxt1 - m * cur1;
                cur1 = nxt2 - m * cur2;
                cur2 = 0.0;
                rhs[i + 1] -= m * rhs[i];
            }
        } else {
            u0[i] = if cur0 == 0.0 { tiny } else { cur0 };
            u1[i] = 0.0;
            u2[i] = 0.0;
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        let piv = if u0[i].abs() < tiny { tiny.copysign(u0[i]) } else { u0[i] };
        x[i] = s / piv;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag {
            diag: vec![2.0; n],
            off: -1.0,
        }
    }

    #[test]
    fn ql_matches_closed_form_spectrum() {
        let n = 50;
        let vals = eigenvalues(&laplacian(n));
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * PI / (n + 1) as f64).cos();
            assert_relative_eq!(*v, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_exact() {
        let n = 300;
        let a = SymTridiag {
            diag: (0..n).map(|i| 2.0 + 0.3 / ((i + 1) as f64).powi(2)).collect(),
            off: -1.0,
        };
        let eig = eigendecompose(&a);
        for k in 0..n {
            let v = eig.vector(k);
            let av = a.apply(v);
            let res: f64 = av
                .iter()
                .zip(v)
                .map(|(p, q)| (p - eig.values[k] * q).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-10, "residual {res} at k = {k}");
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                let d: f64 = eig.vector(i).iter().zip(eig.vector(j)).map(|(p, q)| p * q).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        assert!(worst < 1e-10, "orthonormality defect {worst}");
    }

    #[test]
    fn shifted_factor_solves() {
        let n = 40;
        let a = laplacian(n);
        let s = 0.37;
        let f = ShiftedFactor::new(&a, s).unwrap();
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let ax = a.apply_complex(&x);
        let mut b: Vec<Complex64> = x
            .iter()
            .zip(&ax)
            .map(|(xi, axi)| xi + Complex64::new(0.0, s) * axi)
            .collect();
        f.solve(&mut b);
        for (p, q) in b.iter().zip(&x) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn quadratic_matches_apply() {
        let a = SymTridiag {
            diag: vec![3.0, 1.0, 2.0, 5.0],
            off: -0.5,
        };
        let x = vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.2, 0.1),
            Complex64::new(0.3, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let ax = a.apply_complex(&x);
        let direct: f64 = x.iter().zip(&ax).map(|(p, q)| (p.conj() * q).re).sum();
        assert_relative_eq!(a.quadratic(&x), direct, epsilon = 1e-14);
    }
}
