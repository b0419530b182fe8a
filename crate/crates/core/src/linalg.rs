//! Small dense helpers on top of nalgebra for d ≤ 3 problems.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::{Error, Matrix, Result, Vector};

pub fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Input("empty matrix".into()));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Input("ragged matrix".into()));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

pub fn is_spd(m: &Matrix) -> bool {
    is_symmetric(m, 1e-10) && Cholesky::new(m.clone()).is_some()
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Number of free entries of a symmetric d×d matrix.
pub fn sym_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Index pairs (i, j), i ≤ j, in the order used by [`sym_from_params`].
pub fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sym_dim(d));
    for i in 0..d {
        for j in i..d {
            out.push((i, j));
        }
    }
    out
}

pub fn sym_from_params(p: &[f64], d: usize) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for (k, &(i, j)) in sym_pairs(d).iter().enumerate() {
        m[(i, j)] = p[k];
        m[(j, i)] = p[k];
    }
    m
}

pub fn sym_to_params(m: &Matrix) -> Vec<f64> {
    sym_pairs(m.nrows()).iter().map(|&(i, j)| 0.5 * (m[(i, j)] + m[(j, i)])).collect()
}

/// Basis matrix of the symmetric parameter `k`.
pub fn sym_basis(k: usize, d: usize) -> Matrix {
    let (i, j) = sym_pairs(d)[k];
    let mut m = Matrix::zeros(d, d);
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    m
}

/// Symmetric square root of an SPD matrix.
pub fn sqrtm_spd(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Symmetric positive definite factor S with S S = M Mᵀ; same ellipsoid M B^d.
pub fn spd_representative(m: &Matrix) -> Matrix {
    sqrtm_spd(&(m * m.transpose()))
}

pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    Cholesky::new(symmetrize(m)).map(|c| c.inverse()).ok_or_else(|| Error::Input("matrix is not positive definite".into()))
}

pub fn log_det_spd(m: &Matrix) -> Option<f64> {
    let c = Cholesky::new(symmetrize(m))?;
    Some(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

/// Unit vectors spread over the sphere S^{d-1}: both signs for d = 1, a regular
/// polygon for d = 2 and a Fibonacci lattice for d = 3.
pub fn sphere_points(d: usize, n: usize) -> Vec<Vector> {
    match d {
        1 => vec![vector(&[1.0]), vector(&[-1.0])],
        2 => (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                vector(&[th.cos(), th.sin()])
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    let mut v = Vector::zeros(d);
                    v[0] = r * th.cos();
                    v[1] = r * th.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Regular grid of `per_axis` points per coordinate on [-1, 1]^d restricted to the open unit ball.
pub fn ball_grid(d: usize, per_axis: usize) -> Vec<Vector> {
    let per_axis = per_axis.max(2);
    let step = 2.0 / (per_axis - 1) as f64;
    let total = per_axis.pow(d as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut v = Vector::zeros(d);
        for k in 0..d {
            v[k] = -1.0 + step * (rem % per_axis) as f64;
            rem /= per_axis;
        }
        if v.norm_squared() < 1.0 - 1e-12 {
            out.push(v);
        }
    }
    out
}
