//! Covariance of value dimensions across users and its classical MDS embedding.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::value_model::NUM_VALUES;

pub type Matrix10 = [[f64; NUM_VALUES]; NUM_VALUES];

/// Sample covariance (n - 1 denominator) of the ten value scores over users.
pub fn value_covariance<'a>(profiles: impl IntoIterator<Item = &'a [f64; NUM_VALUES]>) -> Result<Matrix10> {
    let rows: Vec<&[f64; NUM_VALUES]> = profiles.into_iter().collect();
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("covariance needs at least 2 profiles, got {n}")));
    }
    // shifting by the first row keeps identical profiles at exactly zero
    let origin = *rows[0];
    let mut mean = [0.0; NUM_VALUES];
    for r in &rows {
        for ((m, x), o) in mean.iter_mut().zip(r.iter()).zip(&origin) {
            *m += x - o;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = [[0.0; NUM_VALUES]; NUM_VALUES];
    for r in &rows {
        for i in 0..NUM_VALUES {
            let di = r[i] - origin[i] - mean[i];
            for j in i..NUM_VALUES {
                cov[i][j] += di * (r[j] - origin[j] - mean[j]);
            }
        }
    }
    for i in 0..NUM_VALUES {
        for j in i..NUM_VALUES {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdsEmbedding {
    /// One row of `dims` coordinates per input item.
    pub coords: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Leading eigenvalues that were negative and clamped to zero.
    pub clamped: usize,
    /// Every pairwise distance was zero; all points sit at the origin.
    pub degenerate: bool,
}

/// Classical MDS of a similarity (covariance) matrix: distances
/// `d2_ij = C_ii + C_jj - 2 C_ij`, double centering, and the top `dims`
/// eigenvectors scaled by the square roots of their eigenvalues.
pub fn classical_mds(similarity: &[Vec<f64>], dims: usize) -> Result<MdsEmbedding> {
    let n = similarity.len();
    if n == 0 || similarity.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("similarity matrix must be square and non-empty".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (similarity[i][j], similarity[j][i]);
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidInput(format!("similarity matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| (similarity[i][i] + similarity[j][j] - 2.0 * similarity[i][j]).max(0.0));
    classical_mds_squared(&d2, dims)
}

/// Classical MDS from a matrix of squared distances.
pub fn classical_mds_squared(d2: &DMatrix<f64>, dims: usize) -> Result<MdsEmbedding> {
    let n = d2.nrows();
    if dims == 0 || dims > n {
        return Err(Error::InvalidParameter(format!("cannot embed {n} points in {dims} dimensions")));
    }
    if d2.iter().all(|&x| x == 0.0) {
        return Ok(MdsEmbedding {
            coords: vec![vec![0.0; dims]; n],
            eigenvalues: vec![0.0; n],
            clamped: 0,
            degenerate: true,
        });
    }
    let gram = double_center(d2);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut clamped = 0;
    let mut coords = vec![vec![0.0; dims]; n];
    for (k, &idx) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda < 0.0 {
            clamped += 1;
            log::warn!("MDS: eigenvalue {lambda:.3e} clamped to zero");
        }
        let scale = lambda.max(0.0).sqrt();
        let v = eig.eigenvectors.column(idx);
        // sign convention: largest-magnitude component positive
        let pivot = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, row) in coords.iter_mut().enumerate() {
            row[k] = sign * v[i] * scale;
        }
    }
    // remove residual numerical offset so the configuration is centred
    for k in 0..dims {
        let mean = coords.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        for row in &mut coords {
            row[k] -= mean;
        }
    }
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(MdsEmbedding { coords, eigenvalues, clamped, degenerate: false })
}

/// `-1/2 J D2 J` with `J = I - 11^T / n`.
pub fn double_center(d2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d2.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| d2.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - col_means[j] + grand))
}

pub fn matrix10_rows(m: &Matrix10) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}
