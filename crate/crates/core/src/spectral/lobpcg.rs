//! Locally optimal block preconditioned conjugate gradient for the smallest
//! eigenpairs of a sparse symmetric positive semidefinite matrix.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::graph::LaplacianMatrix;
use crate::rng::stream;

pub(crate) struct RawEigen {
    pub values: Vec<f64>,
    /// Unit 2-norm columns.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Ascending eigenpairs of a small symmetric matrix; equal values keep
/// their original index order.
pub(crate) fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn residual_norms(x: &DMatrix<f64>, ax: &DMatrix<f64>, lambda: &[f64]) -> Vec<f64> {
    (0..x.ncols())
        .map(|c| {
            x.column(c)
                .iter()
                .zip(ax.column(c).iter())
                .map(|(xi, ai)| (ai - lambda[c] * xi).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Remove the span of orthonormal `x` from `v`, applying the same update to
/// its image `av`.
fn project_out(x: &DMatrix<f64>, ax: &DMatrix<f64>, v: &mut DMatrix<f64>, av: &mut DMatrix<f64>) {
    let c = x.tr_mul(v);
    v.gemm(-1.0, x, &c, 1.0);
    av.gemm(-1.0, ax, &c, 1.0);
}

/// Orthonormalize the columns of `v` by eigendecomposition of the scaled
/// Gram matrix, dropping numerically dependent directions.
fn svqb(v: &DMatrix<f64>, av: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = v.ncols();
    let g = v.tr_mul(v);
    let d: Vec<f64> = (0..k)
        .map(|i| {
            let s = g[(i, i)];
            if s > 0.0 {
                1.0 / s.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| d[i] * g[(i, j)] * d[j]);
    let (vals, vecs) = sorted_eigen(scaled);
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..k).filter(|&i| vals[i] > 1e-10 * top.max(1e-300)).collect();
    let t = DMatrix::from_fn(k, keep.len(), |i, c| d[i] * vecs[(i, keep[c])] / vals[keep[c]].sqrt());
    (v * &t, av * &t)
}

fn orthonormalize(
    x: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
    mut v: DMatrix<f64>,
    mut av: DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    for _ in 0..2 {
        if let Some((x, ax)) = x {
            project_out(x, ax, &mut v, &mut av);
        }
        if v.ncols() == 0 {
            break;
        }
        (v, av) = svqb(&v, &av);
    }
    (v, av)
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

pub(crate) fn dense_smallest(lap: &LaplacianMatrix, s: usize) -> RawEigen {
    let (values, vectors) = sorted_eigen(lap.to_dense());
    let vectors = vectors.columns(0, s).into_owned();
    let values: Vec<f64> = values[..s].to_vec();
    let ax = lap.apply(&vectors);
    RawEigen {
        residuals: residual_norms(&vectors, &ax, &values),
        values,
        vectors,
        iterations: 0,
        converged: true,
    }
}

pub(crate) fn lobpcg(
    lap: &LaplacianMatrix,
    s: usize,
    block: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    jacobi: bool,
) -> RawEigen {
    let n = lap.n();
    let m = block.max(s).min(n);
    let mut rng = stream(seed, "lobpcg-init", 0);
    let x0 = DMatrix::from_fn(n, m, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let ax0 = lap.apply(&x0);
    let (x0, ax0) = orthonormalize(None, x0, ax0);
    let (mut x, mut ax, mut lambda) = rayleigh_ritz(&x0, &ax0, m.min(x0.ncols()));
    let mut p: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let precond: Vec<f64> = lap
        .degree
        .iter()
        .map(|&d| if jacobi && d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        if iterations % 16 == 0 {
            (x, ax) = orthonormalize(None, x.clone(), lap.apply(&x));
            (x, ax, lambda) = rayleigh_ritz(&x, &ax, x.ncols());
        }
        let mut res = residual_norms(&x, &ax, &lambda);
        if res[..s].iter().all(|&r| r <= tol) {
            // confirm against a fresh product before stopping
            ax = lap.apply(&x);
            res = residual_norms(&x, &ax, &lambda);
            if res[..s].iter().all(|&r| r <= tol) {
                converged = true;
                break;
            }
        }
        let active: Vec<usize> = (0..x.ncols()).filter(|&c| res[c] > tol).collect();
        let mut w = DMatrix::from_fn(n, active.len(), |r, c| {
            let col = active[c];
            precond[r] * (ax[(r, col)] - lambda[col] * x[(r, col)])
        });
        let c = x.tr_mul(&w);
        w.gemm(-1.0, &x, &c, 1.0);
        let aw = lap.apply(&w);
        let (v, av) = match &p {
            Some((pp, ap)) => (hcat(&w, pp), hcat(&aw, ap)),
            None => (w, aw),
        };
        let (v, av) = orthonormalize(Some((&x, &ax)), v, av);
        if v.ncols() == 0 {
            break;
        }
        let q = hcat(&x, &v);
        let aq = hcat(&ax, &av);
        let mut h = q.tr_mul(&aq);
        h = (&h + h.transpose()) * 0.5;
        let (vals, vecs) = sorted_eigen(h);
        let keep = x.ncols();
        let cmat = vecs.columns(0, keep).into_owned();
        let xm = x.ncols();
        let cv = cmat.rows(xm, v.ncols()).into_owned();
        x = &q * &cmat;
        ax = &aq * &cmat;
        lambda = vals[..keep].to_vec();
        p = Some((&v * &cv, &av * &cv));
    }
    let ax = lap.apply(&x);
    let res = residual_norms(&x, &ax, &lambda);
    let order: Vec<usize> = (0..s).collect();
    RawEigen {
        values: lambda[..s].to_vec(),
        vectors: select_columns(&x, &order),
        residuals: res[..s].to_vec(),
        iterations,
        converged,
    }
}

fn rayleigh_ritz(
    x: &DMatrix<f64>,
    ax: &DMatrix<f64>,
    keep: usize,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
    let mut h = x.tr_mul(ax);
    h = (&h + h.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(h);
    let c = vecs.columns(0, keep).into_owned();
    (x * &c, ax * &c, vals[..keep].to_vec())
}

/// Flip each column so its largest-magnitude entry (first on ties) is
/// positive.
pub(crate) fn fix_signs(v: &mut DMatrix<f64>) {
    for c in 0..v.ncols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for r in 0..v.nrows() {
            let a = v[(r, c)];
            if a.abs() > best {
                best = a.abs();
                sign = a.signum();
            }
        }
        if sign < 0.0 {
            v.column_mut(c).neg_mut();
        }
    }
}
