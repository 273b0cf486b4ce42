//! Orthogonal alignment of eigenvectors with reference eigenfunctions inside
//! each multiplicity group.

use nalgebra::DMatrix;

use super::{empirical_error, EigenSystem};
use crate::error::{config, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub aligned: DMatrix<f64>,
    pub errors_before: Vec<f64>,
    pub errors_after: Vec<f64>,
    /// Group id per column (copied from the reference).
    pub groups: Vec<usize>,
    /// `sqrt` of the summed squared per-vector errors of each group, before
    /// and after alignment.
    pub group_errors_before: Vec<f64>,
    pub group_errors_after: Vec<f64>,
}

fn column_errors(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols())
        .map(|c| {
            empirical_error(a.column(c).as_slice(), b.column(c).as_slice())
                .expect("equal column lengths")
        })
        .collect()
}

fn group_totals(errors: &[f64], groups: &[usize]) -> Vec<f64> {
    let count = groups.last().map_or(0, |g| g + 1);
    let mut out = vec![0.0; count];
    for (e, &g) in errors.iter().zip(groups) {
        out[g] += e * e;
    }
    out.into_iter().map(f64::sqrt).collect()
}

/// Rotate the eigenvectors of each group by the orthogonal matrix that
/// best matches the reference columns in Frobenius norm. `reference` holds
/// the reference eigenfunction values at the samples, one column per
/// eigenvector; `groups` must be contiguous ids starting at 0.
pub fn align_to_reference(eig: &EigenSystem, reference: &DMatrix<f64>, groups: &[usize]) -> Result<Alignment> {
    let u = &eig.vectors;
    if reference.shape() != u.shape() || groups.len() != u.ncols() {
        return Err(config(format!(
            "reference shape {:?} with {} group ids does not match eigenvectors {:?}",
            reference.shape(),
            groups.len(),
            u.shape()
        )));
    }
    if groups.first().is_some_and(|&g| g != 0) || groups.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
        return Err(config("group ids must be contiguous and start at 0"));
    }
    let mut aligned = u.clone();
    let mut start = 0;
    while start < groups.len() {
        let mut end = start + 1;
        while end < groups.len() && groups[end] == groups[start] {
            end += 1;
        }
        let width = end - start;
        let ug = u.columns(start, width);
        let bg = reference.columns(start, width);
        let m = ug.tr_mul(&bg);
        let svd = m.svd(true, true);
        let q = svd.u.expect("left vectors") * svd.v_t.expect("right vectors");
        aligned.columns_mut(start, width).copy_from(&(ug * q));
        start = end;
    }
    let errors_before = column_errors(u, reference);
    let errors_after = column_errors(&aligned, reference);
    Ok(Alignment {
        group_errors_before: group_totals(&errors_before, groups),
        group_errors_after: group_totals(&errors_after, groups),
        aligned,
        errors_before,
        errors_after,
        groups: groups.to_vec(),
    })
}
