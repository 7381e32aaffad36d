//! Dense least squares on top of faer's SVD, with QR solvers kept as test oracles.
//!
//! Everything runs with `Par::Seq` so results do not depend on thread count.

use faer::dyn_stack::{MemBuffer, MemStack};
#[cfg(test)]
use faer::linalg::householder;
#[cfg(test)]
use faer::linalg::qr::{col_pivoting, no_pivoting};
use faer::linalg::svd;
#[cfg(test)]
use faer::Conj;
use faer::{c64, Mat, MatRef, Par};

pub(crate) struct Lstsq {
    pub x: Vec<c64>,
    pub rank: usize,
}

#[cfg(test)]
/// Basic solution of `min ||A x - b||` with column equilibration and rank
/// truncation at `rcond` relative to the leading pivot.
pub(crate) fn lstsq(a: MatRef<'_, c64>, b: &[c64], rcond: f64) -> Lstsq {
    let (m0, n) = a.shape();
    assert_eq!(b.len(), m0);
    let m = m0.max(n);
    let mut col_scale = vec![0.0; n];
    let mut qr = Mat::<c64>::zeros(m, n);
    for j in 0..n {
        let s: f64 = (0..m0).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        col_scale[j] = s;
        let inv = if s > 0.0 { 1.0 / s } else { 0.0 };
        for i in 0..m0 {
            qr[(i, j)] = a[(i, j)] * inv;
        }
    }
    let size = m.min(n);
    let bs = no_pivoting::factor::recommended_block_size::<c64>(m, n);
    let mut coeff = Mat::<c64>::zeros(bs, size);
    let mut fwd = vec![0usize; n];
    let mut bwd = vec![0usize; n];
    let par = Par::Seq;
    {
        let mut mem = MemBuffer::new(col_pivoting::factor::qr_in_place_scratch::<usize, c64>(
            m,
            n,
            bs,
            par,
            Default::default(),
        ));
        col_pivoting::factor::qr_in_place(
            qr.as_mut(),
            coeff.as_mut(),
            &mut fwd,
            &mut bwd,
            par,
            MemStack::new(&mut mem),
            Default::default(),
        );
    }
    let mut rhs = Mat::<c64>::zeros(m, 1);
    for i in 0..m0 {
        rhs[(i, 0)] = b[i];
    }
    {
        let mut mem = MemBuffer::new(
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<c64>(m, bs, 1),
        );
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            qr.as_ref(),
            coeff.as_ref(),
            Conj::Yes,
            rhs.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
    }
    let r00 = if size > 0 { qr[(0, 0)].norm() } else { 0.0 };
    let mut rank = 0;
    while rank < size && qr[(rank, rank)].norm() > rcond * r00 && r00 > 0.0 {
        rank += 1;
    }
    let mut z = vec![c64::new(0.0, 0.0); rank];
    for i in (0..rank).rev() {
        let mut s = rhs[(i, 0)];
        for k in (i + 1)..rank {
            s -= qr[(i, k)] * z[k];
        }
        z[i] = s / qr[(i, i)];
    }
    let mut x = vec![c64::new(0.0, 0.0); n];
    for (k, zk) in z.iter().enumerate() {
        let j = fwd[k];
        x[j] = *zk / col_scale[j];
    }
    Lstsq { x, rank }
}

#[cfg(test)]
/// `min ||A x - b||² + ridge ||x||²` via the stacked system.
pub(crate) fn ridge_lstsq(a: MatRef<'_, c64>, b: &[c64], ridge: f64, rcond: f64) -> Lstsq {
    if ridge <= 0.0 {
        return lstsq(a, b, rcond);
    }
    let (m, n) = a.shape();
    let s = ridge.sqrt();
    let mut aug = Mat::<c64>::zeros(m + n, n);
    for j in 0..n {
        for i in 0..m {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(m + j, j)] = c64::new(s, 0.0);
    }
    let mut rhs = b.to_vec();
    rhs.resize(m + n, c64::new(0.0, 0.0));
    lstsq(aug.as_ref(), &rhs, rcond)
}

/// Thin SVD `(U, s, V)` computed sequentially.
fn thin_svd(a: MatRef<'_, c64>) -> Option<(Mat<c64>, Vec<f64>, Mat<c64>)> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut s = faer::diag::Diag::<c64>::zeros(k);
    let mut u = Mat::<c64>::zeros(m, k);
    let mut v = Mat::<c64>::zeros(n, k);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(svd::svd_scratch::<c64>(
        m,
        n,
        svd::ComputeSvdVectors::Thin,
        svd::ComputeSvdVectors::Thin,
        par,
        Default::default(),
    ));
    svd::svd(
        a,
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .ok()?;
    let sv = (0..k).map(|i| s[i].re).collect();
    Some((u, sv, v))
}

/// Minimal-norm Tikhonov solution of `min ||A x - b||² + ridge ||x||²`.
///
/// Filter factors `s/(s² + ridge)`; directions with `s <= rcond s₀` are dropped.
/// `rank` counts the kept directions.
pub(crate) fn svd_lstsq(a: MatRef<'_, c64>, b: &[c64], ridge: f64, rcond: f64) -> Option<Lstsq> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m);
    let (u, s, v) = thin_svd(a)?;
    let s0 = s.first().copied().unwrap_or(0.0);
    let mut x = vec![c64::new(0.0, 0.0); n];
    let mut rank = 0;
    for (i, &si) in s.iter().enumerate() {
        if !(si > rcond * s0) {
            continue;
        }
        rank += 1;
        let mut ub = c64::new(0.0, 0.0);
        for r in 0..m {
            ub += u[(r, i)].conj() * b[r];
        }
        let f = ub * (si / (si * si + ridge.max(0.0)));
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += v[(j, i)] * f;
        }
    }
    Some(Lstsq { x, rank })
}

/// Singular values, descending.
pub(crate) fn singular_values(a: MatRef<'_, c64>) -> Vec<f64> {
    let mut sv = a.singular_values().unwrap_or_default();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}
