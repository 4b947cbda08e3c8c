//! Small dense linear-algebra kernels over `Complex64`.
//!
//! Multi-register vectors use row-major ordering: for register dimensions
//! `[d0, d1, ..., dk]` the flat index is `((i0 * d1 + i1) * d2 + i2) ...`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &CMat) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// `(A + A†) / 2`.
pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues descending.
/// Columns of the returned matrix are the matching eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Applies `f` to the spectrum of the Hermitian part of `m`.
pub fn hermitian_map(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// PSD square root with eigenvalues clamped at zero.
pub fn sqrt_psd(m: &CMat) -> CMat {
    hermitian_map(m, |x| x.max(0.0).sqrt())
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    jacobi_svd(m).1
}

/// Thin one-sided Jacobi SVD: `m = U diag(s) V†` with `p = min(rows, cols)`
/// columns in `U` and `V` and `s` descending. Columns of `U` paired with
/// numerically zero singular values are left zero. Used instead of the
/// bidiagonal routine, which loses accuracy on some rank-deficient complex
/// inputs.
fn jacobi_svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows < cols {
        // work on m† so that columns are the short side
        let (u, s, v) = jacobi_svd(&m.adjoint());
        return (v, s, u);
    }
    let mut a = m.clone();
    let mut v = CMat::identity(cols, cols);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // make the overlap real by rephasing column q
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase;
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let floor = s.first().copied().unwrap_or(0.0) * rows as f64 * f64::EPSILON;
    let mut u = CMat::zeros(rows, cols);
    let mut vs = CMat::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        vs.set_column(dst, &v.column(src));
        if norms[src] > floor {
            u.set_column(dst, &(a.column(src) / c(norms[src], 0.0)));
        }
    }
    (u, s, vs)
}

/// Full singular value decomposition `m = U diag(s) V†` with square unitary
/// `U` (rows x rows) and `V` (cols x cols); `s` is descending with
/// `min(rows, cols)` entries.
pub fn svd_full(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (r, k) = (m.nrows(), m.ncols());
    let p = r.min(k);
    if p == 0 {
        return (CMat::identity(r, r), Vec::new(), CMat::identity(k, k));
    }
    let (u, s, v) = jacobi_svd(m);
    // vectors paired with numerically zero singular values are rebuilt
    let floor = s[0] * (r.max(k) as f64) * f64::EPSILON;
    let kept = s.iter().take(p).filter(|&&x| x > floor).count();
    let u_kept = u.columns(0, kept).into_owned();
    let v_kept = v.columns(0, kept).into_owned();
    (complete_basis(&u_kept), s[..p].to_vec(), complete_basis(&v_kept))
}

/// Extends orthonormal columns to a square unitary by Gram-Schmidt against
/// the standard basis.
pub fn complete_basis(cols: &CMat) -> CMat {
    let n = cols.nrows();
    let mut basis: Vec<CVec> = (0..cols.ncols()).map(|j| cols.column(j).into_owned()).collect();
    let mut e = 0;
    while basis.len() < n && e < n {
        let mut v = CVec::zeros(n);
        v[e] = c(1.0, 0.0);
        e += 1;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / c(norm, 0.0));
        }
    }
    let mut out = CMat::zeros(n, n);
    for (j, b) in basis.iter().enumerate().take(n) {
        out.set_column(j, b);
    }
    out
}

/// Unitary `U` with `U * embed = iso`, for two isometries of equal shape.
pub fn extend_isometry(iso: &CMat, embed: &CMat) -> CMat {
    let n = iso.nrows();
    let k = iso.ncols();
    let full_iso = complete_basis(iso);
    let full_embed = complete_basis(embed);
    let mut u = iso * embed.adjoint();
    if k < n {
        let iso_c = full_iso.columns(k, n - k);
        let emb_c = full_embed.columns(k, n - k);
        u += iso_c * emb_c.adjoint();
    }
    u
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Lifts an operator acting on `targets` (in the listed order) to the full
/// register space described by `dims`.
pub fn embed_operator(dims: &[usize], targets: &[usize], op: &CMat) -> CMat {
    let total: usize = dims.iter().product();
    let sub: usize = targets.iter().map(|&t| dims[t]).product();
    assert_eq!(op.nrows(), sub, "operator does not match target registers");
    assert_eq!(op.ncols(), sub, "operator must be square");
    let st = strides(dims);
    let sub_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let sub_st = strides(&sub_dims);
    // sub-index of each full index, and the "rest" offset with targets zeroed
    let mut out = CMat::zeros(total, total);
    for col in 0..total {
        let mut sub_col = 0;
        let mut base = col;
        for (k, &t) in targets.iter().enumerate() {
            let digit = (col / st[t]) % dims[t];
            sub_col += digit * sub_st[k];
            base -= digit * st[t];
        }
        for sub_row in 0..sub {
            let v = op[(sub_row, sub_col)];
            if v == c(0.0, 0.0) {
                continue;
            }
            let mut row = base;
            for (k, &t) in targets.iter().enumerate() {
                let digit = (sub_row / sub_st[k]) % dims[t];
                row += digit * st[t];
            }
            out[(row, col)] += v;
        }
    }
    out
}

/// Applies an operator on `targets` to a multi-register vector.
pub fn apply_on(state: &CVec, dims: &[usize], targets: &[usize], op: &CMat) -> CVec {
    let total: usize = dims.iter().product();
    assert_eq!(state.len(), total);
    let st = strides(dims);
    let sub_dims: Vec<usize> = targets.iter().map(|&t| dims[t]).collect();
    let sub: usize = sub_dims.iter().product();
    let sub_st = strides(&sub_dims);
    let mut out = CVec::zeros(total);
    let mut local = vec![c(0.0, 0.0); sub];
    let mut visited = vec![false; total];
    for start in 0..total {
        if visited[start] {
            continue;
        }
        // base index with all target digits zero
        let mut base = start;
        for &t in targets {
            base -= ((start / st[t]) % dims[t]) * st[t];
        }
        let index_of = |s: usize| -> usize {
            let mut idx = base;
            for (k, &t) in targets.iter().enumerate() {
                idx += ((s / sub_st[k]) % dims[t]) * st[t];
            }
            idx
        };
        for (s, slot) in local.iter_mut().enumerate() {
            let idx = index_of(s);
            visited[idx] = true;
            *slot = state[idx];
        }
        for r in 0..sub {
            let mut acc = c(0.0, 0.0);
            for (s, v) in local.iter().enumerate() {
                acc += op[(r, s)] * v;
            }
            out[index_of(r)] = acc;
        }
    }
    out
}

/// Reorders the registers of a vector: output register `j` is input
/// register `order[j]`.
pub fn permute_registers(state: &CVec, dims: &[usize], order: &[usize]) -> CVec {
    let st = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let new_st = strides(&new_dims);
    let mut out = CVec::zeros(state.len());
    for (idx, v) in state.iter().enumerate() {
        let mut new_idx = 0;
        for (j, &o) in order.iter().enumerate() {
            new_idx += ((idx / st[o]) % dims[o]) * new_st[j];
        }
        out[new_idx] = *v;
    }
    out
}

/// Reduced density matrix of a pure multi-register vector on the registers
/// in `keep` (output ordered as listed).
pub fn reduce_pure(state: &CVec, dims: &[usize], keep: &[usize]) -> CMat {
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let mut order = keep.to_vec();
    order.extend(&rest);
    let permuted = permute_registers(state, dims, &order);
    let dk: usize = keep.iter().map(|&k| dims[k]).product();
    let dr: usize = rest.iter().map(|&r| dims[r]).product();
    // row-major reshape to dk x dr, then M M†
    let m = CMat::from_fn(dk, dr, |i, j| permuted[i * dr + j]);
    &m * m.adjoint()
}

/// Reduced density matrix of an operator on `dims` keeping `keep`.
pub fn reduce_mixed(rho: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let st = strides(dims);
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let keep_st = strides(&keep_dims);
    let dk: usize = keep_dims.iter().product();
    let total: usize = dims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let mut out = CMat::zeros(dk, dk);
    let kept_index =
        |idx: usize| -> usize { keep.iter().enumerate().map(|(j, &k)| ((idx / st[k]) % dims[k]) * keep_st[j]).sum() };
    let rest_key = |idx: usize| -> Vec<usize> { rest.iter().map(|&r| (idx / st[r]) % dims[r]).collect() };
    for i in 0..total {
        let ki = kept_index(i);
        let ri = rest_key(i);
        for j in 0..total {
            if rest_key(j) == ri {
                out[(ki, kept_index(j))] += rho[(i, j)];
            }
        }
    }
    out
}

/// Operator norm deviation of `m` from the identity.
pub fn identity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let d = m - CMat::identity(n, n);
    singular_values(&d).first().copied().unwrap_or(0.0)
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    m.nrows() == m.ncols() && identity_defect(&(m.adjoint() * m)) <= tol
}

pub fn basis_vector(dim: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[i] = c(1.0, 0.0);
    v
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0))))
}

/// Cyclic shift `|r> -> |r + k mod dim>`.
pub fn shift_matrix(dim: usize, k: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for r in 0..dim {
        m[((r + k) % dim, r)] = c(1.0, 0.0);
    }
    m
}

/// Permutation matrix sending basis vector `j` to `perm[j]`.
pub fn permutation_matrix(perm: &[usize]) -> CMat {
    let n = perm.len();
    let mut m = CMat::zeros(n, n);
    for (j, &p) in perm.iter().enumerate() {
        m[(p, j)] = c(1.0, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_matches_kron_for_adjacent_targets() {
        let x = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let full = embed_operator(&[2, 3], &[0], &x);
        let expect = kron(&x, &CMat::identity(3, 3));
        assert!((full - expect).norm() < 1e-14);
        let full = embed_operator(&[2, 2], &[1], &x);
        let expect = kron(&CMat::identity(2, 2), &x);
        assert!((full - expect).norm() < 1e-14);
    }

    #[test]
    fn apply_on_agrees_with_embedded_operator() {
        let dims = [2, 3, 2];
        let v = CVec::from_fn(12, |i, _| c(i as f64, -(i as f64) / 3.0));
        let op = CMat::from_fn(4, 4, |i, j| c((i * 4 + j) as f64, (i as f64) - (j as f64)));
        let direct = apply_on(&v, &dims, &[2, 0], &op);
        let via = embed_operator(&dims, &[2, 0], &op) * &v;
        assert!((direct - via).norm() < 1e-12);
    }

    #[test]
    fn reduce_pure_matches_reduce_mixed() {
        let v = CVec::from_fn(12, |i, _| c((i as f64).sin(), (i as f64).cos()));
        let v = &v / c(v.norm(), 0.0);
        let rho = &v * v.adjoint();
        let dims = [2, 3, 2];
        for keep in [vec![0], vec![1, 0], vec![2], vec![0, 2]] {
            let a = reduce_pure(&v, &dims, &keep);
            let b = reduce_mixed(&rho, &dims, &keep);
            assert!((a - b).norm() < 1e-12, "keep {keep:?}");
        }
    }

    #[test]
    fn svd_full_reconstructs() {
        let m = CMat::from_fn(3, 2, |i, j| c(i as f64 + 1.0, j as f64 - 0.5));
        let (u, s, v) = svd_full(&m);
        let mut sig = CMat::zeros(3, 2);
        for (i, x) in s.iter().enumerate() {
            sig[(i, i)] = c(*x, 0.0);
        }
        assert!((&u * sig * v.adjoint() - &m).norm() < 1e-12);
        assert!(is_unitary(&u, 1e-12) && is_unitary(&v, 1e-12));
    }

    #[test]
    fn svd_of_rank_deficient_complex_matrices() {
        // rank one with zero rows, the shape that trips the bidiagonal routine
        let left = CVec::from_fn(12, |i, _| {
            if i % 3 == 2 {
                c(0.0, 0.0)
            } else {
                c(0.1 * i as f64 - 0.4, 0.05 * (i * i) as f64 - 0.2)
            }
        });
        let right = CVec::from_fn(4, |i, _| c(0.3 - 0.2 * i as f64, 0.1 * i as f64));
        let rank_one = &left * right.adjoint();
        for m in [rank_one.clone(), rank_one.adjoint()] {
            let (u, s, v) = svd_full(&m);
            let mut sig = CMat::zeros(m.nrows(), m.ncols());
            for (i, x) in s.iter().enumerate() {
                sig[(i, i)] = c(*x, 0.0);
            }
            assert!((&u * sig * v.adjoint() - &m).norm() < 1e-14);
            assert!(is_unitary(&u, 1e-12) && is_unitary(&v, 1e-12));
            assert!((s[0] - left.norm() * right.norm()).abs() < 1e-14);
            assert!(s[1..].iter().all(|&x| x < 1e-15));
        }
    }

    #[test]
    fn extend_isometry_is_unitary() {
        let embed = CMat::from_fn(4, 2, |i, j| if i == 2 * j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let iso = complete_basis(&CMat::from_fn(4, 1, |i, _| c(0.5, i as f64 * 0.0)));
        let iso = iso.columns(0, 2).into_owned();
        let u = extend_isometry(&iso, &embed);
        assert!(is_unitary(&u, 1e-12));
        assert!((&u * &embed - &iso).norm() < 1e-12);
    }
}
