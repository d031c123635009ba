//! Dense row-major kernels for the Gaussian model. Matrices are `d x d`
//! `Vec<f64>` in row-major order; only the lower triangle is meaningful for
//! symmetric and triangular inputs.

use crate::error::{Error, Result};

const BLOCK: usize = 96;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `c[rows_c, cols_c] += alpha * a * b` on strided views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_off: usize,
    rsa: usize,
    csa: usize,
    b: &[f64],
    b_off: usize,
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    c_off: usize,
    rsc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // Bounds of every strided view, checked before handing raw pointers over.
    assert!(a_off + (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(b_off + (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c_off + (m - 1) * rsc + (n - 1) < c.len());
    // SAFETY: all accessed elements lie inside the slices (asserted above) and
    // `c` is borrowed mutably, so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(a_off),
            rsa as isize,
            csa as isize,
            b.as_ptr().add(b_off),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr().add(c_off),
            rsc as isize,
            1,
        );
    }
}

/// Accumulates the lower block triangle of `xᵀx` into `acc` (`d x d`), where
/// `x` holds `rows` rows of length `d`.
pub(crate) fn gram_lower_accumulate(x: &[f64], rows: usize, d: usize, acc: &mut [f64]) {
    debug_assert_eq!(x.len(), rows * d);
    for i0 in (0..d).step_by(BLOCK) {
        let bi = BLOCK.min(d - i0);
        for j0 in (0..=i0).step_by(BLOCK) {
            let bj = BLOCK.min(d - j0);
            gemm(
                bi,
                rows,
                bj,
                1.0,
                x,
                i0,
                1,
                d,
                x,
                j0,
                d,
                1,
                acc,
                i0 * d + j0,
                d,
            );
        }
    }
}

/// Copies the lower triangle onto the upper one.
#[cfg(test)]
pub(crate) fn symmetrize_from_lower(a: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            a[j * d + i] = a[i * d + j];
        }
    }
}

/// In-place lower Cholesky factorization `a = L Lᵀ`. On success the lower
/// triangle of `a` holds `L` and the strict upper triangle is zeroed.
pub(crate) fn cholesky_in_place(a: &mut [f64], d: usize) -> Result<()> {
    for k0 in (0..d).step_by(BLOCK) {
        let kb = BLOCK.min(d - k0);
        let k1 = k0 + kb;

        // diagonal block, unblocked
        for j in k0..k1 {
            let row_j = j * d;
            let s = a[row_j + j] - dot(&a[row_j + k0..row_j + j], &a[row_j + k0..row_j + j]);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Numerical(format!(
                    "covariance is not positive definite at pivot {j} (value {s:e}); increase eps"
                )));
            }
            let ljj = s.sqrt();
            a[row_j + j] = ljj;
            for i in j + 1..k1 {
                let row_i = i * d;
                let (upper, lower) = a.split_at_mut(row_i);
                let v = lower[j] - dot(&lower[k0..j], &upper[row_j + k0..row_j + j]);
                lower[j] = v / ljj;
            }
        }

        // panel below the diagonal block
        for i in k1..d {
            let row_i = i * d;
            for j in k0..k1 {
                let row_j = j * d;
                let (upper, lower) = a.split_at_mut(row_i);
                let v = lower[j] - dot(&lower[k0..j], &upper[row_j + k0..row_j + j]);
                lower[j] = v / upper[row_j + j];
            }
        }

        // trailing update of the lower block triangle: A22 -= L21 L21ᵀ
        if k1 < d {
            let panel: Vec<f64> = (k1..d)
                .flat_map(|i| a[i * d + k0..i * d + k1].iter().copied())
                .collect();
            let rest = d - k1;
            for i0 in (0..rest).step_by(BLOCK) {
                let bi = BLOCK.min(rest - i0);
                for j0 in (0..=i0).step_by(BLOCK) {
                    let bj = BLOCK.min(rest - j0);
                    gemm(
                        bi,
                        kb,
                        bj,
                        -1.0,
                        &panel,
                        i0 * kb,
                        kb,
                        1,
                        &panel,
                        j0 * kb,
                        1,
                        kb,
                        a,
                        (k1 + i0) * d + k1 + j0,
                        d,
                    );
                }
            }
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            a[i * d + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L w = b` in place by forward substitution.
pub(crate) fn forward_substitute(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let row = &l[i * d..i * d + i];
        let s = b[i] - dot(row, &b[..i]);
        b[i] = s / l[i * d + i];
    }
}

/// Solves `W Lᵀ = X` in place for a batch of `rows` row vectors, i.e. forward
/// substitution applied to every row of `x`.
pub(crate) fn forward_substitute_rows(l: &[f64], d: usize, x: &mut [f64], rows: usize) {
    debug_assert_eq!(x.len(), rows * d);
    for k0 in (0..d).step_by(BLOCK) {
        let kb = BLOCK.min(d - k0);
        if k0 > 0 {
            // X[:, K] -= W[:, :k0] L[K, :k0]ᵀ
            let solved: Vec<f64> = x
                .chunks_exact(d)
                .flat_map(|r| r[..k0].iter().copied())
                .collect();
            gemm(
                rows,
                k0,
                kb,
                -1.0,
                &solved,
                0,
                k0,
                1,
                l,
                k0 * d,
                1,
                d,
                x,
                k0,
                d,
            );
        }
        for r in 0..rows {
            let row = &mut x[r * d..(r + 1) * d];
            for i in k0..k0 + kb {
                let li = &l[i * d + k0..i * d + i];
                let s = row[i] - dot(li, &row[k0..i]);
                row[i] = s / l[i * d + i];
            }
        }
    }
}

/// Inverse of a lower-triangular matrix, itself lower triangular.
pub(crate) fn invert_lower(l: &[f64], d: usize) -> Vec<f64> {
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        let lii = l[i * d + i];
        let mut row = vec![0.0; i + 1];
        for p in 0..i {
            let lip = l[i * d + p];
            if lip != 0.0 {
                let src = &inv[p * d..p * d + p + 1];
                for (r, s) in row[..=p].iter_mut().zip(src) {
                    *r -= lip * s;
                }
            }
        }
        for v in row.iter_mut() {
            *v /= lii;
        }
        row[i] = 1.0 / lii;
        inv[i * d..i * d + i + 1].copy_from_slice(&row);
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += b[i * d + k] * b[j * d + k];
                }
                a[i * d + j] = s + if i == j { d as f64 } else { 0.0 };
            }
        }
        a
    }

    fn reassemble(l: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += l[i * d + k] * l[j * d + k];
                }
                out[i * d + j] = s;
            }
        }
        out
    }

    #[test]
    fn cholesky_reassembles_across_block_sizes() {
        for &d in &[1, 3, 17, 96, 97, 250] {
            let a = random_spd(d, d as u64);
            let mut l = a.clone();
            cholesky_in_place(&mut l, d).unwrap();
            let back = reassemble(&l, d);
            let err = a
                .iter()
                .zip(&back)
                .map(|(x, y)| (x - y).abs() / (1.0 + x.abs()))
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "d={d} err={err}");
            for i in 0..d {
                assert!(l[i * d + i] > 0.0);
                for j in i + 1..d {
                    assert_eq!(l[i * d + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky_in_place(&mut a, 2),
            Err(Error::Numerical(_))
        ));
        let mut z = vec![0.0; 9];
        assert!(cholesky_in_place(&mut z, 3).is_err());
    }

    #[test]
    fn gram_matches_naive() {
        let (rows, d) = (13, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut acc = vec![0.0; d * d];
        gram_lower_accumulate(&x, rows, d, &mut acc);
        symmetrize_from_lower(&mut acc, d);
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..rows).map(|r| x[r * d + i] * x[r * d + j]).sum();
                assert!((s - acc[i * d + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batched_forward_substitution_matches_single() {
        let d = 210;
        let mut l = random_spd(d, 1);
        cholesky_in_place(&mut l, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = 7;
        let x: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut batch = x.clone();
        forward_substitute_rows(&l, d, &mut batch, rows);
        for r in 0..rows {
            let mut single = x[r * d..(r + 1) * d].to_vec();
            forward_substitute(&l, d, &mut single);
            for (a, b) in single.iter().zip(&batch[r * d..(r + 1) * d]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_times_factor_is_identity() {
        let d = 150;
        let mut l = random_spd(d, 3);
        cholesky_in_place(&mut l, d).unwrap();
        let inv = invert_lower(&l, d);
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| inv[i * d + k] * l[k * d + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-12);
            }
        }
    }
}
