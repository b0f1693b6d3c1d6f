// Row-major matrix kernels shared by the tape's forward and backward rules.

const MR: usize = 4;
const NR: usize = 4;

/// `c[m×n] += a[m×k] · b[k×n]`, tiled so a 4×4 block of `c` stays in
/// registers across the whole `k` loop.
pub(crate) fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    if k == 0 || n == 0 {
        return;
    }
    let m_main = m - m % MR;
    let n_main = n - n % NR;
    for i0 in (0..m_main).step_by(MR) {
        for j0 in (0..n_main).step_by(NR) {
            let mut acc = [[0.0f64; NR]; MR];
            let row = |r: usize| &a[(i0 + r) * k..(i0 + r + 1) * k];
            let (a0, a1, a2, a3) = (row(0), row(1), row(2), row(3));
            let quads = a0.iter().zip(a1).zip(a2).zip(a3);
            for ((((&x0, &x1), &x2), &x3), brow) in quads.zip(b.chunks_exact(n)) {
                let bv: &[f64; NR] = brow[j0..j0 + NR].try_into().unwrap();
                for (row, av) in acc.iter_mut().zip([x0, x1, x2, x3]) {
                    for (x, &y) in row.iter_mut().zip(bv) {
                        *x += av * y;
                    }
                }
            }
            for (r, row) in acc.iter().enumerate() {
                let out = &mut c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR];
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            }
        }
        for i in i0..i0 + MR {
            gemm_row_tail(c, a, b, i, k, n, n_main);
        }
    }
    for i in m_main..m {
        gemm_row_tail(c, a, b, i, k, n, 0);
    }
}

fn gemm_row_tail(c: &mut [f64], a: &[f64], b: &[f64], i: usize, k: usize, n: usize, from: usize) {
    if from == n {
        return;
    }
    let out = &mut c[i * n + from..(i + 1) * n];
    for p in 0..k {
        let av = a[i * k + p];
        let brow = &b[p * n + from..(p + 1) * n];
        for (o, &bv) in out.iter_mut().zip(brow) {
            *o += av * bv;
        }
    }
}

/// `a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    gemm_acc(&mut out, a, b, m, k, n);
    out
}

/// `acc[m×k] += g[m×n] · b[k×n]ᵀ`
pub(crate) fn matmul_nt_acc(acc: &mut [f64], g: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    let bt = transpose(b, k, n);
    gemm_acc(acc, g, &bt, m, n, k);
}

/// `acc[k×n] += a[m×k]ᵀ · g[m×n]`
pub(crate) fn matmul_tn_acc(acc: &mut [f64], a: &[f64], g: &[f64], m: usize, k: usize, n: usize) {
    let at = transpose(a, m, k);
    gemm_acc(acc, &at, g, k, m, n);
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}
