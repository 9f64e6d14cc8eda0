//! Sequential matrix kernels with a fixed accumulation order.

use std::cell::RefCell;

const MR: usize = 4;
const NR: usize = 4;

thread_local! {
    // packing buffers, reused across calls
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// `out[m×n] = a[m×k] · b[k×n]`. Each output is summed over the inner
/// index in increasing order; tiling only changes which outputs are live.
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    SCRATCH.with_borrow_mut(|(lhs, rhs)| {
        pack_rows(lhs, m, k, |i, p| a[i * k + p]);
        pack_cols(rhs, k, n, |p, j| b[p * n + j]);
        tiled(&mut out, m, n, k, lhs, rhs);
    });
    out
}

/// `out[k×n] += aᵀ · g` for `a[m×k]`, `g[m×n]`.
pub(crate) fn matmul_tn_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    SCRATCH.with_borrow_mut(|(lhs, rhs)| {
        pack_rows(lhs, k, m, |p, i| a[i * k + p]);
        pack_cols(rhs, m, n, |i, j| g[i * n + j]);
        tiled(out, k, n, m, lhs, rhs);
    });
}

/// Panels of `MR` rows, depth-major (`panel[t·MR + r]`), zero padded.
fn pack_rows(buf: &mut Vec<f64>, rows: usize, depth: usize, at: impl Fn(usize, usize) -> f64) {
    buf.resize(rows.div_ceil(MR) * depth * MR, 0.0);
    if depth == 0 {
        return;
    }
    for (pi, panel) in buf.chunks_exact_mut(depth * MR).enumerate() {
        let valid = MR.min(rows - pi * MR);
        for t in 0..depth {
            for r in 0..MR {
                panel[t * MR + r] = if r < valid { at(pi * MR + r, t) } else { 0.0 };
            }
        }
    }
}

/// Panels of `NR` columns, depth-major (`panel[t·NR + c]`), zero padded.
fn pack_cols(buf: &mut Vec<f64>, depth: usize, cols: usize, at: impl Fn(usize, usize) -> f64) {
    buf.resize(cols.div_ceil(NR) * depth * NR, 0.0);
    if depth == 0 {
        return;
    }
    for (pj, panel) in buf.chunks_exact_mut(depth * NR).enumerate() {
        let valid = NR.min(cols - pj * NR);
        for t in 0..depth {
            for c in 0..NR {
                panel[t * NR + c] = if c < valid { at(t, pj * NR + c) } else { 0.0 };
            }
        }
    }
}

/// `out[rows×cols] += lhs · rhs` over packed panels.
fn tiled(out: &mut [f64], rows: usize, cols: usize, depth: usize, lhs: &[f64], rhs: &[f64]) {
    if depth == 0 {
        return;
    }
    for (pi, lp) in lhs.chunks_exact(depth * MR).enumerate() {
        let (r0, nr) = (pi * MR, MR.min(rows - pi * MR));
        for (pj, rp) in rhs.chunks_exact(depth * NR).enumerate() {
            let (c0, nc) = (pj * NR, NR.min(cols - pj * NR));
            let mut acc = [[0.0f64; NR]; MR];
            for r in 0..nr {
                acc[r][..nc].copy_from_slice(&out[(r0 + r) * cols + c0..(r0 + r) * cols + c0 + nc]);
            }
            for (av, bv) in lp.chunks_exact(MR).zip(rp.chunks_exact(NR)) {
                for r in 0..MR {
                    for c in 0..NR {
                        acc[r][c] += av[r] * bv[c];
                    }
                }
            }
            for r in 0..nr {
                out[(r0 + r) * cols + c0..(r0 + r) * cols + c0 + nc].copy_from_slice(&acc[r][..nc]);
            }
        }
    }
}

/// `out[m×k] += g · bᵀ` for `g[m×n]`, `b[k×n]`.
pub(crate) fn matmul_nt_acc(g: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    SCRATCH.with_borrow_mut(|(lhs, rhs)| {
        pack_rows(lhs, m, n, |i, t| g[i * n + t]);
        pack_cols(rhs, n, k, |t, p| b[p * n + t]);
        tiled(out, m, k, n, lhs, rhs);
    });
}
