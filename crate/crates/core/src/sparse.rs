//! Small helpers on top of `nalgebra_sparse` CSR matrices: Kronecker
//! products, block assembly, row/column selection and dense conversion.

use faer::Mat;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

pub type Csr = CsrMatrix<f64>;

pub fn identity(n: usize) -> Csr {
    CsrMatrix::identity(n)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Csr, b: &Csr) -> Csr {
    let mut coo = CooMatrix::new(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    for (ia, ja, &va) in a.triplet_iter() {
        for (ib, jb, &vb) in b.triplet_iter() {
            coo.push(ia * b.nrows() + ib, ja * b.ncols() + jb, va * vb);
        }
    }
    CsrMatrix::from(&coo)
}

/// Assembles a block matrix. `None` blocks are zero; every block row must
/// contain at least one block fixing its height, same for block columns.
pub fn block(blocks: &[Vec<Option<&Csr>>]) -> Csr {
    let nbr = blocks.len();
    let nbc = blocks[0].len();
    let mut heights = vec![None; nbr];
    let mut widths = vec![None; nbc];
    for (r, row) in blocks.iter().enumerate() {
        assert_eq!(row.len(), nbc, "ragged block matrix");
        for (c, b) in row.iter().enumerate() {
            if let Some(m) = b {
                assert!(heights[r].is_none_or(|h| h == m.nrows()), "block height mismatch");
                assert!(widths[c].is_none_or(|w| w == m.ncols()), "block width mismatch");
                heights[r] = Some(m.nrows());
                widths[c] = Some(m.ncols());
            }
        }
    }
    let heights: Vec<usize> = heights.into_iter().map(|h| h.expect("empty block row")).collect();
    let widths: Vec<usize> = widths.into_iter().map(|w| w.expect("empty block column")).collect();
    let roff: Vec<usize> = offsets(&heights);
    let coff: Vec<usize> = offsets(&widths);
    let mut coo = CooMatrix::new(roff[nbr], coff[nbc]);
    for (r, row) in blocks.iter().enumerate() {
        for (c, b) in row.iter().enumerate() {
            if let Some(m) = b {
                for (i, j, &v) in m.triplet_iter() {
                    coo.push(roff[r] + i, coff[c] + j, v);
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(sizes.len() + 1);
    o.push(0);
    for s in sizes {
        o.push(o.last().unwrap() + s);
    }
    o
}

pub fn scale(a: &Csr, s: f64) -> Csr {
    let mut out = a.clone();
    out.values_mut().iter_mut().for_each(|v| *v *= s);
    out
}

/// Sub-matrix keeping the listed rows and columns (in the given order).
pub fn select(a: &Csr, rows: &[usize], cols: &[usize]) -> Csr {
    let mut col_map = vec![usize::MAX; a.ncols()];
    for (k, &c) in cols.iter().enumerate() {
        col_map[c] = k;
    }
    let mut coo = CooMatrix::new(rows.len(), cols.len());
    for (k, &r) in rows.iter().enumerate() {
        let row = a.row(r);
        for (&c, &v) in row.col_indices().iter().zip(row.values()) {
            if col_map[c] != usize::MAX {
                coo.push(k, col_map[c], v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn matvec(a: &Csr, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows())
        .map(|r| {
            let row = a.row(r);
            row.col_indices().iter().zip(row.values()).map(|(&c, v)| v * x[c]).sum()
        })
        .collect()
}

/// `a^T x`.
pub fn matvec_t(a: &Csr, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.nrows(), x.len());
    let mut y = vec![0.0; a.ncols()];
    for (i, j, &v) in a.triplet_iter() {
        y[j] += v * x[i];
    }
    y
}

pub fn to_dense(a: &Csr) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        m[(i, j)] += v;
    }
    m
}

pub fn max_abs(a: &Csr) -> f64 {
    a.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Frobenius norm.
pub fn norm_fro(a: &Csr) -> f64 {
    a.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn transpose(a: &Csr) -> Csr {
    a.transpose()
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
