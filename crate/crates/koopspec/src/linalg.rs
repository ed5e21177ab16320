//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{KoopError, Result};

pub type CMat = DMatrix<Complex64>;

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Smallest singular value and a matching right singular vector.
pub fn smallest_singular(m: &CMat) -> Result<(f64, DVector<Complex64>)> {
    if m.ncols() == 0 {
        return Err(KoopError::Numeric("empty matrix".into()));
    }
    if m.nrows() < m.ncols() {
        // a wide matrix has a nontrivial kernel
        let mut padded = CMat::zeros(m.ncols(), m.ncols());
        padded.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        return smallest_singular(&padded);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| KoopError::Numeric("SVD did not converge".into()))?;
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bs), (k, &s)| if s < bs { (k, s) } else { (bk, bs) });
    let v = v_t.row(k).adjoint();
    Ok((s, v))
}

pub fn largest_singular(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Upper bound on the induced `ℓ^p → ℓ^p` norm: exact for `p ∈ {1, 2, ∞}`,
/// Riesz–Thorin interpolation `‖A‖_1^{1/p} ‖A‖_∞^{1-1/p}` otherwise.
pub fn induced_norm_bound(m: &CMat, p: f64) -> f64 {
    let col = (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let row = (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    if p == 1.0 {
        col
    } else if p.is_infinite() {
        row
    } else if p == 2.0 {
        largest_singular(m)
    } else {
        col.powf(1.0 / p) * row.powf(1.0 - 1.0 / p)
    }
}

/// Basis `V Σ^{-1}` of the range of `Dᴴ` scaled so that `D` maps it to
/// orthonormal vectors.
pub fn range_basis(den: &CMat) -> Result<CMat> {
    let svd = den.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| KoopError::Numeric("SVD did not converge".into()))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(KoopError::Numeric("denominator vanishes identically".into()));
    }
    let tol = smax * 1e-12 * (den.nrows().max(den.ncols()) as f64);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > tol).collect();
    let n = den.ncols();
    let mut basis = CMat::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let scale = 1.0 / svd.singular_values[k];
        for r in 0..n {
            basis[(r, c)] = v_t[(k, r)].conj() * scale;
        }
    }
    Ok(basis)
}

/// `min_c ‖N c‖_2 / ‖D c‖_2` over `c` with `D c ≠ 0`, with a minimiser.
pub fn generalized_min_p2(num: &CMat, den: &CMat) -> Result<(f64, DVector<Complex64>)> {
    let basis = range_basis(den)?;
    let reduced = num * &basis;
    let (s, y) = smallest_singular(&reduced)?;
    Ok((s, basis * y))
}

/// Accumulates the triangular factor of a tall real matrix fed in row blocks.
#[derive(Debug, Clone)]
pub struct StreamingQr {
    cols: usize,
    r: Option<DMatrix<f64>>,
    buf: Vec<f64>,
    rows: usize,
}

impl StreamingQr {
    pub fn new(cols: usize) -> StreamingQr {
        StreamingQr { cols, r: None, buf: Vec::new(), rows: 0 }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.buf.extend_from_slice(row);
        self.rows += 1;
        if self.rows >= 4096.max(4 * self.cols) {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.rows == 0 {
            return;
        }
        let block = DMatrix::from_row_slice(self.rows, self.cols, &self.buf);
        let stacked = match self.r.take() {
            Some(r) => {
                let mut s = DMatrix::zeros(r.nrows() + block.nrows(), self.cols);
                s.view_mut((0, 0), (r.nrows(), self.cols)).copy_from(&r);
                s.view_mut((r.nrows(), 0), (block.nrows(), self.cols)).copy_from(&block);
                s
            }
            None => block,
        };
        let r = stacked.qr().r();
        self.r = Some(r);
        self.buf.clear();
        self.rows = 0;
    }

    /// Square factor `R` with `RᵀR = AᵀA`.
    pub fn finish(mut self) -> DMatrix<f64> {
        self.flush();
        let r = self.r.unwrap_or_else(|| DMatrix::zeros(0, self.cols));
        let mut sq = DMatrix::zeros(self.cols, self.cols);
        let k = r.nrows().min(self.cols);
        sq.view_mut((0, 0), (k, self.cols)).copy_from(&r.rows(0, k));
        sq
    }
}
