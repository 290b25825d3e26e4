//! Dense row-major `f64` matrices sized for desk-scale signal work.
//!
//! Rows are channels (or basis functions), columns are frames. The matmul
//! keeps a fixed accumulation order (k ascending per output element) so the
//! batch and streaming inference paths produce bit-identical sums.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self * rhs`. Every output element accumulates over the inner
    /// dimension in blocks of four, each block summed left to right,
    /// the exact grouping [`Mat::matvec`] uses, so per-frame streaming
    /// reproduces batch results bit for bit.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        const TILE: usize = 512;
        let n = rhs.cols;
        let kk = self.cols;
        let mut j0 = 0;
        while j0 < n {
            let j1 = (j0 + TILE).min(n);
            for i in 0..self.rows {
                let a_row = self.row(i);
                let out_row = &mut out.data[i * n + j0..i * n + j1];
                let len = out_row.len();
                let mut k = 0;
                while k + 4 <= kk {
                    let (a0, a1, a2, a3) = (a_row[k], a_row[k + 1], a_row[k + 2], a_row[k + 3]);
                    let b0 = &rhs.data[k * n + j0..][..len];
                    let b1 = &rhs.data[(k + 1) * n + j0..][..len];
                    let b2 = &rhs.data[(k + 2) * n + j0..][..len];
                    let b3 = &rhs.data[(k + 3) * n + j0..][..len];
                    for j in 0..len {
                        out_row[j] += ((a0 * b0[j] + a1 * b1[j]) + a2 * b2[j]) + a3 * b3[j];
                    }
                    k += 4;
                }
                while k < kk {
                    let aik = a_row[k];
                    let b_row = &rhs.data[k * n + j0..k * n + j1];
                    for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                        *o += aik * b;
                    }
                    k += 1;
                }
            }
            j0 = j1;
        }
        out
    }

    /// `self * v` for a single column vector, accumulating in the same
    /// blocks-of-four order as [`Mat::matmul`].
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let kk = self.cols;
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            let mut k = 0;
            while k + 4 <= kk {
                acc += ((row[k] * v[k] + row[k + 1] * v[k + 1]) + row[k + 2] * v[k + 2])
                    + row[k + 3] * v[k + 3];
                k += 4;
            }
            while k < kk {
                acc += row[k] * v[k];
                k += 1;
            }
            *o = acc;
        }
        out
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows, "t_matmul dimension mismatch");
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &aki) in a_row.iter().enumerate() {
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += aki * b;
                }
            }
        }
        out
    }

    /// Blocked transpose; used to run per-frame passes over contiguous
    /// memory.
    pub fn transposed(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        const B: usize = 32;
        let mut r0 = 0;
        while r0 < self.rows {
            let r1 = (r0 + B).min(self.rows);
            let mut c0 = 0;
            while c0 < self.cols {
                let c1 = (c0 + B).min(self.cols);
                for r in r0..r1 {
                    for c in c0..c1 {
                        out.data[c * self.rows + r] = self.data[r * self.cols + c];
                    }
                }
                c0 = c1;
            }
            r0 = r1;
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn hadamard(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Mat::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let b = Mat::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        let c = a.matmul(&b);
        assert_eq!(c.get(0, 0), 10.0);
        assert_eq!(c.get(0, 1), 13.0);
        assert_eq!(c.get(1, 0), 28.0);
        assert_eq!(c.get(1, 1), 40.0);
    }

    #[test]
    fn matvec_matches_matmul_bitwise() {
        let a = Mat::from_fn(5, 7, |r, c| ((r * 31 + c * 17) % 13) as f64 * 0.37 - 1.0);
        let b = Mat::from_fn(7, 4, |r, c| ((r * 5 + c * 3) % 11) as f64 * 0.21 - 0.9);
        let full = a.matmul(&b);
        for c in 0..4 {
            let col = a.matvec(&b.column(c));
            for (r, v) in col.iter().enumerate() {
                assert_eq!(v.to_bits(), full.get(r, c).to_bits());
            }
        }
    }

    #[test]
    fn t_matmul_matches_explicit_transpose() {
        let a = Mat::from_fn(4, 3, |r, c| (r as f64) - 0.5 * c as f64);
        let b = Mat::from_fn(4, 2, |r, c| 0.3 * r as f64 + c as f64);
        let at = Mat::from_fn(3, 4, |r, c| a.get(c, r));
        let want = at.matmul(&b);
        let got = a.t_matmul(&b);
        assert!(want.max_abs_diff(&got) < 1e-12);
    }
}
