use super::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`
    pub fn matvec_acc(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = F::zero();
            for (&w, &xv) in row.iter().zip(x) {
                acc = acc + w * xv;
            }
            *o = *o + acc;
        }
    }

    /// `out += selfᵀ · y`
    pub fn matvec_t_acc(&self, y: &[F], out: &mut [F]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yv, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yv == F::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o = *o + w * yv;
            }
        }
    }

    /// `out += self[:, col]`, i.e. the product with a one-hot vector.
    pub fn column_acc(&self, col: usize, out: &mut [F]) {
        debug_assert!(col < self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = *o + self.data[r * self.cols + col];
        }
    }

    /// `self += a ⊗ b`
    pub fn add_outer(&mut self, a: &[F], b: &[F]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (&av, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if av == F::zero() {
                continue;
            }
            for (w, &bv) in row.iter_mut().zip(b) {
                *w = *w + av * bv;
            }
        }
    }

    /// `self[:, col] += a`
    pub fn add_to_column(&mut self, col: usize, a: &[F]) {
        debug_assert_eq!(a.len(), self.rows);
        for (r, &av) in a.iter().enumerate() {
            let i = r * self.cols + col;
            self.data[i] = self.data[i] + av;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix<F>) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose_agree_with_hand_values() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = vec![0.0; 2];
        m.matvec_acc(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);

        let mut back = vec![0.0; 3];
        m.matvec_t_acc(&[1.0, 1.0], &mut back);
        assert_eq!(back, vec![5.0, 7.0, 9.0]);

        let mut col = vec![0.0; 2];
        m.column_acc(1, &mut col);
        assert_eq!(col, vec![2.0, 5.0]);
    }

    #[test]
    fn outer_product_accumulates() {
        let mut m = Matrix::<f64>::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        m.add_to_column(0, &[1.0, 1.0]);
        assert_eq!(m.as_slice(), &[4.0, 4.0, 7.0, 8.0]);
    }
}
