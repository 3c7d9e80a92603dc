use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Dense row-major complex matrix. All workloads here involve small sizes,
/// so the representation favours clarity over blocking.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let nr = rows.len();
        let nc = if nr > 0 { rows[0].len() } else { 0 };
        let mut m = CMatrix::zeros(nr, nc);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), nc, "ragged row in matrix literal");
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let lifted: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|x| Complex64::new(*x, 0.0)).collect())
            .collect();
        CMatrix::from_rows(&lifted)
    }

    /// v times the n x n identity.
    pub fn scalar(n: usize, v: Complex64) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)].conj())
    }

    pub fn scale(&self, a: Complex64) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * a)
    }

    pub fn scale_re(&self, a: f64) -> CMatrix {
        self.scale(Complex64::new(a, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Relative departure from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.norm_fro().max(1e-300);
        (self - &self.adjoint()).norm_fro() / scale
    }

    /// Hermitian part (A + A*)/2.
    pub fn hermitize(&self) -> CMatrix {
        (self + &self.adjoint()).scale_re(0.5)
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        CMatrix::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols);
        for r in 0..b.rows {
            for c in 0..b.cols {
                self[(r0 + r, c0 + c)] = b[(r, c)];
            }
        }
    }

    /// Stacks [top; bottom] vertically.
    pub fn vstack(top: &CMatrix, bottom: &CMatrix) -> CMatrix {
        assert_eq!(top.cols, bottom.cols);
        let mut m = CMatrix::zeros(top.rows + bottom.rows, top.cols);
        m.set_block(0, 0, top);
        m.set_block(top.rows, 0, bottom);
        m
    }

    /// Concatenates [left, right] horizontally.
    pub fn hstack(left: &CMatrix, right: &CMatrix) -> CMatrix {
        assert_eq!(left.rows, right.rows);
        let mut m = CMatrix::zeros(left.rows, left.cols + right.cols);
        m.set_block(0, 0, left);
        m.set_block(0, left.cols, right);
        m
    }

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows);
        for r in 0..self.rows {
            self[(r, c)] = v[r];
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |r, c| f(self[(r, c)]))
    }

    /// Entrywise product with `other`.
    pub fn hadamard(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * other[(r, c)])
    }

    pub fn mul_mat(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, other.cols);
        matmul_into(self, other, &mut out);
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }
}

/// out = a * b without allocating; `out` must have the right shape already.
pub fn matmul_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    assert_eq!(a.cols, b.rows, "inner dimension mismatch");
    assert_eq!(out.rows, a.rows);
    assert_eq!(out.cols, b.cols);
    let (n, k, m) = (a.rows, a.cols, b.cols);
    for r in 0..n {
        for c in 0..m {
            out.data[r * m + c] = Complex64::new(0.0, 0.0);
        }
        for l in 0..k {
            let av = a.data[r * k + l];
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..m {
                out.data[r * m + c] += av * b.data[l * m + c];
            }
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] + other[(r, c)])
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] - other[(r, c)])
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, other: &CMatrix) -> CMatrix {
        self.mul_mat(other)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_re(-1.0)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_is_neutral() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.5, -1.0)],
            vec![c(-3.0, 0.0), c(2.0, 2.0)],
        ]);
        let id = CMatrix::identity(2);
        assert!((&(&a * &id) - &a).norm_fro() < 1e-15);
        assert!((&(&id * &a) - &a).norm_fro() < 1e-15);
    }

    #[test]
    fn adjoint_squares_to_self() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.5, -1.0)],
            vec![c(-3.0, 1.0), c(2.0, 2.0)],
        ]);
        assert!((&a.adjoint().adjoint() - &a).norm_fro() < 1e-15);
    }

    #[test]
    fn block_roundtrip() {
        let a = CMatrix::from_fn(4, 4, |r, c_| c((r * 4 + c_) as f64, 0.0));
        let b = a.block(1, 2, 2, 2);
        assert_eq!(b[(0, 0)], c(6.0, 0.0));
        let mut z = CMatrix::zeros(4, 4);
        z.set_block(1, 2, &b);
        assert_eq!(z[(2, 3)], a[(2, 3)]);
    }

    #[test]
    fn hermitize_is_hermitian() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.5, -1.0)],
            vec![c(-3.0, 1.0), c(2.0, 2.0)],
        ]);
        assert!(a.hermitize().hermitian_defect() < 1e-15);
    }
}
