use super::{CMatrix, NumError};
use num_complex::Complex64;

/// LU factorization with partial pivoting: P A = L U.
pub struct LuFactors {
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
    n: usize,
}

impl LuFactors {
    pub fn new(a: &CMatrix) -> Result<Self, NumError> {
        if !a.is_square() {
            return Err(NumError::Shape(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.norm_max().max(1e-300);
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[(k, k)].norm();
            for r in (k + 1)..n {
                let mag = lu[(r, k)].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag < 1e-14 * scale * (n as f64) {
                return Err(NumError::SingularMatrix {
                    cond: scale / pivot_mag.max(1e-300),
                });
            }
            if pivot_row != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(pivot_row, c)];
                    lu[(pivot_row, c)] = tmp;
                }
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let pk = lu[(k, k)];
            for r in (k + 1)..n {
                let f = lu[(r, k)] / pk;
                lu[(r, k)] = f;
                for c in (k + 1)..n {
                    let sub = f * lu[(k, c)];
                    lu[(r, c)] -= sub;
                }
            }
        }
        Ok(LuFactors {
            lu,
            perm,
            sign,
            n,
        })
    }

    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(self.sign, 0.0);
        for i in 0..self.n {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// Solves A X = B for matrix right-hand side B.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix, NumError> {
        if b.rows() != self.n {
            return Err(NumError::Shape(format!(
                "rhs has {} rows, expected {}",
                b.rows(),
                self.n
            )));
        }
        let n = self.n;
        let m = b.cols();
        let mut x = CMatrix::zeros(n, m);
        for r in 0..n {
            for c in 0..m {
                x[(r, c)] = b[(self.perm[r], c)];
            }
        }
        // forward substitution with unit lower factor
        for k in 0..n {
            for r in (k + 1)..n {
                let f = self.lu[(r, k)];
                for c in 0..m {
                    let sub = f * x[(k, c)];
                    x[(r, c)] -= sub;
                }
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let d = self.lu[(k, k)];
            for c in 0..m {
                x[(k, c)] /= d;
            }
            for r in 0..k {
                let f = self.lu[(r, k)];
                for c in 0..m {
                    let sub = f * x[(k, c)];
                    x[(r, c)] -= sub;
                }
            }
        }
        Ok(x)
    }
}

pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, NumError> {
    LuFactors::new(a)?.solve(b)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix, NumError> {
    let n = a.rows();
    LuFactors::new(a)?.solve(&CMatrix::identity(n))
}

pub fn determinant(a: &CMatrix) -> Result<Complex64, NumError> {
    if !a.is_square() {
        return Err(NumError::Shape("determinant of non-square matrix".into()));
    }
    match LuFactors::new(a) {
        Ok(f) => Ok(f.det()),
        // Singular pivots mean the determinant vanished to working precision.
        Err(NumError::SingularMatrix { .. }) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// Condition number estimate in the infinity norm by explicit inversion;
/// acceptable at these matrix sizes.
pub fn cond_inf(a: &CMatrix) -> f64 {
    match inverse(a) {
        Ok(inv) => a.norm_inf() * inv.norm_inf(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_roundtrip() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 1.0), c(0.0, -1.0), c(0.5, 0.0)],
            vec![c(1.0, 0.0), c(3.0, 0.5), c(-1.0, 1.0)],
            vec![c(0.0, 2.0), c(1.0, -1.0), c(4.0, 0.0)],
        ]);
        let b = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(-2.0, 0.5), c(1.0, 1.0)],
            vec![c(0.0, 0.0), c(3.0, -1.0)],
        ]);
        let x = solve(&a, &b).unwrap();
        assert!((&(&a * &x) - &b).norm_fro() < 1e-12);
    }

    #[test]
    fn inverse_of_identity() {
        let id = CMatrix::identity(4);
        let inv = inverse(&id).unwrap();
        assert!((&inv - &id).norm_fro() < 1e-14);
    }

    #[test]
    fn determinant_of_triangular() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(5.0, 1.0)],
            vec![c(0.0, 0.0), c(0.5, -0.5)],
        ]);
        let d = determinant(&a).unwrap();
        assert!((d - c(1.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_reported() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        match solve(&a, &CMatrix::identity(2)) {
            Err(NumError::SingularMatrix { cond }) => assert!(cond > 1e10),
            other => panic!("expected SingularMatrix, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn determinant_of_singular_is_zero() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ]);
        assert!(determinant(&a).unwrap().norm() < 1e-12);
    }
}
