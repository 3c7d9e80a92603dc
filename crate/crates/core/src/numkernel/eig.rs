use super::{cluster_by_relative_gap, CMatrix, NumError};
use num_complex::Complex64;

const EPS: f64 = f64::EPSILON;

/// Eigendecomposition of a Hermitian matrix: real ascending eigenvalues and
/// an orthonormal eigenbasis (columns of `vectors`).
pub struct EigHermitian {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Eigendecomposition of a general complex matrix. Eigenvalues are sorted by
/// ascending modulus (argument breaks ties); `vectors` holds unit right
/// eigenvectors column by column and `clusters[i]` assigns each eigenvalue to
/// a group of near-equal modulus (within 1e-8 relative).
pub struct EigGeneral {
    pub values: Vec<Complex64>,
    pub vectors: CMatrix,
    pub clusters: Vec<usize>,
}

/// Cyclic complex Jacobi iteration. Quadratically convergent and accurate to
/// a few ulps at the matrix sizes used here.
pub fn eig_hermitian(a: &CMatrix) -> Result<EigHermitian, NumError> {
    if !a.is_square() {
        return Err(NumError::Shape("eig_hermitian needs a square matrix".into()));
    }
    let defect = a.hermitian_defect();
    if defect > 1e-10 {
        return Err(NumError::NotHermitian { defect });
    }
    let n = a.rows();
    let mut b = a.hermitize();
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        let values = if n == 1 { vec![b[(0, 0)].re] } else { vec![] };
        return Ok(EigHermitian { values, vectors: v });
    }
    let scale = b.norm_fro().max(1e-300);
    let mut converged = false;
    let max_sweeps = 40;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += b[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = b[(p, q)];
                let r = beta.norm();
                if r <= 1e-18 * scale {
                    continue;
                }
                let phase = beta / r;
                let alpha = b[(p, p)].re;
                let gamma = b[(q, q)].re;
                let tau = (gamma - alpha) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: col_p' = c*col_p - s*conj(phase)*col_q,
                //          col_q' = s*phase*col_p + c*col_q
                let sp = phase * s;
                for k in 0..n {
                    let bp = b[(k, p)];
                    let bq = b[(k, q)];
                    b[(k, p)] = bp * c - bq * sp.conj();
                    b[(k, q)] = bp * sp + bq * c;
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * c - vq * sp.conj();
                    v[(k, q)] = vp * sp + vq * c;
                }
                for k in 0..n {
                    let bp = b[(p, k)];
                    let bq = b[(q, k)];
                    b[(p, k)] = bp * c - bq * sp;
                    b[(q, k)] = bp * sp.conj() + bq * c;
                }
                // clean up the rotated pair
                b[(p, q)] = Complex64::new(0.0, 0.0);
                b[(q, p)] = Complex64::new(0.0, 0.0);
                let dpp = b[(p, p)];
                let dqq = b[(q, q)];
                b[(p, p)] = Complex64::new(dpp.re, 0.0);
                b[(q, q)] = Complex64::new(dqq.re, 0.0);
            }
        }
    }
    if !converged {
        // final check: the loop may have exited at max_sweeps while done
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += b[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() > 1e-12 * scale {
            return Err(NumError::NoConvergence { sweeps: max_sweeps });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[(i, i)].re.total_cmp(&b[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| b[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let mut col = v.col(old);
        fix_column_phase(&mut col);
        vectors.set_col(new, &col);
    }
    Ok(EigHermitian { values, vectors })
}

/// Rotates a vector so its largest-modulus entry is real and positive;
/// makes eigenvector output deterministic.
fn fix_column_phase(col: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-12) {
            best_mag = m;
            best = i;
        }
    }
    if best_mag == 0.0 {
        return;
    }
    let phase = col[best] / best_mag;
    let rot = phase.conj();
    for z in col.iter_mut() {
        *z *= rot;
    }
}

/// General complex eigendecomposition by Householder Hessenberg reduction
/// followed by a shifted QR iteration; eigenvectors come from
/// back-substitution on the triangular Schur factor.
pub fn eig_general(a: &CMatrix) -> Result<EigGeneral, NumError> {
    if !a.is_square() {
        return Err(NumError::Shape("eig_general needs a square matrix".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EigGeneral {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
            clusters: vec![],
        });
    }
    let scale = a.norm_fro().max(1e-300);
    if n == 1 {
        return Ok(EigGeneral {
            values: vec![a[(0, 0)]],
            vectors: CMatrix::identity(1),
            clusters: vec![0],
        });
    }

    let (mut h, mut z) = hessenberg(a);

    // Shifted QR with deflation from the bottom.
    let mut hi = n - 1;
    let mut iters_this_block = 0usize;
    let mut total_iters = 0usize;
    let max_total = 60 * n;
    while hi > 0 {
        // zero negligible subdiagonals
        for i in 0..hi {
            let thresh = EPS * (h[(i, i)].norm() + h[(i + 1, i + 1)].norm()).max(1e-3 * EPS * scale);
            if h[(i + 1, i)].norm() <= thresh {
                h[(i + 1, i)] = Complex64::new(0.0, 0.0);
            }
        }
        if h[(hi, hi - 1)].norm() == 0.0 {
            hi -= 1;
            iters_this_block = 0;
            continue;
        }
        let mut lo = hi;
        while lo > 0 && h[(lo, lo - 1)].norm() != 0.0 {
            lo -= 1;
        }
        total_iters += 1;
        iters_this_block += 1;
        if total_iters > max_total {
            return Err(NumError::NoConvergence { sweeps: total_iters });
        }
        let sigma = if iters_this_block % 12 == 0 {
            // exceptional shift to break symmetry-induced cycling
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(&h, hi)
        };
        for i in lo..=hi {
            h[(i, i)] -= sigma;
        }
        let mut rots: Vec<(usize, f64, Complex64)> = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
            // rows i, i+1 over columns i..n
            for col in i..n {
                let xi = h[(i, col)];
                let xj = h[(i + 1, col)];
                h[(i, col)] = xi * c + xj * s;
                h[(i + 1, col)] = -xi * s.conj() + xj * c;
            }
            h[(i + 1, i)] = Complex64::new(0.0, 0.0);
            rots.push((i, c, s));
        }
        for &(i, c, s) in &rots {
            // columns i, i+1 over rows 0..=min(i+1, hi); H·G*
            let top = (i + 1).min(hi);
            for row in 0..=top {
                let xi = h[(row, i)];
                let xj = h[(row, i + 1)];
                h[(row, i)] = xi * c + xj * s.conj();
                h[(row, i + 1)] = -xi * s + xj * c;
            }
            for row in 0..n {
                let xi = z[(row, i)];
                let xj = z[(row, i + 1)];
                z[(row, i)] = xi * c + xj * s.conj();
                z[(row, i + 1)] = -xi * s + xj * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += sigma;
        }
    }

    // h is now upper triangular (Schur form), a = z h z*.
    let raw_values: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (mi, mj) = (raw_values[i].norm(), raw_values[j].norm());
        mi.total_cmp(&mj)
            .then_with(|| raw_values[i].arg().total_cmp(&raw_values[j].arg()))
    });

    let tnorm = h.norm_fro().max(1e-300);
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (slot, &k) in order.iter().enumerate() {
        let lambda = raw_values[k];
        values.push(lambda);
        // solve (T - lambda) y = 0 with y[k] = 1, y[j>k] = 0
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in (j + 1)..=k {
                acc += h[(j, m)] * y[m];
            }
            let mut denom = h[(j, j)] - lambda;
            if denom.norm() < EPS * tnorm {
                denom = Complex64::new(EPS * tnorm, 0.0);
            }
            y[j] = -acc / denom;
        }
        let mut v = z.mul_vec(&y);
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= nrm;
        }
        fix_column_phase(&mut v);
        vectors.set_col(slot, &v);
    }

    // reconstruction check: A v = lambda v columnwise
    let av = a.mul_mat(&vectors);
    let mut resid = 0.0f64;
    for k in 0..n {
        let mut col_err = 0.0;
        for r in 0..n {
            col_err += (av[(r, k)] - values[k] * vectors[(r, k)]).norm_sqr();
        }
        resid = resid.max(col_err.sqrt());
    }
    if resid > 1e-8 * scale {
        return Err(NumError::NoConvergence {
            sweeps: total_iters,
        });
    }

    let moduli: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let clusters = cluster_by_relative_gap(&moduli, 1e-8);
    Ok(EigGeneral {
        values,
        vectors,
        clusters,
    })
}

/// Householder reduction to upper Hessenberg form; returns (H, Q) with
/// A = Q H Q*.
fn hessenberg(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let mut x: Vec<Complex64> = (k + 1..n).map(|r| h[(r, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm < 1e-300 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        x[0] -= alpha;
        let vnorm_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq < 1e-300 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;
        // H <- (I - beta v v*) H  on rows k+1.., all cols
        for col in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, r) in (k + 1..n).enumerate() {
                dot += x[idx].conj() * h[(r, col)];
            }
            dot *= beta;
            for (idx, r) in (k + 1..n).enumerate() {
                let sub = x[idx] * dot;
                h[(r, col)] -= sub;
            }
        }
        // H <- H (I - beta v v*) on cols k+1.., all rows
        for row in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, c) in (k + 1..n).enumerate() {
                dot += h[(row, c)] * x[idx];
            }
            dot *= beta;
            for (idx, c) in (k + 1..n).enumerate() {
                let sub = dot * x[idx].conj();
                h[(row, c)] -= sub;
            }
        }
        // Q <- Q (I - beta v v*)
        for row in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for (idx, c) in (k + 1..n).enumerate() {
                dot += q[(row, c)] * x[idx];
            }
            dot *= beta;
            for (idx, c) in (k + 1..n).enumerate() {
                let sub = dot * x[idx].conj();
                q[(row, c)] -= sub;
            }
        }
        for r in (k + 2)..n {
            h[(r, k)] = Complex64::new(0.0, 0.0);
        }
        h[(k + 1, k)] = alpha;
    }
    (h, q)
}

/// Eigenvalue of the trailing 2x2 block closest to the corner entry.
///
/// Written in terms of the half-difference p = (a - d)/2 rather than
/// tr^2 - 4 det: the latter cancels catastrophically for nearly equal
/// eigenvalues (the computed shift error then dwarfs the true splitting and
/// the QR iteration stagnates). The near root comes from the far root by
/// division, which is stable even when p^2 + bc is at rounding level.
fn wilkinson_shift(h: &CMatrix, hi: usize) -> Complex64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let p = (a - d).scale(0.5);
    let bc = b * c;
    let disc = (p * p + bc).sqrt();
    let q = if (p + disc).norm() >= (p - disc).norm() {
        p + disc
    } else {
        p - disc
    };
    if q.norm() == 0.0 {
        return d;
    }
    d - bc / q
}

/// Unitary rotation zeroing b against a: returns (c real, s) for
/// rows' = [c x + s y; -conj(s) x + c y].
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let an = a.norm();
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = (an * an + bn * bn).sqrt();
    let c = an / r;
    let s = (a / an) * (b.conj() / r);
    (c, s)
}
