//! Dense and tridiagonal helpers: eigendecompositions, spectral norms and
//! matrix inertia.
//!
//! Dense eigensolves go through `faer`; matrices are exchanged as `nalgebra`
//! types everywhere else.

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }
}

fn to_faer<T: Copy>(m: &DMatrix<T>) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("symmetric eigensolver failed to converge");
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenpairs of a real symmetric matrix, sorted by ascending eigenvalue.
/// Column `k` of the returned matrix is the eigenvector of value `k`.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigensolver failed to converge");
    let n = m.nrows();
    let s = eig.S();
    let u = eig.U();
    let raw: Vec<f64> = (0..n).map(|k| s[k]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let values = order.iter().map(|&k| raw[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut v = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("Hermitian eigensolver failed to converge");
    v.sort_by(f64::total_cmp);
    v
}

/// Largest singular value of a real symmetric matrix.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Inertia of a Hermitian matrix by symmetric-indefinite (Bunch-Kaufman)
/// factorization `P A P^T = L D L^*`. Sylvester's law makes the inertia of
/// `D` equal that of `A`. Pivots with magnitude `<= zero_pivot` count as zero.
pub fn hermitian_inertia(m: &DMatrix<Complex64>, zero_pivot: f64) -> Inertia {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    let growth = (1.0 + 17f64.sqrt()) / 8.0;
    let mut inertia = Inertia::default();
    let count = |d: f64, inertia: &mut Inertia| {
        if d.abs() <= zero_pivot {
            inertia.zero += 1;
        } else if d > 0.0 {
            inertia.positive += 1;
        } else {
            inertia.negative += 1;
        }
    };

    let mut k = 0;
    while k < n {
        let absakk = a[(k, k)].re.abs();
        let (imax, colmax) = ((k + 1)..n)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });

        if absakk.max(colmax) == 0.0 {
            count(0.0, &mut inertia);
            k += 1;
            continue;
        }

        let mut two_by_two = false;
        let mut kp = k;
        if absakk < growth * colmax {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| a[(imax, j)].norm())
                .fold(0.0_f64, f64::max);
            if absakk * rowmax >= growth * colmax * colmax {
                kp = k;
            } else if a[(imax, imax)].re.abs() >= growth * rowmax {
                kp = imax;
            } else {
                kp = imax;
                two_by_two = true;
            }
        }

        let kk = if two_by_two { k + 1 } else { k };
        if kp != kk {
            a.swap_rows(kp, kk);
            a.swap_columns(kp, kk);
        }

        if !two_by_two {
            let d = a[(k, k)].re;
            count(d, &mut inertia);
            if d != 0.0 {
                for j in (k + 1)..n {
                    let f = a[(j, k)].conj() / d;
                    for i in (k + 1)..n {
                        let aik = a[(i, k)];
                        a[(i, j)] -= aik * f;
                    }
                }
            }
            k += 1;
        } else {
            let d11 = a[(k, k)].re;
            let d22 = a[(k + 1, k + 1)].re;
            let d21 = a[(k + 1, k)];
            let half_tr = 0.5 * (d11 + d22);
            let disc = (0.25 * (d11 - d22).powi(2) + d21.norm_sqr()).sqrt();
            count(half_tr + disc, &mut inertia);
            count(half_tr - disc, &mut inertia);
            let det = d11 * d22 - d21.norm_sqr();
            if det != 0.0 {
                // D^{-1} = [[d22, -d12], [-d21, d11]] / det with d12 = conj(d21)
                let inv11 = d22 / det;
                let inv22 = d11 / det;
                let inv21 = -d21 / det;
                let inv12 = inv21.conj();
                for j in (k + 2)..n {
                    // w = D^{-1} C_j^*, C_j = row j of the pivot columns
                    let c1 = a[(j, k)].conj();
                    let c2 = a[(j, k + 1)].conj();
                    let w1 = c1 * inv11 + c2 * inv12;
                    let w2 = c1 * inv21 + c2 * inv22;
                    for i in (k + 2)..n {
                        let ai1 = a[(i, k)];
                        let ai2 = a[(i, k + 1)];
                        a[(i, j)] -= ai1 * w1 + ai2 * w2;
                    }
                }
            }
            k += 2;
        }
    }
    inertia
}

/// Number of eigenvalues strictly below `shift` of the real symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off`, by the
/// Sturm sequence of its `LDL^T` pivots.
pub fn tridiagonal_count_below(diag: &[f64], off: &[f64], shift: f64) -> usize {
    debug_assert_eq!(off.len() + 1, diag.len());
    let scale = diag
        .iter()
        .chain(off)
        .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let tiny = f64::EPSILON * scale * 1e-3;
    let mut count = 0;
    let mut d = 0.0;
    for (i, &a) in diag.iter().enumerate() {
        d = if i == 0 { a - shift } else { a - shift - off[i - 1] * off[i - 1] / d };
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Inertia of a real symmetric tridiagonal matrix; eigenvalues with modulus
/// below `zero_tol` are counted as zero.
pub fn tridiagonal_inertia(diag: &[f64], off: &[f64], zero_tol: f64) -> Inertia {
    let n = diag.len();
    let below_minus = tridiagonal_count_below(diag, off, -zero_tol);
    let below_plus = tridiagonal_count_below(diag, off, zero_tol);
    Inertia {
        negative: below_minus,
        zero: below_plus - below_minus,
        positive: n - below_plus,
    }
}
