//! Small dense least-squares kernels: nonnegative least squares, mixed-sign
//! least squares and a column-pivoted rank test.

use crate::{Matrix, Vector};

const SVD_EPS: f64 = 1e-13;

/// Least-squares solution of `a x ≈ b` with minimal norm.
pub fn lstsq(a: &Matrix, b: &Vector) -> Vector {
    if a.ncols() == 0 {
        return Vector::zeros(0);
    }
    if a.nrows() == 0 {
        return Vector::zeros(a.ncols());
    }
    let scale = a.amax().max(1.0);
    let svd = a.clone().svd(true, true);
    svd.solve(b, SVD_EPS * scale)
        .unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

fn select_columns(a: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])])
}

/// Nonnegative least squares by the Lawson-Hanson active-set method.
///
/// Among solutions sharing the optimal fit, the support-restricted
/// minimum-norm one is returned so degenerate generator sets give a
/// deterministic answer.
pub fn nnls(a: &Matrix, b: &Vector) -> Vector {
    min_norm_on_support(a, nnls_core(a, b))
}

fn nnls_core(a: &Matrix, b: &Vector) -> Vector {
    let n = a.ncols();
    let mut x = Vector::zeros(n);
    if n == 0 || a.nrows() == 0 {
        return x;
    }
    let tol = 1e-14 * (a.amax().max(1.0)) * (b.amax().max(1.0)) * (n as f64);
    let mut passive = vec![false; n];
    let mut outer = 0;
    loop {
        outer += 1;
        if outer > 3 * n + 30 {
            break;
        }
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(enter) = candidate else { break };
        passive[enter] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let zp = lstsq(&select_columns(a, &cols), b);
            let mut z = Vector::zeros(n);
            for (c, &j) in cols.iter().enumerate() {
                z[j] = zp[c];
            }
            if cols.iter().all(|&j| z[j] > 0.0) || inner > 3 * n + 30 {
                x = z.map(|v| v.max(0.0));
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &cols {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            x = &x + (&z - &x) * alpha;
            for &j in &cols {
                if x[j] <= 1e-15 || (z[j] <= 0.0 && alpha == 0.0 && x[j] <= 0.0) {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

fn min_norm_on_support(a: &Matrix, x: Vector) -> Vector {
    if x.iter().filter(|&&v| v > 0.0).count() == 0 || a.ncols() < 2 {
        return x;
    }
    let fitted = a * &x;
    // A lightly regularized refit spreads weight over dependent columns and
    // exposes the support of the minimum-norm solution.
    let (rows, cols) = a.shape();
    let delta = 1e-6 * a.amax().max(1.0);
    let mut stacked = Matrix::zeros(rows + cols, cols);
    stacked.view_mut((0, 0), (rows, cols)).copy_from(a);
    stacked.view_mut((rows, 0), (cols, cols)).fill_diagonal(delta);
    let mut rhs = Vector::zeros(rows + cols);
    rhs.rows_mut(0, rows).copy_from(&fitted);
    let spread = nnls_core(&stacked, &rhs);
    let support: Vec<usize> = (0..cols).filter(|&j| spread[j] > 0.0).collect();
    let sub = select_columns(a, &support);
    let z = lstsq(&sub, &fitted);
    if z.iter().all(|&v| v >= 0.0) && (&sub * &z - &fitted).norm() <= 1e-12 * fitted.norm().max(1.0) {
        let mut out = Vector::zeros(cols);
        for (c, &j) in support.iter().enumerate() {
            out[j] = z[c];
        }
        out
    } else {
        x
    }
}

/// Solution of a least-squares problem with one sign-free block and one
/// nonnegative block.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub free: Vector,
    pub nonneg: Vector,
    pub residual: f64,
}

/// Minimize `‖a_free·p + a_nonneg·q − b‖` over free `p` and `q ≥ 0`.
///
/// The free block is eliminated by orthogonal projection and the remaining
/// problem is handed to [`nnls`].
pub fn mixed_sign_lstsq(a_free: &Matrix, a_nonneg: &Matrix, b: &Vector) -> MixedSolution {
    let rows = b.len();
    let (proj_a, proj_b, pinv) = if a_free.ncols() > 0 {
        let pinv = a_free
            .clone()
            .pseudo_inverse(SVD_EPS * a_free.amax().max(1.0))
            .unwrap_or_else(|_| Matrix::zeros(a_free.ncols(), rows));
        let complement = Matrix::identity(rows, rows) - a_free * &pinv;
        (&complement * a_nonneg, &complement * b, Some(pinv))
    } else {
        (a_nonneg.clone(), b.clone(), None)
    };
    let nonneg = nnls(&proj_a, &proj_b);
    let free = match pinv {
        Some(p) => p * (b - a_nonneg * &nonneg),
        None => Vector::zeros(0),
    };
    let mut fit = a_nonneg * &nonneg;
    if a_free.ncols() > 0 {
        fit += a_free * &free;
    }
    MixedSolution { residual: (b - fit).norm(), free, nonneg }
}

/// Numerical rank of the columns of `a` by column-pivoted QR.
pub fn column_rank(a: &Matrix, tol: f64) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let r = a.clone().col_piv_qr().r();
    let diag = r.nrows().min(r.ncols());
    let lead = r[(0, 0)].abs();
    if lead <= tol {
        return 0;
    }
    (0..diag).filter(|&i| r[(i, i)].abs() > tol * lead.max(1.0)).count()
}

/// Smallest singular value, or zero for an empty column set.
pub fn smallest_singular_value(a: &Matrix) -> f64 {
    if a.ncols() == 0 {
        return f64::INFINITY;
    }
    if a.nrows() < a.ncols() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
