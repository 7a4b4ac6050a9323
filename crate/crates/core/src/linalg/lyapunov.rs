use super::{eig_sym, spectral_abscissa, Lu, Mat, SymMat};
use crate::error::{Error, Result};

/// Solves `AᵀP + PA + Q = 0` for symmetric `P`.
///
/// `A` must be Hurwitz and `Q ⪰ 0`. The equation is linearised into an
/// `n² × n²` system and solved with one step of iterative refinement.
pub fn lyapunov_solve(a: &Mat, q: &SymMat) -> Result<SymMat> {
    if !a.is_square() || a.rows() != q.dim() {
        return Err(Error::Shape(format!(
            "A is {}x{}, Q is {}x{}",
            a.rows(),
            a.cols(),
            q.dim(),
            q.dim()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::Shape("empty Lyapunov equation".into()));
    }
    let alpha = spectral_abscissa(a)?;
    if alpha >= 0.0 {
        return Err(Error::Precondition(format!(
            "A is not Hurwitz (spectral abscissa {alpha:e})"
        )));
    }
    let qmin = eig_sym(q)?[0];
    if qmin < -1e-12 * (1.0 + q.max_abs()) {
        return Err(Error::Precondition(format!(
            "Q is not positive semidefinite (min eigenvalue {qmin:e})"
        )));
    }

    // Unknown P[k, j] sits at k + j·n. Row i + j·n holds entry (i, j) of AᵀP + PA.
    let idx = |r: usize, c: usize| r + c * n;
    let mut k = Mat::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = idx(i, j);
            for m in 0..n {
                k[(row, idx(m, j))] += a[(m, i)];
                k[(row, idx(i, m))] += a[(m, j)];
            }
        }
    }
    let rhs: Vec<f64> = (0..n * n).map(|r| -q.get(r % n, r / n)).collect();
    let lu = Lu::new(&k)?;
    let mut x = lu.solve(&rhs);
    let kx = k.matvec(&x);
    let resid: Vec<f64> = rhs.iter().zip(&kx).map(|(b, v)| b - v).collect();
    let corr = lu.solve(&resid);
    for (xi, ci) in x.iter_mut().zip(&corr) {
        *xi += ci;
    }
    Ok(SymMat::from_fn(n, |i, j| 0.5 * (x[idx(i, j)] + x[idx(j, i)])))
}

/// `AᵀP + PA + Q`, used to audit solutions.
pub fn lyapunov_residual(a: &Mat, p: &SymMat, q: &SymMat) -> SymMat {
    let pm = p.to_mat();
    let m = &(&a.transpose().matmul(&pm) + &pm.matmul(a)) + &q.to_mat();
    SymMat::symmetrize(&m).expect("square")
}
