//! Dense linear algebra used throughout the crate.

mod decomp;
mod eigen;
mod lyapunov;
mod mat;
mod sym;

pub use decomp::{inverse, Cholesky, Lu};
pub use eigen::{eig_general, eig_sym, eigh, max_eig, min_eig, spectral_abscissa, Eigenvalue};
pub use lyapunov::{lyapunov_residual, lyapunov_solve};
pub use mat::Mat;
pub use sym::{smat, svec, svec_index, triangular_root, SymMat};

/// Symmetric square root and inverse square root of `S ≻ 0`.
pub fn sqrt_and_inv_sqrt(s: &SymMat) -> crate::Result<(SymMat, SymMat)> {
    let (vals, vecs) = eigh(s)?;
    if vals[0] <= 0.0 {
        return Err(crate::Error::Precondition(format!(
            "matrix is not positive definite (min eigenvalue {:e})",
            vals[0]
        )));
    }
    let n = s.dim();
    let build = |f: &dyn Fn(f64) -> f64| {
        SymMat::from_fn(n, |i, j| {
            (0..n).map(|k| vecs[(i, k)] * f(vals[k]) * vecs[(j, k)]).sum()
        })
    };
    Ok((build(&|v| v.sqrt()), build(&|v| 1.0 / v.sqrt())))
}

/// Largest singular value, via the symmetric eigenvalues of `MᵀM`.
pub fn sigma_max(m: &Mat) -> crate::Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let g = if m.rows() >= m.cols() {
        m.transpose().matmul(m)
    } else {
        m.matmul(&m.transpose())
    };
    Ok(max_eig(&SymMat::symmetrize(&g)?)?.max(0.0).sqrt())
}
