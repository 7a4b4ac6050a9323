//! The largest eigenvalue of a symmetric matrix as an SDP,
//! `min t  s.t.  S − tI ⪯ 0`, checked against a direct eigen-decomposition.

use innerconvex::linalg::{eig_sym, Mat, SymMat};
use innerconvex::lmi::{AffineMatExpr, SdpProblem, VarSet};
use innerconvex::sdp::{solve, IpmConfig};

fn main() -> innerconvex::Result<()> {
    let s = SymMat::from_rows(&[
        vec![2.0, -1.0, 0.5, 0.0],
        vec![-1.0, 1.0, 0.3, 0.2],
        vec![0.5, 0.3, -0.5, 1.0],
        vec![0.0, 0.2, 1.0, 0.7],
    ])?;
    let mut vs = VarSet::new();
    let t = vs.scalar("t");
    let block = AffineMatExpr::from_sym_rect(&t.expr().times_matrix(&Mat::identity(s.dim()))?)?
        .scale(-1.0)
        .add_constant(&s);
    let sdp = SdpProblem::assemble(vs.vars(), &t.expr(), vec![block])?;
    let sol = solve(&sdp, &IpmConfig::default())?;

    let exact = eig_sym(&s)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    println!("status      {:?} after {} iterations", sol.status, sol.iterations);
    println!("SDP         {:.10}", sol.x[0]);
    println!("eigenvalue  {exact:.10}");
    println!("gap {:.2e}, primal residual {:.2e}, dual residual {:.2e}", sol.gap, sol.primal_res, sol.dual_res);
    Ok(())
}
