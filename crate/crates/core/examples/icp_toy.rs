//! The outer loop on a one-line BMI, `min −β  s.t.  2p(a + β) ≤ 0,  p > 0`
//! with `a = −1`. The supremum `β = 1` is approached from inside; the
//! iteration log is written to stdout as CSV.

use std::io;

use innerconvex::icp::{run, BilinearConstraint, BilinearTerm, IcpConfig, LinearConstraint, NsdpProblem, Objective};
use innerconvex::linalg::Mat;
use innerconvex::lmi::{AffineMatExpr, VarSet};
use innerconvex::overestimate::BilinearForm;

fn main() -> innerconvex::Result<()> {
    let mut vs = VarSet::new();
    let beta = vs.scalar("beta");
    let p = vs.scalar("p");
    let n = vs.dim();
    let a_shifted = beta.expr().add_constant(&Mat::diag(&[-1.0]));
    let form = BilinearForm::identity_kernel(a_shifted, p.expr())?;
    let bmi = BilinearConstraint::new("lyapunov", AffineMatExpr::zeros(1), vec![BilinearTerm::new(form, 0)?], n)?;
    let positive = LinearConstraint::new("p > 0", AffineMatExpr::sym_of(&p.expr().scale(-0.5))?, n);
    let objective = Objective::linear(beta.expr().scale(-1.0), n)?;
    let problem = NsdpProblem::new(vs, objective, vec![Box::new(bmi), Box::new(positive)])?;

    let cfg = IcpConfig { max_outer_iters: 60, ..IcpConfig::default() };
    let r = run(&problem, &[0.0, 1.0], &cfg)?;
    r.write_csv(io::stdout())?;
    eprintln!("{:?}: beta = {:.6}, p = {:.4}, invariants hold: {}", r.status, r.x[0], r.x[1], r.invariants.holds());
    Ok(())
}
