//! H∞ synthesis with `D₂₁ = 0`:
//!
//! ```text
//! min γ  s.t.  [ A_FᵀX + XA_F   XB₁    C_Fᵀ ]
//!              [ B₁ᵀX          −γI    D₁₁ᵀ ] ≺ 0,   X ≻ 0,  γ > 0
//!              [ C_F           D₁₁    −γI  ]
//! ```

use crate::error::{Error, Result};
use crate::icp::{run, BilinearConstraint, BilinearTerm, IcpConfig, IcpResult, LinearConstraint, NsdpProblem, Objective};
use crate::linalg::{Mat, SymMat};
use crate::lmi::{AffineMatExpr, AffineRect, BlockLmi, SdpProblem, VarRef, VarSet};
use crate::overestimate::BilinearForm;

use super::{
    gain_variable, lyapunov_term, negated, pack_scalar, pack_sym, require_stabilizing, stabilizing_gain,
    through_fixed_gain, through_gain, ClosedLoop, Controller, Plant, PHASE1_MARGIN,
};

pub struct HinfProblem {
    pub nsdp: NsdpProblem,
    pub x: VarRef,
    pub f: Option<VarRef>,
    pub gamma: VarRef,
}

impl HinfProblem {
    pub fn pack(&self, x_mat: &SymMat, k: &Controller, gamma: f64) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.nsdp.n_vars()];
        pack_sym(&self.x, x_mat, &mut x)?;
        if let Some(f) = &self.f {
            f.pack(&k.f, &mut x)?;
        }
        pack_scalar(&self.gamma, gamma, &mut x)?;
        Ok(x)
    }

    pub fn controller(&self, plant: &Plant, x: &[f64]) -> Controller {
        match &self.f {
            Some(f) => Controller::new(f.value(x)),
            None => plant.zero_controller(),
        }
    }

    pub fn gamma(&self, x: &[f64]) -> f64 {
        self.gamma.scalar_value(x)
    }
}

fn check_structure(plant: &Plant) -> Result<()> {
    plant.validate()?;
    if !plant.d21.is_zero() {
        return Err(Error::UnsupportedStructure("H-infinity synthesis requires D21 = 0".into()));
    }
    if plant.n_w() == 0 || plant.n_z() == 0 {
        return Err(Error::UnsupportedStructure(
            "H-infinity synthesis needs at least one disturbance and one performance channel".into(),
        ));
    }
    Ok(())
}

/// The block without its top-left corner.
fn host(plant: &Plant, c_f: AffineRect, x: &VarRef, gamma: &VarRef) -> Result<AffineMatExpr> {
    let (n, nw, nz) = (plant.n(), plant.n_w(), plant.n_z());
    let mut b = BlockLmi::new(&[n, nw, nz]);
    b.set(1, 0, x.expr().left_mul(&plant.b1.transpose())?)?;
    b.set(1, 1, gamma.expr().times_matrix(&Mat::identity(nw).scale(-1.0))?)?;
    b.set(2, 0, c_f)?;
    b.set_const(2, 1, plant.d11.clone())?;
    b.set(2, 2, gamma.expr().times_matrix(&Mat::identity(nz).scale(-1.0))?)?;
    Ok(b.build())
}

/// Variables `(X, F, γ)`.
pub fn build_hinf(plant: &Plant) -> Result<HinfProblem> {
    check_structure(plant)?;
    let n = plant.n();
    let mut vs = VarSet::new();
    let x = vs.symmetric("X", n)?;
    let f = gain_variable(&mut vs, plant)?;
    let gamma = vs.scalar("gamma");
    let dim = vs.dim();

    let a_f = through_gain(&plant.a, &plant.b, f.as_ref(), &plant.c)?;
    let c_f = through_gain(&plant.c1, &plant.d12, f.as_ref(), &plant.c)?;
    let form = BilinearForm::identity_kernel(a_f, x.expr())?;
    let bmi = BilinearConstraint::new("hinf", host(plant, c_f, &x, &gamma)?, vec![BilinearTerm::new(form, 0)?], dim)?;
    let x_pos = LinearConstraint::new("X>0", negated(&x)?, dim);
    let g_pos = LinearConstraint::new("gamma>0", negated(&gamma)?, dim);
    let objective = Objective::linear(gamma.expr(), dim)?;
    let nsdp = NsdpProblem::new(vs, objective, vec![Box::new(bmi), Box::new(x_pos), Box::new(g_pos)])?;
    Ok(HinfProblem { nsdp, x, f, gamma })
}

/// With `F` frozen the BMI is an LMI in `(X, γ)`; minimises
/// `γ + 10⁻⁶·trace(X)` with a margin and returns `(X*, 1.05γ*)`.
pub fn hinf_phase1(plant: &Plant, k: &Controller) -> Result<(SymMat, f64)> {
    check_structure(plant)?;
    require_stabilizing(plant, k)?;
    let cl = ClosedLoop::new(plant, k)?;
    let mut vs = VarSet::new();
    let x = vs.symmetric("X", plant.n())?;
    let gamma = vs.scalar("gamma");
    let c_f = AffineRect::constant(through_fixed_gain(&plant.c1, &plant.d12, &k.f, &plant.c));
    let h = host(plant, c_f, &x, &gamma)?;
    let block = h.add(&lyapunov_term(&cl.a_f, &x)?.embed(h.dim(), 0)?);
    let blocks = vec![
        block.add_identity(PHASE1_MARGIN),
        negated(&x)?.add_identity(PHASE1_MARGIN),
        negated(&gamma)?.add_identity(PHASE1_MARGIN),
    ];
    let objective = gamma.expr().add(&x.expr().trace()?.scale(1e-6));
    let sdp = SdpProblem::assemble(vs.vars(), &objective, blocks)?;
    let sol = super::solve_phase1(&sdp, "H-infinity")?;
    let x_val = SymMat::symmetrize(&x.value(&sol))?;
    Ok((x_val, 1.05 * gamma.scalar_value(&sol)))
}

#[derive(Clone, Debug)]
pub struct HinfSynthesis {
    pub controller: Controller,
    pub gamma: f64,
    pub gamma0: f64,
    pub result: IcpResult,
}

pub fn synthesize_hinf(plant: &Plant, f0: Option<&Controller>, cfg: &IcpConfig) -> Result<HinfSynthesis> {
    let prob = build_hinf(plant)?;
    let k0 = stabilizing_gain(plant, f0, cfg)?;
    let (x0_mat, gamma0) = hinf_phase1(plant, &k0)?;
    let x0 = prob.pack(&x0_mat, &k0, gamma0)?;
    let result = run(&prob.nsdp, &x0, cfg)?;
    Ok(HinfSynthesis {
        controller: prob.controller(plant, &result.x),
        gamma: prob.gamma(&result.x),
        gamma0,
        result,
    })
}
