//! Spectral abscissa: `max β  s.t.  (A + BFC + βI)ᵀP + P(A + BFC + βI) ≺ 0,  P ≻ 0`.

use crate::error::{Error, Result};
use crate::icp::{run, BilinearConstraint, BilinearTerm, IcpConfig, IcpResult, LinearConstraint, NsdpProblem, Objective};
use crate::linalg::{lyapunov_solve, spectral_abscissa, Mat, SymMat};
use crate::lmi::{AffineMatExpr, VarRef, VarSet};
use crate::overestimate::BilinearForm;

use super::{gain_variable, negated, pack_scalar, pack_sym, through_gain, ClosedLoop, Controller, Plant};

pub struct SaProblem {
    pub nsdp: NsdpProblem,
    pub p: VarRef,
    pub f: Option<VarRef>,
    pub beta: VarRef,
}

impl SaProblem {
    pub fn pack(&self, p: &SymMat, k: &Controller, beta: f64) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.nsdp.n_vars()];
        pack_sym(&self.p, p, &mut x)?;
        if let Some(f) = &self.f {
            f.pack(&k.f, &mut x)?;
        }
        pack_scalar(&self.beta, beta, &mut x)?;
        Ok(x)
    }

    pub fn controller(&self, plant: &Plant, x: &[f64]) -> Controller {
        match &self.f {
            Some(f) => Controller::new(f.value(x)),
            None => plant.zero_controller(),
        }
    }

    pub fn beta(&self, x: &[f64]) -> f64 {
        self.beta.scalar_value(x)
    }
}

/// Variables `(P, F, β)`; the BMI is `𝓑_I(A + BFC + βI, P) ⪯ 0`.
pub fn build_spectral_abscissa(plant: &Plant) -> Result<SaProblem> {
    plant.validate()?;
    let n = plant.n();
    let mut vs = VarSet::new();
    let p = vs.symmetric("P", n)?;
    let f = gain_variable(&mut vs, plant)?;
    let beta = vs.scalar("beta");
    let dim = vs.dim();

    let a_f = through_gain(&plant.a, &plant.b, f.as_ref(), &plant.c)?
        .add(&beta.expr().times_matrix(&Mat::identity(n))?);
    let form = BilinearForm::identity_kernel(a_f, p.expr())?;
    let bmi = BilinearConstraint::new("lyapunov", AffineMatExpr::zeros(n), vec![BilinearTerm::new(form, 0)?], dim)?;
    let pos = LinearConstraint::new("P>0", negated(&p)?, dim);
    let objective = Objective::linear(beta.expr().scale(-1.0), dim)?;
    let nsdp = NsdpProblem::new(vs, objective, vec![Box::new(bmi), Box::new(pos)])?;
    Ok(SaProblem { nsdp, p, f, beta })
}

/// `β₀ = −α₀(A_F₀) − 1` and `P₀` solving `(A_F₀ + β₀I)ᵀP + P(A_F₀ + β₀I) = −I`,
/// so that the BMI value at the start is exactly `−I`.
pub fn sa_phase1(plant: &Plant, f0: Option<&Controller>) -> Result<(SymMat, Controller, f64)> {
    let k = f0.cloned().unwrap_or_else(|| plant.zero_controller());
    let cl = ClosedLoop::new(plant, &k)?;
    let beta0 = -spectral_abscissa(&cl.a_f)? - 1.0;
    let mut shifted = cl.a_f.clone();
    for i in 0..plant.n() {
        shifted[(i, i)] += beta0;
    }
    let p0 = lyapunov_solve(&shifted, &SymMat::identity(plant.n()))?;
    Ok((p0, k, beta0))
}

#[derive(Clone, Debug)]
pub struct SaSynthesis {
    pub controller: Controller,
    pub beta: f64,
    pub beta0: f64,
    pub result: IcpResult,
}

pub fn synthesize_sa(plant: &Plant, f0: Option<&Controller>, cfg: &IcpConfig) -> Result<SaSynthesis> {
    let prob = build_spectral_abscissa(plant)?;
    let (p0, k0, beta0) = sa_phase1(plant, f0)?;
    let x0 = prob.pack(&p0, &k0, beta0)?;
    let result = run(&prob.nsdp, &x0, cfg)?;
    Ok(SaSynthesis {
        controller: prob.controller(plant, &result.x),
        beta: prob.beta(&result.x),
        beta0,
        result,
    })
}

/// A stabilising gain from a spectral-abscissa run: the earliest iterate
/// whose `β` reaches half of the final value (at most 1).
pub(crate) fn bootstrap(plant: &Plant, cfg: &IcpConfig) -> Result<Controller> {
    let prob = build_spectral_abscissa(plant)?;
    let (p0, k0, beta0) = sa_phase1(plant, None)?;
    let x0 = prob.pack(&p0, &k0, beta0)?;
    let result = run(&prob.nsdp, &x0, cfg)?;
    let beta_final = prob.beta(&result.x);
    if beta_final <= 0.0 {
        return Err(Error::Precondition(format!(
            "no stabilising static gain found for plant {} (best β = {beta_final:.4e})",
            plant.name
        )));
    }
    let target = (0.5 * beta_final).min(1.0);
    let x = result.iterates.iter().find(|x| prob.beta(x) >= target).unwrap_or(&result.x);
    Ok(prob.controller(plant, x))
}
