//! Mixed H2/H∞ synthesis with `D₁₁ = 0`, `D₂₁ = 0` and a shared performance
//! output:
//!
//! ```text
//! min trace(Z)  s.t.  [ A_FᵀP₁ + P₁A_F + C_FᵀC_F   P₁B₁  ]
//!                     [ B₁ᵀP₁                     −γ²I  ] ≺ 0,
//!                     [ A_FᵀP₂ + P₂A_F   P₂B₁ ]
//!                     [ B₁ᵀP₂            −I   ] ≺ 0,
//!                     [ P₂   C_Fᵀ ]
//!                     [ C_F  Z    ] ≻ 0,   P₁, P₂ ≻ 0.
//! ```
//!
//! The first block is used in the equivalent form
//! `[[A_FᵀP₁ + P₁A_F, P₁B₁/γ, C_Fᵀ], [B₁ᵀP₁/γ, −I, 0], [C_F, 0, −I]] ≺ 0`,
//! which holds `C_FᵀC_F` exactly through a Schur complement. Without a level
//! `γ` the first block and `P₁` are dropped (pure H2).

use crate::error::{Error, Result};
use crate::icp::{run, BilinearConstraint, BilinearTerm, IcpConfig, IcpResult, LinearConstraint, NsdpProblem, Objective};
use crate::linalg::{Mat, SymMat};
use crate::lmi::{AffineMatExpr, AffineRect, BlockLmi, SdpProblem, VarRef, VarSet};
use crate::overestimate::BilinearForm;

use super::{
    hinf::{hinf_phase1, synthesize_hinf},
    gain_variable, lyapunov_term, negated, pack_sym, require_stabilizing, stabilizing_gain, through_fixed_gain,
    through_gain, ClosedLoop, Controller, Plant, PHASE1_MARGIN,
};

pub struct MixedProblem {
    pub nsdp: NsdpProblem,
    pub f: Option<VarRef>,
    pub p1: Option<VarRef>,
    pub p2: VarRef,
    pub z: VarRef,
    pub gamma: Option<f64>,
}

/// A point of the mixed problem, also usable as a warm start.
#[derive(Clone, Debug)]
pub struct MixedStart {
    pub controller: Controller,
    pub p1: Option<SymMat>,
    pub p2: SymMat,
    pub z: SymMat,
}

impl MixedProblem {
    pub fn pack(&self, s: &MixedStart) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.nsdp.n_vars()];
        if let Some(f) = &self.f {
            f.pack(&s.controller.f, &mut x)?;
        }
        match (&self.p1, &s.p1) {
            (Some(v), Some(p1)) => pack_sym(v, p1, &mut x)?,
            (Some(_), None) => return Err(Error::Shape("start lacks P1 for a problem with an H-infinity level".into())),
            _ => {}
        }
        pack_sym(&self.p2, &s.p2, &mut x)?;
        pack_sym(&self.z, &s.z, &mut x)?;
        Ok(x)
    }

    pub fn unpack(&self, plant: &Plant, x: &[f64]) -> Result<MixedStart> {
        let sym = |v: &VarRef| SymMat::symmetrize(&v.value(x));
        Ok(MixedStart {
            controller: match &self.f {
                Some(f) => Controller::new(f.value(x)),
                None => plant.zero_controller(),
            },
            p1: self.p1.as_ref().map(sym).transpose()?,
            p2: sym(&self.p2)?,
            z: sym(&self.z)?,
        })
    }
}

fn check_structure(plant: &Plant, gamma: Option<f64>) -> Result<()> {
    plant.validate()?;
    if !plant.d11.is_zero() || !plant.d21.is_zero() {
        return Err(Error::UnsupportedStructure("mixed H2/H-infinity synthesis requires D11 = 0 and D21 = 0".into()));
    }
    if plant.n_w() == 0 || plant.n_z() == 0 {
        return Err(Error::UnsupportedStructure(
            "mixed synthesis needs at least one disturbance and one performance channel".into(),
        ));
    }
    if let Some(g) = gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("H-infinity level {g} must be positive")));
        }
    }
    Ok(())
}

/// Block (i) without its top-left corner.
fn hinf_host(plant: &Plant, gamma: f64, c_f: &AffineRect, p1: &VarRef) -> Result<AffineMatExpr> {
    let (n, nw, nz) = (plant.n(), plant.n_w(), plant.n_z());
    let mut b = BlockLmi::new(&[n, nw, nz]);
    b.set(1, 0, p1.expr().left_mul(&plant.b1.transpose())?.scale(1.0 / gamma))?;
    b.set_const(1, 1, Mat::identity(nw).scale(-1.0))?;
    b.set(2, 0, c_f.clone())?;
    b.set_const(2, 2, Mat::identity(nz).scale(-1.0))?;
    Ok(b.build())
}

/// Block (ii) without its top-left corner.
fn h2_host(plant: &Plant, p2: &VarRef) -> Result<AffineMatExpr> {
    let mut b = BlockLmi::new(&[plant.n(), plant.n_w()]);
    b.set(1, 0, p2.expr().left_mul(&plant.b1.transpose())?)?;
    b.set_const(1, 1, Mat::identity(plant.n_w()).scale(-1.0))?;
    Ok(b.build())
}

/// Block (iii) as `−[[P₂, C_Fᵀ], [C_F, Z]] ⪯ 0`.
fn gramian_bound(plant: &Plant, c_f: &AffineRect, p2: &VarRef, z: &VarRef) -> Result<AffineMatExpr> {
    let mut b = BlockLmi::new(&[plant.n(), plant.n_z()]);
    b.set(0, 0, p2.expr().scale(-1.0))?;
    b.set(1, 0, c_f.scale(-1.0))?;
    b.set(1, 1, z.expr().scale(-1.0))?;
    Ok(b.build())
}

/// Variables `(F, P₁, P₂, Z)`; `gamma = None` gives the pure H2 problem.
pub fn build_mixed_h2hinf(plant: &Plant, gamma: Option<f64>) -> Result<MixedProblem> {
    check_structure(plant, gamma)?;
    let (n, nz) = (plant.n(), plant.n_z());
    let mut vs = VarSet::new();
    let f = gain_variable(&mut vs, plant)?;
    let p1 = match gamma {
        Some(_) => Some(vs.symmetric("P1", n)?),
        None => None,
    };
    let p2 = vs.symmetric("P2", n)?;
    let z = vs.symmetric("Z", nz)?;
    let dim = vs.dim();

    let a_f = through_gain(&plant.a, &plant.b, f.as_ref(), &plant.c)?;
    let c_f = through_gain(&plant.c1, &plant.d12, f.as_ref(), &plant.c)?;
    let mut constraints: Vec<Box<dyn crate::icp::MatrixConstraint>> = Vec::new();
    if let (Some(g), Some(p1)) = (gamma, &p1) {
        let form = BilinearForm::identity_kernel(a_f.clone(), p1.expr())?;
        let host = hinf_host(plant, g, &c_f, p1)?;
        constraints.push(Box::new(BilinearConstraint::new("hinf", host, vec![BilinearTerm::new(form, 0)?], dim)?));
    }
    let form = BilinearForm::identity_kernel(a_f, p2.expr())?;
    constraints.push(Box::new(BilinearConstraint::new(
        "h2",
        h2_host(plant, &p2)?,
        vec![BilinearTerm::new(form, 0)?],
        dim,
    )?));
    constraints.push(Box::new(LinearConstraint::new("gramian", gramian_bound(plant, &c_f, &p2, &z)?, dim)));
    if let Some(p1) = &p1 {
        constraints.push(Box::new(LinearConstraint::new("P1>0", negated(p1)?, dim)));
    }
    constraints.push(Box::new(LinearConstraint::new("P2>0", negated(&p2)?, dim)));
    let objective = Objective::linear(z.expr().trace()?, dim)?;
    let nsdp = NsdpProblem::new(vs, objective, constraints)?;
    Ok(MixedProblem { nsdp, f, p1, p2, z, gamma })
}

/// With `F` frozen the constraints are LMIs in `(P₁, P₂, Z)`; minimises
/// `trace(Z)` with a margin and inflates `Z` by 5%.
pub fn mixed_phase1(plant: &Plant, gamma: Option<f64>, k: &Controller) -> Result<MixedStart> {
    check_structure(plant, gamma)?;
    require_stabilizing(plant, k)?;
    let cl = ClosedLoop::new(plant, k)?;
    let n = plant.n();
    let mut vs = VarSet::new();
    let p1 = match gamma {
        Some(_) => Some(vs.symmetric("P1", n)?),
        None => None,
    };
    let p2 = vs.symmetric("P2", n)?;
    let z = vs.symmetric("Z", plant.n_z())?;
    let c_f = AffineRect::constant(through_fixed_gain(&plant.c1, &plant.d12, &k.f, &plant.c));

    let mut blocks = Vec::new();
    let mut objective = z.expr().trace()?;
    if let (Some(g), Some(p1)) = (gamma, &p1) {
        let h = hinf_host(plant, g, &c_f, p1)?;
        blocks.push(h.add(&lyapunov_term(&cl.a_f, p1)?.embed(h.dim(), 0)?));
        blocks.push(negated(p1)?);
        objective = objective.add(&p1.expr().trace()?.scale(1e-6));
    }
    let h = h2_host(plant, &p2)?;
    blocks.push(h.add(&lyapunov_term(&cl.a_f, &p2)?.embed(h.dim(), 0)?));
    blocks.push(gramian_bound(plant, &c_f, &p2, &z)?);
    blocks.push(negated(&p2)?);
    let blocks = blocks.into_iter().map(|b| b.add_identity(PHASE1_MARGIN)).collect();
    let sdp = SdpProblem::assemble(vs.vars(), &objective, blocks)?;
    let label = match gamma {
        Some(g) => format!("mixed (gamma = {g})"),
        None => "H2".to_string(),
    };
    let sol = match (super::solve_phase1(&sdp, &label), gamma) {
        (Err(Error::NumericalFailure(msg)), Some(g)) => {
            // the solver does not always certify infeasibility; the frozen-gain H∞ LMI settles it
            let (_, inflated) = hinf_phase1(plant, k)?;
            let bound = inflated / 1.05;
            if bound >= g {
                return Err(Error::Infeasible(format!(
                    "{label} Phase-1 LMI is infeasible: the gain only achieves an H-infinity bound of {bound:.4}"
                )));
            }
            return Err(Error::NumericalFailure(msg));
        }
        (sol, _) => sol?,
    };
    let sym = |v: &VarRef| SymMat::symmetrize(&v.value(&sol));
    Ok(MixedStart {
        controller: k.clone(),
        p1: p1.as_ref().map(sym).transpose()?,
        p2: sym(&p2)?,
        z: sym(&z)?.scale(1.05),
    })
}

#[derive(Clone, Debug)]
pub struct MixedSynthesis {
    pub controller: Controller,
    pub trace_z: f64,
    pub trace_z0: f64,
    /// The final point, usable as a warm start for another level.
    pub point: MixedStart,
    pub result: IcpResult,
}

/// Starts from `f0`, or from the default stabilising gain. Without `f0`, a
/// level the default gain cannot meet is retried from the H∞-optimised gain.
pub fn synthesize_mixed(
    plant: &Plant,
    gamma: Option<f64>,
    f0: Option<&Controller>,
    cfg: &IcpConfig,
) -> Result<MixedSynthesis> {
    let k0 = stabilizing_gain(plant, f0, cfg)?;
    let start = match (mixed_phase1(plant, gamma, &k0), gamma, f0) {
        (Err(Error::Infeasible(msg)), Some(g), None) => {
            // the default gain may simply not meet the level; retry from the H∞-optimised one
            let hinf = synthesize_hinf(plant, Some(&k0), cfg)?;
            if hinf.gamma >= g {
                return Err(Error::Infeasible(format!("{msg}; best H-infinity bound found is {:.4}", hinf.gamma)));
            }
            log::info!("mixed: starting from the H-infinity gain (bound {:.4})", hinf.gamma);
            mixed_phase1(plant, gamma, &hinf.controller)?
        }
        (start, _, _) => start?,
    };
    synthesize_mixed_from(plant, gamma, &start, cfg)
}

/// Runs the mixed problem from a given strictly feasible point, e.g. the
/// solution at a smaller level `γ`.
pub fn synthesize_mixed_from(
    plant: &Plant,
    gamma: Option<f64>,
    start: &MixedStart,
    cfg: &IcpConfig,
) -> Result<MixedSynthesis> {
    let prob = build_mixed_h2hinf(plant, gamma)?;
    let x0 = prob.pack(start)?;
    let result = run(&prob.nsdp, &x0, cfg)?;
    let point = prob.unpack(plant, &result.x)?;
    Ok(MixedSynthesis {
        controller: point.controller.clone(),
        trace_z: point.z.trace(),
        trace_z0: start.z.trace(),
        point,
        result,
    })
}
