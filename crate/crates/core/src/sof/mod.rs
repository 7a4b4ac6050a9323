//! Static output feedback synthesis `u = Fy` for the plant
//!
//! ```text
//! ẋ = Ax + B₁w + Bu,   z = C₁x + D₁₁w + D₁₂u,   y = Cx + D₂₁w
//! ```
//!
//! Three problems are provided, each as a builder producing an
//! [`NsdpProblem`](crate::icp::NsdpProblem), a Phase-1 routine producing a
//! strictly feasible start, and a driver running the outer loop:
//!
//! - [`spectral`]: maximise `β` such that `A + BFC + βI` is stable;
//! - [`hinf`]: minimise the closed-loop H∞ norm bound `γ`;
//! - [`mixed`]: minimise an H2 bound `trace(Z)` under an H∞ level `γ`.

pub mod hinf;
pub mod mixed;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icp::IcpConfig;
use crate::linalg::{spectral_abscissa, Mat, SymMat};
use crate::lmi::{AffineMatExpr, AffineRect, SdpProblem, SdpStatus, VarRef, VarSet};
use crate::sdp::{self, IpmConfig};

pub use hinf::{build_hinf, hinf_phase1, synthesize_hinf, HinfProblem, HinfSynthesis};
pub use mixed::{
    build_mixed_h2hinf, mixed_phase1, synthesize_mixed, synthesize_mixed_from, MixedProblem, MixedStart, MixedSynthesis,
};
pub use spectral::{build_spectral_abscissa, sa_phase1, synthesize_sa, SaProblem, SaSynthesis};

/// Margin by which Phase-1 points satisfy their LMIs.
pub const PHASE1_MARGIN: f64 = 1e-4;

/// A continuous-time plant. Matrices with a zero dimension are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant {
    pub name: String,
    pub a: Mat,
    pub b1: Mat,
    pub b: Mat,
    pub c1: Mat,
    pub c: Mat,
    pub d11: Mat,
    pub d12: Mat,
    pub d21: Mat,
}

impl Plant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        a: Mat,
        b1: Mat,
        b: Mat,
        c1: Mat,
        c: Mat,
        d11: Mat,
        d12: Mat,
        d21: Mat,
    ) -> Result<Self> {
        let p = Plant { name: name.to_string(), a, b1, b, c1, c, d11, d12, d21 };
        p.validate()?;
        Ok(p)
    }

    /// A plant with only `A`, `B`, `C`; the performance channels are empty.
    pub fn sof_only(name: &str, a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let n = a.rows();
        let (nu, ny) = (b.cols(), c.rows());
        Plant::new(
            name,
            a,
            Mat::zeros(n, 0),
            b,
            Mat::zeros(0, n),
            c,
            Mat::zeros(0, 0),
            Mat::zeros(0, nu),
            Mat::zeros(ny, 0),
        )
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn n_w(&self) -> usize {
        self.b1.cols()
    }

    pub fn n_u(&self) -> usize {
        self.b.cols()
    }

    pub fn n_z(&self) -> usize {
        self.c1.rows()
    }

    pub fn n_y(&self) -> usize {
        self.c.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        let (nw, nu, nz, ny) = (self.b1.cols(), self.b.cols(), self.c1.rows(), self.c.rows());
        let expect = [
            ("A", &self.a, (n, n)),
            ("B1", &self.b1, (n, nw)),
            ("B", &self.b, (n, nu)),
            ("C1", &self.c1, (nz, n)),
            ("C", &self.c, (ny, n)),
            ("D11", &self.d11, (nz, nw)),
            ("D12", &self.d12, (nz, nu)),
            ("D21", &self.d21, (ny, nw)),
        ];
        if n == 0 {
            return Err(Error::PlantFormat(format!("plant {} has no states", self.name)));
        }
        for (label, m, shape) in expect {
            if m.shape() != shape {
                return Err(Error::PlantFormat(format!(
                    "{label} of plant {} is {:?}, expected {:?}",
                    self.name,
                    m.shape(),
                    shape
                )));
            }
            if m.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::PlantFormat(format!("{label} of plant {} has non-finite entries", self.name)));
            }
        }
        Ok(())
    }

    /// `α₀(A)`.
    pub fn open_loop_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.a)
    }

    pub fn zero_controller(&self) -> Controller {
        Controller { f: Mat::zeros(self.n_u(), self.n_y()) }
    }

    pub fn closed_loop(&self, k: &Controller) -> Result<ClosedLoop> {
        ClosedLoop::new(self, k)
    }
}

/// Static gain `u = Fy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    #[serde(with = "mat_rows")]
    pub f: Mat,
}

impl Controller {
    pub fn new(f: Mat) -> Self {
        Controller { f }
    }

    pub fn check_for(&self, plant: &Plant) -> Result<()> {
        if self.f.shape() != (plant.n_u(), plant.n_y()) {
            return Err(Error::Shape(format!(
                "controller is {:?}, plant needs {:?}",
                self.f.shape(),
                (plant.n_u(), plant.n_y())
            )));
        }
        Ok(())
    }
}

/// Serialises a [`Mat`] as nested rows.
pub(crate) mod mat_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::Mat;

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        m.to_rows().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.is_empty() {
            return Ok(Mat::zeros(0, 0));
        }
        Mat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Closed-loop matrices for a given gain.
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    pub a_f: Mat,
    pub b_f: Mat,
    pub c_f: Mat,
    pub d_f: Mat,
}

impl ClosedLoop {
    pub fn new(p: &Plant, k: &Controller) -> Result<Self> {
        k.check_for(p)?;
        let bf = p.b.matmul(&k.f);
        let df = p.d12.matmul(&k.f);
        Ok(ClosedLoop {
            a_f: &p.a + &bf.matmul(&p.c),
            b_f: &p.b1 + &bf.matmul(&p.d21),
            c_f: &p.c1 + &df.matmul(&p.c),
            d_f: &p.d11 + &df.matmul(&p.d21),
        })
    }
}

/// The gain variable, absent when the plant has no inputs or outputs.
pub(crate) fn gain_variable(vs: &mut VarSet, p: &Plant) -> Result<Option<VarRef>> {
    if p.n_u() == 0 || p.n_y() == 0 {
        return Ok(None);
    }
    Ok(Some(vs.matrix("F", p.n_u(), p.n_y())?))
}

/// `M₀ + L F R` as an affine expression, or the constant `M₀` without a gain.
pub(crate) fn through_gain(m0: &Mat, l: &Mat, f: Option<&VarRef>, r: &Mat) -> Result<AffineRect> {
    let base = AffineRect::constant(m0.clone());
    match f {
        Some(f) => Ok(f.expr().left_mul(l)?.right_mul(r)?.add(&base)),
        None => Ok(base),
    }
}

/// `M₀ + L F R` evaluated at a fixed gain.
pub(crate) fn through_fixed_gain(m0: &Mat, l: &Mat, f: &Mat, r: &Mat) -> Mat {
    if f.rows() == 0 || f.cols() == 0 {
        return m0.clone();
    }
    m0 + &l.matmul(f).matmul(r)
}

/// `−P` as a constraint value, i.e. `P ⪰ 0`.
pub(crate) fn negated(p: &VarRef) -> Result<AffineMatExpr> {
    AffineMatExpr::from_sym_rect(&p.expr().scale(-1.0))
}

/// `AᵀP + PA` for a constant `A`.
pub(crate) fn lyapunov_term(a: &Mat, p: &VarRef) -> Result<AffineMatExpr> {
    AffineMatExpr::sym_of(&p.expr().left_mul(&a.transpose())?)
}

/// Writes a symmetric or rectangular value into the decision vector.
pub(crate) fn pack_sym(v: &VarRef, s: &SymMat, x: &mut [f64]) -> Result<()> {
    v.pack(&s.to_mat(), x)
}

pub(crate) fn pack_scalar(v: &VarRef, s: f64, x: &mut [f64]) -> Result<()> {
    v.pack(&Mat::diag(&[s]), x)
}

/// Checks that `A + BFC` is Hurwitz.
pub(crate) fn require_stabilizing(p: &Plant, k: &Controller) -> Result<()> {
    let cl = ClosedLoop::new(p, k)?;
    let alpha = spectral_abscissa(&cl.a_f)?;
    if alpha >= 0.0 {
        return Err(Error::Precondition(format!(
            "gain does not stabilise plant {}: closed-loop abscissa {alpha:.4e}",
            p.name
        )));
    }
    Ok(())
}

/// A stabilising gain: the given one, zero if `A` is stable, or one found by
/// a spectral-abscissa run.
pub fn stabilizing_gain(p: &Plant, f0: Option<&Controller>, cfg: &IcpConfig) -> Result<Controller> {
    if let Some(k) = f0 {
        require_stabilizing(p, k)?;
        return Ok(k.clone());
    }
    let zero = p.zero_controller();
    if p.open_loop_abscissa()? < 0.0 {
        return Ok(zero);
    }
    spectral::bootstrap(p, cfg)
}

/// Solves a Phase-1 LMI problem whose blocks already carry the margin.
pub(crate) fn solve_phase1(sdp: &SdpProblem, label: &str) -> Result<Vec<f64>> {
    let cfg = IpmConfig { tol_gap: 1e-9, tol_feas: 1e-10, max_iters: 150, ..IpmConfig::default() };
    let sol = sdp::solve(sdp, &cfg)?;
    match sol.status {
        SdpStatus::Optimal => Ok(sol.x),
        SdpStatus::Infeasible => Err(Error::Infeasible(format!("{label} Phase-1 LMI is infeasible"))),
        status => {
            // an inaccurate but strictly feasible point is still a valid start
            if sdp.max_violation(&sol.x)? <= 0.0 {
                log::warn!("{label} Phase 1 ended with status {status:?}; using its feasible point");
                Ok(sol.x)
            } else {
                Err(Error::NumericalFailure(format!("{label} Phase 1 ended with status {status:?}")))
            }
        }
    }
}
