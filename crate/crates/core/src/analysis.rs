//! Closed-loop verification oracles. None of this is used by the optimiser.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{eig_general, inverse, lyapunov_solve, sigma_max, spectral_abscissa, Lu, Mat, SymMat};
use crate::sof::{ClosedLoop, Controller, Plant};

/// Margin on `−β` accepted for a spectral-abscissa claim.
pub const SA_TOL: f64 = 1e-6;
/// Relative margin accepted for norm claims.
pub const NORM_TOL: f64 = 1e-4;
/// Default relative tolerance of [`hinf_norm`].
pub const HINF_TOL: f64 = 1e-6;

/// `G(s) = C(sI − A)⁻¹B + D`.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n || d.shape() != (c.rows(), b.cols()) {
            return shape_err(format!(
                "inconsistent realisation: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            ));
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// The closed loop from `w` to `z`.
    pub fn closed_loop(plant: &Plant, k: &Controller) -> Result<Self> {
        let cl = ClosedLoop::new(plant, k)?;
        StateSpace::new(cl.a_f, cl.b_f, cl.c_f, cl.d_f)
    }

    fn require_stable(&self) -> Result<()> {
        let alpha = spectral_abscissa(&self.a)?;
        if alpha >= 0.0 {
            return Err(Error::Precondition(format!("system is not stable: spectral abscissa {alpha:.4e}")));
        }
        Ok(())
    }
}

/// `σ_max(G(iω))`, computed in real arithmetic through the embedding
/// `M = Mr + iMi ↦ [[Mr, −Mi], [Mi, Mr]]`.
pub fn sigma_max_at(ss: &StateSpace, omega: f64) -> Result<f64> {
    let (n, m) = (ss.a.rows(), ss.b.cols());
    if n == 0 {
        return sigma_max(&ss.d);
    }
    // (iωI − A)(Xr + iXi) = B
    let mut k = Mat::zeros(2 * n, 2 * n);
    k.set_block(0, 0, &ss.a.scale(-1.0));
    k.set_block(n, n, &ss.a.scale(-1.0));
    k.set_block(0, n, &Mat::identity(n).scale(-omega));
    k.set_block(n, 0, &Mat::identity(n).scale(omega));
    let mut rhs = Mat::zeros(2 * n, m);
    rhs.set_block(0, 0, &ss.b);
    let sol = Lu::new(&k)?.solve_mat(&rhs);
    let gr = &ss.c.matmul(&sol.block(0, 0, n, m)) + &ss.d;
    let gi = ss.c.matmul(&sol.block(n, 0, n, m));
    let p = gr.rows();
    let mut big = Mat::zeros(2 * p, 2 * m);
    big.set_block(0, 0, &gr);
    big.set_block(p, m, &gr);
    big.set_block(0, m, &gi.scale(-1.0));
    big.set_block(p, 0, &gi);
    sigma_max(&big)
}

/// Whether the Hamiltonian at level `γ > σ_max(D)` has an eigenvalue on the
/// imaginary axis, i.e. whether `‖G‖∞ ≥ γ`.
pub fn hamiltonian_has_imaginary_eig(ss: &StateSpace, gamma: f64) -> Result<bool> {
    let n = ss.a.rows();
    let m = ss.b.cols();
    let p = ss.c.rows();
    let dt = ss.d.transpose();
    let mut r = dt.matmul(&ss.d).scale(-1.0);
    for i in 0..m {
        r[(i, i)] += gamma * gamma;
    }
    let r_inv = inverse(&r)?;
    let br = ss.b.matmul(&r_inv);
    let a_h = &ss.a + &br.matmul(&dt).matmul(&ss.c);
    let top_right = br.matmul(&ss.b.transpose());
    let mut inner = ss.d.matmul(&r_inv).matmul(&dt);
    for i in 0..p {
        inner[(i, i)] += 1.0;
    }
    let bottom_left = ss.c.transpose().matmul(&inner).matmul(&ss.c).scale(-1.0);
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.set_block(0, 0, &a_h);
    h.set_block(0, n, &top_right);
    h.set_block(n, 0, &bottom_left);
    h.set_block(n, n, &a_h.transpose().scale(-1.0));
    let eigs = eig_general(&h)?;
    Ok(eigs.iter().any(|e| e.re.abs() <= 1e-8 * (1.0 + e.re.hypot(e.im))))
}

/// `‖G‖∞` to relative accuracy `tol` by bisection on the Hamiltonian test.
pub fn hinf_norm(ss: &StateSpace, tol: f64) -> Result<f64> {
    ss.require_stable()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance {tol} must be positive")));
    }
    let n = ss.a.rows();
    let sigma_d = sigma_max(&ss.d)?;
    if n == 0 || ss.b.is_zero() || ss.c.is_zero() {
        return Ok(sigma_d);
    }
    // lower bound from a few natural frequencies
    let mut lo = sigma_d.max(sigma_max_at(ss, 0.0)?);
    for e in eig_general(&ss.a)? {
        let w = e.im.abs().max(e.re.hypot(e.im));
        lo = lo.max(sigma_max_at(ss, w)?);
    }
    // Hankel singular value bound ‖G‖∞ ≤ σ(D) + 2Σσᵢ ≤ σ(D) + 2√(n·trace(LcLo))
    let bbt = SymMat::symmetrize(&ss.b.matmul(&ss.b.transpose()))?;
    let ctc = SymMat::symmetrize(&ss.c.transpose().matmul(&ss.c))?;
    let lc = lyapunov_solve(&ss.a.transpose(), &bbt)?;
    let lo_gram = lyapunov_solve(&ss.a, &ctc)?;
    let tr = lc.to_mat().matmul(&lo_gram.to_mat()).trace().max(0.0);
    let mut hi = (sigma_d + 2.0 * (n as f64 * tr).sqrt()) * 1.01 + 1e-12;
    hi = hi.max(lo * (1.0 + tol));
    // make sure hi really is an upper bound
    let mut guard = 0;
    while hamiltonian_has_imaginary_eig(ss, hi)? {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::NumericalFailure("no upper bound for the H-infinity norm".into()));
        }
    }
    while hi - lo > tol * lo.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= sigma_d {
            lo = mid;
            continue;
        }
        if hamiltonian_has_imaginary_eig(ss, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `sqrt(trace(C L Cᵀ))` with `AL + LAᵀ + BBᵀ = 0`. Requires `D = 0`.
pub fn h2_norm(ss: &StateSpace) -> Result<f64> {
    ss.require_stable()?;
    if !ss.d.is_zero() {
        return Err(Error::Precondition("the H2 norm is infinite for D ≠ 0".into()));
    }
    if ss.a.rows() == 0 {
        return Ok(0.0);
    }
    let bbt = SymMat::symmetrize(&ss.b.matmul(&ss.b.transpose()))?;
    let l = lyapunov_solve(&ss.a.transpose(), &bbt)?;
    let v = ss.c.matmul(&l.to_mat()).matmul(&ss.c.transpose()).trace();
    Ok(v.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sa,
    Hinf,
    Mixed,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sa" => Ok(Mode::Sa),
            "hinf" => Ok(Mode::Hinf),
            "mixed" => Ok(Mode::Mixed),
            other => Err(Error::Config(format!("unknown mode {other:?}; expected sa, hinf or mixed"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Sa => "sa",
            Mode::Hinf => "hinf",
            Mode::Mixed => "mixed",
        })
    }
}

/// What a synthesis run claims about its controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Claims {
    Sa { beta: f64 },
    Hinf { gamma: f64 },
    Mixed { gamma: Option<f64>, trace_z: f64 },
}

impl Claims {
    pub fn mode(&self) -> Mode {
        match self {
            Claims::Sa { .. } => Mode::Sa,
            Claims::Hinf { .. } => Mode::Hinf,
            Claims::Mixed { .. } => Mode::Mixed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: Mode,
    pub alpha_closed: f64,
    pub hinf: Option<f64>,
    pub h2: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: &str, computed: f64, limit: f64) -> Check {
    Check { name: name.to_string(), computed, limit, passed: computed <= limit }
}

/// Recomputes the closed-loop quantities behind `claims` from scratch.
pub fn verify_synthesis(plant: &Plant, k: &Controller, claims: &Claims) -> Result<VerificationReport> {
    let ss = StateSpace::closed_loop(plant, k)?;
    let alpha = spectral_abscissa(&ss.a)?;
    let stable = alpha < 0.0;
    let mut checks = Vec::new();
    let mut hinf = None;
    let mut h2 = None;
    match *claims {
        Claims::Sa { beta } => {
            checks.push(check("alpha0(A_F) <= -beta", alpha, -beta + SA_TOL));
        }
        Claims::Hinf { gamma } => {
            checks.push(check("alpha0(A_F) < 0", alpha, 0.0));
            let norm = if stable { hinf_norm(&ss, HINF_TOL)? } else { f64::INFINITY };
            hinf = Some(norm);
            checks.push(check("hinf <= gamma", norm, gamma * (1.0 + NORM_TOL)));
        }
        Claims::Mixed { gamma, trace_z } => {
            checks.push(check("alpha0(A_F) < 0", alpha, 0.0));
            let h2v = if stable { h2_norm(&ss)? } else { f64::INFINITY };
            h2 = Some(h2v);
            checks.push(check("h2^2 <= trace(Z)", h2v * h2v, trace_z * (1.0 + NORM_TOL)));
            if let Some(g) = gamma {
                let norm = if stable { hinf_norm(&ss, HINF_TOL)? } else { f64::INFINITY };
                hinf = Some(norm);
                checks.push(check("hinf <= gamma", norm, g * (1.0 + NORM_TOL)));
            }
        }
    }
    // an unstable loop fails the strict check even at equality
    if let Some(c) = checks.first_mut() {
        if claims.mode() != Mode::Sa && !stable {
            c.passed = false;
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport { mode: claims.mode(), alpha_closed: alpha, hinf, h2, checks, passed })
}
