//! Dense primal-dual interior-point solver for block LMI problems.
//!
//! Solves `min cᵀx s.t. Fⱼ(x) = F0ⱼ + Σᵢ xᵢAᵢⱼ ⪯ 0` together with its dual
//! `max Σⱼ F0ⱼ∘Wⱼ s.t. c + Σⱼ Aⱼ*(Wⱼ) = 0, Wⱼ ⪰ 0`, using the HKM search
//! direction with Mehrotra's predictor-corrector and an infeasible start.
//! The slack is `Sⱼ = −Fⱼ(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat, SymMat};
use crate::lmi::{AffineMatExpr, SdpProblem, SdpSolution, SdpStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IpmConfig {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for IpmConfig {
    fn default() -> Self {
        IpmConfig { tol_gap: 1e-7, tol_feas: 1e-7, max_iters: 100, step_fraction: 0.98, verbose: false }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_gap > 0.0
            && self.tol_feas > 0.0
            && self.max_iters > 0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid interior-point settings {self:?}")))
        }
    }
}

/// `A*(W)` for one block, scattered into a vector of length `n`.
pub fn adjoint_apply(block: &AffineMatExpr, w: &SymMat, n: usize) -> Result<Vec<f64>> {
    if w.dim() != block.dim() {
        return Err(Error::Shape(format!("dual is {}x{}, block is {}", w.dim(), w.dim(), block.dim())));
    }
    if let Some((&k, _)) = block.terms().iter().next_back() {
        if k >= n {
            return Err(Error::Shape(format!("coordinate {k} outside length {n}")));
        }
    }
    Ok(block.adjoint_apply(w, n))
}

struct Block<'a> {
    expr: &'a AffineMatExpr,
    coords: Vec<usize>,
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<SymMat>,
    w: Vec<SymMat>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<SymMat>,
    dw: Vec<SymMat>,
}

fn mat_of(s: &SymMat) -> Mat {
    s.to_mat()
}

fn sym(m: &Mat) -> SymMat {
    SymMat::symmetrize(m).expect("square")
}

/// Coefficient matrix of coordinate `k` in a block, as a dense matrix.
fn dense_coeff(b: &AffineMatExpr, k: usize) -> Mat {
    b.terms()[&k].to_sym().to_mat()
}

/// Factorisation data per block reused by the predictor and corrector.
struct Scaling {
    s_inv: Vec<Mat>,
    w: Vec<Mat>,
}

/// Solves the SDP. Never panics on ill-posed input: breakdowns are
/// reported through [`SdpStatus`].
pub fn solve(p: &SdpProblem, cfg: &IpmConfig) -> Result<SdpSolution> {
    cfg.validate()?;
    let n = p.n_vars();
    let c = p.c();
    let blocks: Vec<Block> = p
        .blocks()
        .iter()
        .map(|e| Block { expr: e, coords: e.terms().keys().copied().collect() })
        .collect();
    let total_dim: usize = blocks.iter().map(|b| b.expr.dim()).sum();
    let c_norm_inf = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f0_norm = blocks
        .iter()
        .map(|b| b.expr.constant_part().frobenius_norm().powi(2))
        .sum::<f64>()
        .sqrt();

    // scaled identities as the infeasible starting point
    let mut it = Iterate { x: vec![0.0; n], s: Vec::new(), w: Vec::new() };
    for b in &blocks {
        let pd = b.expr.dim() as f64;
        let mut a_max: f64 = 0.0;
        let mut xi: f64 = 10.0f64.max(pd.sqrt());
        for (&k, a) in b.expr.terms() {
            let an = a.to_sym().frobenius_norm();
            a_max = a_max.max(an);
            xi = xi.max(pd * (1.0 + c[k].abs()) / (1.0 + an));
        }
        let eta = 10.0f64.max(pd.sqrt()).max(a_max).max(b.expr.constant_part().frobenius_norm());
        it.s.push(SymMat::identity(b.expr.dim()).scale(eta));
        it.w.push(SymMat::identity(b.expr.dim()).scale(xi));
    }

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut best: Option<(f64, Iterate)> = None;

    for iter in 0..=cfg.max_iters {
        iterations = iter;
        // residuals
        let rp: Vec<SymMat> = blocks
            .iter()
            .zip(&it.s)
            .map(|(b, s)| s.add(&b.expr.evaluate(&it.x)))
            .collect();
        let mut rd = c.to_vec();
        for (b, w) in blocks.iter().zip(&it.w) {
            b.expr.adjoint_accumulate(w, &mut rd);
        }
        let pobj = p.objective(&it.x);
        let dobj = p.offset()
            + blocks
                .iter()
                .zip(&it.w)
                .map(|(b, w)| b.expr.constant_part().inner(w))
                .sum::<f64>();
        let sw: f64 = it.s.iter().zip(&it.w).map(|(s, w)| s.inner(w)).sum();
        let mu = sw / total_dim as f64;
        let rp_norm = rp.iter().map(|r| r.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        let rd_inf = rd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let rel_gap = ((pobj - dobj).abs() / denom).max(sw / denom);
        let p_inf = rp_norm / (1.0 + f0_norm);
        let d_inf = rd_inf / (1.0 + c_norm_inf);

        if cfg.verbose {
            log::debug!(
                "ipm {iter:3}: pobj {pobj:+.8e} dobj {dobj:+.8e} gap {rel_gap:.2e} pinf {p_inf:.2e} dinf {d_inf:.2e} mu {mu:.2e}"
            );
        }

        let merit = rel_gap.max(p_inf).max(d_inf);
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, Iterate { x: it.x.clone(), s: it.s.clone(), w: it.w.clone() }));
        }

        if rel_gap <= cfg.tol_gap && p_inf <= cfg.tol_feas && d_inf <= cfg.tol_feas {
            status = SdpStatus::Optimal;
            break;
        }
        let dual_lin = {
            let mut v = vec![0.0; n];
            for (b, w) in blocks.iter().zip(&it.w) {
                b.expr.adjoint_accumulate(w, &mut v);
            }
            v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        };
        let dual_excess = dobj - p.offset();
        if dual_excess > 1e10 || (dual_excess > 1e8 && dual_lin / dual_excess < 1e-8) {
            status = SdpStatus::Infeasible;
            break;
        }
        if -pobj > 1e10 * (1.0 + f0_norm) && p_inf <= cfg.tol_feas.sqrt() {
            status = SdpStatus::Unbounded;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }

        // factorisations
        let mut scaling = Scaling { s_inv: Vec::new(), w: Vec::new() };
        let mut broke = false;
        for (s, w) in it.s.iter().zip(&it.w) {
            match Cholesky::new(s) {
                Ok(ch) => scaling.s_inv.push(ch.inverse().to_mat()),
                Err(_) => {
                    broke = true;
                    break;
                }
            }
            scaling.w.push(mat_of(w));
        }
        if broke {
            status = SdpStatus::NumericalFailure;
            break;
        }
        let m = match schur_matrix(&blocks, &scaling, n) {
            Some(m) => m,
            None => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        };
        let chol = match factor_with_ridge(&m) {
            Some(ch) => ch,
            None => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        };

        // predictor
        let zero_r: Vec<SymMat> = blocks.iter().map(|b| SymMat::zeros(b.expr.dim())).collect();
        let pred = direction(&blocks, &scaling, &chol, &it, &rp, &rd, &zero_r);
        let ap = step_length(&it.s, &pred.ds, cfg.step_fraction);
        let ad = step_length(&it.w, &pred.dw, cfg.step_fraction);
        let (ap, ad) = match (ap, ad) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        };
        let mut sw_aff = 0.0;
        for j in 0..blocks.len() {
            let mut s = it.s[j].clone();
            s.axpy(ap, &pred.ds[j]);
            let mut w = it.w[j].clone();
            w.axpy(ad, &pred.dw[j]);
            sw_aff += s.inner(&w);
        }
        let mu_aff = sw_aff / total_dim as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let r: Vec<SymMat> = (0..blocks.len())
            .map(|j| {
                let s_inv = &scaling.s_inv[j];
                let mut r = sym(&s_inv.scale(sigma * mu));
                let second = sym(&mat_of(&pred.dw[j]).matmul(&mat_of(&pred.ds[j])).matmul(s_inv));
                r.axpy(-1.0, &second);
                r
            })
            .collect();
        let corr = direction(&blocks, &scaling, &chol, &it, &rp, &rd, &r);
        let ap = step_length(&it.s, &corr.ds, cfg.step_fraction);
        let ad = step_length(&it.w, &corr.dw, cfg.step_fraction);
        let (ap, ad) = match (ap, ad) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                status = SdpStatus::NumericalFailure;
                break;
            }
        };
        if ap < 1e-12 && ad < 1e-12 {
            status = SdpStatus::NumericalFailure;
            break;
        }
        for (xi, d) in it.x.iter_mut().zip(&corr.dx) {
            *xi += ap * d;
        }
        for j in 0..blocks.len() {
            it.s[j].axpy(ap, &corr.ds[j]);
            it.w[j].axpy(ad, &corr.dw[j]);
        }
    }

    if matches!(status, SdpStatus::NumericalFailure | SdpStatus::MaxIterations) {
        if let Some((_, b)) = best {
            it = b;
        }
    }
    finish(p, &blocks, it, status, iterations)
}

fn finish(
    p: &SdpProblem,
    blocks: &[Block],
    it: Iterate,
    status: SdpStatus,
    iterations: usize,
) -> Result<SdpSolution> {
    let mut rd = p.c().to_vec();
    for (b, w) in blocks.iter().zip(&it.w) {
        b.expr.adjoint_accumulate(w, &mut rd);
    }
    let dual_res = rd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let primal_res = p.max_violation(&it.x).unwrap_or(f64::INFINITY);
    let pobj = p.objective(&it.x);
    let dobj = p.offset()
        + blocks
            .iter()
            .zip(&it.w)
            .map(|(b, w)| b.expr.constant_part().inner(w))
            .sum::<f64>();
    Ok(SdpSolution {
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        x: it.x,
        duals: it.w,
        status,
        primal_obj: pobj,
        dual_obj: dobj,
        primal_res,
        dual_res,
        iterations,
    })
}

/// `M_ik = Σⱼ tr(Aᵢⱼ Wⱼ Aₖⱼ Sⱼ⁻¹)`.
fn schur_matrix(blocks: &[Block], sc: &Scaling, n: usize) -> Option<SymMat> {
    let mut m = SymMat::zeros(n);
    for (j, b) in blocks.iter().enumerate() {
        let pd = b.expr.dim();
        let s_inv = &sc.s_inv[j];
        let w = &sc.w[j];
        // T_k = S⁻¹ A_k W
        let ts: Vec<Mat> = b
            .coords
            .iter()
            .map(|&k| {
                let a = &b.expr.terms()[&k];
                if a.nnz() > pd {
                    s_inv.matmul(&dense_coeff(b.expr, k)).matmul(w)
                } else {
                    let mut t = Mat::zeros(pd, pd);
                    for &(r, c, v) in a.entries() {
                        add_outer(&mut t, v, s_inv, r, w, c);
                        if r != c {
                            add_outer(&mut t, v, s_inv, c, w, r);
                        }
                    }
                    t
                }
            })
            .collect();
        for (ii, &i) in b.coords.iter().enumerate() {
            let a = &b.expr.terms()[&i];
            for (kk, &k) in b.coords.iter().enumerate().take(ii + 1) {
                let t = &ts[kk];
                let mut v = 0.0;
                for &(r, c, val) in a.entries() {
                    if r == c {
                        v += val * t[(r, r)];
                    } else {
                        v += val * (t[(r, c)] + t[(c, r)]);
                    }
                }
                m.add_at(i, k, v);
            }
        }
    }
    if m.data().iter().all(|v| v.is_finite()) {
        Some(m)
    } else {
        None
    }
}

/// `t += v · S⁻¹[:, r] · W[c, :]`.
fn add_outer(t: &mut Mat, v: f64, s_inv: &Mat, r: usize, w: &Mat, c: usize) {
    let pd = t.rows();
    for a in 0..pd {
        let f = v * s_inv[(a, r)];
        if f == 0.0 {
            continue;
        }
        for b in 0..pd {
            t[(a, b)] += f * w[(c, b)];
        }
    }
}

fn factor_with_ridge(m: &SymMat) -> Option<Cholesky> {
    if let Ok(ch) = Cholesky::new(m) {
        return Some(ch);
    }
    let scale = (0..m.dim()).fold(1.0f64, |a, i| a.max(m.get(i, i).abs()));
    let mut r = m.clone();
    r.add_diag(1e-12 * scale);
    Cholesky::new(&r).ok()
}

fn direction(
    blocks: &[Block],
    sc: &Scaling,
    chol: &Cholesky,
    it: &Iterate,
    rp: &[SymMat],
    rd: &[f64],
    r: &[SymMat],
) -> Direction {
    // rhs = −r_d − A*(R − W + K),  K = sym(W r_p S⁻¹)
    let mut rhs: Vec<f64> = rd.iter().map(|v| -v).collect();
    for (j, b) in blocks.iter().enumerate() {
        let k = sym(&sc.w[j].matmul(&mat_of(&rp[j])).matmul(&sc.s_inv[j]));
        let mut g = r[j].sub(&it.w[j]);
        g.axpy(1.0, &k);
        for &i in &b.coords {
            rhs[i] -= b.expr.terms()[&i].inner(&g);
        }
    }
    let dx = chol.solve(&rhs);
    let mut ds = Vec::with_capacity(blocks.len());
    let mut dw = Vec::with_capacity(blocks.len());
    for (j, b) in blocks.iter().enumerate() {
        // dS = −r_p − A(dx)
        let mut d = b.expr.linear_apply(&dx).scale(-1.0);
        d.axpy(-1.0, &rp[j]);
        // dW = R − W − sym(W dS S⁻¹)
        let mut w = r[j].sub(&it.w[j]);
        w.axpy(-1.0, &sym(&sc.w[j].matmul(&mat_of(&d)).matmul(&sc.s_inv[j])));
        ds.push(d);
        dw.push(w);
    }
    Direction { dx, ds, dw }
}

/// Largest `α ≤ 1` keeping every `X + α·dX` positive definite, times the
/// step fraction. `None` if `X` itself has lost definiteness.
fn step_length(x: &[SymMat], dx: &[SymMat], fraction: f64) -> Option<f64> {
    let mut alpha_max = f64::INFINITY;
    for (xj, dj) in x.iter().zip(dx) {
        let ch = Cholesky::new(xj).ok()?;
        let lam = crate::linalg::min_eig(&ch.whiten(dj)).ok()?;
        if lam < 0.0 {
            alpha_max = alpha_max.min(-1.0 / lam);
        }
    }
    Some((fraction * alpha_max).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::VarSet;

    #[test]
    fn one_by_one() {
        let mut vs = VarSet::new();
        let t = vs.scalar("t");
        // 1 - t ⪯ 0
        let block = AffineMatExpr::from_sym_rect(&t.expr().scale(-1.0))
            .unwrap()
            .add_identity(1.0);
        let p = SdpProblem::assemble(vs.vars(), &t.expr(), vec![block]).unwrap();
        let sol = solve(&p, &IpmConfig::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
    }
}
