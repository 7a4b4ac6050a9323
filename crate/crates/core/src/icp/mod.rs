//! The inner convex approximation loop.
//!
//! Starting from a strictly feasible `x⁰`, each outer iteration replaces
//! every nonconvex constraint by a convex inner approximation built at the
//! current anchor, adds the proximal term `½ρ‖x − x̄‖²_w`, and solves the
//! resulting SDP. Every iterate stays feasible for the original problem and
//! the objective decreases monotonically; both facts are re-checked at run
//! time and reported in [`InvariantReport`].

mod constraint;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use constraint::{BilinearConstraint, BilinearTerm, LinearConstraint, MatrixConstraint};

use crate::error::{shape_err, Error, Result};
use crate::linalg::{max_eig, SymMat};
use crate::lmi::{AffineMatExpr, AffineRect, SdpProblem, SdpSolution, SdpStatus, VarRef, VarSet};
use crate::sdp::{self, IpmConfig};

/// Tolerance used by the run-time invariant checks.
pub const INVARIANT_TOL: f64 = 1e-8;
/// Gap and dual residual up to which a subproblem that stopped short of its
/// tolerances is still used.
pub const INEXACT_TOL: f64 = 1e-5;

/// Hook applied to `ρ` after every outer iteration.
pub type RhoUpdate = fn(iteration: usize, rho: f64) -> f64;

fn keep_rho(_iteration: usize, rho: f64) -> f64 {
    rho
}

fn default_rho_update() -> RhoUpdate {
    keep_rho
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    /// Proximal weight `ρ`.
    pub rho: f64,
    pub max_outer_iters: usize,
    /// Relative step tolerance `‖Δx‖∞ / (‖x̄‖∞ + 1)`.
    pub tol_step: f64,
    /// Relative objective tolerance, required on two successive iterations.
    pub tol_obj: f64,
    /// Strictness margin: constraints are imposed as `F ⪯ −eps_strict·I`.
    pub eps_strict: f64,
    /// Random points per iteration for the inner-approximation check.
    pub invariant_samples: usize,
    /// Offset added to the iteration counter to seed the sampling.
    pub sample_seed: u64,
    pub ipm: IpmConfig,
    #[serde(skip, default = "default_rho_update")]
    pub rho_update: RhoUpdate,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            rho: 1e-3,
            max_outer_iters: 300,
            tol_step: 1e-3,
            tol_obj: 1e-4,
            eps_strict: 1e-6,
            invariant_samples: 50,
            sample_seed: 0,
            ipm: IpmConfig { tol_gap: 1e-9, tol_feas: 1e-10, ..IpmConfig::default() },
            rho_update: keep_rho,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho >= 0.0
            && self.rho.is_finite()
            && self.max_outer_iters > 0
            && self.tol_step > 0.0
            && self.tol_obj > 0.0
            && self.eps_strict > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid outer-loop settings {self:?}")));
        }
        self.ipm.validate()
    }
}

/// Convex objective `cᵀx + offset + (ρ_f/2)‖x‖²`.
#[derive(Clone, Debug)]
pub struct Objective {
    linear: AffineRect,
    c: Vec<f64>,
    offset: f64,
    rho_f: f64,
}

impl Objective {
    /// A linear objective given as a 1×1 affine expression.
    pub fn linear(expr: AffineRect, n: usize) -> Result<Self> {
        Objective::with_strong_convexity(expr, 0.0, n)
    }

    pub fn with_strong_convexity(expr: AffineRect, rho_f: f64, n: usize) -> Result<Self> {
        if expr.shape() != (1, 1) {
            return shape_err(format!("objective must be 1x1, got {:?}", expr.shape()));
        }
        if !(rho_f >= 0.0) {
            return Err(Error::Config(format!("strong convexity {rho_f} must be nonnegative")));
        }
        if expr.terms().keys().any(|&k| k >= n) {
            return Err(Error::UnknownVariable("objective coordinate outside the decision vector".into()));
        }
        let c = expr.linear_coefficients(n);
        let offset = expr.constant_part()[(0, 0)];
        Ok(Objective { linear: expr, c, offset, rho_f })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.c.iter().zip(x).map(|(a, b)| a * b).sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        self.offset + lin + 0.5 * self.rho_f * sq
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.c.iter().zip(x).map(|(c, v)| c + self.rho_f * v).collect()
    }

    pub fn rho_f(&self) -> f64 {
        self.rho_f
    }

    pub fn expr(&self) -> &AffineRect {
        &self.linear
    }
}

/// `min f(x)  s.t.  Fᵢ(x) ⪯ 0`.
pub struct NsdpProblem {
    pub variables: VarSet,
    pub objective: Objective,
    pub constraints: Vec<Box<dyn MatrixConstraint>>,
    /// Per-coordinate weights `w` of the proximal term.
    pub reg_weights: Vec<f64>,
}

impl NsdpProblem {
    pub fn new(
        variables: VarSet,
        objective: Objective,
        constraints: Vec<Box<dyn MatrixConstraint>>,
    ) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::EmptyProblem);
        }
        let n = variables.dim();
        Ok(NsdpProblem { variables, objective, constraints, reg_weights: vec![1.0; n] })
    }

    pub fn n_vars(&self) -> usize {
        self.variables.dim()
    }

    /// Sets the proximal weight of every coordinate of `var`.
    pub fn set_group_weight(&mut self, var: &VarRef, w: f64) -> Result<()> {
        if !(w >= 0.0) || var.range().end > self.reg_weights.len() {
            return Err(Error::Config(format!("bad weight {w} for {}", var.name())));
        }
        for k in var.range() {
            self.reg_weights[k] = w;
        }
        Ok(())
    }

    /// `maxᵢ λ_max(Fᵢ(x))`.
    pub fn max_constraint_eig(&self, x: &[f64]) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for c in &self.constraints {
            worst = worst.max(max_eig(&c.value(x))?);
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcpStatus {
    ConvergedStep,
    ConvergedObjective,
    MaxIters,
    SubproblemFailure,
}

impl IcpStatus {
    pub fn converged(self) -> bool {
        matches!(self, IcpStatus::ConvergedStep | IcpStatus::ConvergedObjective)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    /// Relative step `‖Δx‖∞ / (‖x̄‖∞ + 1)`.
    pub step: f64,
    pub ipm_iters: usize,
    pub time_s: f64,
    /// Backtracking halvings applied to the subproblem solution.
    pub corrections: usize,
    /// `maxᵢ λ_max(Fᵢ)` at the new iterate.
    pub feasibility: f64,
    /// `f⁺ + ½ρ‖Δx‖²_w − f`.
    pub descent: f64,
    pub inner_tested: usize,
    pub inner_worst: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Worst `λ_max(Fᵢ)` over all iterates, including `x⁰`.
    pub max_feasibility: f64,
    /// Worst descent slack.
    pub max_descent: f64,
    pub inner_samples: usize,
    /// Worst `λ_max(Fᵢ)` over sampled points accepted by an approximation.
    pub max_inner_violation: f64,
    pub corrections: usize,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.max_feasibility <= INVARIANT_TOL
            && self.max_descent <= INVARIANT_TOL
            && self.max_inner_violation <= INVARIANT_TOL
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub complementarity: f64,
    pub feasibility: f64,
}

#[derive(Clone, Debug)]
pub struct IcpResult {
    pub x: Vec<f64>,
    pub status: IcpStatus,
    pub objective: f64,
    /// `f(x⁰), f(x¹), …`.
    pub objective_trace: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// `x¹, x², …`.
    pub iterates: Vec<Vec<f64>>,
    /// Multipliers of the original constraints from the last subproblem.
    pub multipliers: Vec<SymMat>,
    pub kkt: KktResidual,
    pub invariants: InvariantReport,
    pub failure: Option<String>,
}

impl IcpResult {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Writes the iteration log as CSV.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "k,objective,step,ipm_iters,time_s,corrections,feasibility,descent,inner_tested,inner_worst"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.12e},{:.6e},{},{:.6},{},{:.6e},{:.6e},{},{:.6e}",
                r.k,
                r.objective,
                r.step,
                r.ipm_iters,
                r.time_s,
                r.corrections,
                r.feasibility,
                r.descent,
                r.inner_tested,
                r.inner_worst
            )?;
        }
        Ok(())
    }
}

/// What the stopping rules look at.
#[derive(Clone, Debug, Default)]
pub struct IcpHistory {
    pub objective: Vec<f64>,
    pub steps: Vec<f64>,
    pub failed: bool,
}

/// Applies the stopping rules in order: subproblem failure, small step,
/// iteration limit, objective stall on two successive iterations.
pub fn stopping_check(h: &IcpHistory, cfg: &IcpConfig) -> Option<IcpStatus> {
    if h.failed {
        return Some(IcpStatus::SubproblemFailure);
    }
    if h.steps.last().is_some_and(|&s| s <= cfg.tol_step) {
        return Some(IcpStatus::ConvergedStep);
    }
    if h.steps.len() >= cfg.max_outer_iters {
        return Some(IcpStatus::MaxIters);
    }
    let stalled = |k: usize| {
        let (prev, cur) = (h.objective[k - 1], h.objective[k]);
        (cur - prev).abs() <= cfg.tol_obj * (1.0 + prev.abs())
    };
    let m = h.objective.len();
    if m >= 3 && stalled(m - 1) && stalled(m - 2) {
        return Some(IcpStatus::ConvergedObjective);
    }
    None
}

/// The convex subproblem at an anchor, with the epigraph variable `t` last.
pub struct Subproblem {
    pub sdp: SdpProblem,
    /// Blocks built for each original constraint, in order.
    pub approximations: Vec<AffineMatExpr>,
}

/// Builds `min cᵀx + ½t  s.t.  Gᵢ(x; x̄) ⪯ −eps·I,  ‖diag(√a)(x − z)‖² ≤ t`
/// with `aᵢ = ρ_f + ρwᵢ` and `zᵢ = ρwᵢx̄ᵢ / aᵢ`, which equals
/// `f(x) + ½ρ‖x − x̄‖²_w` up to a constant.
pub fn build_subproblem(p: &NsdpProblem, anchor: &[f64], rho: f64, eps: f64) -> Result<Subproblem> {
    let n = p.n_vars();
    if anchor.len() != n {
        return shape_err(format!("anchor has length {}, expected {n}", anchor.len()));
    }
    let approximations = p
        .constraints
        .iter()
        .map(|c| c.inner_approximation(anchor, eps))
        .collect::<Result<Vec<_>>>()?;
    let mut blocks = approximations.clone();

    let mut vars = p.variables.clone();
    let mut objective = p.objective.expr().clone();
    let rho_f = p.objective.rho_f();
    let weighted: Vec<(usize, f64, f64)> = (0..n)
        .filter_map(|i| {
            let a = rho_f + rho * p.reg_weights[i];
            (a > 0.0).then(|| (i, a.sqrt(), rho * p.reg_weights[i] * anchor[i] / a))
        })
        .collect();
    if !weighted.is_empty() {
        let t = vars.scalar("__epigraph");
        let k = weighted.len();
        // −[[I, v], [vᵀ, t]] with vⱼ = √aᵢ (xᵢ − zᵢ)
        let mut c0 = SymMat::zeros(k + 1);
        let mut terms = Vec::with_capacity(k + 1);
        for (j, &(i, sa, z)) in weighted.iter().enumerate() {
            c0.set(j, j, -1.0);
            c0.set(j, k, sa * z);
            let mut m = SymMat::zeros(k + 1);
            m.set(j, k, -sa);
            terms.push((i, m));
        }
        let mut mt = SymMat::zeros(k + 1);
        mt.set(k, k, -1.0);
        terms.push((t.offset(), mt));
        blocks.push(AffineMatExpr::from_parts(c0, terms)?);
        objective = objective.add(&t.expr().scale(0.5));
    }
    let sdp = SdpProblem::assemble(vars.vars(), &objective, blocks)?;
    Ok(Subproblem { sdp, approximations })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn weighted_sq(d: &[f64], w: &[f64]) -> f64 {
    d.iter().zip(w).map(|(a, b)| b * a * a).sum()
}

/// `Σᵢ |Fᵢ(x)∘Wᵢ|`, `‖∇f + Σᵢ DFᵢ(x)*Wᵢ‖∞` and `maxᵢ λ_max(Fᵢ(x))⁺`.
pub fn kkt_residual(p: &NsdpProblem, x: &[f64], multipliers: &[SymMat]) -> Result<KktResidual> {
    if multipliers.len() != p.constraints.len() {
        return shape_err("one multiplier per constraint expected");
    }
    let mut grad = p.objective.gradient(x);
    let mut comp = 0.0;
    let mut feas: f64 = 0.0;
    for (c, w) in p.constraints.iter().zip(multipliers) {
        let f = c.value(x);
        if w.dim() != f.dim() {
            return shape_err(format!("multiplier for {} has the wrong size", c.name()));
        }
        comp += f.inner(w).abs();
        feas = feas.max(max_eig(&f)?);
        for (g, d) in grad.iter_mut().zip(c.derivative_adjoint(x, w)) {
            *g += d;
        }
    }
    Ok(KktResidual { stationarity: inf_norm(&grad), complementarity: comp, feasibility: feas.max(0.0) })
}

/// Largest `t ∈ {1, ½, ¼, …}` such that `x̄ + tΔ` keeps a true margin of
/// `eps/2` and satisfies the descent inequality exactly.
fn safeguard(p: &NsdpProblem, anchor: &[f64], cand: &[f64], rho: f64, eps: f64) -> Result<(Vec<f64>, usize)> {
    let f0 = p.objective.value(anchor);
    let delta: Vec<f64> = cand.iter().zip(anchor).map(|(a, b)| a - b).collect();
    let dq = weighted_sq(&delta, &p.reg_weights);
    let mut t = 1.0;
    for halvings in 0..40 {
        let x: Vec<f64> = anchor.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
        let descent = p.objective.value(&x) + 0.5 * rho * t * t * dq - f0;
        if descent <= 0.0 && p.max_constraint_eig(&x)? <= -0.5 * eps {
            return Ok((x, halvings));
        }
        t *= 0.5;
    }
    Ok((anchor.to_vec(), 40))
}

/// Samples points around the segment `[x̄, x⁺]`; for those accepted by every
/// approximation block, returns the worst true `λ_max`.
fn sample_inner(
    p: &NsdpProblem,
    approximations: &[AffineMatExpr],
    anchor: &[f64],
    next: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = anchor.len();
    let dist: f64 = anchor.iter().zip(next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = dist + 1e-3 * (1.0 + inf_norm(anchor));
    let mut tested = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let s: f64 = rng.random_range(0.0..1.5);
        let r: f64 = scale * rng.random::<f64>();
        let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let y: Vec<f64> =
            (0..n).map(|i| anchor[i] + s * (next[i] - anchor[i]) + r * dir[i] / norm).collect();
        let mut accepted = true;
        for b in approximations {
            if max_eig(&b.evaluate(&y))? > 0.0 {
                accepted = false;
                break;
            }
        }
        if accepted {
            tested += 1;
            worst = worst.max(p.max_constraint_eig(&y)?);
        }
    }
    Ok((tested, worst))
}

/// An optimal subproblem, or a stalled one whose best point is feasible for
/// the approximations and nearly optimal.
fn usable(sol: &SdpSolution) -> bool {
    match sol.status {
        SdpStatus::Optimal => true,
        SdpStatus::NumericalFailure | SdpStatus::MaxIterations => {
            sol.primal_res <= 1e-12 && sol.gap <= INEXACT_TOL && sol.dual_res <= INEXACT_TOL
        }
        _ => false,
    }
}

/// Runs the outer loop from a strictly feasible `x⁰`.
pub fn run(p: &NsdpProblem, x0: &[f64], cfg: &IcpConfig) -> Result<IcpResult> {
    cfg.validate()?;
    let n = p.n_vars();
    if x0.len() != n {
        return shape_err(format!("x0 has length {}, expected {n}", x0.len()));
    }
    if p.reg_weights.len() != n {
        return shape_err("one proximal weight per coordinate expected");
    }
    // every iterate keeps half the margin, so any iterate is a valid restart
    let start = p.max_constraint_eig(x0)?;
    if start > -0.5 * cfg.eps_strict {
        return Err(Error::Precondition(format!(
            "starting point is not strictly feasible: max eigenvalue {start:.3e} > {:.1e}",
            -0.5 * cfg.eps_strict
        )));
    }

    let mut x = x0.to_vec();
    let mut f = p.objective.value(&x);
    let mut rho = cfg.rho;
    let mut history = IcpHistory { objective: vec![f], ..Default::default() };
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let mut invariants = InvariantReport {
        max_feasibility: start,
        max_descent: f64::NEG_INFINITY,
        max_inner_violation: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut multipliers: Option<Vec<SymMat>> = None;
    let mut failure = None;

    let status = loop {
        let k = records.len();
        let clock = Instant::now();
        let sub = build_subproblem(p, &x, rho, cfg.eps_strict)?;
        let sol: SdpSolution = sdp::solve(&sub.sdp, &cfg.ipm)?;
        if !usable(&sol) {
            failure = Some(format!("subproblem {k} ended with status {:?} (gap {:.1e}, primal {:.1e}, dual {:.1e}, ipm {})", sol.status, sol.gap, sol.primal_res, sol.dual_res, sol.iterations));
            history.failed = true;
            break stopping_check(&history, cfg).expect("failure stops the loop");
        }
        let (x_new, corrections) = safeguard(p, &x, &sol.x[..n], rho, cfg.eps_strict)?;
        let f_new = p.objective.value(&x_new);
        let delta: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step = inf_norm(&delta) / (inf_norm(&x) + 1.0);
        let descent = f_new + 0.5 * rho * weighted_sq(&delta, &p.reg_weights) - f;
        let feasibility = p.max_constraint_eig(&x_new)?;
        let (inner_tested, inner_worst) =
            sample_inner(p, &sub.approximations, &x, &x_new, cfg.invariant_samples, cfg.sample_seed.wrapping_add(k as u64))?;

        multipliers = Some(
            p.constraints.iter().zip(&sol.duals).map(|(c, w)| c.multiplier(w)).collect(),
        );
        invariants.max_feasibility = invariants.max_feasibility.max(feasibility);
        invariants.max_descent = invariants.max_descent.max(descent);
        invariants.inner_samples += inner_tested;
        invariants.max_inner_violation = invariants.max_inner_violation.max(inner_worst);
        invariants.corrections += corrections;
        let record = IterationRecord {
            k: k + 1,
            objective: f_new,
            step,
            ipm_iters: sol.iterations,
            time_s: clock.elapsed().as_secs_f64(),
            corrections,
            feasibility,
            descent,
            inner_tested,
            inner_worst,
        };
        log::debug!(
            "icp {:>3}: f = {:.8e}, step = {:.2e}, ipm = {}, corrections = {}",
            record.k,
            f_new,
            step,
            sol.iterations,
            corrections
        );
        records.push(record);
        iterates.push(x_new.clone());
        x = x_new;
        f = f_new;
        history.objective.push(f);
        history.steps.push(step);
        rho = (cfg.rho_update)(k + 1, rho);
        if let Some(s) = stopping_check(&history, cfg) {
            break s;
        }
    };

    let multipliers = multipliers.unwrap_or_else(|| p.constraints.iter().map(|c| SymMat::zeros(c.dim())).collect());
    let kkt = kkt_residual(p, &x, &multipliers)?;
    Ok(IcpResult {
        x,
        status,
        objective: f,
        objective_trace: history.objective,
        records,
        iterates,
        multipliers,
        kkt,
        invariants,
        failure,
    })
}
