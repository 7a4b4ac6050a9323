//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Criterion 7 needs user-supplied plant files and is skipped unless
//! `BMI_TABLE_DIR` points at a directory holding `AC4.json` and/or `NN2.json`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use innerconvex::analysis::{h2_norm, hinf_norm, verify_synthesis, Claims, StateSpace};
use innerconvex::bench::{generate, load_plant, GenConfig};
use innerconvex::icp::{run, BilinearConstraint, IcpConfig, IcpResult, LinearConstraint, NsdpProblem, Objective};
use innerconvex::linalg::{eig_sym, inverse, min_eig, spectral_abscissa, Mat, SymMat};
use innerconvex::lmi::{AffineMatExpr, AffineRect, BlockLmi, SdpProblem, SdpStatus, VarSet};
use innerconvex::overestimate::{qq_evaluate, QqOverestimate};
use innerconvex::sdp::{solve, IpmConfig};
use innerconvex::sof::{
    build_hinf, build_mixed_h2hinf, build_spectral_abscissa, hinf_phase1, mixed_phase1, sa_phase1, stabilizing_gain,
    synthesize_hinf, synthesize_mixed, synthesize_mixed_from, synthesize_sa, Controller, Plant,
};
use innerconvex::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn rand_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMat {
    let g = rand_mat(rng, n, n);
    let mut s = SymMat::symmetrize(&g.transpose().matmul(&g)).unwrap();
    s.add_diag(0.1);
    s
}

fn overestimate_dominance() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_dom, mut worst_anchor) = (f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let p = rng.random_range(1..=5);
        let q1 = rand_pd(&mut rng, n);
        let q2 = rand_pd(&mut rng, n);
        let q = q1.add(&q2);
        let (xb, yb) = (rand_mat(&mut rng, n, p), rand_mat(&mut rng, n, p));
        let o = QqOverestimate::new(&q, &q1, &q2, xb.clone(), yb.clone()).unwrap();
        let (x, y) = (rand_mat(&mut rng, n, p), rand_mat(&mut rng, n, p));
        let exact = o.exact(&x, &y);
        let gap = qq_evaluate(&o, &x, &y).unwrap().sub(&exact);
        worst_dom = worst_dom.min(min_eig(&gap).unwrap() / (1.0 + exact.frobenius_norm()));
        let at_anchor = qq_evaluate(&o, &xb, &yb).unwrap().sub(&o.exact(&xb, &yb));
        worst_anchor = worst_anchor.max(at_anchor.frobenius_norm());
    }
    let secs = clock.elapsed().as_secs_f64();
    Outcome::new(
        worst_dom >= -1e-9 && worst_anchor <= 1e-10 && secs < 10.0,
        format!("worst scaled min eig {worst_dom:.2e}, anchor residual {worst_anchor:.2e}, {secs:.2} s"),
    )
}

fn lambda_max_problem(s: &SymMat) -> SdpProblem {
    let n = s.dim();
    let mut vs = VarSet::new();
    let t = vs.scalar("t");
    let block = AffineMatExpr::from_sym_rect(&t.expr().times_matrix(&Mat::identity(n)).unwrap())
        .unwrap()
        .scale(-1.0)
        .add_constant(s);
    SdpProblem::assemble(vs.vars(), &t.expr(), vec![block]).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `min cᵀx s.t. Gx ≤ h` in three variables by vertex enumeration.
fn lp_vertex_oracle(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> f64 {
    let m = g.len();
    let mut best = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            for d in b + 1..m {
                let sys = Mat::from_rows(&[g[a].clone(), g[b].clone(), g[d].clone()]).unwrap();
                let Ok(inv) = inverse(&sys) else { continue };
                let x = inv.matvec(&[h[a], h[b], h[d]]);
                if g.iter().zip(h).all(|(row, hi)| dot(row, &x) <= hi + 1e-9) {
                    best = best.min(dot(c, &x));
                }
            }
        }
    }
    best
}

fn diagonal_lp(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> SdpProblem {
    let mut vs = VarSet::new();
    let xs: Vec<_> = (0..3).map(|i| vs.scalar(&format!("x{i}"))).collect();
    let mut blocks = Vec::new();
    for chunk in [0..5usize, 5..g.len()] {
        let rows: Vec<usize> = chunk.collect();
        let k = rows.len();
        let mut e = AffineMatExpr::zeros(k);
        for (local, &r) in rows.iter().enumerate() {
            let mut unit = Mat::zeros(k, k);
            unit[(local, local)] = 1.0;
            for (j, x) in xs.iter().enumerate() {
                let term =
                    AffineMatExpr::from_sym_rect(&x.expr().times_matrix(&unit.scale(g[r][j])).unwrap()).unwrap();
                e = e.add(&term);
            }
            let mut cst = SymMat::zeros(k);
            cst.set(local, local, -h[r]);
            e = e.add_constant(&cst);
        }
        blocks.push(e);
    }
    let obj = xs.iter().zip(c).fold(AffineRect::zeros(1, 1), |acc, (x, ci)| acc.add(&x.expr().scale(*ci)));
    SdpProblem::assemble(vs.vars(), &obj, blocks).unwrap()
}

fn sdp_conformance() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_eig = 0.0f64;
    let mut failures = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let s = SymMat::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let sol = solve(&lambda_max_problem(&s), &IpmConfig::default()).unwrap();
        failures += usize::from(sol.status != SdpStatus::Optimal);
        let oracle = eig_sym(&s).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
        worst_eig = worst_eig.max((sol.x[0] - oracle).abs());
    }
    let mut worst_lp = 0.0f64;
    for _ in 0..20 {
        let mut g: Vec<Vec<f64>> = Vec::new();
        let mut h = Vec::new();
        for i in 0..3 {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; 3];
                e[i] = sign;
                g.push(e);
                h.push(4.0);
            }
        }
        for _ in 0..4 {
            g.push((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
            h.push(rng.random_range(0.5..2.0));
        }
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sol = solve(&diagonal_lp(&c, &g, &h), &IpmConfig::default()).unwrap();
        failures += usize::from(sol.status != SdpStatus::Optimal);
        worst_lp = worst_lp.max((sol.primal_obj - lp_vertex_oracle(&c, &g, &h)).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    Outcome::new(
        failures == 0 && worst_eig <= 1e-6 && worst_lp <= 1e-6 && secs < 30.0,
        format!("lambda_max error {worst_eig:.2e}, LP error {worst_lp:.2e}, {failures} non-optimal, {secs:.2} s"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Sa,
    Hinf,
    Mixed,
}

const MIXED_LEVEL: f64 = 10.0;

/// One run of the invariant suite, with every iterate re-checked outside the solver.
struct InvariantRun {
    kind: Kind,
    plant: String,
    skipped: Option<String>,
    worst_feasibility: f64,
    worst_descent: f64,
    converged: bool,
    verified: bool,
}

fn weighted_sq(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((p, q), wi)| wi * (p - q) * (p - q)).sum()
}

fn recheck(nsdp: &NsdpProblem, x0: &[f64], r: &IcpResult, rho: f64) -> (f64, f64) {
    let mut feas = nsdp.max_constraint_eig(x0).unwrap();
    let mut descent = f64::NEG_INFINITY;
    let mut prev = x0;
    for x in &r.iterates {
        feas = feas.max(nsdp.max_constraint_eig(x).unwrap());
        let lhs = nsdp.objective.value(x) + 0.5 * rho * weighted_sq(x, prev, &nsdp.reg_weights);
        descent = descent.max(lhs - nsdp.objective.value(prev));
        prev = x;
    }
    (feas, descent)
}

/// Runs from `x0`, re-checks every iterate, and verifies a converged result.
fn check_run(
    plant: &Plant,
    nsdp: &NsdpProblem,
    x0: &[f64],
    cfg: &IcpConfig,
    read: impl Fn(&[f64]) -> (Controller, Claims),
) -> (f64, f64, bool, bool) {
    let r = run(nsdp, x0, cfg).unwrap();
    let (feas, descent) = recheck(nsdp, x0, &r, cfg.rho);
    let converged = r.status.converged();
    let verified = !converged || {
        let (k, claims) = read(&r.x);
        verify_synthesis(plant, &k, &claims).map(|v| v.passed).unwrap_or(false)
    };
    (feas, descent, converged, verified)
}

fn invariant_run(kind: Kind, plant: &Plant, cfg: &IcpConfig) -> InvariantRun {
    let attempt = || -> Result<(f64, f64, bool, bool), Error> {
        Ok(match kind {
            Kind::Sa => {
                let prob = build_spectral_abscissa(plant)?;
                let (p0, k0, beta0) = sa_phase1(plant, None)?;
                let x0 = prob.pack(&p0, &k0, beta0)?;
                check_run(plant, &prob.nsdp, &x0, cfg, |x| {
                    (prob.controller(plant, x), Claims::Sa { beta: prob.beta(x) })
                })
            }
            Kind::Hinf => {
                let prob = build_hinf(plant)?;
                let k0 = stabilizing_gain(plant, None, cfg)?;
                let (x_mat, gamma0) = hinf_phase1(plant, &k0)?;
                let x0 = prob.pack(&x_mat, &k0, gamma0)?;
                check_run(plant, &prob.nsdp, &x0, cfg, |x| {
                    (prob.controller(plant, x), Claims::Hinf { gamma: prob.gamma(x) })
                })
            }
            Kind::Mixed => {
                let k0 = stabilizing_gain(plant, None, cfg)?;
                let start = match mixed_phase1(plant, Some(MIXED_LEVEL), &k0) {
                    Err(Error::Infeasible(_)) => {
                        let k1 = synthesize_hinf(plant, Some(&k0), cfg)?.controller;
                        mixed_phase1(plant, Some(MIXED_LEVEL), &k1)?
                    }
                    start => start?,
                };
                let prob = build_mixed_h2hinf(plant, Some(MIXED_LEVEL))?;
                let x0 = prob.pack(&start)?;
                check_run(plant, &prob.nsdp, &x0, cfg, |x| {
                    let point = prob.unpack(plant, x).unwrap();
                    let trace_z = point.z.trace();
                    (point.controller, Claims::Mixed { gamma: Some(MIXED_LEVEL), trace_z })
                })
            }
        })
    };
    let mut out = InvariantRun {
        kind,
        plant: plant.name.clone(),
        skipped: None,
        worst_feasibility: f64::NEG_INFINITY,
        worst_descent: f64::NEG_INFINITY,
        converged: false,
        verified: true,
    };
    match attempt() {
        Ok((feas, descent, converged, verified)) => {
            out.worst_feasibility = feas;
            out.worst_descent = descent;
            out.converged = converged;
            out.verified = verified;
        }
        Err(e @ (Error::Infeasible(_) | Error::Precondition(_))) => out.skipped = Some(e.to_string()),
        Err(e) => panic!("{kind:?} on {}: {e}", plant.name),
    }
    out
}

fn random_plants(count: usize, seed: u64) -> Vec<Plant> {
    (0..count)
        .map(|i| {
            let n = 2 + i % 4;
            let cfg = GenConfig {
                n,
                n_u: 1 + i % 2,
                n_y: 1 + (i / 2) % 2,
                count: 1,
                seed: seed + i as u64,
                ..GenConfig::default()
            };
            let mut p = generate(&cfg).unwrap().remove(0);
            p.name = format!("plant{i:02}_n{n}");
            p
        })
        .collect()
}

fn invariant_suite() -> (Outcome, Outcome) {
    let clock = Instant::now();
    let cfg = IcpConfig { max_outer_iters: 100, ..IcpConfig::default() };
    let plants = random_plants(20, 2000);
    let jobs: Vec<(Kind, &Plant)> =
        [Kind::Sa, Kind::Hinf, Kind::Mixed].iter().flat_map(|&k| plants.iter().map(move |p| (k, p))).collect();
    let runs: Vec<InvariantRun> = jobs.par_iter().map(|(k, p)| invariant_run(*k, p, &cfg)).collect();
    let secs = clock.elapsed().as_secs_f64();

    let done: Vec<&InvariantRun> = runs.iter().filter(|r| r.skipped.is_none()).collect();
    let feas = done.iter().map(|r| r.worst_feasibility).fold(f64::NEG_INFINITY, f64::max);
    let descent = done.iter().map(|r| r.worst_descent).fold(f64::NEG_INFINITY, f64::max);
    let per_kind = |k: Kind| done.iter().filter(|r| r.kind == k).count();
    for r in runs.iter().filter(|r| r.skipped.is_some()) {
        eprintln!("  skipped {:?} on {}: {}", r.kind, r.plant, r.skipped.as_deref().unwrap_or_default());
    }
    let invariants = Outcome::new(
        feas <= 1e-8 && descent <= 1e-8 && secs < 300.0 && per_kind(Kind::Sa) == plants.len(),
        format!(
            "runs sa/hinf/mixed {}/{}/{}, worst feasibility {feas:.2e}, worst descent {descent:.2e}, {secs:.1} s",
            per_kind(Kind::Sa),
            per_kind(Kind::Hinf),
            per_kind(Kind::Mixed)
        ),
    );
    let converged: Vec<&&InvariantRun> = done.iter().filter(|r| r.converged).collect();
    let unsound: Vec<String> =
        converged.iter().filter(|r| !r.verified).map(|r| format!("{:?}/{}", r.kind, r.plant)).collect();
    let soundness = Outcome::new(
        unsound.is_empty() && !converged.is_empty(),
        format!("{} converged runs verified, unsound: {:?}", converged.len() - unsound.len(), unsound),
    );
    (invariants, soundness)
}

fn scalar_plant(b: f64) -> Plant {
    let one = Mat::identity(1);
    let z = Mat::zeros(1, 1);
    Plant::new("scalar", one.scale(-1.0), one.clone(), one.scale(b), one.clone(), one, z.clone(), z.clone(), z)
        .unwrap()
}

fn analytic_plant() -> Outcome {
    let p = scalar_plant(1.0);
    let ss = StateSpace::closed_loop(&p, &p.zero_controller()).unwrap();
    let hinf = hinf_norm(&ss, 1e-9).unwrap();
    let h2 = h2_norm(&ss).unwrap();
    let synth = synthesize_hinf(&scalar_plant(0.0), None, &IcpConfig::default()).unwrap();
    Outcome::new(
        (hinf - 1.0).abs() <= 1e-6
            && (h2 - 0.5f64.sqrt()).abs() <= 1e-6
            && synth.result.status.converged()
            && (synth.gamma - 1.0).abs() <= 1e-3,
        format!("hinf {hinf:.9}, h2 {h2:.9}, synthesised gamma {:.7} ({:?})", synth.gamma, synth.result.status),
    )
}

fn box_lp() -> NsdpProblem {
    let mut vs = VarSet::new();
    let x1 = vs.scalar("x1");
    let x2 = vs.scalar("x2");
    let n = vs.dim();
    let mut b = BlockLmi::new(&[1, 1, 1, 1]);
    let one = AffineRect::constant(Mat::identity(1));
    b.set(0, 0, x1.expr().sub(&one)).unwrap();
    b.set(1, 1, x2.expr().sub(&one)).unwrap();
    b.set(2, 2, x1.expr().scale(-1.0).sub(&one)).unwrap();
    b.set(3, 3, x2.expr().scale(-1.0).sub(&one)).unwrap();
    let lmi = LinearConstraint::new("box", b.build(), n);
    let obj = Objective::linear(x1.expr().add(&x2.expr()).scale(-1.0), n).unwrap();
    NsdpProblem::new(vs, obj, vec![Box::new(lmi)]).unwrap()
}

/// The box problem again, with a bilinear constraint that has no bilinear terms.
fn degenerate_bmi() -> NsdpProblem {
    let mut vs = VarSet::new();
    let x1 = vs.scalar("x1");
    let x2 = vs.scalar("x2");
    let n = vs.dim();
    let mut b = BlockLmi::new(&[1, 1]);
    let one = AffineRect::constant(Mat::identity(1));
    b.set(0, 0, x1.expr().sub(&one)).unwrap();
    b.set(1, 1, x2.expr().sub(&one)).unwrap();
    let bmi = BilinearConstraint::new("upper", b.build(), vec![], n).unwrap();
    let mut lb = BlockLmi::new(&[1, 1]);
    lb.set(0, 0, x1.expr().scale(-1.0).sub(&one)).unwrap();
    lb.set(1, 1, x2.expr().scale(-1.0).sub(&one)).unwrap();
    let lmi = LinearConstraint::new("lower", lb.build(), n);
    let obj = Objective::linear(x1.expr().add(&x2.expr()).scale(-1.0), n).unwrap();
    NsdpProblem::new(vs, obj, vec![Box::new(bmi), Box::new(lmi)]).unwrap()
}

fn stationarity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, p) in [("box", box_lp()), ("bilinear-free", degenerate_bmi())] {
        let r = run(&p, &[0.0, 0.0], &IcpConfig::default()).unwrap();
        ok &= r.status.converged() && r.iterations() <= 2 && r.kkt.stationarity <= 1e-5;
        detail.push(format!("{name}: {} iterations, stationarity {:.2e}", r.iterations(), r.kkt.stationarity));
    }
    Outcome::new(ok, detail.join("; "))
}

/// `None` when no table plant is available.
fn reference_plants() -> Option<Outcome> {
    let dir = PathBuf::from(std::env::var_os("BMI_TABLE_DIR")?);
    let cfg = IcpConfig::default();
    let mut ok = true;
    let mut detail = Vec::new();
    let ac4 = dir.join("AC4.json");
    if ac4.is_file() {
        let plant = load_plant(&ac4).unwrap();
        let r = synthesize_sa(&plant, None, &cfg).unwrap();
        let alpha = spectral_abscissa(&plant.closed_loop(&r.controller).unwrap().a_f).unwrap();
        ok &= alpha <= -0.05 * 0.9;
        detail.push(format!("AC4 alpha0(A_F) {alpha:.4} (reference -0.0500)"));
    }
    let nn2 = dir.join("NN2.json");
    if nn2.is_file() {
        let plant = load_plant(&nn2).unwrap();
        let r = synthesize_hinf(&plant, None, &cfg).unwrap();
        let ss = StateSpace::closed_loop(&plant, &r.controller).unwrap();
        let norm = hinf_norm(&ss, 1e-6).unwrap();
        ok &= norm <= 2.2216 * 1.1;
        detail.push(format!("NN2 hinf {norm:.4} (reference 2.2216)"));
    }
    if detail.is_empty() {
        return None;
    }
    Some(Outcome::new(ok, detail.join("; ")))
}

fn gamma_monotonicity() -> Outcome {
    let cfg = IcpConfig::default();
    let plants = random_plants(10, 8000);
    let pairs: Vec<Result<(f64, f64), String>> = plants
        .par_iter()
        .map(|p| {
            let low = synthesize_mixed(p, Some(4.0), None, &cfg).map_err(|e| format!("{}: {e}", p.name))?;
            let high = synthesize_mixed_from(p, Some(10.0), &low.point, &cfg).map_err(|e| format!("{}: {e}", p.name))?;
            Ok((low.trace_z, high.trace_z))
        })
        .collect();
    let both: Vec<(f64, f64)> = pairs.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    for e in pairs.iter().filter_map(|r| r.as_ref().err()) {
        eprintln!("  gamma = 4 infeasible on {e}");
    }
    let violations = both.iter().filter(|(t4, t10)| *t4 < *t10 - 1e-6).count();
    let worst = both.iter().map(|(t4, t10)| t10 - t4).fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        violations == 0 && !both.is_empty(),
        format!("{} of {} plants feasible at both levels, worst trace(Z10) - trace(Z4) {worst:.2e}", both.len(), plants.len()),
    )
}

fn main() -> ExitCode {
    let (invariants, soundness) = invariant_suite();
    let results: Vec<(usize, &str, Option<Outcome>)> = vec![
        (1, "overestimate dominance", Some(overestimate_dominance())),
        (2, "iterate invariants", Some(invariants)),
        (3, "SDP solver conformance", Some(sdp_conformance())),
        (4, "synthesis soundness", Some(soundness)),
        (5, "analytic scalar plant", Some(analytic_plant())),
        (6, "stationarity on convex problems", Some(stationarity())),
        (7, "reference plants", reference_plants()),
        (8, "mixed gamma monotonicity", Some(gamma_monotonicity())),
    ];
    let mut failed = false;
    for (i, name, outcome) in &results {
        match outcome {
            Some(o) => {
                failed |= !o.passed;
                println!("{} {i} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
            }
            None => println!("SKIP {i} {name}: set BMI_TABLE_DIR to a directory with AC4.json or NN2.json"),
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
