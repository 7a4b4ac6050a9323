use innerconvex::linalg::{eig_sym, inverse, min_eig, Mat, SymMat};
use innerconvex::lmi::{AffineMatExpr, AffineRect, SdpProblem, SdpStatus, VarSet};
use innerconvex::sdp::{adjoint_apply, solve, IpmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lambda_max_problem(s: &SymMat) -> SdpProblem {
    let n = s.dim();
    let mut vs = VarSet::new();
    let t = vs.scalar("t");
    // S - tI ⪯ 0
    let block = AffineMatExpr::from_sym_rect(&t.expr().times_matrix(&Mat::identity(n)).unwrap())
        .unwrap()
        .scale(-1.0)
        .add_constant(s);
    SdpProblem::assemble(vs.vars(), &t.expr(), vec![block]).unwrap()
}

#[test]
fn lambda_max_of_swap_matrix() {
    let a = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let sol = solve(&lambda_max_problem(&a), &IpmConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6);
}

#[test]
fn lambda_max_matches_eigenvalues() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let s = SymMat::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
        let sol = solve(&lambda_max_problem(&s), &IpmConfig::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let oracle = *eig_sym(&s).unwrap().last().unwrap();
        assert!((sol.x[0] - oracle).abs() < 1e-6, "{} vs {oracle}", sol.x[0]);
        // the dual is a unit-trace psd matrix
        assert!((sol.duals[0].trace() - 1.0).abs() < 1e-6);
        assert!(min_eig(&sol.duals[0]).unwrap() > -1e-7);
    }
}

#[test]
fn separable_diagonal() {
    let mut vs = VarSet::new();
    let x1 = vs.scalar("x1");
    let x2 = vs.scalar("x2");
    // diag(1 - x1, 2 - x2) ⪯ 0
    let d = |e: AffineRect, at: usize| {
        let mut m = Mat::zeros(2, 2);
        m[(at, at)] = 1.0;
        AffineMatExpr::from_sym_rect(&e.times_matrix(&m).unwrap()).unwrap()
    };
    let block = d(x1.expr(), 0)
        .add(&d(x2.expr(), 1))
        .scale(-1.0)
        .add_constant(&SymMat::diag(&[1.0, 2.0]));
    let obj = x1.expr().add(&x2.expr());
    let p = SdpProblem::assemble(vs.vars(), &obj, vec![block]).unwrap();
    let sol = solve(&p, &IpmConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-6 && (sol.x[1] - 2.0).abs() < 1e-6);
}

/// Solves `min cᵀx s.t. Gx ≤ h` for three variables by enumerating vertices.
fn lp_vertex_oracle(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> f64 {
    let m = g.len();
    let mut best = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            for d in b + 1..m {
                let sys = Mat::from_rows(&[g[a].clone(), g[b].clone(), g[d].clone()]).unwrap();
                let Ok(inv) = inverse(&sys) else { continue };
                let x = inv.matvec(&[h[a], h[b], h[d]]);
                let feasible = g
                    .iter()
                    .zip(h)
                    .all(|(row, hi)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= hi + 1e-9);
                if feasible {
                    best = best.min(c.iter().zip(&x).map(|(p, q)| p * q).sum());
                }
            }
        }
    }
    best
}

#[test]
fn diagonal_lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let mut g: Vec<Vec<f64>> = Vec::new();
        let mut h = Vec::new();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            g.push(e.clone());
            h.push(4.0);
            e[i] = -1.0;
            g.push(e);
            h.push(4.0);
        }
        for _ in 0..4 {
            g.push((0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
            h.push(rng.random_range(0.5..2.0));
        }
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut vs = VarSet::new();
        let xs: Vec<_> = (0..3).map(|i| vs.scalar(&format!("x{i}"))).collect();
        // one diagonal block: diag(Gx - h) ⪯ 0, split over two blocks to exercise stacking
        let mut blocks = Vec::new();
        for chunk in [0..5usize, 5..g.len()] {
            let rows: Vec<usize> = chunk.collect();
            let k = rows.len();
            let mut e = AffineMatExpr::zeros(k);
            for (local, &r) in rows.iter().enumerate() {
                let mut unit = Mat::zeros(k, k);
                unit[(local, local)] = 1.0;
                for (j, x) in xs.iter().enumerate() {
                    let term = AffineMatExpr::from_sym_rect(&x.expr().times_matrix(&unit.scale(g[r][j])).unwrap()).unwrap();
                    e = e.add(&term);
                }
                let mut cst = SymMat::zeros(k);
                cst.set(local, local, -h[r]);
                e = e.add_constant(&cst);
            }
            blocks.push(e);
        }
        let obj = xs
            .iter()
            .zip(&c)
            .fold(AffineRect::zeros(1, 1), |acc, (x, ci)| acc.add(&x.expr().scale(*ci)));
        let p = SdpProblem::assemble(vs.vars(), &obj, blocks).unwrap();
        let sol = solve(&p, &IpmConfig::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let oracle = lp_vertex_oracle(&c, &g, &h);
        assert!((sol.primal_obj - oracle).abs() < 1e-6, "{} vs {oracle}", sol.primal_obj);
    }
}

#[test]
fn detects_infeasibility() {
    let mut vs = VarSet::new();
    let t = vs.scalar("t");
    // t ≤ -1 and t ≥ 1
    let upper = AffineMatExpr::from_sym_rect(&t.expr()).unwrap().add_identity(1.0);
    let lower = AffineMatExpr::from_sym_rect(&t.expr()).unwrap().scale(-1.0).add_identity(1.0);
    let p = SdpProblem::assemble(vs.vars(), &t.expr(), vec![upper, lower]).unwrap();
    let sol = solve(&p, &IpmConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Infeasible);
}

#[test]
fn detects_unboundedness() {
    let mut vs = VarSet::new();
    let t = vs.scalar("t");
    // t ≤ 1, minimise t
    let upper = AffineMatExpr::from_sym_rect(&t.expr()).unwrap().add_identity(-1.0);
    let p = SdpProblem::assemble(vs.vars(), &t.expr(), vec![upper]).unwrap();
    let sol = solve(&p, &IpmConfig::default()).unwrap();
    assert_eq!(sol.status, SdpStatus::Unbounded);
}

#[test]
fn max_iterations_reported() {
    let a = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let cfg = IpmConfig { max_iters: 2, ..IpmConfig::default() };
    let sol = solve(&lambda_max_problem(&a), &cfg).unwrap();
    assert_eq!(sol.status, SdpStatus::MaxIterations);
}

#[test]
fn invalid_config_rejected() {
    let a = SymMat::identity(1);
    let cfg = IpmConfig { step_fraction: 1.0, ..IpmConfig::default() };
    assert!(solve(&lambda_max_problem(&a), &cfg).is_err());
}

#[test]
fn adjoint_examples() {
    let mut vs = VarSet::new();
    let x = vs.scalar("x1");
    let block = AffineMatExpr::from_sym_rect(&x.expr().times_matrix(&Mat::identity(2)).unwrap()).unwrap();
    assert_eq!(adjoint_apply(&block, &SymMat::identity(2), 1).unwrap(), vec![2.0]);
    assert_eq!(adjoint_apply(&block, &SymMat::zeros(2), 1).unwrap(), vec![0.0]);
    assert!(adjoint_apply(&block, &SymMat::zeros(3), 1).is_err());
}

#[test]
fn adjoint_matches_naive_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let coeffs: Vec<(usize, SymMat)> =
        (0..4).map(|k| (k, SymMat::from_fn(3, |_, _| rng.random_range(-1.0..1.0)))).collect();
    let block = AffineMatExpr::from_parts(SymMat::zeros(3), coeffs.clone()).unwrap();
    let w = SymMat::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
    let got = adjoint_apply(&block, &w, 4).unwrap();
    for (k, a) in coeffs {
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                naive += a.get(i, j) * w.get(i, j);
            }
        }
        assert!((got[k] - naive).abs() < 1e-14);
    }
}

#[test]
fn weak_duality_and_complementarity_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        // min trace(C X) s.t. X ⪰ I·0.1, X ⪯ 5I  over symmetric 3x3 X
        let mut vs = VarSet::new();
        let x = vs.symmetric("X", 3).unwrap();
        let g = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let cmat = SymMat::symmetrize(&g).unwrap();
        let obj = x.expr().left_mul(&cmat.to_mat()).unwrap().trace().unwrap();
        let lower = AffineMatExpr::from_sym_rect(&x.expr()).unwrap().scale(-1.0).add_identity(0.1);
        let upper = AffineMatExpr::from_sym_rect(&x.expr()).unwrap().add_identity(-5.0);
        let p = SdpProblem::assemble(vs.vars(), &obj, vec![lower, upper]).unwrap();
        let sol = solve(&p, &IpmConfig::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.primal_obj >= sol.dual_obj - 1e-6);
        let compl: f64 = p
            .blocks()
            .iter()
            .zip(&sol.duals)
            .map(|(b, w)| b.evaluate(&sol.x).inner(w).abs())
            .sum();
        assert!(compl <= 10.0 * 1e-7 * (1.0 + sol.primal_obj.abs()), "complementarity {compl}");
        // analytic optimum: eigenvalues of C below zero get 5, others 0.1
        let oracle: f64 = eig_sym(&cmat).unwrap().iter().map(|l| if *l < 0.0 { 5.0 * l } else { 0.1 * l }).sum();
        assert!((sol.primal_obj - oracle).abs() < 1e-6, "{} vs {oracle}", sol.primal_obj);
    }
}

#[test]
fn deterministic_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = SymMat::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    let a = solve(&lambda_max_problem(&s), &IpmConfig::default()).unwrap();
    let b = solve(&lambda_max_problem(&s), &IpmConfig::default()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.x, b.x);
}
