use innerconvex::analysis::{
    h2_norm, hamiltonian_has_imaginary_eig, hinf_norm, sigma_max_at, verify_synthesis, Claims, StateSpace,
};
use innerconvex::linalg::{spectral_abscissa, Mat};
use innerconvex::sof::{Controller, Plant};
use innerconvex::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar() -> StateSpace {
    let one = Mat::identity(1);
    StateSpace::new(one.scale(-1.0), one.clone(), one, Mat::zeros(1, 1)).unwrap()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// A random system whose spectral abscissa is exactly `-margin`.
fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize, margin: f64) -> StateSpace {
    let r = rand_mat(rng, n, n);
    let shift = spectral_abscissa(&r).unwrap() + margin;
    let a = &r - &Mat::identity(n).scale(shift);
    StateSpace::new(a, rand_mat(rng, n, m), rand_mat(rng, p, n), Mat::zeros(p, m)).unwrap()
}

fn grid_peak(ss: &StateSpace, points: usize) -> f64 {
    let mut best = sigma_max_at(ss, 0.0).unwrap();
    for k in 0..points {
        let w = 10f64.powf(-3.0 + 6.0 * k as f64 / (points - 1) as f64);
        best = best.max(sigma_max_at(ss, w).unwrap());
    }
    best
}

/// `∫₀^T ‖C e^{At} B‖²_F dt` by classical RK4 on the augmented state.
fn impulse_energy(ss: &StateSpace, t_end: f64, h: f64) -> f64 {
    let n = ss.a.rows();
    let mut total = 0.0;
    for j in 0..ss.b.cols() {
        let mut x: Vec<f64> = ss.b.column(j);
        let mut e = 0.0;
        let rate = |x: &[f64]| -> (Vec<f64>, f64) {
            let dx = ss.a.matvec(x);
            let z = ss.c.matvec(x);
            (dx, z.iter().map(|v| v * v).sum())
        };
        let steps = (t_end / h).ceil() as usize;
        for _ in 0..steps {
            let (k1, e1) = rate(&x);
            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
            let (k2, e2) = rate(&x2);
            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
            let (k3, e3) = rate(&x3);
            let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
            let (k4, e4) = rate(&x4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            e += h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
        }
        total += e;
    }
    total
}

#[test]
fn scalar_first_order_lag() {
    let ss = scalar();
    assert!((hinf_norm(&ss, 1e-9).unwrap() - 1.0).abs() < 1e-6);
    assert!((h2_norm(&ss).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((sigma_max_at(&ss, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn static_gain() {
    let ss = StateSpace::new(Mat::identity(1).scale(-1.0), Mat::zeros(1, 1), Mat::identity(1), Mat::diag(&[2.0]))
        .unwrap();
    assert!((hinf_norm(&ss, 1e-8).unwrap() - 2.0).abs() < 1e-12);
    assert!(matches!(h2_norm(&ss), Err(Error::Precondition(_))));
}

#[test]
fn zero_output_has_zero_h2() {
    let ss = StateSpace::new(Mat::identity(2).scale(-1.0), Mat::identity(2), Mat::zeros(1, 2), Mat::zeros(1, 2))
        .unwrap();
    assert_eq!(h2_norm(&ss).unwrap(), 0.0);
}

#[test]
fn unstable_systems_are_rejected() {
    let one = Mat::identity(1);
    let ss = StateSpace::new(one.clone(), one.clone(), one.clone(), Mat::zeros(1, 1)).unwrap();
    assert!(matches!(hinf_norm(&ss, 1e-6), Err(Error::Precondition(_))));
    assert!(matches!(h2_norm(&ss), Err(Error::Precondition(_))));
    assert!(StateSpace::new(one.clone(), Mat::zeros(2, 1), one.clone(), Mat::zeros(1, 1)).is_err());
}

#[test]
fn bisection_matches_frequency_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..8 {
        let margin = rng.random_range(0.3..1.0);
        let ss = random_stable(&mut rng, 4, 2, 2, margin);
        let norm = hinf_norm(&ss, 1e-7).unwrap();
        let grid = grid_peak(&ss, 10_000);
        assert!(norm >= grid * (1.0 - 1e-6), "bisection {norm} below grid {grid}");
        assert!((norm - grid).abs() <= 1e-3 * grid, "bisection {norm} vs grid {grid}");
    }
}

#[test]
fn bisection_certificate() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..8 {
        let mut ss = random_stable(&mut rng, 3, 2, 2, 0.5);
        ss.d = rand_mat(&mut rng, 2, 2).scale(0.1);
        let tol = 1e-6;
        let g = hinf_norm(&ss, tol).unwrap();
        assert!(!hamiltonian_has_imaginary_eig(&ss, g * (1.0 + 2.0 * tol)).unwrap());
        let sigma_d = innerconvex::linalg::sigma_max(&ss.d).unwrap();
        if g * (1.0 - 2.0 * tol) > sigma_d {
            assert!(hamiltonian_has_imaginary_eig(&ss, g * (1.0 - 2.0 * tol)).unwrap());
        }
    }
}

#[test]
fn hinf_scales_with_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let ss = random_stable(&mut rng, 3, 1, 2, 0.4);
        let k = rng.random_range(0.5..4.0);
        let mut scaled = ss.clone();
        scaled.c = ss.c.scale(k);
        let a = hinf_norm(&ss, 1e-10).unwrap();
        let b = hinf_norm(&scaled, 1e-10).unwrap();
        assert!((b - k * a).abs() <= 1e-8 * b, "{b} vs {}", k * a);
    }
}

#[test]
fn h2_matches_impulse_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..4 {
        let margin = rng.random_range(0.5..1.0);
        let ss = random_stable(&mut rng, 3, 2, 2, margin);
        let h2 = h2_norm(&ss).unwrap();
        let energy = impulse_energy(&ss, 50.0 / margin, 2e-3);
        assert!((h2 * h2 - energy).abs() <= 1e-3 * energy, "{} vs {energy}", h2 * h2);
    }
}

#[test]
fn h2_squared_adds_over_decoupled_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let s1 = random_stable(&mut rng, 2, 1, 1, 0.5);
    let s2 = random_stable(&mut rng, 3, 2, 1, 0.7);
    let mut a = Mat::zeros(5, 5);
    a.set_block(0, 0, &s1.a);
    a.set_block(2, 2, &s2.a);
    let mut b = Mat::zeros(5, 3);
    b.set_block(0, 0, &s1.b);
    b.set_block(2, 1, &s2.b);
    let mut c = Mat::zeros(2, 5);
    c.set_block(0, 0, &s1.c);
    c.set_block(1, 2, &s2.c);
    let both = StateSpace::new(a, b, c, Mat::zeros(2, 3)).unwrap();
    let lhs = h2_norm(&both).unwrap().powi(2);
    let rhs = h2_norm(&s1).unwrap().powi(2) + h2_norm(&s2).unwrap().powi(2);
    assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs));
}

fn scalar_plant() -> Plant {
    let one = Mat::identity(1);
    Plant::new("scalar", one.scale(-1.0), one.clone(), one.clone(), one.clone(), one.clone(), Mat::zeros(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1))
        .unwrap()
}

#[test]
fn verification_reports() {
    let p = scalar_plant();
    let k = Controller::new(Mat::diag(&[-1.0]));
    // closed loop ẋ = −2x + w, z = x: α = −2, H∞ = 1/2, H2² = 1/4
    let sa = verify_synthesis(&p, &k, &Claims::Sa { beta: 2.0 }).unwrap();
    assert!(sa.passed);
    assert!(!verify_synthesis(&p, &k, &Claims::Sa { beta: 2.1 }).unwrap().passed);

    let ok = verify_synthesis(&p, &k, &Claims::Hinf { gamma: 0.5 }).unwrap();
    assert!(ok.passed, "{ok:?}");
    let low = verify_synthesis(&p, &k, &Claims::Hinf { gamma: 0.45 }).unwrap();
    assert!(!low.passed);

    let mixed = verify_synthesis(&p, &k, &Claims::Mixed { gamma: Some(10.0), trace_z: 0.25 }).unwrap();
    assert!(mixed.passed, "{mixed:?}");
    assert!(mixed.hinf.unwrap() <= 10.0);
    assert!((mixed.h2.unwrap() - 0.5).abs() < 1e-10);

    let unstable = Controller::new(Mat::diag(&[2.0]));
    let r = verify_synthesis(&p, &unstable, &Claims::Hinf { gamma: 100.0 }).unwrap();
    assert!(!r.passed);
}
