//! The quadratic overestimate of a bilinear matrix form: it matches the form
//! at its anchor and dominates it in the semidefinite order everywhere else.

use innerconvex::linalg::{min_eig, Mat, SymMat};
use innerconvex::overestimate::{qq_evaluate, QqOverestimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn main() -> innerconvex::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, p) = (3, 2);
    let q = SymMat::identity(n);
    let (x_bar, y_bar) = (random(&mut rng, n, p), random(&mut rng, n, p));
    let o = QqOverestimate::half_split(&q, x_bar.clone(), y_bar.clone())?;

    let at_anchor = qq_evaluate(&o, &x_bar, &y_bar)?.sub(&o.exact(&x_bar, &y_bar));
    println!("residual at the anchor: {:.2e}", at_anchor.frobenius_norm());

    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let (x, y) = (random(&mut rng, n, p), random(&mut rng, n, p));
        let gap = qq_evaluate(&o, &x, &y)?.sub(&o.exact(&x, &y));
        worst = worst.min(min_eig(&gap)?);
    }
    println!("smallest eigenvalue of overestimate minus form over 1000 points: {worst:.3e}");
    Ok(())
}
