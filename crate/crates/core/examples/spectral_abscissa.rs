//! Static output feedback that pushes the closed-loop spectral abscissa left,
//! on a randomly generated unstable plant.

use innerconvex::analysis::verify_synthesis;
use innerconvex::bench::{generate, GenConfig};
use innerconvex::icp::IcpConfig;
use innerconvex::sof::synthesize_sa;

fn main() -> innerconvex::Result<()> {
    let cfg = GenConfig { n: 4, n_u: 2, n_y: 2, count: 1, band: (0.2, 0.4), seed: 7, ..GenConfig::default() };
    let plant = generate(&cfg)?.remove(0);
    let icp = IcpConfig { max_outer_iters: 50, ..IcpConfig::default() };
    let r = synthesize_sa(&plant, None, &icp)?;
    let report = verify_synthesis(&plant, &r.controller, &innerconvex::analysis::Claims::Sa { beta: r.beta })?;

    println!("open loop  alpha0(A)   = {:.4}", plant.open_loop_abscissa()?);
    println!("start      beta0       = {:.4}", r.beta0);
    println!("final      beta        = {:.4} ({:?}, {} iterations)", r.beta, r.result.status, r.result.iterations());
    println!("closed     alpha0(A_F) = {:.4}", report.alpha_closed);
    println!("gain F = {:?}", r.controller.f.to_rows());
    println!("verification passed: {}", report.passed);
    Ok(())
}
