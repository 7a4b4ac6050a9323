//! H∞ static output feedback on a random plant; the claimed bound is
//! re-checked with the Hamiltonian bisection oracle.

use innerconvex::analysis::{hinf_norm, StateSpace};
use innerconvex::bench::{generate, GenConfig};
use innerconvex::icp::IcpConfig;
use innerconvex::sof::synthesize_hinf;

fn main() -> innerconvex::Result<()> {
    let cfg = GenConfig { n: 4, n_u: 2, n_y: 2, count: 1, band: (-0.3, 0.1), seed: 11, ..GenConfig::default() };
    let plant = generate(&cfg)?.remove(0);
    let r = synthesize_hinf(&plant, None, &IcpConfig::default())?;
    let norm = hinf_norm(&StateSpace::closed_loop(&plant, &r.controller)?, 1e-8)?;

    println!("Phase-1 bound  {:.5}", r.gamma0);
    println!("final bound    {:.5} ({:?}, {} iterations)", r.gamma, r.result.status, r.result.iterations());
    println!("oracle norm    {norm:.5}");
    for rec in r.result.records.iter().step_by(10) {
        println!("  k={:>3}  gamma={:.6}  step={:.2e}  ipm={}", rec.k, rec.objective, rec.step, rec.ipm_iters);
    }
    Ok(())
}
