//! Mixed H2/H∞ synthesis at two levels: `γ = 4` first, then `γ = 10` warm
//! started from the first solution, so `trace(Z)` cannot increase.

use innerconvex::analysis::{h2_norm, hinf_norm, StateSpace};
use innerconvex::bench::{generate, GenConfig};
use innerconvex::icp::IcpConfig;
use innerconvex::sof::{synthesize_mixed, synthesize_mixed_from, Controller, Plant};

fn report(plant: &Plant, gamma: f64, trace_z: f64, k: &Controller) -> innerconvex::Result<()> {
    let ss = StateSpace::closed_loop(plant, k)?;
    println!(
        "gamma {gamma:>4}: trace(Z) = {trace_z:.5}  h2^2 = {:.5}  hinf = {:.4}",
        h2_norm(&ss)?.powi(2),
        hinf_norm(&ss, 1e-8)?
    );
    Ok(())
}

fn main() -> innerconvex::Result<()> {
    let cfg = GenConfig { n: 3, n_u: 1, n_y: 2, count: 1, band: (-0.5, -0.1), seed: 3, ..GenConfig::default() };
    let plant = generate(&cfg)?.remove(0);
    let icp = IcpConfig::default();

    let low = synthesize_mixed(&plant, Some(4.0), None, &icp)?;
    report(&plant, 4.0, low.trace_z, &low.controller)?;
    let high = synthesize_mixed_from(&plant, Some(10.0), &low.point, &icp)?;
    report(&plant, 10.0, high.trace_z, &high.controller)?;
    let h2 = synthesize_mixed(&plant, None, None, &icp)?;
    println!("pure H2:    trace(Z) = {:.5}", h2.trace_z);
    Ok(())
}
