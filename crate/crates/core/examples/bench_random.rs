//! A small benchmark: generate plants into a scratch directory, run H∞
//! synthesis on all of them in parallel and print the table.

use innerconvex::analysis::Mode;
use innerconvex::bench::{bench_dir, render_text, write_plants, GenConfig, SynthSettings};

fn main() -> innerconvex::Result<()> {
    let dir = std::env::temp_dir().join(format!("bmi-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let cfg = GenConfig { n: 3, n_u: 1, n_y: 1, count: 6, band: (-0.4, 0.2), seed: 5, ..GenConfig::default() };
    write_plants(&cfg, &dir)?;

    let settings = SynthSettings { mode: Mode::Hinf, ..SynthSettings::default() };
    let rows = bench_dir(&dir, &settings)?;
    print!("{}", render_text(Mode::Hinf, &rows));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
