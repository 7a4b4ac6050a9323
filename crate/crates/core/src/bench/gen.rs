//! Reproducible random plants with a prescribed open-loop spectral abscissa.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_abscissa, Mat};
use crate::sof::Plant;

use super::plant_file::save_plant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_w: usize,
    /// Defaults to `n_u + 1`, so that `D₁₂` can have full column rank.
    pub n_z: Option<usize>,
    pub count: usize,
    /// `α₀(A)` is drawn uniformly from `[band.0, band.1]`.
    pub band: (f64, f64),
    pub seed: u64,
    /// `B = C = I`, i.e. static state feedback; requires `n_u = n_y = n`.
    pub identity_io: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { n: 4, n_u: 2, n_y: 2, n_w: 1, n_z: None, count: 10, band: (-0.5, 0.5), seed: 0, identity_io: false }
    }
}

impl GenConfig {
    pub fn n_z(&self) -> usize {
        self.n_z.unwrap_or(self.n_u + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_u == 0 || self.n_y == 0 {
            return Err(Error::Config("n, n_u and n_y must be at least 1".into()));
        }
        let (lo, hi) = self.band;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("stability band ({lo}, {hi}) is empty or not finite")));
        }
        if self.identity_io && (self.n_u != self.n || self.n_y != self.n) {
            return Err(Error::Config("identity input/output needs n_u = n_y = n".into()));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// File stem of the `i`-th plant of a run.
pub fn plant_name(seed: u64, i: usize) -> String {
    format!("rand_{seed}_{i:03}")
}

/// `A = R − s·I` with `R` Gaussian scaled by `1/√n` and `s` placing `α₀(A)`
/// in the band; the remaining matrices are Gaussian, with `D₁₁ = D₂₁ = 0`.
pub fn generate(cfg: &GenConfig) -> Result<Vec<Plant>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, nu, ny, nw, nz) = (cfg.n, cfg.n_u, cfg.n_y, cfg.n_w, cfg.n_z());
    let scale = 1.0 / (n as f64).sqrt();
    let mut plants = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let r = gaussian(&mut rng, n, n).scale(scale);
        let target = if cfg.band.0 == cfg.band.1 { cfg.band.0 } else { rng.random_range(cfg.band.0..=cfg.band.1) };
        let shift = spectral_abscissa(&r)? - target;
        let a = &r - &Mat::identity(n).scale(shift);
        let (b, c) = if cfg.identity_io {
            (Mat::identity(n), Mat::identity(n))
        } else {
            (gaussian(&mut rng, n, nu), gaussian(&mut rng, ny, n))
        };
        let b1 = gaussian(&mut rng, n, nw);
        let c1 = gaussian(&mut rng, nz, n);
        let d12 = gaussian(&mut rng, nz, nu);
        plants.push(Plant::new(
            &plant_name(cfg.seed, i),
            a,
            b1,
            b,
            c1,
            c,
            Mat::zeros(nz, nw),
            d12,
            Mat::zeros(ny, nw),
        )?);
    }
    Ok(plants)
}

/// Generates and writes `<dir>/rand_{seed}_{i:03}.json`.
pub fn write_plants(cfg: &GenConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    generate(cfg)?
        .iter()
        .map(|p| {
            let path = dir.join(format!("{}.json", p.name));
            save_plant(p, &path)?;
            Ok(path)
        })
        .collect()
}
