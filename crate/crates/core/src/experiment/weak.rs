//! Weak type (1,1) check: `η{R_{ν,*} > t} · t / ‖ν‖` for a Cantor measure
//! `η` and random discrete `ν`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{build_cantor, CantorSpec, DiscreteMeasure};
use crate::riesz::{maximal_unchecked, RieszContext};

use super::trial_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakConfig {
    /// Cantor depth; `ℓ_k = ratio^k` in d = 1.
    pub depth: usize,
    pub s: f64,
    pub ratio: f64,
    pub atoms: usize,
    pub measures: usize,
    pub seed: u64,
    /// First RNG stream; disjoint seed sets use disjoint stream ranges.
    #[serde(default)]
    pub stream_offset: u64,
    pub t_points: usize,
    /// Midpoint samples of `η` per base interval.
    pub samples_per_cube: usize,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            depth: 8,
            s: 0.5,
            ratio: 0.25,
            atoms: 32,
            measures: 50,
            seed: 0,
            stream_offset: 0,
            t_points: 16,
            samples_per_cube: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakReport {
    /// `t_j / ‖ν‖`.
    pub t_over_norm: Vec<f64>,
    /// `ratios[i][j] = η{R_{ν_i,*} > t_j} t_j / ‖ν_i‖`.
    pub ratios: Vec<Vec<f64>>,
    /// The fitted constant: the largest ratio.
    pub c_fit: f64,
}

pub fn weak_type_experiment(cfg: &WeakConfig) -> Result<WeakReport> {
    if cfg.atoms == 0 || cfg.measures == 0 || cfg.t_points == 0 || cfg.samples_per_cube == 0 {
        return Err(Error::arg("weak", "atoms, measures, t_points and samples_per_cube must be positive"));
    }
    let spec = CantorSpec::geometric(1, cfg.ratio, cfg.depth)?;
    let eta = build_cantor(&spec, cfg.s)?;
    let ctx = RieszContext::new(cfg.s, 1)?;
    let base = eta.level_corners(cfg.depth).to_vec();
    let side = spec.ell[cfg.depth];
    let q = cfg.samples_per_cube;
    let samples: Vec<f64> = base
        .iter()
        .flat_map(|&a| (0..q).map(move |i| a + side * (i as f64 + 0.5) / q as f64))
        .collect();
    let weight = 1.0 / samples.len() as f64;
    let t_over_norm: Vec<f64> = (0..cfg.t_points).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let ratios = (0..cfg.measures)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, cfg.stream_offset + i as u64);
            let mut pts = Vec::with_capacity(cfg.atoms);
            let mut ws = Vec::with_capacity(cfg.atoms);
            for a in 0..cfg.atoms {
                // half the atoms on the Cantor set, half anywhere in [0, 1]
                let x = if a % 2 == 0 {
                    base[rng.gen_range(0..base.len())] + side * rng.gen::<f64>()
                } else {
                    rng.gen::<f64>()
                };
                let m: f64 = rng.gen_range(0.5..1.5);
                pts.push(vec![x]);
                ws.push(if rng.gen_bool(0.5) { m } else { -m });
            }
            let nu = DiscreteMeasure::new(1, &pts, &ws)?;
            let norm = nu.total_variation();
            let values: Vec<f64> = samples.iter().map(|&x| maximal_unchecked(&nu, &ctx, &[x])).collect();
            Ok(t_over_norm
                .iter()
                .map(|&tn| {
                    let t = tn * norm;
                    let mass = values.iter().filter(|&&v| v > t).count() as f64 * weight;
                    mass * t / norm
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let c_fit = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(WeakReport { t_over_norm, ratios, c_fit })
}
