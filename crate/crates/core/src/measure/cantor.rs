use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::cubes::CubeMeasure;
use crate::measure::discrete::DiscreteMeasure;
use crate::measure::geometry::{ball_box_volume, box_dist2, box_far2};

/// Edge lengths `ℓ_0 > … > ℓ_n` of a corner Cantor construction in ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub d: usize,
    pub ell: Vec<f64>,
    pub lambda: f64,
}

impl CantorSpec {
    /// `ℓ_k = ratio^k` for `k = 0..=n`, with `λ` just above `ratio`.
    pub fn geometric(d: usize, ratio: f64, n: usize) -> Result<Self> {
        let ell = (0..=n).map(|k| ratio.powi(k as i32)).collect();
        let lambda = (ratio * 1.5).min(0.5 * (ratio + 0.5));
        let spec = Self { d, ell, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn depth(&self) -> usize {
        self.ell.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::arg("d", "dimension must be positive"));
        }
        if self.ell.is_empty() {
            return Err(Error::Empty("ell"));
        }
        if !(self.lambda > 0.0 && self.lambda < 0.5) {
            return Err(Error::arg("lambda", format!("must lie in (0, 1/2), got {}", self.lambda)));
        }
        if !(self.ell[0] > 0.0 && self.ell[0].is_finite()) {
            return Err(Error::arg("ell", "ℓ_0 must be positive"));
        }
        for k in 0..self.depth() {
            let (a, b) = (self.ell[k], self.ell[k + 1]);
            if !(b > 0.0 && b < self.lambda * a) {
                return Err(Error::Construction(format!(
                    "need 0 < ℓ_{} < λ ℓ_{} (ℓ_{k} = {a}, ℓ_{} = {b}, λ = {})",
                    k + 1,
                    k,
                    k + 1,
                    self.lambda
                )));
            }
        }
        Ok(())
    }
}

/// Uniform probability measure on the level-`n` cubes of a corner Cantor set.
///
/// Level-`k` cubes are stored by lower corner in lexicographic bit order: the
/// children of cube `i` are `i·2^d + c`, child `c` being offset by
/// `b(c)·(ℓ_k − ℓ_{k+1})` with the first axis on the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorMeasure {
    spec: CantorSpec,
    s: f64,
    theta: Vec<f64>,
    levels: Vec<Vec<f64>>,
}

pub fn build_cantor(spec: &CantorSpec, s: f64) -> Result<CantorMeasure> {
    spec.validate()?;
    let d = spec.d;
    if !(s > 0.0 && s < d as f64) {
        return Err(Error::arg("s", format!("must lie in (0, {d}), got {s}")));
    }
    let n = spec.depth();
    let children = 1usize << d;
    let mut levels = vec![vec![0.0; d]];
    for k in 0..n {
        let step = spec.ell[k] - spec.ell[k + 1];
        let prev = &levels[k];
        let mut next = Vec::with_capacity(prev.len() * children);
        for p in prev.chunks(d) {
            for c in 0..children {
                for (axis, &x) in p.iter().enumerate() {
                    let bit = (c >> (d - 1 - axis)) & 1;
                    next.push(x + bit as f64 * step);
                }
            }
        }
        levels.push(next);
    }
    let theta = (0..=n)
        .map(|k| 2f64.powi(-((k * d) as i32)) / spec.ell[k].powf(s))
        .collect();
    Ok(CantorMeasure { spec: spec.clone(), s, theta, levels })
}

impl CantorMeasure {
    pub fn spec(&self) -> &CantorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn depth(&self) -> usize {
        self.spec.depth()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `θ_k = 2^{−kd}/ℓ_k^s`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_sq_sum(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }

    pub fn total_mass(&self) -> f64 {
        1.0
    }

    /// Lower corners of the level-`k` cubes, flat with stride `d`.
    pub fn level_corners(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn base_count(&self) -> usize {
        1usize << (self.depth() * self.dim())
    }

    /// `m(B(x, r))`, by recursive cube–ball intersection with pruning.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.ball_rec(x, r * r, r, 0, 0)
    }

    fn ball_rec(&self, x: &[f64], r2: f64, r: f64, k: usize, idx: usize) -> f64 {
        let d = self.dim();
        let lo = &self.levels[k][idx * d..(idx + 1) * d];
        let side = self.spec.ell[k];
        let hi: Vec<f64> = lo.iter().map(|c| c + side).collect();
        if box_dist2(x, lo, &hi) >= r2 {
            return 0.0;
        }
        let mass = 2f64.powi(-((k * d) as i32));
        if box_far2(x, lo, &hi) <= r2 {
            return mass;
        }
        if k == self.depth() {
            return mass * ball_box_volume(x, r, lo, &hi) / side.powi(d as i32);
        }
        let children = 1usize << d;
        (0..children).map(|c| self.ball_rec(x, r2, r, k + 1, idx * children + c)).sum()
    }

    /// The base cubes as a [`CubeMeasure`].
    pub fn to_cubes(&self) -> CubeMeasure {
        let n = self.depth();
        let cnt = self.base_count();
        CubeMeasure::new(
            self.dim(),
            self.levels[n].clone(),
            vec![self.spec.ell[n]; cnt],
            vec![1.0 / cnt as f64; cnt],
        )
        .expect("Cantor base cubes are valid")
    }

    /// One atom of mass `2^{−nd}` per base-cube center.
    pub fn atomized(&self) -> DiscreteMeasure {
        self.to_cubes().atomized().expect("base centers are finite")
    }
}
