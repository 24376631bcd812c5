//! Randomly perturbed corner Cantor sets used for the lower Cartan bound.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::measure::DiscreteMeasure;

/// The deterministic part of a realization: scales, the index set `J` and
/// the block structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorLayout {
    pub d: usize,
    pub s: f64,
    pub m_scale: f64,
    pub n: usize,
    /// `ℓ_0, …, ℓ_n`.
    pub ell: Vec<f64>,
    /// `j_0 = 0 < j_1 < … < j_m = n`.
    pub j: Vec<usize>,
    /// `θ_{j_k} = η 2^{−j_k d} / ℓ_{j_k}^s` for `k < m`.
    pub theta: Vec<f64>,
    pub eta: f64,
}

impl CantorLayout {
    pub fn new(h: &GaugeFunction, s: f64, m_scale: f64, n: usize, eta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "depth must be at least 1"));
        }
        if !(m_scale > 0.0 && m_scale.is_finite()) {
            return Err(Error::arg("M", format!("must be positive, got {m_scale}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg("eta", format!("must be positive, got {eta}")));
        }
        let d = h.dim();
        if d * n > 24 {
            return Err(Error::arg("n", "2^{nd} base cubes do not fit in memory"));
        }
        let mut ell: Vec<f64> = (0..n).map(|j| h.inverse(m_scale * 2f64.powi(-((d * j) as i32)))).collect();
        ell.push(h.inverse(m_scale * 2f64.powi(-((d * n) as i32))) / 5.0);
        let mut j = vec![0usize];
        while *j.last().unwrap() < n {
            let a = *j.last().unwrap();
            let next = (a + 1..=n).find(|&k| ell[k] <= ell[a] * 2f64.powi(a as i32 - k as i32) / 5.0 * (1.0 + 1e-12));
            match next {
                Some(k) => j.push(k),
                None => {
                    return Err(Error::Construction(format!(
                        "index rule stalls at j = {a}: ℓ_n/ℓ_j = {:.3e} exceeds 2^(j−n)/5",
                        ell[n] / ell[a]
                    )))
                }
            }
        }
        let theta = j[..j.len() - 1]
            .iter()
            .map(|&jk| eta * 2f64.powi(-((jk * d) as i32)) / ell[jk].powf(s))
            .collect();
        Ok(Self { d, s, m_scale, n, ell, j, theta, eta })
    }

    /// Number of blocks `m = |J| − 1`.
    pub fn levels(&self) -> usize {
        self.j.len() - 1
    }

    /// `D_k = 2^{d(j_{k+1} − j_k − 1)}`: copies of `E_{k+1}` inside one `F_k`.
    pub fn copies(&self, k: usize) -> usize {
        1usize << (self.d * (self.j[k + 1] - self.j[k] - 1))
    }

    pub fn base_count(&self) -> usize {
        1usize << (self.d * self.n)
    }

    /// Number of base cubes in one copy of `E_k`.
    pub fn block_len(&self, k: usize) -> usize {
        1usize << (self.d * (self.n - self.j[k]))
    }

    /// `Σ_k θ_{j_k}²`.
    pub fn theta_sq_sum(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum()
    }

    /// Index range of the `F_k` block opposite (in every coordinate) to the
    /// one holding base cube `i`, inside the copy of `E_k` holding `i`.
    pub fn opposite_block(&self, k: usize, i: usize) -> std::ops::Range<usize> {
        let e = self.block_len(k);
        let f = e >> self.d;
        let start = i - i % e;
        let eps = (i % e) / f;
        let opp = eps ^ ((1 << self.d) - 1);
        start + opp * f..start + (opp + 1) * f
    }
}

/// One random realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCantorRealization {
    pub layout: CantorLayout,
    /// `shifts[k]`: every `v_ε` drawn at level `k`, flattened in draw order.
    pub shifts: Vec<Vec<f64>>,
    /// Base cube centers, flattened, in block order.
    pub base_centers: Vec<f64>,
    /// Mass `η 2^{−nd}` at each center.
    pub nu: DiscreteMeasure,
    /// Mass `2^{−nd}` at each center.
    pub mu: DiscreteMeasure,
}

impl RandomCantorRealization {
    pub fn center(&self, i: usize) -> &[f64] {
        let d = self.layout.d;
        &self.base_centers[i * d..(i + 1) * d]
    }
}

/// Draws one realization; the draw order is a depth-first walk, so a given
/// RNG state always yields the same set.
pub fn random_cantor_build<R: Rng>(layout: &CantorLayout, rng: &mut R) -> Result<RandomCantorRealization> {
    let d = layout.d;
    let m = layout.levels();
    let mut centers = Vec::with_capacity(layout.base_count() * d);
    let mut shifts = vec![Vec::new(); m];
    // subcube centers of the cube of edge ℓ_{j_k}/5 for every level
    let grids: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|k| {
            let q = layout.ell[layout.j[k]] / 5.0;
            let g = 1usize << (layout.j[k + 1] - layout.j[k] - 1);
            (0..layout.copies(k))
                .map(|mut f| {
                    (0..d)
                        .map(|_| {
                            let i = f % g;
                            f /= g;
                            -0.5 * q + (i as f64 + 0.5) * q / g as f64
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    fill(layout, &grids, 0, &vec![0.0; d], rng, &mut shifts, &mut centers);
    let n = layout.base_count();
    let unit = 2f64.powi(-((d * layout.n) as i32));
    let nu = DiscreteMeasure::from_flat(d, centers.clone(), vec![layout.eta * unit; n])?;
    let mu = DiscreteMeasure::from_flat(d, centers.clone(), vec![unit; n])?;
    if nu.len() != n {
        return Err(Error::Construction("base cube centers collided".into()));
    }
    Ok(RandomCantorRealization { layout: layout.clone(), shifts, base_centers: centers, nu, mu })
}

fn fill<R: Rng>(
    layout: &CantorLayout,
    grids: &[Vec<Vec<f64>>],
    k: usize,
    origin: &[f64],
    rng: &mut R,
    shifts: &mut [Vec<f64>],
    out: &mut Vec<f64>,
) {
    let d = layout.d;
    if k == layout.levels() {
        out.extend_from_slice(origin);
        return;
    }
    let q = layout.ell[layout.j[k]] / 5.0;
    let mut shifted = vec![0.0; d];
    let mut sub = vec![0.0; d];
    for eps in 0..1usize << d {
        for a in 0..d {
            let v: f64 = rng.gen_range(-0.05..0.05);
            shifts[k].push(v);
            let sign = if eps >> a & 1 == 1 { 1.0 } else { -1.0 };
            shifted[a] = origin[a] + q * (sign + v);
        }
        for x in &grids[k] {
            for a in 0..d {
                sub[a] = shifted[a] + x[a];
            }
            fill(layout, grids, k + 1, &sub, rng, shifts, out);
        }
    }
}

/// Checks containment in the level cubes and the separation of the `2^d`
/// copies of every `F_k`, using bounding boxes of the base cubes.
pub fn verify_realization(r: &RandomCantorRealization) -> Result<()> {
    let lay = &r.layout;
    let d = lay.d;
    let half_base = 0.5 * lay.ell[lay.n];
    let bbox = |range: std::ops::Range<usize>| {
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in range {
            let c = r.center(i);
            for a in 0..d {
                lo[a] = lo[a].min(c[a] - half_base);
                hi[a] = hi[a].max(c[a] + half_base);
            }
        }
        (lo, hi)
    };
    let n = lay.base_count();
    let (lo, hi) = bbox(0..n);
    let tol = 1e-12 * lay.ell[0];
    for a in 0..d {
        if lo[a] < -0.5 * lay.ell[0] - tol || hi[a] > 0.5 * lay.ell[0] + tol {
            return Err(Error::Construction("E leaves the cube of edge ℓ_0".into()));
        }
    }
    for k in 0..lay.levels() {
        let e = lay.block_len(k);
        let f = e >> d;
        let ell = lay.ell[lay.j[k]];
        for start in (0..n).step_by(e) {
            let boxes: Vec<_> = (0..1usize << d).map(|b| bbox(start + b * f..start + (b + 1) * f)).collect();
            let (elo, ehi) = bbox(start..start + e);
            if (0..d).any(|a| ehi[a] - elo[a] > ell * (1.0 + 1e-12)) {
                return Err(Error::Construction(format!("a copy of E_{k} is wider than ℓ_{}", lay.j[k])));
            }
            for p in 0..boxes.len() {
                for q in p + 1..boxes.len() {
                    let gap = (0..d)
                        .map(|a| (boxes[q].0[a] - boxes[p].1[a]).max(boxes[p].0[a] - boxes[q].1[a]))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if gap < ell / 10.0 * (1.0 - 1e-12) {
                        return Err(Error::Construction(format!(
                            "copies of F_{k} only {gap:.3e} apart, need ℓ/10 = {:.3e}",
                            ell / 10.0
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
