use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Relative distance (to the bounding-box diameter) below which atoms merge.
pub const MERGE_TOL: f64 = 1e-12;

/// Finite signed combination of point masses in ℝ^d.
///
/// Coordinates are stored flat with stride `d`. Atom locations are pairwise
/// distinct: atoms closer than `MERGE_TOL` times the configuration scale are
/// merged on construction, and atoms whose merged weight is exactly zero are
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    d: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

/// One atom in the JSON exchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub x: Vec<f64>,
    pub w: f64,
}

impl DiscreteMeasure {
    pub fn new(d: usize, points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::arg("weights", "one weight per point required"));
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(d, coords, weights.to_vec())
    }

    pub fn from_flat(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("d", "dimension must be positive"));
        }
        if coords.len() != weights.len() * d {
            return Err(Error::DimensionMismatch { expected: weights.len() * d, got: coords.len() });
        }
        if !coords.iter().chain(&weights).all(|v| v.is_finite()) {
            return Err(Error::arg("atoms", "coordinates and weights must be finite"));
        }
        let (coords, weights) = merge(d, &coords, &weights);
        Ok(Self { d, coords, weights })
    }

    /// A single atom.
    pub fn dirac(x: &[f64], w: f64) -> Result<Self> {
        Self::from_flat(x.len(), x.to_vec(), vec![w])
    }

    pub fn from_records(d: usize, atoms: &[AtomRecord]) -> Result<Self> {
        let pts: Vec<Vec<f64>> = atoms.iter().map(|a| a.x.clone()).collect();
        let ws: Vec<f64> = atoms.iter().map(|a| a.w).collect();
        Self::new(d, &pts, &ws)
    }

    pub fn to_records(&self) -> Vec<AtomRecord> {
        (0..self.len()).map(|i| AtomRecord { x: self.point(i).to_vec(), w: self.weights[i] }).collect()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// `‖ν‖ = Σ|w_j|`.
    pub fn total_variation(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w.abs()))
    }

    /// `|ν|(B(x, r))` for the open ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        compensated_sum(
            (0..self.len())
                .filter(|&i| dist2(self.point(i), x) < r2)
                .map(|i| self.weights[i].abs()),
        )
    }

    /// Distances from `x` to every atom, paired with `|w|`, sorted ascending.
    pub fn sorted_distances(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> =
            (0..self.len()).map(|i| (dist2(self.point(i), x).sqrt(), self.weights[i].abs())).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    /// Scales all weights by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_flat(self.d, self.coords.clone(), self.weights.iter().map(|w| w * c).collect())
    }

    /// Applies `x ↦ λx + b` to every atom.
    pub fn mapped(&self, lambda: f64, shift: &[f64]) -> Result<Self> {
        let coords = self
            .coords
            .chunks(self.d)
            .flat_map(|p| p.iter().zip(shift).map(|(x, b)| lambda * x + b).collect::<Vec<_>>())
            .collect();
        Self::from_flat(self.d, coords, self.weights.clone())
    }

    /// Smallest distance between two distinct atoms (`∞` for fewer than two).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.min(dist2(self.point(i), self.point(j)));
            }
        }
        best.sqrt()
    }

    /// Diameter of the atom set.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.max(dist2(self.point(i), self.point(j)));
            }
        }
        best.sqrt()
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn merge(d: usize, coords: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in coords.chunks(d) {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let diam = dist2(&lo, &hi).sqrt();
    let scale = if diam > 0.0 { diam } else { lo.iter().map(|v| v.abs()).fold(1.0, f64::max) };
    let tol = MERGE_TOL * scale;
    // Grid of cell size `tol`: near neighbours live in adjacent cells.
    let mut grid: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    let mut out_c: Vec<f64> = Vec::with_capacity(coords.len());
    let mut out_w: Vec<Vec<f64>> = Vec::with_capacity(n);
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / tol).floor() as i64).collect() };
    let neighbours: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for (p, &w) in coords.chunks(d).zip(weights) {
        let k = key(p);
        let mut found = None;
        'search: for off in &neighbours {
            let kk: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&kk) {
                for &j in list {
                    if dist2(&out_c[j * d..(j + 1) * d], p) <= tol * tol {
                        found = Some(j);
                        break 'search;
                    }
                }
            }
        }
        match found {
            Some(j) => out_w[j].push(w),
            None => {
                let j = out_w.len();
                out_c.extend_from_slice(p);
                out_w.push(vec![w]);
                grid.entry(k).or_default().push(j);
            }
        }
    }
    let mut coords = Vec::with_capacity(out_c.len());
    let mut weights = Vec::with_capacity(out_w.len());
    for (j, ws) in out_w.iter().enumerate() {
        let w = compensated_sum(ws.iter().copied());
        if w != 0.0 {
            coords.extend_from_slice(&out_c[j * d..(j + 1) * d]);
            weights.push(w);
        }
    }
    (coords, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_ball_mass() {
        let m = DiscreteMeasure::dirac(&[0.0], 1.0).unwrap();
        assert_eq!(m.ball_mass(&[0.0], 0.5), 1.0);
        assert_eq!(m.ball_mass(&[0.5], 0.5), 0.0);
    }

    #[test]
    fn coincident_atoms_merge() {
        let m = DiscreteMeasure::new(
            2,
            &[vec![0.0, 0.0], vec![1e-14, 0.0], vec![1.0, 1.0]],
            &[1.0, 2.0, -1.0],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[3.0, -1.0]);
        assert_eq!(m.total_variation(), 4.0);
        let z = DiscreteMeasure::new(1, &[vec![0.0], vec![0.0]], &[1.0, -1.0]).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn ball_mass_uses_variation() {
        let m = DiscreteMeasure::new(1, &[vec![0.0], vec![1.0]], &[1.0, -2.0]).unwrap();
        assert_eq!(m.ball_mass(&[0.5], 0.6), 3.0);
        assert_eq!(m.ball_mass(&[0.5], 0.5), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteMeasure::new(2, &[vec![0.0]], &[1.0]).is_err());
        assert!(DiscreteMeasure::new(1, &[vec![f64::NAN]], &[1.0]).is_err());
    }
}
