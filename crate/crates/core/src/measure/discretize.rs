use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::measure::cubes::CubeMeasure;
use crate::measure::discrete::DiscreteMeasure;
use crate::numeric::NeumaierSum;

/// A measure that can be pushed onto a mesh of cubes.
#[derive(Debug, Clone, Copy)]
pub enum MeshSource<'a> {
    Atoms(&'a DiscreteMeasure),
    Cubes(&'a CubeMeasure),
}

/// The mesh image `ν′` together with both total variations.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub measure: DiscreteMeasure,
    pub input_variation: f64,
    pub output_variation: f64,
}

/// Places the charge of each mesh cube `[k·mesh, (k+1)·mesh)^d` at its center.
///
/// Signed charges inside one cube can cancel, so `‖ν′‖ ≤ ‖ν‖` with equality
/// for nonnegative input; both are reported.
pub fn discretize_measure(source: MeshSource, mesh: f64) -> Result<Discretization> {
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::arg("mesh", format!("must be positive, got {mesh}")));
    }
    let mut charges: BTreeMap<Vec<i64>, NeumaierSum> = BTreeMap::new();
    let cell = |v: f64| -> Result<i64> {
        let k = (v / mesh).floor();
        if !k.is_finite() || k.abs() > 4e15 {
            return Err(Error::arg("density", "support is unbounded at this mesh"));
        }
        Ok(k as i64)
    };
    let (d, input_variation) = match source {
        MeshSource::Atoms(nu) => {
            for i in 0..nu.len() {
                let key = nu.point(i).iter().map(|&v| cell(v)).collect::<Result<Vec<_>>>()?;
                charges.entry(key).or_default().add(nu.weights()[i]);
            }
            (nu.dim(), nu.total_variation())
        }
        MeshSource::Cubes(mu) => {
            let d = mu.dim();
            for i in 0..mu.len() {
                let lo = mu.corner(i);
                let side = mu.side(i);
                let vol = side.powi(d as i32);
                let ranges: Vec<(i64, i64)> = lo
                    .iter()
                    .map(|&a| Ok((cell(a)?, cell(a + side)?)))
                    .collect::<Result<Vec<_>>>()?;
                let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
                loop {
                    let mut frac = 1.0;
                    for k in 0..d {
                        let (c0, c1) = (idx[k] as f64 * mesh, (idx[k] + 1) as f64 * mesh);
                        frac *= (c1.min(lo[k] + side) - c0.max(lo[k])).max(0.0);
                    }
                    if frac > 0.0 {
                        charges.entry(idx.clone()).or_default().add(mu.mass(i) * frac / vol);
                    }
                    // odometer over the index box
                    let mut k = 0;
                    while k < d {
                        idx[k] += 1;
                        if idx[k] <= ranges[k].1 {
                            break;
                        }
                        idx[k] = ranges[k].0;
                        k += 1;
                    }
                    if k == d {
                        break;
                    }
                }
            }
            (d, mu.total_variation())
        }
    };
    let mut coords = Vec::with_capacity(charges.len() * d);
    let mut weights = Vec::with_capacity(charges.len());
    for (key, w) in &charges {
        coords.extend(key.iter().map(|&k| (k as f64 + 0.5) * mesh));
        weights.push(w.value());
    }
    let measure = DiscreteMeasure::from_flat(d, coords, weights)?;
    let output_variation = measure.total_variation();
    Ok(Discretization { measure, input_variation, output_variation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_quarters() {
        let leb = CubeMeasure::uniform_interval(0.0, 1.0).unwrap();
        let out = discretize_measure(MeshSource::Cubes(&leb), 0.25).unwrap();
        let nu = &out.measure;
        assert_eq!(nu.len(), 4);
        for (i, c) in [0.125, 0.375, 0.625, 0.875].iter().enumerate() {
            assert_eq!(nu.point(i), &[*c]);
            assert_eq!(nu.weights()[i], 0.25);
        }
        assert_eq!(out.output_variation, 1.0);
    }

    #[test]
    fn atom_on_center_unchanged() {
        let nu = DiscreteMeasure::dirac(&[0.125, 0.375], 2.0).unwrap();
        let out = discretize_measure(MeshSource::Atoms(&nu), 0.25).unwrap();
        assert_eq!(out.measure, nu);
    }

    #[test]
    fn signed_density() {
        let mu = CubeMeasure::new(1, vec![0.0, 0.5], vec![0.5, 0.5], vec![0.5, -0.5]).unwrap();
        let out = discretize_measure(MeshSource::Cubes(&mu), 0.5).unwrap();
        assert_eq!(out.measure.point(0), &[0.25]);
        assert_eq!(out.measure.weights(), &[0.5, -0.5]);
        // a coarser mesh cancels the charges
        let out = discretize_measure(MeshSource::Cubes(&mu), 2.0).unwrap();
        assert!(out.measure.is_empty());
        assert_eq!(out.input_variation, 1.0);
        assert_eq!(out.output_variation, 0.0);
    }

    #[test]
    fn mass_preserved_2d() {
        let mu = CubeMeasure::new(2, vec![0.1, 0.2, 0.7, -0.3], vec![0.33, 0.21], vec![1.5, 0.7]).unwrap();
        let out = discretize_measure(MeshSource::Cubes(&mu), 0.07).unwrap();
        assert!((out.output_variation - 2.2).abs() < 1e-12);
    }
}
