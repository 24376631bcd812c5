use crate::error::{Error, Result};
use crate::measure::discrete::DiscreteMeasure;
use crate::measure::geometry::{ball_box_volume, box_dist2, box_far2};
use crate::numeric::compensated_sum;

/// A finite sum of uniform densities on axis-parallel cubes.
///
/// Cube `i` has lower corner `corner(i)`, edge `side(i)` and carries `mass(i)`
/// spread uniformly. Masses may be signed; ball masses use `|mass|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeMeasure {
    d: usize,
    corners: Vec<f64>,
    sides: Vec<f64>,
    masses: Vec<f64>,
}

impl CubeMeasure {
    pub fn new(d: usize, corners: Vec<f64>, sides: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("d", "dimension must be positive"));
        }
        if sides.len() != masses.len() || corners.len() != d * sides.len() {
            return Err(Error::DimensionMismatch { expected: d * sides.len(), got: corners.len() });
        }
        if !sides.iter().all(|&l| l > 0.0 && l.is_finite()) {
            return Err(Error::arg("sides", "cube edges must be positive and finite"));
        }
        if !corners.iter().chain(&masses).all(|v| v.is_finite()) {
            return Err(Error::arg("cubes", "corners and masses must be finite"));
        }
        Ok(Self { d, corners, sides, masses })
    }

    /// Lebesgue measure on `[a, b]` (d = 1) as one cube.
    pub fn uniform_interval(a: f64, b: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::arg("interval", format!("need a < b, got [{a}, {b}]")));
        }
        Self::new(1, vec![a], vec![b - a], vec![b - a])
    }

    /// Uniform probability-free measure on a single cube with given mass.
    pub fn uniform_cube(corner: &[f64], side: f64, mass: f64) -> Result<Self> {
        Self::new(corner.len(), corner.to_vec(), vec![side], vec![mass])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    pub fn corner(&self, i: usize) -> &[f64] {
        &self.corners[i * self.d..(i + 1) * self.d]
    }

    pub fn side(&self, i: usize) -> f64 {
        self.sides[i]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn upper(&self, i: usize) -> Vec<f64> {
        self.corner(i).iter().map(|c| c + self.sides[i]).collect()
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        self.corner(i).iter().map(|c| c + 0.5 * self.sides[i]).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.masses.iter().all(|&m| m >= 0.0)
    }

    /// `Σ|mass_i|`, the total variation when cubes are disjoint.
    pub fn total_variation(&self) -> f64 {
        compensated_sum(self.masses.iter().map(|m| m.abs()))
    }

    /// `|μ|(B(x, r))` for the open ball, exact up to rounding in d ≤ 2.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        let d = self.d as i32;
        compensated_sum((0..self.len()).map(|i| {
            let lo = self.corner(i);
            let hi = self.upper(i);
            if box_dist2(x, lo, &hi) >= r2 {
                0.0
            } else if box_far2(x, lo, &hi) <= r2 {
                self.masses[i].abs()
            } else {
                self.masses[i].abs() * ball_box_volume(x, r, lo, &hi) / self.sides[i].powi(d)
            }
        }))
    }

    /// `r ↦ |μ|(B(x, r))` with the cube distances from `x` precomputed, for
    /// repeated evaluation at one center. Agrees with [`Self::ball_mass`].
    pub fn ball_profile(&self, x: &[f64]) -> BallProfile {
        let mut by_far: Vec<(f64, f64)> = Vec::with_capacity(self.len());
        let mut partial = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let lo = self.corner(i);
            let hi = self.upper(i);
            let (near2, far2) = (box_dist2(x, lo, &hi), box_far2(x, lo, &hi));
            let m = self.masses[i].abs();
            by_far.push((far2, m));
            partial.push(PartialCube { near2, far2, density: m / self.sides[i].powi(self.d as i32), lo: lo.to_vec(), hi });
        }
        by_far.sort_by(|a, b| a.0.total_cmp(&b.0));
        partial.sort_by(|a, b| a.near2.total_cmp(&b.near2));
        let mut acc = crate::numeric::NeumaierSum::new();
        let mut full = vec![0.0];
        for &(_, m) in &by_far {
            acc.add(m);
            full.push(acc.value());
        }
        BallProfile { x: x.to_vec(), far2: by_far.iter().map(|p| p.0).collect(), full, partial }
    }

    /// Radii at which `r ↦ μ(B(x, r))` changes its analytic form: distances
    /// to each cube's faces, edges and corners (and its nearest point).
    pub fn radius_breakpoints(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let lo = self.corner(i);
            let hi = self.upper(i);
            out.push(box_dist2(x, lo, &hi).sqrt());
            out.push(box_far2(x, lo, &hi).sqrt());
            // every combination of per-axis face offsets
            let offs: Vec<[f64; 2]> = (0..self.d).map(|k| [x[k] - lo[k], hi[k] - x[k]]).collect();
            let combos = 3usize.pow(self.d as u32);
            for c in 1..combos {
                let (mut s2, mut cc) = (0.0, c);
                for o in &offs {
                    match cc % 3 {
                        1 => s2 += o[0] * o[0],
                        2 => s2 += o[1] * o[1],
                        _ => {}
                    }
                    cc /= 3;
                }
                out.push(s2.sqrt());
            }
        }
        out.retain(|&r| r > 0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Upper bound on `|x − y|` for `y` in the support.
    pub fn farthest(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| box_far2(x, self.corner(i), &self.upper(i)))
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// One atom per cube, at its center, carrying its mass.
    pub fn atomized(&self) -> Result<DiscreteMeasure> {
        let coords = (0..self.len()).flat_map(|i| self.center(i)).collect();
        DiscreteMeasure::from_flat(self.d, coords, self.masses.clone())
    }

    /// Cube corners and centers, the points used to sample the support.
    pub fn support_samples(&self) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..self.len() {
            let lo = self.corner(i);
            for c in 0..(1usize << self.d) {
                pts.push(
                    (0..self.d)
                        .map(|k| lo[k] + if (c >> (self.d - 1 - k)) & 1 == 1 { self.sides[i] } else { 0.0 })
                        .collect(),
                );
            }
            pts.push(self.center(i));
        }
        pts.sort_by(|a, b| {
            a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        pts.dedup();
        pts
    }

    /// Image under `x ↦ λx + b` (masses unchanged).
    pub fn mapped(&self, lambda: f64, shift: &[f64]) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::arg("lambda", "dilation factor must be positive"));
        }
        let corners = self
            .corners
            .chunks(self.d)
            .flat_map(|p| p.iter().zip(shift).map(|(x, b)| lambda * x + b).collect::<Vec<_>>())
            .collect();
        Self::new(self.d, corners, self.sides.iter().map(|l| l * lambda).collect(), self.masses.clone())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.d, self.corners.clone(), self.sides.clone(), self.masses.iter().map(|m| m * c).collect())
    }
}

struct PartialCube {
    near2: f64,
    far2: f64,
    density: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Precomputed radial mass profile around one point; see
/// [`CubeMeasure::ball_profile`].
pub struct BallProfile {
    x: Vec<f64>,
    far2: Vec<f64>,
    /// `full[k]`: mass of the `k` cubes nearest by farthest point.
    full: Vec<f64>,
    partial: Vec<PartialCube>,
}

impl BallProfile {
    pub fn mass(&self, r: f64) -> f64 {
        let r2 = r * r;
        let inside = self.far2.partition_point(|&f| f <= r2);
        let mut acc = crate::numeric::NeumaierSum::new();
        acc.add(self.full[inside]);
        for c in &self.partial[..self.partial.partition_point(|c| c.near2 < r2)] {
            if c.far2 > r2 {
                acc.add(c.density * ball_box_volume(&self.x, r, &c.lo, &c.hi));
            }
        }
        acc.value()
    }
}
