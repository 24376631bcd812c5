//! Point-mass measures, uniform cube measures, corner Cantor measures,
//! dyadic Frostman measures and mesh discretization.

pub mod cantor;
pub mod cubes;
pub mod discrete;
pub mod discretize;
pub mod frostman;
pub mod geometry;

pub use cantor::{build_cantor, CantorMeasure, CantorSpec};
pub use cubes::{BallProfile, CubeMeasure};
pub use discrete::{AtomRecord, DiscreteMeasure};
pub use discretize::{discretize_measure, Discretization, MeshSource};
pub use frostman::frostman_measure;

/// Borrowed view of any measure supporting ball-mass queries.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    Atoms(&'a DiscreteMeasure),
    Cubes(&'a CubeMeasure),
    Cantor(&'a CantorMeasure),
}

impl MeasureRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            MeasureRef::Atoms(m) => m.dim(),
            MeasureRef::Cubes(m) => m.dim(),
            MeasureRef::Cantor(m) => m.dim(),
        }
    }

    /// `|μ|(B(x, r))` for the open ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        match self {
            MeasureRef::Atoms(m) => m.ball_mass(x, r),
            MeasureRef::Cubes(m) => m.ball_mass(x, r),
            MeasureRef::Cantor(m) => m.ball_mass(x, r),
        }
    }

    pub fn total_variation(&self) -> f64 {
        match self {
            MeasureRef::Atoms(m) => m.total_variation(),
            MeasureRef::Cubes(m) => m.total_variation(),
            MeasureRef::Cantor(m) => m.total_mass(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            MeasureRef::Atoms(m) => m.is_nonnegative(),
            MeasureRef::Cubes(m) => m.is_nonnegative(),
            MeasureRef::Cantor(_) => true,
        }
    }
}
