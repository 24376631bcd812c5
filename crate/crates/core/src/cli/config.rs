//! Shared configuration pieces: flag values, measure descriptions, CSV output.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::experiment::trial_rng;
use crate::measure::{build_cantor, CantorMeasure, CantorSpec, CubeMeasure, DiscreteMeasure, MeasureRef};

/// Parses a flag value as a TOML value, then as JSON, else keeps it as a string.
pub fn parse_value(raw: &str) -> toml::Value {
    if let Ok(mut t) = toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        if let Some(v) = t.remove("v") {
            return v;
        }
    }
    if let Ok(j) = serde_json::from_str::<serde_json::Value>(raw) {
        if let Ok(v) = toml::Value::try_from(j) {
            return v;
        }
    }
    toml::Value::String(raw.to_string())
}

/// Accepts a scalar or a list.
pub fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match Either::deserialize(d)? {
        Either::One(x) => vec![x],
        Either::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// `density` times Lebesgue measure on `[a, b]`.
    Interval {
        a: f64,
        b: f64,
        #[serde(default = "unit")]
        density: f64,
    },
    Cube {
        corner: Vec<f64>,
        side: f64,
        #[serde(default = "unit")]
        mass: f64,
    },
    /// Normalized corner Cantor measure with `ℓ_k = ratio^k`.
    Cantor {
        d: usize,
        ratio: f64,
        depth: usize,
    },
    /// Atoms uniform in `[lo, hi]^d` with masses in `[0.5, 1.5)`, drawn from
    /// stream `stream` of the run seed.
    Random {
        d: usize,
        atoms: usize,
        #[serde(default)]
        lo: f64,
        #[serde(default = "unit")]
        hi: f64,
        #[serde(default)]
        signed: bool,
        #[serde(default)]
        stream: u64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub enum OwnedMeasure {
    Atoms(DiscreteMeasure),
    Cubes(CubeMeasure),
    Cantor(CantorMeasure),
}

impl OwnedMeasure {
    pub fn as_ref(&self) -> MeasureRef<'_> {
        match self {
            OwnedMeasure::Atoms(m) => MeasureRef::Atoms(m),
            OwnedMeasure::Cubes(m) => MeasureRef::Cubes(m),
            OwnedMeasure::Cantor(m) => MeasureRef::Cantor(m),
        }
    }

    /// Atomic surrogate: cubes collapse to their centers.
    pub fn discrete(&self) -> Result<DiscreteMeasure> {
        match self {
            OwnedMeasure::Atoms(m) => Ok(m.clone()),
            OwnedMeasure::Cubes(m) => m.atomized(),
            OwnedMeasure::Cantor(m) => Ok(m.atomized()),
        }
    }
}

impl MeasureSpec {
    pub fn build(&self, s: f64, seed: u64) -> Result<OwnedMeasure> {
        Ok(match self {
            MeasureSpec::Atoms { points, weights } => {
                let d = points.first().map_or(0, Vec::len);
                OwnedMeasure::Atoms(DiscreteMeasure::new(d, points, weights)?)
            }
            MeasureSpec::Interval { a, b, density } => {
                OwnedMeasure::Cubes(CubeMeasure::uniform_interval(*a, *b)?.scaled(*density)?)
            }
            MeasureSpec::Cube { corner, side, mass } => {
                OwnedMeasure::Cubes(CubeMeasure::uniform_cube(corner, *side, *mass)?)
            }
            MeasureSpec::Cantor { d, ratio, depth } => {
                OwnedMeasure::Cantor(build_cantor(&CantorSpec::geometric(*d, *ratio, *depth)?, s)?)
            }
            MeasureSpec::Random { d, atoms, lo, hi, signed, stream } => {
                if !(hi > lo) {
                    return Err(Error::Config(format!("random measure needs lo < hi, got [{lo}, {hi}]")));
                }
                let mut rng = trial_rng(seed, *stream);
                let mut coords = Vec::with_capacity(d * atoms);
                let mut weights = Vec::with_capacity(*atoms);
                for _ in 0..*atoms {
                    coords.extend((0..*d).map(|_| rng.gen_range(*lo..*hi)));
                    let m: f64 = rng.gen_range(0.5..1.5);
                    weights.push(if *signed && rng.gen_bool(0.5) { -m } else { m });
                }
                OwnedMeasure::Atoms(DiscreteMeasure::from_flat(*d, coords, weights)?)
            }
        })
    }
}

/// 17 significant digits, `inf`/`-inf`/`nan` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV text built in memory with a fixed header.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).map_err(io)?;
        Ok(Self { writer })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.writer.write_record(fields.iter().map(|f| f.as_ref())).map_err(io)
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

fn io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
