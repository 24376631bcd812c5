//! Upper Cartan bound: content of `𝒵*(ν, P)` against `𝔐_h(‖ν‖/P, N)`, and
//! the `s ≥ d` bound for far-separated masses.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{covering_upper_bound, superlevel_cells, SuperlevelMode, Window};
use crate::error::{Error, Result};
use crate::gauge::{GaugeFunction, GaugeSpec};
use crate::measure::DiscreteMeasure;
use crate::mh::{power_gauge_mh, solve_mh, MhQuery};
use crate::riesz::RieszContext;

use super::random_cantor::{random_cantor_build, CantorLayout};
use super::trial_rng;

/// Content of a superlevel set computed window by window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowedContent {
    pub upper: f64,
    pub windows: usize,
    pub cells: usize,
    /// Finest cell side of the coarsest window.
    pub resolution: f64,
    /// Some window still had marked boundary cells after one enlargement.
    pub flagged: bool,
}

/// Groups atoms whose `radius`-neighborhoods overlap (sup norm), so each
/// group gets its own window.
fn clusters(nu: &DiscreteMeasure, radius: f64) -> Vec<Vec<usize>> {
    let d = nu.dim();
    let n = nu.len();
    let cell = 2.0 * radius;
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        grid.entry(key(nu.point(i))).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
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
    for i in 0..n {
        let k = key(nu.point(i));
        for off in &offsets {
            let kk: Vec<i64> = k.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&kk) {
                for &j in list {
                    if j <= i {
                        continue;
                    }
                    let close = (0..d).all(|a| (nu.point(i)[a] - nu.point(j)[a]).abs() < cell);
                    if close {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Dyadic covering cost of `{x : T(x) > P}` for the chosen transform.
///
/// Every mode is dominated by `Σ|w_j|/|y_j − x|^s ≤ ‖ν‖/dist(x, supp ν)^s`,
/// so the set lies within `(‖ν‖/P)^{1/s}` of the atoms. Atoms are grouped by
/// overlapping neighborhoods and each group is covered in its own cube
/// window; the window costs add up to an upper bound for the whole set.
pub fn superlevel_content(
    nu: &DiscreteMeasure,
    ctx: &RieszContext,
    p: f64,
    h: &GaugeFunction,
    depth: u32,
    mode: SuperlevelMode,
) -> Result<WindowedContent> {
    if nu.is_empty() {
        return Ok(WindowedContent { upper: 0.0, windows: 0, cells: 0, resolution: 0.0, flagged: false });
    }
    let d = ctx.d;
    let reach = (nu.total_variation() / p).powf(1.0 / ctx.s);
    let mut upper = 0.0;
    let mut cells = 0;
    let mut flagged = false;
    let mut resolution = 0.0f64;
    let groups = clusters(nu, reach);
    for g in &groups {
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in g {
            for a in 0..d {
                lo[a] = lo[a].min(nu.point(i)[a]);
                hi[a] = hi[a].max(nu.point(i)[a]);
            }
        }
        let extent = (0..d).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let mut side = (extent + 2.0 * reach) * (1.0 + 1.0 / 64.0);
        let mut attempt = 0;
        loop {
            let corner: Vec<f64> = (0..d).map(|a| 0.5 * (lo[a] + hi[a]) - 0.5 * side).collect();
            let set = superlevel_cells(nu, ctx, p, &Window { corner, side }, depth, mode)?;
            if set.touches_boundary() && attempt == 0 {
                side *= 2.0;
                attempt += 1;
                continue;
            }
            flagged |= set.touches_boundary();
            upper += covering_upper_bound(&set, h);
            cells += set.len();
            resolution = resolution.max(set.cell_side());
            break;
        }
    }
    Ok(WindowedContent { upper, windows: groups.len(), cells, resolution, flagged })
}

/// `𝔐_h(κ, N)`, in closed form for power gauges.
pub fn critical_size(h: &GaugeFunction, s: f64, kappa: f64, n: f64) -> Result<f64> {
    match h.power_exponent() {
        Some(beta) => power_gauge_mh(beta, s, kappa, n),
        None => Ok(solve_mh(&MhQuery::new(h, s, kappa, n)?, 1e-10)?.m),
    }
}

/// Families of random discrete measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Atoms uniform in the unit cube, random signs.
    Uniform,
    /// Atoms in `⌈√N⌉` small clumps, random signs.
    Clustered,
    /// Equal positive masses at the base cubes of a random Cantor set.
    RandomCantor,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Clustered => "clustered",
            Family::RandomCantor => "random_cantor",
        }
    }
}

/// One `(ν, P)` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperCase {
    pub family: Family,
    pub d: usize,
    pub s: f64,
    pub gauge: GaugeSpec,
    pub atoms: usize,
    /// `P = ‖ν‖ / r0^s`: a single atom of mass `‖ν‖` would give radius `r0`.
    pub r0: f64,
    pub depth: u32,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperRecord {
    pub family: Family,
    pub d: usize,
    pub s: f64,
    pub gauge: String,
    pub atoms: usize,
    pub p: f64,
    pub norm: f64,
    pub content_upper: f64,
    /// `𝔐_h(‖ν‖/P, N)`, or `𝔐_h(‖ν‖/P, ∞)` when requested.
    pub mh: f64,
    pub ratio: f64,
    pub windows: usize,
    pub cells: usize,
    pub flagged: bool,
}

/// Draws `ν` for a case, with `‖ν‖ = 1`.
pub fn sample_measure(case: &UpperCase, seed: u64) -> Result<DiscreteMeasure> {
    let d = case.d;
    let n = case.atoms;
    let mut rng = trial_rng(seed, case.stream);
    let signed = |rng: &mut rand_chacha::ChaCha8Rng| {
        let m: f64 = rng.gen_range(0.5..1.5);
        if rng.gen_bool(0.5) { m } else { -m }
    };
    let (coords, mut weights): (Vec<f64>, Vec<f64>) = match case.family {
        Family::Uniform => {
            let mut c = Vec::with_capacity(n * d);
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                for _ in 0..d {
                    c.push(rng.gen::<f64>());
                }
                w.push(signed(&mut rng));
            }
            (c, w)
        }
        Family::Clustered => {
            let k = ((n as f64).sqrt().ceil() as usize).max(1);
            let centers: Vec<f64> = (0..k * d).map(|_| rng.gen::<f64>()).collect();
            let mut c = Vec::with_capacity(n * d);
            let mut w = Vec::with_capacity(n);
            for _ in 0..n {
                let j = rng.gen_range(0..k);
                for a in 0..d {
                    c.push(centers[j * d + a] + rng.gen_range(-0.01..0.01));
                }
                w.push(signed(&mut rng));
            }
            (c, w)
        }
        Family::RandomCantor => {
            let h = case.gauge.build(d)?;
            let levels = (n as f64).log2() / d as f64;
            if levels.fract() != 0.0 || levels < 1.0 {
                return Err(Error::arg("N", format!("random Cantor family needs N = 2^(nd), got {n}")));
            }
            let p = 1.0 / case.r0.powf(case.s);
            let m = critical_size(&h, case.s, 1.0 / p, n as f64)?;
            let layout = CantorLayout::new(&h, case.s, m, levels as usize, 1.0)?;
            let r = random_cantor_build(&layout, &mut rng)?;
            (r.base_centers, r.nu.weights().to_vec())
        }
    };
    let total: f64 = weights.iter().map(|w| w.abs()).sum();
    for w in &mut weights {
        *w /= total;
    }
    DiscreteMeasure::from_flat(d, coords, weights)
}

pub fn run_upper_case(case: &UpperCase, seed: u64, unbounded: bool) -> Result<UpperRecord> {
    let h = case.gauge.build(case.d)?;
    let ctx = RieszContext::new(case.s, case.d)?;
    let nu = sample_measure(case, seed)?;
    let norm = nu.total_variation();
    let p = norm / case.r0.powf(case.s);
    let content = superlevel_content(&nu, &ctx, p, &h, case.depth, SuperlevelMode::Maximal)?;
    // a single atom has 𝒵* = B(y, (‖ν‖/P)^{1/s}), priced at h of that radius
    let mh = if unbounded {
        critical_size(&h, case.s, norm / p, f64::INFINITY)?
    } else if nu.len() == 1 {
        h.eval((norm / p).powf(1.0 / case.s))
    } else {
        critical_size(&h, case.s, norm / p, case.atoms as f64)?
    };
    Ok(UpperRecord {
        family: case.family,
        d: case.d,
        s: case.s,
        gauge: h.id(),
        atoms: case.atoms,
        p,
        norm,
        content_upper: content.upper,
        mh,
        ratio: content.upper / mh,
        windows: content.windows,
        cells: content.cells,
        flagged: content.flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpperConfig {
    #[serde(default)]
    pub seed: u64,
    /// Number of configurations drawn from the grid below.
    #[serde(default = "default_configs")]
    pub configs: usize,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    /// `(d, s, depth)` triples.
    #[serde(default = "default_dims")]
    pub dims: Vec<(usize, f64, u32)>,
    /// Gauge exponents as fractions of the way from `s/2` to `d`.
    #[serde(default = "default_betas")]
    pub beta_fractions: Vec<f64>,
    /// Numbers of atoms; per dimension the nearest power of `2^d` is used.
    #[serde(default = "default_atoms")]
    pub atoms: Vec<usize>,
    #[serde(default = "default_r0")]
    pub r0: Vec<f64>,
    /// Use `𝔐_h(‖ν‖/P, ∞)` in the denominator.
    #[serde(default)]
    pub unbounded: bool,
}

fn default_configs() -> usize {
    100
}
fn default_families() -> Vec<Family> {
    vec![Family::Uniform, Family::Clustered, Family::RandomCantor]
}
fn default_dims() -> Vec<(usize, f64, u32)> {
    vec![(1, 0.5, 14), (2, 1.0, 8)]
}
fn default_betas() -> Vec<f64> {
    vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]
}
fn default_atoms() -> Vec<usize> {
    vec![4, 16, 64, 256]
}
fn default_r0() -> Vec<f64> {
    vec![0.05, 0.2]
}

impl Default for UpperConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            configs: default_configs(),
            families: default_families(),
            dims: default_dims(),
            beta_fractions: default_betas(),
            atoms: default_atoms(),
            r0: default_r0(),
            unbounded: false,
        }
    }
}

/// Rounds `n` to a power of `2^d` (at least `2^d`).
fn cantor_count(n: usize, d: usize) -> usize {
    let levels = ((n as f64).log2() / d as f64).round().max(1.0) as usize;
    1 << (levels * d)
}

impl UpperConfig {
    /// The first `configs` cases of the grid, walked so that consecutive
    /// cases differ in family, then dimension, then exponent.
    pub fn cases(&self) -> Vec<UpperCase> {
        let mut out = Vec::new();
        let total = self.families.len() * self.dims.len() * self.beta_fractions.len() * self.atoms.len();
        let mut i = 0usize;
        while out.len() < self.configs && total > 0 {
            let mut r = i % total;
            let family = self.families[r % self.families.len()];
            r /= self.families.len();
            let (d, s, depth) = self.dims[r % self.dims.len()];
            r /= self.dims.len();
            let frac = self.beta_fractions[r % self.beta_fractions.len()];
            r /= self.beta_fractions.len();
            let mut atoms = self.atoms[r % self.atoms.len()];
            if family == Family::RandomCantor {
                atoms = cantor_count(atoms, d);
            }
            let r0 = self.r0[(i / total + i) % self.r0.len()];
            let beta = 0.5 * s + frac * (d as f64 - 0.5 * s);
            out.push(UpperCase {
                family,
                d,
                s,
                gauge: GaugeSpec::Power { beta },
                atoms,
                r0,
                depth,
                stream: i as u64,
            });
            i += 1;
        }
        out
    }
}

/// Runs every case; `C_fit` is the largest ratio.
pub fn cartan_upper_experiment(cfg: &UpperConfig) -> Result<Vec<UpperRecord>> {
    cfg.cases().par_iter().map(|c| run_upper_case(c, cfg.seed, cfg.unbounded)).collect()
}

/// Content of `𝒵*` for random Cantor measures at the critical exponent
/// `β = s`, averaged over `reps` draws, for each `N`.
pub fn critical_trend(d: usize, s: f64, ns: &[usize], reps: usize, depth: u32, seed: u64) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| {
            let total: f64 = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let case = UpperCase {
                        family: Family::RandomCantor,
                        d,
                        s,
                        gauge: GaugeSpec::Power { beta: s },
                        atoms: n,
                        r0: 1.0,
                        depth,
                        stream: (n * 1000 + r) as u64,
                    };
                    run_upper_case(&case, seed, false).map(|rec| rec.content_upper)
                })
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            Ok((n, total / reps as f64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LargeSConfig {
    pub gauge: GaugeSpec,
    pub s: f64,
    #[serde(default = "one_dim")]
    pub d: usize,
    pub atoms: Vec<usize>,
    #[serde(default = "unit")]
    pub p: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_depth")]
    pub depth: u32,
}

fn one_dim() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    1e6
}
fn default_depth() -> u32 {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeSRecord {
    pub s: f64,
    pub atoms: usize,
    pub p: f64,
    pub content_upper: f64,
    /// `N h((‖ν‖/(PN))^{1/s})`.
    pub bound: f64,
    pub ratio: f64,
    pub flagged: bool,
}

/// Unit masses spaced `separation` apart along the first axis.
pub fn large_s_experiment(cfg: &LargeSConfig) -> Result<Vec<LargeSRecord>> {
    let h = cfg.gauge.build(cfg.d)?;
    let ctx = RieszContext::new(cfg.s, cfg.d)?;
    if cfg.s < cfg.d as f64 {
        return Err(Error::arg("s", format!("this experiment needs s ≥ d, got {}", cfg.s)));
    }
    if !(cfg.p > 0.0) {
        return Err(Error::arg("P", "must be positive"));
    }
    cfg.atoms
        .iter()
        .map(|&n| {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut x = vec![0.0; cfg.d];
                    x[0] = i as f64 * cfg.separation;
                    x
                })
                .collect();
            let nu = DiscreteMeasure::new(cfg.d, &pts, &vec![1.0; n])?;
            let norm = nu.total_variation();
            let c = superlevel_content(&nu, &ctx, cfg.p, &h, cfg.depth, SuperlevelMode::Maximal)?;
            let bound = n as f64 * h.eval((norm / (cfg.p * n as f64)).powf(1.0 / cfg.s));
            Ok(LargeSRecord {
                s: cfg.s,
                atoms: n,
                p: cfg.p,
                content_upper: c.upper,
                bound,
                ratio: c.upper / bound,
                flagged: c.flagged,
            })
        })
        .collect()
}
