//! Monte Carlo check of the lower Cartan bound on random Cantor sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{content_bracket, superlevel_cells, ContentBracket, DyadicCellSet, SuperlevelMode, Window};
use crate::error::{Error, Result};
use crate::gauge::{GaugeFunction, GaugeSpec};
use crate::measure::DiscreteMeasure;
use crate::numeric::NeumaierSum;
use crate::riesz::RieszContext;

use super::random_cantor::{random_cantor_build, verify_realization, CantorLayout, RandomCantorRealization};
use super::trial_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerConfig {
    pub gauge: GaugeSpec,
    pub s: f64,
    pub d: usize,
    pub n: usize,
    /// Target content scale `M`.
    #[serde(default = "one")]
    pub m_scale: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of steps of the `δ` grid on `(0, 1]`.
    #[serde(default = "default_grid")]
    pub delta_grid: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Base cubes at which the block potentials `ξ_k` are recorded.
    #[serde(default = "default_stat_points")]
    pub stat_points: usize,
}

fn one() -> f64 {
    1.0
}
fn default_trials() -> usize {
    4096
}
fn default_grid() -> usize {
    256
}
fn default_batches() -> usize {
    16
}
fn default_stat_points() -> usize {
    8
}

impl LowerConfig {
    pub fn new(gauge: GaugeSpec, s: f64, d: usize, n: usize) -> Self {
        Self {
            gauge,
            s,
            d,
            n,
            m_scale: 1.0,
            eta: 1.0,
            trials: default_trials(),
            seed: 0,
            delta_grid: default_grid(),
            batches: default_batches(),
            stat_points: default_stat_points(),
        }
    }
}

/// Empirical size of the block potentials `ξ_k` at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStat {
    pub k: usize,
    pub j: usize,
    pub theta: f64,
    /// `max |ξ_k|` over trials and recorded points.
    pub max_abs: f64,
    /// Smallest `Var ξ_k` over recorded points.
    pub min_var: f64,
    pub max_abs_ratio: f64,
    pub var_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerReport {
    pub delta_star: f64,
    /// Crossing of `F(δ) = δ` by linear interpolation on the grid.
    pub delta_crossing: f64,
    /// Batch-means 95% interval for the crossing.
    pub ci_low: f64,
    pub ci_high: f64,
    pub content_lower: f64,
    pub content: Option<ContentBracket>,
    pub m_scale: f64,
    pub levels: usize,
    pub j: Vec<usize>,
    /// `(Σ θ_{j_k}²)^{1/2}`.
    pub theta_norm: f64,
    pub median_trial: usize,
    pub selected: usize,
    pub base_cubes: usize,
    pub trials: usize,
    pub level_stats: Vec<LevelStat>,
    /// `max_k max|ξ_k|/θ_{j_k}`.
    pub c_upper: f64,
    /// `min_k Var ξ_k/θ_{j_k}²`.
    pub c_lower: f64,
    /// `F(δ)` on the grid: the median over trials of the mass fraction above
    /// `δ (Σθ²)^{1/2}`.
    pub fraction_curve: Vec<f64>,
}

/// `R_ν(x_i)` at every atom, each atom's own mass left out.
///
/// Pairs are visited once and both ends updated, which halves the work.
pub fn self_excluded_transform(centers: &[f64], weights: &[f64], ctx: &RieszContext) -> Vec<Vec<f64>> {
    let d = ctx.d;
    let n = weights.len();
    let mut acc = vec![NeumaierSum::new(); n * d];
    let mut u = vec![0.0; d];
    for i in 0..n {
        let xi = &centers[i * d..(i + 1) * d];
        for j in i + 1..n {
            let xj = &centers[j * d..(j + 1) * d];
            let mut r2 = 0.0;
            for a in 0..d {
                u[a] = xj[a] - xi[a];
                r2 += u[a] * u[a];
            }
            let k = ctx.kernel_scale(r2);
            for a in 0..d {
                acc[i * d + a].add(weights[j] * k * u[a]);
                acc[j * d + a].add(-weights[i] * k * u[a]);
            }
        }
    }
    (0..n).map(|i| (0..d).map(|a| acc[i * d + a].value()).collect()).collect()
}

fn block_potential(r: &RandomCantorRealization, ctx: &RieszContext, i: usize, range: std::ops::Range<usize>) -> Vec<f64> {
    let d = ctx.d;
    let x = r.center(i);
    let w = r.nu.weights();
    let mut acc = vec![NeumaierSum::new(); d];
    for j in range {
        let y = r.center(j);
        let r2: f64 = (0..d).map(|a| (y[a] - x[a]).powi(2)).sum();
        let k = ctx.kernel_scale(r2) * w[j];
        for a in 0..d {
            acc[a].add(k * (y[a] - x[a]));
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

struct TrialOut {
    /// `|R_ν(x_i)| / (Σθ²)^{1/2}`, sorted.
    normalized: Vec<f64>,
    /// `xi[p][k]`: block potential at recorded point `p`, level `k`.
    xi: Vec<Vec<Vec<f64>>>,
}

fn run_trial(
    layout: &CantorLayout,
    ctx: &RieszContext,
    seed: u64,
    t: usize,
    stat_idx: &[usize],
) -> Result<(TrialOut, RandomCantorRealization)> {
    let mut rng = trial_rng(seed, t as u64);
    let r = random_cantor_build(layout, &mut rng)?;
    verify_realization(&r)?;
    let norm = layout.theta_sq_sum().sqrt();
    let values = self_excluded_transform(&r.base_centers, r.nu.weights(), ctx);
    let mut normalized: Vec<f64> =
        values.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt() / norm).collect();
    normalized.sort_by(f64::total_cmp);
    let xi = stat_idx
        .iter()
        .map(|&i| (0..layout.levels()).map(|k| block_potential(&r, ctx, i, layout.opposite_block(k, i))).collect())
        .collect();
    Ok((TrialOut { normalized, xi }, r))
}

fn fraction_at_least(sorted: &[f64], delta: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < delta);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Grid value and interpolated crossing of `F(δ) ≥ δ` for a set of trials.
fn crossing(curves: &[&Vec<f64>], grid: usize) -> (f64, f64, Vec<f64>) {
    let f: Vec<f64> = (0..grid)
        .map(|g| {
            let col: Vec<f64> = curves.iter().map(|c| c[g]).collect();
            super::median(&col)
        })
        .collect();
    let step = 1.0 / grid as f64;
    let last = (0..grid).rev().find(|&g| f[g] >= (g + 1) as f64 * step);
    match last {
        None => (0.0, 0.0, f),
        Some(g) => {
            let d0 = (g + 1) as f64 * step;
            let interp = if g + 1 < grid {
                let p0 = f[g] - d0;
                let p1 = f[g + 1] - (d0 + step);
                d0 + step * p0 / (p0 - p1)
            } else {
                d0
            };
            (d0, interp, f)
        }
    }
}

/// Monte Carlo estimate of `δ*` and the block-potential statistics.
pub fn cartan_lower_experiment(cfg: &LowerConfig) -> Result<LowerReport> {
    if cfg.trials < cfg.batches.max(2) {
        return Err(Error::arg("trials", format!("need at least {} trials", cfg.batches.max(2))));
    }
    if cfg.delta_grid < 2 || cfg.batches < 2 || cfg.stat_points == 0 {
        return Err(Error::arg("delta_grid", "grid, batches and stat_points must be positive"));
    }
    let h = cfg.gauge.build(cfg.d)?;
    let ctx = RieszContext::new(cfg.s, cfg.d)?;
    if !(cfg.s < cfg.d as f64) {
        return Err(Error::arg("s", "must be below d"));
    }
    let layout = CantorLayout::new(&h, cfg.s, cfg.m_scale, cfg.n, cfg.eta)?;
    let n = layout.base_count();
    let stat_idx: Vec<usize> = (0..cfg.stat_points.min(n)).map(|p| p * n / cfg.stat_points.min(n)).collect();
    let outs: Vec<TrialOut> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&layout, &ctx, cfg.seed, t, &stat_idx).map(|o| o.0))
        .collect::<Result<_>>()?;
    let grid = cfg.delta_grid;
    let curves: Vec<Vec<f64>> = outs
        .iter()
        .map(|o| (1..=grid).map(|g| fraction_at_least(&o.normalized, g as f64 / grid as f64)).collect())
        .collect();
    let all: Vec<&Vec<f64>> = curves.iter().collect();
    let (delta_star, delta_crossing, fraction_curve) = crossing(&all, grid);

    let per = cfg.trials / cfg.batches;
    let batch: Vec<f64> = (0..cfg.batches)
        .map(|b| crossing(&all[b * per..(b + 1) * per], grid).1)
        .collect();
    let bm = batch.iter().sum::<f64>() / batch.len() as f64;
    let bsd = (batch.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (batch.len() - 1) as f64).sqrt();
    let half = 1.96 * bsd / (batch.len() as f64).sqrt();

    let (level_stats, c_upper, c_lower) = level_statistics(&layout, &outs)?;

    // trial at the lower median of the mass fraction above δ*
    let mut order: Vec<(f64, usize)> =
        outs.iter().enumerate().map(|(t, o)| (fraction_at_least(&o.normalized, delta_star), t)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let median_trial = order[(order.len() - 1) / 2].1;
    let (content, selected) = if delta_star > 0.0 {
        let (_, r) = run_trial(&layout, &ctx, cfg.seed, median_trial, &[])?;
        let (cells, selected) = selected_cells(&r, &ctx, delta_star)?;
        (Some(content_bracket(&cells, &h)?), selected)
    } else {
        (None, 0)
    };
    Ok(LowerReport {
        delta_star,
        delta_crossing,
        ci_low: bm - half,
        ci_high: bm + half,
        content_lower: content.as_ref().map_or(0.0, |c| c.lower),
        content,
        m_scale: cfg.m_scale,
        levels: layout.levels(),
        j: layout.j.clone(),
        theta_norm: layout.theta_sq_sum().sqrt(),
        median_trial,
        selected,
        base_cubes: n,
        trials: cfg.trials,
        level_stats,
        c_upper,
        c_lower,
        fraction_curve,
    })
}

/// Base cubes (as dyadic cells at the base scale) where `|R_ν| ≥ δ (Σθ²)^{1/2}`.
fn selected_cells(r: &RandomCantorRealization, ctx: &RieszContext, delta: f64) -> Result<(DyadicCellSet, usize)> {
    let lay = &r.layout;
    let d = lay.d;
    let norm = lay.theta_sq_sum().sqrt();
    let values = self_excluded_transform(&r.base_centers, r.nu.weights(), ctx);
    let max_depth = (63 / d as u32).min(40);
    let depth = ((lay.ell[0] / lay.ell[lay.n]).log2().ceil().max(1.0) as u32).min(max_depth);
    let corner = vec![-0.5 * lay.ell[0]; d];
    let empty = DyadicCellSet::empty(&corner, lay.ell[0], depth)?;
    let mut codes = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if v.iter().map(|c| c * c).sum::<f64>().sqrt() >= delta * norm {
            if let Some(c) = empty.locate(r.center(i)) {
                codes.push(c);
            }
        }
    }
    let selected = codes.len();
    Ok((empty.with_codes(codes), selected))
}

fn level_statistics(layout: &CantorLayout, outs: &[TrialOut]) -> Result<(Vec<LevelStat>, f64, f64)> {
    let points = outs[0].xi.len();
    let trials = outs.len() as f64;
    let mut stats = Vec::with_capacity(layout.levels());
    let (mut c_upper, mut c_lower) = (0.0f64, f64::INFINITY);
    for k in 0..layout.levels() {
        let theta = layout.theta[k];
        let mut max_abs = 0.0f64;
        let mut min_var = f64::INFINITY;
        for p in 0..points {
            let d = outs[0].xi[p][k].len();
            let mut mean = vec![0.0; d];
            for o in outs {
                let v = &o.xi[p][k];
                max_abs = max_abs.max(v.iter().map(|c| c * c).sum::<f64>().sqrt());
                for a in 0..d {
                    mean[a] += v[a] / trials;
                }
            }
            let var = outs
                .iter()
                .map(|o| (0..d).map(|a| (o.xi[p][k][a] - mean[a]).powi(2)).sum::<f64>())
                .sum::<f64>()
                / (trials - 1.0);
            min_var = min_var.min(var);
        }
        if !(min_var > 0.0) {
            return Err(Error::Construction(format!("zero variance of ξ_{k}: the shifts have no effect")));
        }
        let st = LevelStat {
            k,
            j: layout.j[k],
            theta,
            max_abs,
            min_var,
            max_abs_ratio: max_abs / theta,
            var_ratio: min_var / (theta * theta),
        };
        c_upper = c_upper.max(st.max_abs_ratio);
        c_lower = c_lower.min(st.var_ratio);
        stats.push(st);
    }
    Ok((stats, c_upper, c_lower))
}

/// The case of all masses at one point: `𝒵(ν, P)` is the ball of radius
/// `(η/P)^{1/s}` and its content is `h((η/P)^{1/s})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnePointReport {
    pub closed_form: f64,
    pub radius: f64,
    pub bracket: ContentBracket,
    /// `lower ≤ h(r)` and `h(r) ≤ upper`, both up to one cell of slack.
    pub bracketed: bool,
}

pub fn one_point_case(
    h: &GaugeFunction,
    ctx: &RieszContext,
    masses: usize,
    eta: f64,
    p: f64,
    depth: u32,
) -> Result<OnePointReport> {
    if masses == 0 {
        return Err(Error::arg("N", "need at least one mass"));
    }
    let d = ctx.d;
    let origin = vec![0.0; d];
    let pts = vec![origin.clone(); masses];
    let nu = DiscreteMeasure::new(d, &pts, &vec![eta / masses as f64; masses])?;
    let radius = (eta / p).powf(1.0 / ctx.s);
    let window = Window::centered(&origin, 1.25 * radius);
    let cells = superlevel_cells(&nu, ctx, p, &window, depth, SuperlevelMode::Full)?;
    let bracket = content_bracket(&cells, h)?;
    let closed_form = h.eval(radius);
    let slack = h.eval(radius + cells.cell_side() * (d as f64).sqrt()) / closed_form;
    let bracketed = bracket.lower <= closed_form * slack && closed_form <= bracket.upper * slack;
    Ok(OnePointReport { closed_form, radius, bracket, bracketed })
}
