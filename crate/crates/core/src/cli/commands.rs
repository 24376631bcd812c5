//! One runner per subcommand: resolved config in, artifact bytes out.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    gamma_functional_from_content, gamma_functional_from_measure, measure_id, riesz_energy_comparison,
    CapacityFunctionalReport, LOWER_BOUND_NOTE,
};
use crate::content::{content_bracket, superlevel_cells, DyadicCellSet, SuperlevelMode, Window};
use crate::error::{Error, Result};
use crate::experiment::{
    cartan_lower_experiment, cartan_upper_experiment, large_s_experiment, LargeSConfig, LowerConfig, UpperConfig,
};
use crate::gauge::GaugeSpec;
use crate::mh::{solve_mh, MhQuery};
use crate::operator::{assemble_operator, operator_norm, sup_operator_norm, wolff_report, WolffOptions};
use crate::riesz::{maximal_transform, truncated_transform, RieszContext};

use super::config::{num, one_or_many, CsvTable, MeasureSpec};

/// Everything a subcommand produced.
pub struct Run {
    pub config: serde_json::Value,
    pub files: Vec<(&'static str, Vec<u8>)>,
    /// Numerical-failure flags; any flag makes the exit code 3.
    pub flags: Vec<String>,
    pub messages: Vec<String>,
}

impl Run {
    fn new<C: Serialize>(config: &C) -> Result<Self> {
        Ok(Self { config: to_json(config)?, files: Vec::new(), flags: Vec::new(), messages: Vec::new() })
    }

    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name, bytes));
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn parse<T: DeserializeOwned>(table: toml::Table) -> Result<T> {
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

fn default_tol() -> f64 {
    1e-12
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MhConfig {
    gauge: GaugeSpec,
    s: f64,
    d: usize,
    #[serde(deserialize_with = "one_or_many")]
    kappa: Vec<f64>,
    #[serde(alias = "N", deserialize_with = "one_or_many")]
    n: Vec<f64>,
    #[serde(default = "default_tol")]
    tol: f64,
}

pub fn mh(table: toml::Table, _seed: u64) -> Result<Run> {
    let cfg: MhConfig = parse(table)?;
    let h = cfg.gauge.build(cfg.d)?;
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&["beta_or_gauge_id", "s", "d", "kappa", "N", "M", "residual"])?;
    for &kappa in &cfg.kappa {
        for &n in &cfg.n {
            let sol = solve_mh(&MhQuery::new(&h, cfg.s, kappa, n)?, cfg.tol)?;
            if !(sol.residual.abs() <= 1e-6) {
                run.flags.push(format!("mh residual {} at kappa={kappa}, N={n}", sol.residual));
            }
            csv.row(&[h.id(), num(cfg.s), cfg.d.to_string(), num(kappa), num(n), num(sol.m), num(sol.residual)])?;
        }
    }
    run.files.push(("records.csv", csv.finish()?));
    Ok(run)
}

/// `n` points per axis spanning `[lo, hi]` inclusive.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: usize,
}

impl Grid {
    fn points(&self) -> Result<Vec<Vec<f64>>> {
        if self.lo.len() != self.hi.len() || self.n == 0 {
            return Err(Error::Config("grid needs lo and hi of equal length and n > 0".into()));
        }
        let d = self.lo.len();
        let total = self.n.pow(d as u32);
        Ok((0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; d];
                for a in (0..d).rev() {
                    let i = idx % self.n;
                    idx /= self.n;
                    let t = if self.n == 1 { 0.5 } else { i as f64 / (self.n - 1) as f64 };
                    p[a] = self.lo[a] + t * (self.hi[a] - self.lo[a]);
                }
                p
            })
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RieszConfig {
    s: f64,
    measure: MeasureSpec,
    #[serde(default)]
    points: Vec<Vec<f64>>,
    grid: Option<Grid>,
    #[serde(default, deserialize_with = "one_or_many")]
    eps: Vec<f64>,
    /// Adds a row with `R_{ν,*}` per point.
    #[serde(default = "yes")]
    maximal: bool,
}

pub fn riesz(table: toml::Table, seed: u64) -> Result<Run> {
    let cfg: RieszConfig = parse(table)?;
    let nu = cfg.measure.build(cfg.s, seed)?.discrete()?;
    let d = nu.dim();
    let ctx = RieszContext::new(cfg.s, d)?;
    let mut points = cfg.points.clone();
    if let Some(g) = &cfg.grid {
        points.extend(g.points()?);
    }
    if points.is_empty() {
        return Err(Error::Config("missing field `points` or `grid`".into()));
    }
    let mut header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    header.push("eps".into());
    header.extend((1..=d).map(|a| format!("r{a}")));
    header.push("magnitude".into());
    let mut csv = CsvTable::new(&header)?;
    for x in &points {
        let xs: Vec<String> = x.iter().map(|&v| num(v)).collect();
        for &eps in &cfg.eps {
            let r = truncated_transform(&nu, &ctx, x, eps)?;
            let mut row = xs.clone();
            row.push(num(eps));
            row.extend(r.components.iter().map(|&c| num(c)));
            row.push(num(r.magnitude));
            csv.row(&row)?;
        }
        if cfg.maximal {
            let mut row = xs.clone();
            row.push("sup".into());
            row.extend(std::iter::repeat(String::new()).take(d));
            row.push(num(maximal_transform(&nu, &ctx, x)?));
            csv.row(&row)?;
        }
    }
    let mut run = Run::new(&cfg)?;
    run.files.push(("records.csv", csv.finish()?));
    Ok(run)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpnormConfig {
    s: f64,
    measure: MeasureSpec,
    #[serde(default, deserialize_with = "one_or_many")]
    eps: Vec<f64>,
    #[serde(default = "yes")]
    sup: bool,
    #[serde(default = "default_tol")]
    tol: f64,
}

pub fn opnorm(table: toml::Table, seed: u64) -> Result<Run> {
    let cfg: OpnormConfig = parse(table)?;
    let owned = cfg.measure.build(cfg.s, seed)?;
    let mu = owned.discrete()?;
    let ctx = RieszContext::new(cfg.s, mu.dim())?;
    let id = measure_id(owned.as_ref());
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&["measure_id", "s", "eps_or_sup", "norm", "eps_at_max"])?;
    for &eps in &cfg.eps {
        let est = operator_norm(&assemble_operator(&mu, &ctx, eps)?, cfg.tol)?;
        csv.row(&[id.clone(), num(cfg.s), num(eps), num(est.norm), num(eps)])?;
    }
    if cfg.sup {
        let sup = sup_operator_norm(&mu, &ctx, cfg.tol)?;
        if sup.thinned {
            run.messages.push(format!("sup over {} thinned breakpoints", sup.evaluated));
        }
        csv.row(&[id, num(cfg.s), "sup".into(), num(sup.norm), num(sup.eps_at_max)])?;
    }
    run.files.push(("records.csv", csv.finish()?));
    Ok(run)
}

fn default_quad() -> f64 {
    1e-9
}

fn default_subdivisions() -> usize {
    2
}

fn default_order() -> usize {
    6
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WolffConfig {
    s: f64,
    measure: MeasureSpec,
    #[serde(default)]
    queries: Vec<Vec<f64>>,
    #[serde(default = "default_quad")]
    quad_tol: f64,
    #[serde(default = "default_subdivisions")]
    subdivisions: usize,
    #[serde(default = "default_order")]
    order: usize,
}

impl WolffConfig {
    fn options(&self) -> WolffOptions {
        WolffOptions { quad_tol: self.quad_tol, subdivisions: self.subdivisions, order: self.order }
    }
}

pub fn wolff(table: toml::Table, seed: u64) -> Result<Run> {
    let cfg: WolffConfig = parse(table)?;
    let owned = cfg.measure.build(cfg.s, seed)?;
    let mu = owned.as_ref();
    let ctx = RieszContext::new(cfg.s, mu.dim())?;
    let rep = wolff_report(mu, &ctx, &cfg.queries, &cfg.options())?;
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&["measure_id", "s", "S", "energy", "support_samples"])?;
    csv.row(&[measure_id(mu), num(cfg.s), num(rep.sup_support), num(rep.energy), rep.support_samples.to_string()])?;
    run.files.push(("records.csv", csv.finish()?));
    if !rep.potential.is_empty() {
        let d = mu.dim();
        let mut header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
        header.push("W".into());
        let mut pot = CsvTable::new(&header)?;
        for (x, w) in &rep.potential {
            let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
            row.push(num(*w));
            pot.row(&row)?;
        }
        run.files.push(("potential.csv", pot.finish()?));
    }
    Ok(run)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
enum CellSource {
    /// Finest-level cells by integer index inside the root cube.
    Indices { corner: Vec<f64>, side: f64, depth: u32, indices: Vec<Vec<u64>> },
    /// Cells of `window` where the chosen transform of `measure` exceeds `p`.
    Superlevel {
        s: f64,
        measure: MeasureSpec,
        p: f64,
        window: Window,
        depth: u32,
        mode: Option<SuperlevelMode>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContentConfig {
    gauge: GaugeSpec,
    d: usize,
    cells: CellSource,
    #[serde(default)]
    dump_cells: bool,
}

pub fn content(table: toml::Table, seed: u64) -> Result<Run> {
    let cfg: ContentConfig = parse(table)?;
    let h = cfg.gauge.build(cfg.d)?;
    let mut run = Run::new(&cfg)?;
    let cells = match &cfg.cells {
        CellSource::Indices { corner, side, depth, indices } => {
            DyadicCellSet::from_indices(corner, *side, *depth, indices.iter().cloned())?
        }
        CellSource::Superlevel { s, measure, p, window, depth, mode } => {
            let nu = measure.build(*s, seed)?.discrete()?;
            let ctx = RieszContext::new(*s, nu.dim())?;
            let set = superlevel_cells(&nu, &ctx, *p, window, *depth, mode.unwrap_or(SuperlevelMode::Maximal))?;
            if set.touches_boundary() {
                run.flags.push("superlevel set reaches the window boundary".into());
            }
            set
        }
    };
    if cells.dim() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: cells.dim() });
    }
    let bracket = content_bracket(&cells, &h)?;
    run.json("content.json", &bracket)?;
    let mut csv = CsvTable::new(&["upper", "lower", "frostman_mass", "gap", "depth", "cells", "gauge"])?;
    csv.row(&[
        num(bracket.upper),
        num(bracket.lower),
        num(bracket.frostman_mass),
        num(bracket.gap),
        bracket.depth.to_string(),
        bracket.cells.to_string(),
        bracket.gauge.clone(),
    ])?;
    run.files.push(("records.csv", csv.finish()?));
    if cfg.dump_cells {
        let d = cfg.d;
        let mut header = vec!["code".to_string()];
        header.extend((1..=d).map(|a| format!("corner{a}")));
        header.push("side".into());
        let mut dump = CsvTable::new(&header)?;
        let side = cells.cell_side();
        for &code in cells.codes() {
            let mut row = vec![code.to_string()];
            row.extend(cells.corner_at(code, cells.depth()).iter().map(|&v| num(v)));
            row.push(num(side));
            dump.row(&row)?;
        }
        run.files.push(("cells.csv", dump.finish()?));
    }
    Ok(run)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityConfig {
    s: f64,
    #[serde(alias = "measure", deserialize_with = "one_or_many")]
    measures: Vec<MeasureSpec>,
    /// With `mh`, adds the content-side functional for this gauge.
    gauge: Option<GaugeSpec>,
    mh: Option<f64>,
    #[serde(default = "default_quad")]
    quad_tol: f64,
    #[serde(default = "default_subdivisions")]
    subdivisions: usize,
    #[serde(default = "default_order")]
    order: usize,
}

#[derive(Serialize)]
struct CapacityOutput<'a> {
    note: &'static str,
    measures: &'a [CapacityFunctionalReport],
    content_functional: Option<f64>,
}

pub fn capacity(table: toml::Table, seed: u64) -> Result<Run> {
    let cfg: CapacityConfig = parse(table)?;
    let opts = WolffOptions { quad_tol: cfg.quad_tol, subdivisions: cfg.subdivisions, order: cfg.order };
    let mut run = Run::new(&cfg)?;
    let mut reports = Vec::new();
    let mut dim = None;
    for spec in &cfg.measures {
        let owned = spec.build(cfg.s, seed)?;
        let mu = owned.as_ref();
        let ctx = RieszContext::new(cfg.s, mu.dim())?;
        dim = Some(mu.dim());
        let rep = match owned {
            super::config::OwnedMeasure::Atoms(_) => gamma_functional_from_measure(mu, &ctx, &opts)?,
            _ if mu.dim() == 1 => riesz_energy_comparison(mu, &ctx, &opts)?,
            _ => gamma_functional_from_measure(mu, &ctx, &opts)?,
        };
        if rep.notes.iter().any(|n| n.contains("did not reach tolerance")) {
            run.flags.push(format!("{}: riesz energy quadrature did not converge", rep.measure_id));
        }
        reports.push(rep);
    }
    let content_functional = match (&cfg.gauge, cfg.mh) {
        (Some(g), Some(m)) => {
            let d = dim.ok_or_else(|| Error::Config("missing field `measures`".into()))?;
            let h = g.build(d)?;
            Some(gamma_functional_from_content(&h, &RieszContext::new(cfg.s, d)?, m)?)
        }
        (None, None) => None,
        _ => return Err(Error::Config("`gauge` and `mh` must be given together".into())),
    };
    let mut csv = CsvTable::new(&[
        "measure_id",
        "norm_mu",
        "energy",
        "functional",
        "riesz_energy",
        "energy_ratio",
        "riesz_functional",
    ])?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &reports {
        csv.row(&[
            r.measure_id.clone(),
            num(r.norm_mu),
            num(r.energy),
            num(r.functional),
            opt(r.riesz_energy),
            opt(r.energy_ratio),
            opt(r.riesz_functional),
        ])?;
    }
    run.files.push(("records.csv", csv.finish()?));
    run.json("report.json", &CapacityOutput { note: LOWER_BOUND_NOTE, measures: &reports, content_functional })?;
    run.messages.push(LOWER_BOUND_NOTE.to_string());
    Ok(run)
}

pub fn cartan_upper(table: toml::Table, seed: u64) -> Result<Run> {
    let mut cfg: UpperConfig = parse(table)?;
    cfg.seed = seed;
    let records = cartan_upper_experiment(&cfg)?;
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&[
        "family", "d", "s", "gauge", "atoms", "p", "norm", "content_upper", "mh", "ratio", "windows", "cells",
        "flagged",
    ])?;
    let mut max_ratio: Vec<(&'static str, f64)> = Vec::new();
    for r in &records {
        if r.flagged {
            run.flags.push(format!("{} d={} N={}: window could not contain the superlevel set", r.family.name(), r.d, r.atoms));
        }
        match max_ratio.iter_mut().find(|(f, _)| *f == r.family.name()) {
            Some(e) => e.1 = e.1.max(r.ratio),
            None => max_ratio.push((r.family.name(), r.ratio)),
        }
        csv.row(&[
            r.family.name().to_string(),
            r.d.to_string(),
            num(r.s),
            r.gauge.clone(),
            r.atoms.to_string(),
            num(r.p),
            num(r.norm),
            num(r.content_upper),
            num(r.mh),
            num(r.ratio),
            r.windows.to_string(),
            r.cells.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    run.files.push(("records.csv", csv.finish()?));
    let summary: serde_json::Map<String, serde_json::Value> =
        max_ratio.iter().map(|(f, v)| (f.to_string(), serde_json::json!({ "max_ratio": v }))).collect();
    run.json("summary.json", &summary)?;
    for (f, v) in &max_ratio {
        run.messages.push(format!("{f}: max ratio {v:.6}"));
    }
    Ok(run)
}

pub fn cartan_lower(table: toml::Table, seed: u64) -> Result<Run> {
    let mut cfg: LowerConfig = parse(table)?;
    cfg.seed = seed;
    let rep = cartan_lower_experiment(&cfg)?;
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&["k", "j", "theta", "max_abs", "min_var", "max_abs_ratio", "var_ratio"])?;
    for l in &rep.level_stats {
        csv.row(&[
            l.k.to_string(),
            l.j.to_string(),
            num(l.theta),
            num(l.max_abs),
            num(l.min_var),
            num(l.max_abs_ratio),
            num(l.var_ratio),
        ])?;
    }
    run.files.push(("records.csv", csv.finish()?));
    let mut curve = CsvTable::new(&["delta", "fraction"])?;
    for (g, f) in rep.fraction_curve.iter().enumerate() {
        curve.row(&[num(g as f64 / cfg.delta_grid as f64), num(*f)])?;
    }
    run.files.push(("fraction.csv", curve.finish()?));
    run.json("report.json", &rep)?;
    run.messages.push(format!(
        "delta_star {} (crossing {:.6}, 95% CI [{:.6}, {:.6}]), content_lower {:.6}, m = {}",
        rep.delta_star,
        rep.delta_crossing,
        rep.ci_low,
        rep.ci_high,
        rep.content_lower,
        rep.j.len() - 1
    ));
    Ok(run)
}

pub fn large_s(table: toml::Table, _seed: u64) -> Result<Run> {
    let cfg: LargeSConfig = parse(table)?;
    let records = large_s_experiment(&cfg)?;
    let mut run = Run::new(&cfg)?;
    let mut csv = CsvTable::new(&["s", "atoms", "p", "content_upper", "bound", "ratio", "flagged"])?;
    for r in &records {
        if r.flagged {
            run.flags.push(format!("N={}: window could not contain the superlevel set", r.atoms));
        }
        csv.row(&[
            num(r.s),
            r.atoms.to_string(),
            num(r.p),
            num(r.content_upper),
            num(r.bound),
            num(r.ratio),
            r.flagged.to_string(),
        ])?;
    }
    run.files.push(("records.csv", csv.finish()?));
    Ok(run)
}
