//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=3,5` restricts the run to the listed criteria. Failed
//! criteria are listed at the end; the process exits non-zero for them only
//! under `ACCEPTANCE_STRICT=1`, so that the rest of the workspace tests still
//! run after a reported failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use cartan_lab::capacity::riesz_energy_comparison;
use cartan_lab::content::{content_bracket, DyadicCellSet};
use cartan_lab::experiment::upper::critical_trend;
use cartan_lab::experiment::{
    cartan_lower_experiment, cartan_upper_experiment, large_s_experiment, linear_fit, median, weak_type_experiment,
    LargeSConfig, LowerConfig, UpperConfig, WeakConfig,
};
use cartan_lab::gauge::{GaugeFunction, GaugeSpec};
use cartan_lab::measure::{build_cantor, CantorSpec, CubeMeasure, DiscreteMeasure, MeasureRef};
use cartan_lab::mh::{doubling_ratio, power_gauge_mh, solve_mh, MhQuery};
use cartan_lab::operator::{
    assemble_operator, cantor_norm_ratio, operator_norm, sup_operator_norm, support_samples, wolff_potential,
    WolffOptions,
};
use cartan_lab::riesz::{symmetrized_pair_sum, RieszContext};
use cartan_lab::run_cli;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, Check, u64); 14] = [
        (1, "critical scale solver vs closed form", c01_solver, 10),
        (2, "doubling ratio bounded and grid-stable", c02_doubling, 30),
        (3, "pair-sum inequality on random triples", c03_pair_sum, 30),
        (4, "Lanczos norm vs dense SVD", c04_svd, 60),
        (5, "Cantor operator norm against sum of theta squared", c05_cantor_band, 300),
        (6, "Wolff potential closed forms", c06_wolff_closed, 5),
        (7, "operator norm dominated by sup Wolff", c07_wolff_domination, 300),
        (8, "weak type (1,1) constant", c08_weak, 300),
        (9, "upper Cartan ratio and critical trend", c09_upper, 900),
        (10, "lower Cartan construction", c10_lower, 900),
        (11, "far-separated masses for s >= d", c11_large_s, 120),
        (12, "Wolff energy vs Riesz energy", c12_energy_band, 300),
        (13, "content duality", c13_duality, 120),
        (14, "determinism of the CLI pipeline", c14_determinism, 60),
    ];
    let mut failed = Vec::new();
    for (n, name, check, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let pass = out.pass && in_time;
        println!(
            "criterion {n:>2} {}  {name}  [{:.1}s / {budget}s{}]  {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if in_time { "" } else { " over budget" },
            out.detail
        );
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SD: [(f64, usize); 3] = [(0.5, 1), (1.0, 2), (1.5, 2)];

fn betas(s: f64, d: usize) -> [f64; 4] {
    [s / 2.0, s, (s + d as f64) / 2.0, d as f64]
}

fn c01_solver() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (s, d) in SD {
        for beta in betas(s, d) {
            let h = GaugeFunction::power(beta, d).unwrap();
            for kappa in [0.1, 1.0, 10.0] {
                for n in [2.0, 8.0, 64.0, f64::INFINITY] {
                    if n.is_infinite() && beta <= s {
                        continue;
                    }
                    let exact = power_gauge_mh(beta, s, kappa, n).unwrap();
                    let got = solve_mh(&MhQuery::new(&h, s, kappa, n).unwrap(), 1e-13).unwrap().m;
                    worst = worst.max((got - exact).abs() / exact);
                    cases += 1;
                }
            }
        }
    }
    outcome(worst <= 1e-9, format!("{cases} cases, max relative error {worst:.2e} (tol 1e-9)"))
}

fn doubling_max(h: &GaugeFunction, s: f64, ns: &[f64], kappas: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for &n in ns {
        for &k in kappas {
            m = m.max(doubling_ratio(h, s, k, n, 1e-12).unwrap());
        }
    }
    m
}

fn c02_doubling() -> Outcome {
    let coarse_n: Vec<f64> = (1..=10).map(|k| 2f64.powi(k)).collect();
    let coarse_k: Vec<f64> = (-2..=2).map(|j| 10f64.powf(j as f64 / 2.0)).collect();
    // the refined grid doubles the density in log N and log κ, same range
    let fine_n: Vec<f64> = (2..=20).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let fine_k: Vec<f64> = (-4..=4).map(|j| 10f64.powf(j as f64 / 4.0)).collect();
    let mut worst_drift: f64 = 0.0;
    let mut overall: f64 = 0.0;
    let mut report = Vec::new();
    for (s, d) in SD {
        let mut gauges: Vec<(String, GaugeFunction)> =
            betas(s, d).iter().map(|&b| (format!("t^{b}"), GaugeFunction::power(b, d).unwrap())).collect();
        // non-power gauge: t^{(s+d)/2} with a logarithmic factor
        let b = (s + d as f64) / 2.0;
        let pts: Vec<(f64, f64)> =
            (-40..=8).map(|k| 2f64.powi(k)).map(|t| (t, t.powf(b) * (1.0 + 0.25 * (1.0 + 1.0 / t).ln()))).collect();
        gauges.push(("log-table".into(), GaugeFunction::table(&pts, d).unwrap()));
        for (name, h) in &gauges {
            let c = doubling_max(h, s, &coarse_n, &coarse_k);
            let f = doubling_max(h, s, &fine_n, &fine_k);
            let drift = (f / c - 1.0).abs();
            worst_drift = worst_drift.max(drift);
            overall = overall.max(f);
            if drift > 0.05 || !c.is_finite() {
                report.push(format!("(s={s},d={d},{name}) {c:.4}->{f:.4}"));
            }
        }
    }
    outcome(
        worst_drift <= 0.05 && overall.is_finite(),
        format!("max ratio {overall:.4}, worst refinement drift {:.2}% (tol 5%) {}", worst_drift * 100.0, report.join(" ")),
    )
}

fn c03_pair_sum() -> Outcome {
    let mut r = rng(3);
    let mut violations = 0usize;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (s, d) in [(0.5, 1usize), (1.0, 2), (1.5, 3)] {
        for _ in 0..1_000_000 {
            let p: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let Ok(ps) = symmetrized_pair_sum(&p[0], &p[1], &p[2], s) else { continue };
            if ps.q > ps.bound * (1.0 + 1e-12) {
                violations += 1;
            }
            worst = worst.max(ps.q / ps.bound);
        }
    }
    outcome(violations == 0, format!("3x10^6 triples, {violations} violations, max q/bound {worst:.4}"))
}

/// Largest singular value of the stacked weighted kernel blocks, built from
/// the kernel formula directly.
fn dense_norm(points: &[Vec<f64>], w: &[f64], s: f64, eps: f64) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut m = DMatrix::<f64>::zeros(d * n, n);
    for i in 0..n {
        for j in 0..n {
            let u: Vec<f64> = (0..d).map(|a| points[j][a] - points[i][a]).collect();
            let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > eps {
                for a in 0..d {
                    m[(a * n + i, j)] = (w[i] * w[j]).sqrt() * u[a] / r.powf(s + 1.0);
                }
            }
        }
    }
    m.singular_values().max()
}

fn c04_svd() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let d = 1 + case % 3;
        let n = r.gen_range(2..=64);
        let s = r.gen_range(0.2..(d as f64).max(1.5));
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let mu = DiscreteMeasure::new(d, &points, &w).unwrap();
        let eps = r.gen_range(0.0..0.3) + 1e-9;
        let ctx = RieszContext::new(s, d).unwrap();
        let est = operator_norm(&assemble_operator(&mu, &ctx, eps).unwrap(), 1e-10).unwrap();
        let exact = dense_norm(&points, &w, s, eps);
        let err = if exact == 0.0 { est.norm } else { (est.norm - exact).abs() / exact };
        worst = worst.max(err);
    }
    outcome(worst <= 1e-8, format!("200 cases, max relative error {worst:.2e} (tol 1e-8)"))
}

fn c05_cantor_band() -> Outcome {
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    for n in 2..=10usize {
        let m = build_cantor(&CantorSpec::geometric(1, 0.25, n).unwrap(), 0.5).unwrap();
        let ratio = cantor_norm_ratio(&m, 1e-10).unwrap();
        ns.push(n as f64);
        logs.push(ratio.ln());
    }
    let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let band = (hi - lo).exp();
    let (_, slope, _) = linear_fit(&ns, &logs);
    let ratios: Vec<String> = logs.iter().map(|l| format!("{:.3}", l.exp())).collect();
    outcome(
        band <= 10.0 && slope.abs() <= 0.05,
        format!(
            "ratios n=2..10 [{}], C/c {band:.3} (tol 10), slope of log-ratio {slope:.4} (tol 0.05)",
            ratios.join(", ")
        ),
    )
}

fn c06_wolff_closed() -> Outcome {
    let mut worst: f64 = 0.0;
    for (s, d) in [(0.5, 1usize), (1.0, 2), (1.5, 2), (0.8, 3)] {
        let delta = DiscreteMeasure::dirac(&vec![0.0; d], 1.0).unwrap();
        for r in [0.1, 0.5, 1.0, 3.0] {
            let mut x = vec![0.0; d];
            x[0] = r * 0.6;
            if d > 1 {
                x[1] = r * 0.8;
            }
            let dist = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let got = wolff_potential(MeasureRef::Atoms(&delta), s, &x, 1e-12);
            let exact = dist.powf(-2.0 * s) / (2.0 * s);
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    let leb = CubeMeasure::uniform_interval(0.0, 1.0).unwrap();
    let w0 = wolff_potential(MeasureRef::Cubes(&leb), 0.5, &[0.0], 1e-12);
    // a Lebesgue square in d = 2 goes through the numeric ball-volume path:
    // at a corner, |B(0,r) ∩ Q| = πr²/4 for r ≤ 1, so
    // W(0) = (π/4)² / (4 − 2s) + ∫_1^∞ (|B ∩ Q|/r^s)² dr/r
    let sq = CubeMeasure::uniform_cube(&[0.0, 0.0], 1.0, 1.0).unwrap();
    let s2 = 1.0f64;
    let head = (std::f64::consts::PI / 4.0).powi(2) / (4.0 - 2.0 * s2);
    let tail = corner_square_tail(s2);
    let w_sq = wolff_potential(MeasureRef::Cubes(&sq), s2, &[0.0, 0.0], 1e-12);
    let e_leb = (w0 - 2.0).abs();
    let e_sq = (w_sq - head - tail).abs() / (head + tail);
    outcome(
        worst <= 1e-6 && e_leb <= 1e-6 && e_sq <= 1e-6,
        format!("Dirac max rel err {worst:.1e}, W^Leb(0) = {w0:.10} (err {e_leb:.1e}), square corner rel err {e_sq:.1e}"),
    )
}

/// `∫_1^∞ (A(r)/r^s)² dr/r` for the unit square seen from a corner, where
/// `A(r) = √(r²−1) + r²(π/4 − acos(1/r))` on `[1, √2]` and `A = 1` beyond.
fn corner_square_tail(s: f64) -> f64 {
    let area = |r: f64| (r * r - 1.0).sqrt() + r * r * (std::f64::consts::FRAC_PI_4 - (1.0 / r).acos());
    // r = √(1 + v²) removes the square-root endpoint; dr/r = v dv / r²
    let g = |v: f64| {
        let r = (1.0 + v * v).sqrt();
        (area(r) / r.powf(s)).powi(2) * v / (r * r)
    };
    let m = 20_000;
    let hstep = 1.0 / m as f64;
    let mut acc = g(0.0) + g(1.0);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * hstep);
    }
    acc * hstep / 3.0 + 2f64.sqrt().powf(-2.0 * s) / (2.0 * s)
}

fn c07_wolff_domination() -> Outcome {
    let opts = WolffOptions::default();
    let mut families: Vec<(&str, Vec<f64>)> = Vec::new();
    let ratio = |cubes: MeasureRef, atoms: &DiscreteMeasure, s: f64| -> f64 {
        let ctx = RieszContext::new(s, atoms.dim()).unwrap();
        let norm = sup_operator_norm(atoms, &ctx, 1e-10).unwrap().norm;
        // only the sampled supremum is needed, not the energy
        let sup = support_samples(cubes)
            .iter()
            .map(|p| wolff_potential(cubes, s, p, opts.quad_tol))
            .fold(0.0, f64::max);
        norm * norm / sup
    };
    let grid_cubes = |d: usize, k: usize, len: f64| -> CubeMeasure {
        let side = len / k as f64;
        let total = k.pow(d as u32);
        let mut corners = Vec::with_capacity(total * d);
        for idx in 0..total {
            let mut rem = idx;
            for _ in 0..d {
                corners.push((rem % k) as f64 * side);
                rem /= k;
            }
        }
        CubeMeasure::new(d, corners, vec![side; total], vec![side.powi(d as i32); total]).unwrap()
    };
    // uniform: Lebesgue on an interval or square, cut into equal cells
    let mut uniform = Vec::new();
    for len in [0.5, 1.0, 2.0, 4.0] {
        let c = grid_cubes(1, 128, len);
        uniform.push(ratio(MeasureRef::Cubes(&c), &c.atomized().unwrap(), 0.5));
    }
    for len in [1.0, 2.0] {
        let c = grid_cubes(2, 12, len);
        uniform.push(ratio(MeasureRef::Cubes(&c), &c.atomized().unwrap(), 1.0));
    }
    families.push(("uniform", uniform));
    let mut cantor = Vec::new();
    for (d, r, n, s) in [(1, 0.25, 6, 0.5), (1, 0.25, 8, 0.5), (1, 0.2, 7, 0.5), (1, 0.3, 7, 0.5), (2, 0.25, 4, 1.0), (2, 0.3, 4, 1.0)] {
        let m = build_cantor(&CantorSpec::geometric(d, r, n).unwrap(), s).unwrap();
        cantor.push(ratio(MeasureRef::Cantor(&m), &m.atomized(), s));
    }
    families.push(("cantor", cantor));
    // random smoothed: jittered-grid atoms spread into small cubes
    let mut r = rng(7);
    let mut random = Vec::new();
    for case in 0..8 {
        let d = 1 + case % 2;
        let k: usize = if d == 1 { 96 } else { 12 };
        let s = if d == 1 { 0.5 } else { 1.0 };
        let spacing = 1.0 / k as f64;
        let total = k.pow(d as u32);
        let mut corners = Vec::new();
        let mut sides = Vec::new();
        let mut masses = Vec::new();
        for idx in 0..total {
            let side = spacing * r.gen_range(0.2..0.6);
            let mut rem = idx;
            for _ in 0..d {
                let cell = (rem % k) as f64 * spacing;
                corners.push(cell + r.gen_range(0.0..(spacing - side)));
                rem /= k;
            }
            sides.push(side);
            masses.push(spacing.powi(d as i32) * r.gen_range(0.5..1.5));
        }
        let c = CubeMeasure::new(d, corners, sides, masses).unwrap();
        random.push(ratio(MeasureRef::Cubes(&c), &c.atomized().unwrap(), s));
    }
    families.push(("random", random));
    let c_fit = families.iter().flat_map(|f| f.1.iter()).copied().fold(0.0, f64::max);
    let mut pass = c_fit.is_finite();
    let mut parts = Vec::new();
    for (name, v) in &families {
        let med = median(v);
        let max = v.iter().copied().fold(0.0, f64::max);
        pass &= max <= 3.0 * med;
        parts.push(format!("{name}: n={} median {med:.3} max {max:.3}", v.len()));
    }
    outcome(pass, format!("C_fit {c_fit:.3}; {}", parts.join("; ")))
}

fn c08_weak() -> Outcome {
    let a = weak_type_experiment(&WeakConfig { seed: 11, ..WeakConfig::default() }).unwrap();
    let b = weak_type_experiment(&WeakConfig { seed: 11, stream_offset: 1_000_000, ..WeakConfig::default() }).unwrap();
    let drift = (b.c_fit / a.c_fit - 1.0).abs();
    outcome(
        drift <= 0.2 && a.c_fit.is_finite(),
        format!("C_fit {:.4} vs {:.4}, drift {:.1}% (tol 20%)", a.c_fit, b.c_fit, drift * 100.0),
    )
}

fn c09_upper() -> Outcome {
    let run = |seed| {
        let recs = cartan_upper_experiment(&UpperConfig { seed, ..UpperConfig::default() }).unwrap();
        let flagged = recs.iter().filter(|r| r.flagged).count();
        (recs.iter().map(|r| r.ratio).fold(0.0, f64::max), recs.len(), flagged)
    };
    let (c1, n1, f1) = run(21);
    let (c2, _, f2) = run(22);
    let drift = (c2 / c1 - 1.0).abs();
    let ns = [4usize, 16, 64, 256, 1024, 4096];
    let trend = critical_trend(1, 0.5, &ns, 8, 14, 23).unwrap();
    let x: Vec<f64> = trend.iter().map(|(n, _)| (*n as f64).ln().ln()).collect();
    let y: Vec<f64> = trend.iter().map(|(_, c)| c.ln()).collect();
    let (_, slope, se) = linear_fit(&x, &y);
    let slope_ok = (slope - 0.5).abs() <= 0.15 * 0.5;
    outcome(
        drift <= 0.25 && slope_ok && f1 + f2 == 0,
        format!(
            "{n1} configs/seed, C_fit {c1:.3} vs {c2:.3} (drift {:.1}%, tol 25%), flagged {}; \
             ln-content vs ln ln N slope {slope:.3} ± {se:.3} (target 0.5 ± 15%)",
            drift * 100.0,
            f1 + f2
        ),
    )
}

fn c10_lower() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let (mut c_up, mut c_low) = (0.0f64, f64::INFINITY);
    for n in [6usize, 9] {
        for seed in [101u64, 102, 103] {
            let mut cfg = LowerConfig::new(GaugeSpec::Power { beta: 0.5 }, 0.5, 1, n);
            cfg.seed = seed;
            let rep = cartan_lower_experiment(&cfg).unwrap();
            pass &= rep.delta_star > 0.01;
            c_up = c_up.max(rep.c_upper);
            c_low = c_low.min(rep.c_lower);
            parts.push(format!("n={n} seed={seed}: {:.4}", rep.delta_star));
        }
    }
    pass &= c_up.is_finite() && c_low > 0.0;
    outcome(
        pass,
        format!("delta_star [{}] (need > 0.01); C_fit {c_up:.4}, c_fit {c_low:.3e}", parts.join(", ")),
    )
}

fn c11_large_s() -> Outcome {
    let mut ratios = Vec::new();
    for s in [1.0, 2.0] {
        let cfg = LargeSConfig {
            gauge: GaugeSpec::Power { beta: 1.0 },
            s,
            d: 1,
            atoms: vec![2, 8, 32],
            p: 1.0,
            separation: 1e6,
            depth: 12,
        };
        ratios.extend(large_s_experiment(&cfg).unwrap().iter().map(|r| (r.ratio, r.flagged)));
    }
    let ok = ratios.iter().all(|&(r, f)| (0.25..=4.0).contains(&r) && !f);
    let shown: Vec<String> = ratios.iter().map(|(r, _)| format!("{r:.4}")).collect();
    outcome(ok, format!("ratios [{}] (band [0.25, 4])", shown.join(", ")))
}

fn c12_energy_band() -> Outcome {
    let s = 0.5;
    let ctx = RieszContext::new(s, 1).unwrap();
    let opts = WolffOptions::default();
    let mut measures: Vec<(String, CubeMeasure)> = Vec::new();
    for (a, b, dens) in [(0.0, 1.0, 1.0), (0.0, 2.0, 1.0), (-1.0, 0.5, 3.0)] {
        measures.push((format!("[{a},{b}]x{dens}"), CubeMeasure::uniform_interval(a, b).unwrap().scaled(dens).unwrap()));
    }
    for (r, n) in [(0.25, 4), (0.25, 6), (0.2, 5), (0.3, 5)] {
        let m = build_cantor(&CantorSpec::geometric(1, r, n).unwrap(), s).unwrap();
        measures.push((format!("cantor({r},{n})"), m.to_cubes()));
    }
    let mut ratios = Vec::new();
    let mut worst_dil: f64 = 0.0;
    for (_, m) in &measures {
        let base = riesz_energy_comparison(MeasureRef::Cubes(m), &ctx, &opts).unwrap().energy_ratio.unwrap();
        let moved = m.mapped(2.5, &[0.7]).unwrap().scaled(0.3).unwrap();
        let other = riesz_energy_comparison(MeasureRef::Cubes(&moved), &ctx, &opts).unwrap().energy_ratio.unwrap();
        worst_dil = worst_dil.max((other / base - 1.0).abs());
        ratios.push(base);
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let shown: Vec<String> = measures.iter().zip(&ratios).map(|((n, _), r)| format!("{n} {r:.4}")).collect();
    outcome(
        hi / lo <= 10.0 && worst_dil <= 1e-6,
        format!("max/min {:.3} (tol 10), dilation drift {worst_dil:.1e} (tol 1e-6); {}", hi / lo, shown.join(", ")),
    )
}

/// `min(t^{0.9d}, c t^{0.3d})` with the kink inside the cell scales, so the
/// ratio `h(t√d/2)/h(t)` changes with scale.
fn duality_gauge(d: usize) -> GaugeFunction {
    let dd = d as f64;
    let kink: f64 = if d == 1 { 2f64.powi(-4) } else { 2f64.powf(-2.5) };
    let c = kink.powf(0.6 * dd);
    let pts: Vec<(f64, f64)> = (-60..=8)
        .map(|k| 2f64.powf(k as f64 / 2.0))
        .map(|t| (t, t.powf(0.9 * dd).min(c * t.powf(0.3 * dd))))
        .collect();
    GaugeFunction::table(&pts, d).unwrap()
}

fn random_cells(r: &mut ChaCha8Rng, d: usize) -> DyadicCellSet {
    let depth: u32 = if d == 1 { r.gen_range(4..=9) } else { r.gen_range(3..=5) };
    let total = 1u64 << (d as u32 * depth);
    let density = r.gen_range(0.02..0.5);
    let codes: Vec<u64> = (0..total).filter(|_| r.gen_bool(density)).collect();
    let codes = if codes.is_empty() { vec![r.gen_range(0..total)] } else { codes };
    DyadicCellSet::from_codes(&vec![0.0; d], 1.0, depth, codes).unwrap()
}

/// Cost of a random dyadic covering: every cell is replaced by a random
/// ancestor and the distinct ancestors are priced at `h(side·√d/2)`.
fn random_cover_cost(r: &mut ChaCha8Rng, cells: &DyadicCellSet, h: &GaugeFunction) -> f64 {
    let d = cells.dim();
    let depth = cells.depth();
    let mut chosen = BTreeSet::new();
    for &code in cells.codes() {
        let k = r.gen_range(0..=depth);
        chosen.insert((k, code >> (d as u32 * (depth - k))));
    }
    chosen.iter().map(|&(k, _)| h.eval(cells.side_at(k) * (d as f64).sqrt() / 2.0)).sum()
}

fn c13_duality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut beaten = 0usize;
    for d in [1usize, 2] {
        let h = duality_gauge(d);
        let mut mins = Vec::new();
        for seed in [31u64, 32] {
            let mut r = rng(seed * 10 + d as u64);
            let mut min_ratio = f64::INFINITY;
            for _ in 0..200 {
                let cells = random_cells(&mut r, d);
                let b = content_bracket(&cells, &h).unwrap();
                let ratio = b.lower / b.upper;
                pass &= ratio <= 1.0 + 1e-12;
                min_ratio = min_ratio.min(ratio);
                for _ in 0..1000 {
                    if random_cover_cost(&mut r, &cells, &h) < b.upper * (1.0 - 1e-12) {
                        beaten += 1;
                    }
                }
            }
            mins.push(min_ratio);
        }
        let drift = (mins[1] / mins[0] - 1.0).abs();
        pass &= mins[0] > 0.0 && drift <= 0.1;
        parts.push(format!("d={d}: c_d {:.4} / {:.4} (drift {:.1}%)", mins[0], mins[1], drift * 100.0));
    }
    pass &= beaten == 0;
    outcome(pass, format!("{}; random coverings below the DP: {beaten}", parts.join("; ")))
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c14_determinism() -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec!["mh", "--gauge", "power:0.75", "--s", "0.5", "--d", "1", "--kappa", "[0.5, 2]", "--N", "[4, inf]"],
        vec!["riesz", "--s", "0.5", "--measure", r#"{"kind":"random","d":2,"atoms":40,"signed":true}"#, "--eps", "0.05", "--set", "grid={lo=[0,0],hi=[1,1],n=6}"],
        vec!["opnorm", "--s", "0.5", "--measure", r#"{"kind":"random","d":1,"atoms":60}"#],
        vec!["wolff", "--s", "0.5", "--measure", r#"{"kind":"cantor","d":1,"ratio":0.25,"depth":5}"#],
        vec!["content", "--gauge", "power:0.5", "--d", "1", "--cells", r#"{"source":"superlevel","s":0.5,"measure":{"kind":"random","d":1,"atoms":20,"signed":true},"p":30,"window":{"corner":[-0.5],"side":2},"depth":10}"#, "--set", "dump_cells=true"],
        vec!["capacity", "--s", "0.5", "--measure", r#"[{"kind":"interval","a":0,"b":1},{"kind":"cantor","d":1,"ratio":0.25,"depth":4}]"#],
        vec!["cartan-upper", "--configs", "6", "--set", "atoms=[4,16]"],
        vec!["cartan-lower", "--gauge", "power:0.5", "--s", "0.5", "--d", "1", "--n", "6", "--trials", "1000"],
        vec!["large-s", "--gauge", "power:1", "--s", "2", "--atoms", "[2, 8]"],
    ];
    let run_all = |out: &Path| -> Vec<i32> {
        commands
            .iter()
            .map(|c| {
                let mut args = vec!["cartan-lab"];
                args.extend(c.iter().copied());
                args.extend(["--seed", "7", "--quiet", "--out", out.to_str().unwrap()]);
                run_cli(args)
            })
            .collect()
    };
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let codes_a = run_all(&a);
    let codes_b = run_all(&b);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    let identical = sa == sb;
    outcome(
        identical && codes_a.iter().all(|&c| c == 0) && codes_a == codes_b,
        format!("{} commands, exit codes {codes_a:?}, {} files, byte-identical: {identical}", commands.len(), sa.len()),
    )
}
