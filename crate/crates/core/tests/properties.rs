//! Property tests for the structural invariants of each module.

use cartan_lab::capacity::gamma_functional_from_content;
use cartan_lab::content::{content_bracket, DyadicCellSet};
use cartan_lab::experiment::{random_cantor_build, trial_rng, verify_realization, CantorLayout};
use cartan_lab::gauge::{finiteness_test, regularize_gauge, truncate_gauge, GaugeFunction};
use cartan_lab::measure::{discretize_measure, frostman_measure, DiscreteMeasure, MeshSource};
use cartan_lab::mh::{solve_mh, MhQuery};
use cartan_lab::operator::{assemble_operator, wolff_atoms};
use cartan_lab::riesz::{maximal_transform, modified_transform, truncated_transform, RieszContext};
use proptest::prelude::*;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// A monotone table gauge from random log-slopes in `[lo_slope, d]`.
fn table_gauge(slopes: &[f64], d: usize) -> GaugeFunction {
    let mut pts = vec![(1e-6, 1e-6f64.powf(slopes[0]))];
    for (k, &b) in slopes.iter().enumerate() {
        let (t, h) = pts[k];
        let t2 = t * 10.0;
        pts.push((t2, h * 10f64.powf(b)));
    }
    GaugeFunction::table(&pts, d).unwrap()
}

fn atoms_strategy(d: usize, n: std::ops::Range<usize>, signed: bool) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, d), 0.2f64..2.0, any::<bool>()), n).prop_map(
        move |v| {
            let pts: Vec<Vec<f64>> = v.iter().map(|a| a.0.clone()).collect();
            let w: Vec<f64> = v.iter().map(|a| if signed && a.2 { -a.1 } else { a.1 }).collect();
            DiscreteMeasure::new(d, &pts, &w).unwrap()
        },
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauges_have_nonincreasing_density(beta in 0.05f64..1.0, d in 1usize..4, slopes in prop::collection::vec(0.05f64..1.0, 2..8)) {
        let dd = d as f64;
        let gauges = [
            GaugeFunction::power(beta * dd, d).unwrap(),
            table_gauge(&slopes.iter().map(|b| b * dd).collect::<Vec<_>>(), d),
        ];
        for h in &gauges {
            let grid = log_grid(1e-5, 10.0, 120);
            for w in grid.windows(2) {
                let (a, b) = (h.eval(w[0]) / w[0].powf(dd), h.eval(w[1]) / w[1].powf(dd));
                prop_assert!(a >= b - 1e-12 * a.abs().max(1.0), "{a} < {b} at {:?}", w);
            }
        }
    }

    #[test]
    fn regularization_is_idempotent(beta in 0.2f64..1.0, c in 0.1f64..10.0) {
        // the cubic term pushes h/t up again, so the raw gauge needs repair
        let raw = move |t: f64| t.powf(beta) + c * t.powi(3);
        let once = regularize_gauge(raw, 1, 1e-4, 10.0).unwrap();
        let h1 = once.clone();
        let twice = regularize_gauge(move |t| h1.eval(t), 1, 1e-4, 10.0).unwrap();
        for t in log_grid(1e-4, 10.0, 200) {
            prop_assert!((once.eval(t) - twice.eval(t)).abs() <= 1e-12 * once.eval(t));
        }
    }

    #[test]
    fn truncation_keeps_values_above_t1(beta in 0.1f64..2.0, t1 in 1e-3f64..1.0) {
        let h = GaugeFunction::power(beta, 2).unwrap();
        let tr = truncate_gauge(&h, t1).unwrap();
        for t in log_grid(t1, 50.0, 60) {
            prop_assert_eq!(tr.eval(t), h.eval(t));
        }
    }

    #[test]
    fn critical_scale_is_monotone(beta_f in 0.1f64..1.0, kappa in 0.1f64..10.0, n in 2.0f64..1000.0) {
        let (s, d) = (0.5, 1usize);
        let h = GaugeFunction::power(beta_f * d as f64, d).unwrap();
        let q = MhQuery::new(&h, s, kappa, n).unwrap();
        let m = solve_mh(&q, 1e-12).unwrap().m;
        // F is strictly decreasing through the root
        prop_assert!(q.f(m * 1.001).unwrap() < q.f(m).unwrap());
        prop_assert!(q.f(m).unwrap() < q.f(m * 0.999).unwrap());
        let more_kappa = solve_mh(&MhQuery::new(&h, s, kappa * 1.3, n).unwrap(), 1e-12).unwrap().m;
        let more_n = solve_mh(&MhQuery::new(&h, s, kappa, n * 1.3).unwrap(), 1e-12).unwrap().m;
        prop_assert!(more_kappa >= m * (1.0 - 1e-12));
        prop_assert!(more_n >= m * (1.0 - 1e-12));
    }

    #[test]
    fn ball_mass_grows_to_variation(nu in atoms_strategy(2, 1..20, true), x in prop::collection::vec(-1.5f64..1.5, 2)) {
        let mut prev = 0.0;
        for r in log_grid(1e-3, 10.0, 80) {
            let m = nu.ball_mass(&x, r);
            prop_assert!(m >= prev);
            prev = m;
        }
        prop_assert!((nu.ball_mass(&x, 1e6) - nu.total_variation()).abs() <= 1e-12 * nu.total_variation());
    }

    #[test]
    fn discretization_preserves_mass(nu in atoms_strategy(2, 1..40, false), mesh in 0.01f64..0.7) {
        let out = discretize_measure(MeshSource::Atoms(&nu), mesh).unwrap();
        let total = nu.total_variation();
        prop_assert!((out.output_variation - total).abs() <= 1e-12 * total);
        prop_assert!((out.measure.total_variation() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn frostman_respects_caps(d in 1usize..3, depth in 2u32..6, density in 0.05f64..0.9, beta_f in 0.2f64..1.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = trial_rng(seed, 0);
        let total = 1u64 << (d as u32 * depth);
        let mut codes: Vec<u64> = (0..total).filter(|_| r.gen_bool(density)).collect();
        if codes.is_empty() { codes.push(0); }
        let cells = DyadicCellSet::from_codes(&vec![0.0; d], 1.0, depth, codes).unwrap();
        let h = GaugeFunction::power(beta_f * d as f64, d).unwrap();
        let mu = frostman_measure(&cells, &h).unwrap();
        for k in 0..=depth {
            let mut sums = std::collections::BTreeMap::<u64, f64>::new();
            for i in 0..mu.len() {
                let code = cells.locate(mu.point(i)).unwrap();
                *sums.entry(code >> (d as u32 * (depth - k))).or_default() += mu.weights()[i];
            }
            let cap = h.eval(cells.side_at(k));
            for (_, m) in sums {
                prop_assert!(m <= cap * (1.0 + 1e-12), "level {k}: {m} > {cap}");
            }
        }
    }

    #[test]
    fn adding_cells_never_lowers_the_bracket(depth in 2u32..7, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = trial_rng(seed, 1);
        let total = 1u64 << depth;
        let base: Vec<u64> = (0..total).filter(|_| r.gen_bool(0.3)).chain([0]).collect();
        let more: Vec<u64> = base.iter().copied().chain((0..total).filter(|_| r.gen_bool(0.3))).collect();
        let h = GaugeFunction::power(0.6, 1).unwrap();
        let a = content_bracket(&DyadicCellSet::from_codes(&[0.0], 1.0, depth, base).unwrap(), &h).unwrap();
        let b = content_bracket(&DyadicCellSet::from_codes(&[0.0], 1.0, depth, more).unwrap(), &h).unwrap();
        prop_assert!(b.upper >= a.upper * (1.0 - 1e-12));
        prop_assert!(b.lower >= a.lower * (1.0 - 1e-12));
    }

    #[test]
    fn transforms_are_translation_invariant(nu in atoms_strategy(2, 2..15, true), x in prop::collection::vec(-2.0f64..2.0, 2), shift in prop::collection::vec(-5.0f64..5.0, 2), eps in 0.01f64..0.5) {
        let ctx = RieszContext::new(0.7, 2).unwrap();
        let moved = nu.mapped(1.0, &shift).unwrap();
        let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let (a, b) = (truncated_transform(&nu, &ctx, &x, eps).unwrap(), truncated_transform(&moved, &ctx, &y, eps).unwrap());
        let (m1, m2) = (maximal_transform(&nu, &ctx, &x).unwrap(), maximal_transform(&moved, &ctx, &y).unwrap());
        // a shift can move points across the truncation radius by rounding, so
        // compare only when no atom sits within 1e-9 of the radius
        let clear = (0..nu.len()).all(|i| (dist(nu.point(i), &x) - eps).abs() > 1e-9);
        if clear {
            for (u, v) in a.components.iter().zip(&b.components) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
        prop_assert!((m1 - m2).abs() <= 1e-9 * (1.0 + m1));
    }

    #[test]
    fn transforms_scale_with_dilation(nu in atoms_strategy(1, 2..15, true), x in -2.0f64..2.0, lambda in 0.1f64..10.0, eps in 0.01f64..0.5) {
        let s = 0.5;
        let ctx = RieszContext::new(s, 1).unwrap();
        let big = nu.mapped(lambda, &[0.0]).unwrap();
        let clear = (0..nu.len()).all(|i| (dist(nu.point(i), &[x]) - eps).abs() > 1e-9);
        prop_assume!(clear);
        let a = truncated_transform(&nu, &ctx, &[x], eps).unwrap().components[0];
        let b = truncated_transform(&big, &ctx, &[x * lambda], eps * lambda).unwrap().components[0];
        prop_assert!((b - lambda.powf(-s) * a).abs() <= 1e-10 * (1.0 + a.abs()));
        let m = maximal_transform(&nu, &ctx, &[x]).unwrap();
        let mb = maximal_transform(&big, &ctx, &[x * lambda]).unwrap();
        prop_assert!((mb - lambda.powf(-s) * m).abs() <= 1e-10 * (1.0 + m));
    }

    #[test]
    fn maximal_dominates_and_smoothing_is_local(nu in atoms_strategy(2, 1..20, true), x in prop::collection::vec(-1.5f64..1.5, 2), eps in 0.01f64..1.0) {
        let s = 1.2;
        let ctx = RieszContext::new(s, 2).unwrap();
        let t = truncated_transform(&nu, &ctx, &x, eps).unwrap();
        let m = maximal_transform(&nu, &ctx, &x).unwrap();
        prop_assert!(m >= t.magnitude * (1.0 - 1e-12));
        let md = modified_transform(&nu, &ctx, &x, eps).unwrap();
        let diff = t.components.iter().zip(&md.components).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let local = eps.powf(-s) * nu.ball_mass(&x, 2.0 * eps);
        prop_assert!(diff <= local * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn operator_is_antisymmetric(nu in atoms_strategy(2, 2..25, false), f in prop::collection::vec(-1.0f64..1.0, 25), g in prop::collection::vec(-1.0f64..1.0, 25), eps in 0.001f64..0.5) {
        let ctx = RieszContext::new(0.9, 2).unwrap();
        let a = assemble_operator(&nu, &ctx, eps).unwrap();
        let n = nu.len();
        let (f, g) = (&f[..n], &g[..n]);
        let (af, ag) = (a.apply(f), a.apply(g));
        let w = nu.weights();
        for c in 0..2 {
            let lhs: f64 = (0..n).map(|i| af[c][i] * g[i] * w[i]).sum();
            let rhs: f64 = (0..n).map(|i| f[i] * ag[c][i] * w[i]).sum();
            prop_assert!((lhs + rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn wolff_of_atoms_matches_layer_sum(nu in atoms_strategy(2, 1..20, false), x in prop::collection::vec(-3.0f64..3.0, 2), s in 0.2f64..1.8) {
        let mut layers: Vec<(f64, f64)> = (0..nu.len()).map(|i| (dist(nu.point(i), &x), nu.weights()[i])).collect();
        layers.sort_by(|a, b| a.0.total_cmp(&b.0));
        prop_assume!(layers[0].0 > 1e-6);
        // μ(B(x, r)) is constant between consecutive distances; the last layer
        // carries the full mass to infinity
        let mut mass = 0.0;
        let mut exact = 0.0;
        for (k, &(r, w)) in layers.iter().enumerate() {
            mass += w;
            let next = layers.get(k + 1).map_or(0.0, |l| l.0.powf(-2.0 * s));
            exact += mass * mass * (r.powf(-2.0 * s) - next) / (2.0 * s);
        }
        let got = wolff_atoms(&nu, s, &x);
        prop_assert!((got - exact).abs() <= 1e-10 * exact, "{got} vs {exact}");
    }

    #[test]
    fn content_functional_matches_power_closed_form(beta_f in 0.55f64..1.0, mh in 0.01f64..10.0) {
        let (s, d) = (0.5, 1usize);
        let beta = beta_f * d as f64;
        let h = GaugeFunction::power(beta, d).unwrap();
        let table = table_gauge(&[beta; 9], d);
        let ctx = RieszContext::new(s, d).unwrap();
        // ∫_0^{t₂} t^{2β−2s} dt/t = t₂^{2(β−s)}/(2(β−s)) with t₂ = mh^{1/β}
        let exact = mh * (mh.powf(2.0 * (beta - s) / beta) / (2.0 * (beta - s))).powf(-0.5);
        let a = gamma_functional_from_content(&h, &ctx, mh).unwrap();
        let b = gamma_functional_from_content(&table, &ctx, mh).unwrap();
        prop_assert!((a - exact).abs() <= 1e-9 * exact);
        prop_assert!((b - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn random_cantor_realizations_are_valid(seed in any::<u64>(), n in 1usize..8, m_scale in 0.5f64..16.0) {
        let h = GaugeFunction::power(0.5, 1).unwrap();
        let layout = CantorLayout::new(&h, 0.5, m_scale, n, 1.0).unwrap();
        let real = random_cantor_build(&layout, &mut trial_rng(seed, 0)).unwrap();
        prop_assert!(verify_realization(&real).is_ok());
        prop_assert_eq!(real.clone(), random_cantor_build(&layout, &mut trial_rng(seed, 0)).unwrap());
    }
}

#[test]
fn finiteness_follows_the_sign_of_beta_minus_s() {
    for (s, d) in [(0.5, 1usize), (1.0, 2), (1.5, 2)] {
        for beta in [s / 2.0, s, (s + d as f64) / 2.0, d as f64] {
            let h = GaugeFunction::power(beta, d).unwrap();
            let f = finiteness_test(&h, s, 1.0, 1e-10).unwrap();
            assert_eq!(f.finite, beta > s, "s={s} d={d} beta={beta}");
        }
    }
}
