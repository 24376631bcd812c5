//! The ε-truncated Riesz operator on `L²(μ)` for atomic `μ`, its norm, and
//! Wolff potentials `W^μ(x) = ∫_0^∞ [μ(B(x,r))/r^s]² dr/r`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::discrete::dist2;
use crate::measure::{CantorMeasure, CubeMeasure, DiscreteMeasure, MeasureRef};
use crate::numeric::{gauss_legendre, integrate_pieces, NeumaierSum};
use crate::riesz::RieszContext;

/// Dense `K^s(x_j − x_i)` table for an atomic measure, masked by `ε`.
#[derive(Debug, Clone)]
pub struct RieszOperatorMatrix {
    n: usize,
    d: usize,
    eps: f64,
    weights: Vec<f64>,
    /// Pairwise distances, row-major `n × n`.
    dist: Vec<f64>,
    /// One row-major `n × n` table per component, unmasked.
    kernel: Vec<Vec<f64>>,
}

pub fn assemble_operator(
    mu: &DiscreteMeasure,
    ctx: &RieszContext,
    eps: f64,
) -> Result<RieszOperatorMatrix> {
    if mu.dim() != ctx.d {
        return Err(Error::DimensionMismatch { expected: ctx.d, got: mu.dim() });
    }
    if !mu.weights().iter().all(|&w| w > 0.0) {
        return Err(Error::arg("mu", "operator norms need strictly positive weights"));
    }
    if !(eps > 0.0) {
        return Err(Error::arg("eps", format!("must be positive, got {eps}")));
    }
    let (n, d) = (mu.len(), ctx.d);
    let mut dist = vec![0.0; n * n];
    let mut kernel = vec![vec![0.0; n * n]; d];
    for i in 0..n {
        let xi = mu.point(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let xj = mu.point(j);
            let r2 = dist2(xi, xj);
            dist[i * n + j] = r2.sqrt();
            let k = ctx.kernel_scale(r2);
            for c in 0..d {
                kernel[c][i * n + j] = (xj[c] - xi[c]) * k;
            }
        }
    }
    Ok(RieszOperatorMatrix { n, d, eps, weights: mu.weights().to_vec(), dist, kernel })
}

impl RieszOperatorMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The same table truncated at another `ε`.
    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// Component `c` of entry `(i, j)`, zero on the diagonal and where
    /// `|x_j − x_i| ≤ ε`.
    pub fn entry(&self, c: usize, i: usize, j: usize) -> f64 {
        let idx = i * self.n + j;
        if i == j || self.dist[idx] <= self.eps {
            0.0
        } else {
            self.kernel[c][idx]
        }
    }

    /// `(Af)_c(x_i) = Σ_j K_c(x_j − x_i) f_j μ_j`.
    pub fn apply(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|c| {
                (0..self.n)
                    .map(|i| {
                        let mut acc = NeumaierSum::new();
                        for j in 0..self.n {
                            acc.add(self.entry(c, i, j) * f[j] * self.weights[j]);
                        }
                        acc.value()
                    })
                    .collect()
            })
            .collect()
    }

    /// The symmetric-weighted blocks `√μ_i K_c √μ_j` with the mask applied.
    pub fn weighted_blocks(&self) -> Vec<Vec<f64>> {
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        (0..self.d)
            .map(|c| {
                let mut b = vec![0.0; self.n * self.n];
                for i in 0..self.n {
                    for j in 0..self.n {
                        b[i * self.n + j] = sw[i] * self.entry(c, i, j) * sw[j];
                    }
                }
                b
            })
            .collect()
    }

    /// Distinct off-diagonal distances, ascending.
    pub fn distances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.dist[i * self.n + j])
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub norm: f64,
    /// Applications of the normal operator.
    pub iterations: usize,
    /// `‖BᵀBv − λv‖ / λ` at exit.
    pub residual: f64,
}

/// Krylov steps per Lanczos cycle.
const LANCZOS_STEPS: usize = 48;
/// Restart cap.
const LANCZOS_CYCLES: usize = 400;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest singular value of the stacked weighted blocks: restarted Lanczos
/// (power iteration with a Rayleigh–Ritz step over the Krylov space) on the
/// normal operator, with full reorthogonalization.
fn power_norm(blocks: &[Vec<f64>], n: usize, tol: f64, warm: Option<&[f64]>) -> Result<(NormEstimate, Vec<f64>)> {
    if n == 0 || blocks.iter().all(|b| b.iter().all(|&v| v == 0.0)) {
        return Ok((NormEstimate { norm: 0.0, iterations: 0, residual: 0.0 }, vec![0.0; n]));
    }
    let mut tmp = vec![0.0; n];
    let mut normal = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for b in blocks {
            for i in 0..n {
                tmp[i] = dot(&b[i * n..(i + 1) * n], v);
            }
            for i in 0..n {
                let u = tmp[i];
                if u != 0.0 {
                    for (o, a) in out.iter_mut().zip(&b[i * n..(i + 1) * n]) {
                        *o += a * u;
                    }
                }
            }
        }
    };
    let golden = 0.618_033_988_749_894_9;
    let fresh = |i: usize| 1.0 + 0.1 * ((i as f64 + 1.0) * golden).fract();
    let mut v: Vec<f64> = match warm {
        Some(x) if x.iter().any(|&t| t != 0.0) => x.iter().enumerate().map(|(i, &t)| t + 1e-3 * fresh(i)).collect(),
        _ => (0..n).map(fresh).collect(),
    };
    let steps = LANCZOS_STEPS.min(n);
    let mut matvecs = 0;
    let mut last = (0.0, f64::INFINITY);
    let mut w = vec![0.0; n];
    for _ in 0..LANCZOS_CYCLES {
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mut basis = vec![v.clone()];
        let mut alpha = Vec::with_capacity(steps);
        let mut beta = Vec::with_capacity(steps);
        for j in 0..steps {
            normal(&basis[j], &mut w);
            matvecs += 1;
            alpha.push(dot(&w, &basis[j]));
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bn = dot(&w, &w).sqrt();
            if j + 1 == steps || bn <= 1e-13 * alpha[0].abs() {
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|x| x / bn).collect());
        }
        let k = alpha.len();
        let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(t);
        let top = eig.eigenvalues.imax();
        let mut y = vec![0.0; n];
        for (i, q) in basis.iter().take(k).enumerate() {
            let c = eig.eigenvectors[(i, top)];
            y.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
        }
        let ny = dot(&y, &y).sqrt();
        y.iter_mut().for_each(|a| *a /= ny);
        normal(&y, &mut w);
        matvecs += 1;
        let lambda = dot(&y, &w);
        if !(lambda > 0.0) {
            return Err(Error::NonConvergence { iterations: matvecs, residual: f64::NAN });
        }
        let res = w.iter().zip(&y).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / lambda;
        // A Ritz value flat to round-off across a restart is final even when a
        // near-degenerate top pair keeps the residual from shrinking.
        let stalled = (lambda - last.0).abs() <= (1e-4 * tol).max(1e-13) * lambda;
        last = (lambda, res);
        if res <= tol || stalled {
            return Ok((NormEstimate { norm: lambda.sqrt(), iterations: matvecs, residual: res }, y));
        }
        v = y;
    }
    Err(Error::NonConvergence { iterations: matvecs, residual: last.1 })
}

/// `‖𝔎_{μ,ε}‖_{L²(μ) → L²(μ; ℝ^d)}` at the matrix's `ε`.
pub fn operator_norm(a: &RieszOperatorMatrix, tol: f64) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(Error::arg("tol", "must be positive"));
    }
    Ok(power_norm(&a.weighted_blocks(), a.n, tol, None)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupNorm {
    pub norm: f64,
    pub eps_at_max: f64,
    /// Number of `ε` values evaluated.
    pub evaluated: usize,
    /// Whether the breakpoint set was thinned to quantiles.
    pub thinned: bool,
}

/// Breakpoints above which the full breakpoint set is thinned.
pub const FULL_BREAKPOINT_LIMIT: usize = 256;
/// Number of quantile breakpoints kept when thinning.
pub const THINNED_BREAKPOINTS: usize = 48;

/// `sup_ε ‖𝔎_{μ,ε}‖` over `ε` at the pairwise-distance breakpoints.
///
/// The operator is piecewise constant in `ε` between consecutive distances,
/// so one `ε` below the smallest distance plus every distinct distance is
/// exhaustive. With more than [`FULL_BREAKPOINT_LIMIT`] distinct distances
/// only [`THINNED_BREAKPOINTS`] log-spaced quantiles are evaluated.
pub fn sup_operator_norm(mu: &DiscreteMeasure, ctx: &RieszContext, tol: f64) -> Result<SupNorm> {
    if mu.len() < 2 {
        return Ok(SupNorm { norm: 0.0, eps_at_max: 0.0, evaluated: 0, thinned: false });
    }
    let base = assemble_operator(mu, ctx, f64::MIN_POSITIVE)?;
    let dists = base.distances();
    let mut eps_list = vec![0.5 * dists[0]];
    let thinned = dists.len() > FULL_BREAKPOINT_LIMIT;
    if thinned {
        let (lo, hi) = (dists[0].ln(), dists[dists.len() - 1].ln());
        for k in 0..THINNED_BREAKPOINTS {
            let target = lo + (hi - lo) * k as f64 / (THINNED_BREAKPOINTS - 1) as f64;
            let pos = dists.partition_point(|&x| x.ln() < target).min(dists.len() - 1);
            eps_list.push(dists[pos]);
        }
        eps_list.dedup();
    } else {
        eps_list.extend_from_slice(&dists);
    }
    // The largest distance masks everything.
    eps_list.pop();
    let mut best = SupNorm { norm: 0.0, eps_at_max: eps_list[0], evaluated: 0, thinned };
    let mut warm: Option<Vec<f64>> = None;
    for &eps in &eps_list {
        let a = base.with_eps(eps);
        let (est, v) = power_norm(&a.weighted_blocks(), a.n, tol, warm.as_deref())?;
        best.evaluated += 1;
        if est.norm > best.norm {
            best.norm = est.norm;
            best.eps_at_max = eps;
        }
        warm = Some(v);
    }
    Ok(best)
}

/// Numerical settings for Wolff potentials and energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WolffOptions {
    pub quad_tol: f64,
    /// Each cube is split into `subdivisions^d` pieces for the energy.
    pub subdivisions: usize,
    /// Gauss–Legendre points per axis and piece.
    pub order: usize,
}

impl Default for WolffOptions {
    fn default() -> Self {
        Self { quad_tol: 1e-9, subdivisions: 2, order: 6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WolffReport {
    pub potential: Vec<(Vec<f64>, f64)>,
    /// `S`: largest potential over the sampled support points.
    pub sup_support: f64,
    pub sup_point: Vec<f64>,
    pub support_samples: usize,
    /// `∫ W^μ dμ` (`∞` for atomic measures).
    pub energy: f64,
    pub atomic: bool,
}

/// `∫_r^∞ [F/t^s]² dt/t` for constant mass `F`.
pub fn wolff_tail(mass: f64, s: f64, r: f64) -> f64 {
    mass * mass / (2.0 * s * r.powf(2.0 * s))
}

/// `∫_p^q r^e dr`.
fn power_integral(p: f64, q: f64, e: f64) -> f64 {
    if (e + 1.0).abs() < 1e-15 {
        (q / p).ln()
    } else {
        (q.powf(e + 1.0) - p.powf(e + 1.0)) / (e + 1.0)
    }
}

/// Wolff potential of an atomic measure: the ball mass is a step function.
pub fn wolff_atoms(mu: &DiscreteMeasure, s: f64, x: &[f64]) -> f64 {
    let items = mu.sorted_distances(x);
    if items.is_empty() {
        return 0.0;
    }
    if items[0].0 == 0.0 {
        return f64::INFINITY;
    }
    let mut acc = NeumaierSum::new();
    let mut mass = NeumaierSum::new();
    let mut k = 0;
    while k < items.len() {
        let r = items[k].0;
        while k < items.len() && items[k].0 == r {
            mass.add(items[k].1);
            k += 1;
        }
        let f = mass.value();
        let next = if k < items.len() { items[k].0 } else { f64::INFINITY };
        let piece = if next.is_finite() {
            f * f / (2.0 * s) * (r.powf(-2.0 * s) - next.powf(-2.0 * s))
        } else {
            wolff_tail(f, s, r)
        };
        acc.add(piece);
    }
    acc.value()
}

/// Wolff potential of a union of uniform intervals (d = 1), in closed form.
///
/// `r ↦ μ(B(x, r))` is piecewise linear with kinks at the distances from `x`
/// to the interval endpoints; each piece integrates exactly.
pub fn wolff_intervals(mu: &CubeMeasure, s: f64, x: f64) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(4 * mu.len());
    for i in 0..mu.len() {
        let (a, l) = (mu.corner(i)[0], mu.side(i));
        let b = a + l;
        let rho = mu.mass(i).abs() / l;
        if b > x {
            let start = a.max(x) - x;
            events.push((start, rho));
            events.push((b - x, -rho));
        }
        if a < x {
            let start = x - b.min(x);
            events.push((start, rho));
            events.push((x - a, -rho));
        }
    }
    if events.is_empty() {
        return 0.0;
    }
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let e2 = -2.0 * s;
    let mut acc = NeumaierSum::new();
    let (mut alpha, mut beta) = (NeumaierSum::new(), NeumaierSum::new());
    let mut k = 0;
    while k < events.len() {
        let r = events[k].0;
        while k < events.len() && events[k].0 == r {
            beta.add(events[k].1);
            alpha.add(-events[k].1 * r);
            k += 1;
        }
        let (a, b) = (alpha.value(), beta.value());
        if k == events.len() {
            acc.add(wolff_tail(a + b * r, s, r));
            break;
        }
        let q = events[k].0;
        if q <= r {
            continue;
        }
        if a != 0.0 {
            acc.add(a * a * power_integral(r, q, e2 - 1.0));
        }
        if a != 0.0 && b != 0.0 {
            acc.add(2.0 * a * b * power_integral(r, q, e2));
        }
        if b != 0.0 {
            acc.add(b * b * power_integral(r, q, e2 + 1.0));
        }
    }
    acc.value()
}

/// Wolff potential by adaptive quadrature between ball-mass breakpoints.
fn wolff_numeric(ball: impl Fn(f64) -> f64, breaks: &[f64], far: f64, total: f64, s: f64, tol: f64) -> f64 {
    let mut pts = vec![0.0];
    pts.extend(breaks.iter().copied().filter(|&r| r > 0.0 && r < far));
    pts.push(far);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let q = integrate_pieces(
        |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let f = ball(r) / r.powf(s);
            f * f / r
        },
        &pts,
        tol,
        0.0,
        400,
    );
    q.value + wolff_tail(total, s, far)
}

/// `W^μ(x)` for any supported measure.
pub fn wolff_potential(mu: MeasureRef, s: f64, x: &[f64], tol: f64) -> f64 {
    match mu {
        MeasureRef::Atoms(m) => wolff_atoms(m, s, x),
        MeasureRef::Cubes(m) if m.dim() == 1 => wolff_intervals(m, s, x[0]),
        MeasureRef::Cubes(m) => {
            let far = m.farthest(x);
            let profile = m.ball_profile(x);
            wolff_numeric(|r| profile.mass(r), &m.radius_breakpoints(x), far, m.total_variation(), s, tol)
        }
        MeasureRef::Cantor(m) if m.dim() == 1 => wolff_intervals(&m.to_cubes(), s, x[0]),
        MeasureRef::Cantor(m) => {
            let cubes = m.to_cubes();
            let far = cubes.farthest(x);
            wolff_numeric(|r| m.ball_mass(x, r), &cubes.radius_breakpoints(x), far, 1.0, s, tol)
        }
    }
}

fn check_wolff_input(mu: MeasureRef, ctx: &RieszContext) -> Result<()> {
    if mu.dim() != ctx.d {
        return Err(Error::DimensionMismatch { expected: ctx.d, got: mu.dim() });
    }
    if !mu.is_nonnegative() {
        return Err(Error::arg("mu", "Wolff potentials need a nonnegative measure"));
    }
    if !(ctx.s < ctx.d as f64) {
        return Err(Error::arg("s", format!("must be below d = {}", ctx.d)));
    }
    Ok(())
}

/// Support sample points: atoms, or cube corners and centers.
pub fn support_samples(mu: MeasureRef) -> Vec<Vec<f64>> {
    match mu {
        MeasureRef::Atoms(m) => (0..m.len()).map(|i| m.point(i).to_vec()).collect(),
        MeasureRef::Cubes(m) => m.support_samples(),
        MeasureRef::Cantor(m) => m.to_cubes().support_samples(),
    }
}

/// `∫ W^μ dμ` with tensor Gauss–Legendre points on every cube.
pub fn wolff_energy(mu: MeasureRef, s: f64, opts: &WolffOptions) -> f64 {
    let cubes: CubeMeasure = match mu {
        MeasureRef::Atoms(m) => {
            return if m.is_empty() { 0.0 } else { f64::INFINITY };
        }
        MeasureRef::Cubes(m) => m.clone(),
        MeasureRef::Cantor(m) => m.to_cubes(),
    };
    let d = cubes.dim();
    let (gx, gw) = gauss_legendre(opts.order);
    let sub = opts.subdivisions.max(1);
    let per_axis = sub * opts.order;
    let total_pts = per_axis.pow(d as u32);
    let mut acc = NeumaierSum::new();
    let mut pt = vec![0.0; d];
    for i in 0..cubes.len() {
        let (lo, side) = (cubes.corner(i), cubes.side(i));
        let h = side / sub as f64;
        let density = cubes.mass(i).abs() / side.powi(d as i32);
        for flat in 0..total_pts {
            let mut rem = flat;
            let mut w = density;
            for k in 0..d {
                let a = rem % per_axis;
                rem /= per_axis;
                let (cell, node) = (a / opts.order, a % opts.order);
                pt[k] = lo[k] + h * (cell as f64 + 0.5 * (gx[node] + 1.0));
                w *= 0.5 * h * gw[node];
            }
            acc.add(w * wolff_potential(mu, s, &pt, opts.quad_tol));
        }
    }
    acc.value()
}

/// Potentials at `queries`, the sampled support supremum `S`, and the energy.
pub fn wolff_report(
    mu: MeasureRef,
    ctx: &RieszContext,
    queries: &[Vec<f64>],
    opts: &WolffOptions,
) -> Result<WolffReport> {
    check_wolff_input(mu, ctx)?;
    for q in queries {
        if q.len() != ctx.d {
            return Err(Error::DimensionMismatch { expected: ctx.d, got: q.len() });
        }
    }
    let s = ctx.s;
    let potential = queries.iter().map(|q| (q.clone(), wolff_potential(mu, s, q, opts.quad_tol))).collect();
    let samples = support_samples(mu);
    let mut sup = (0.0, Vec::new());
    for p in &samples {
        let w = wolff_potential(mu, s, p, opts.quad_tol);
        if w > sup.0 || sup.1.is_empty() {
            sup = (w, p.clone());
        }
    }
    let atomic = matches!(mu, MeasureRef::Atoms(m) if !m.is_empty());
    Ok(WolffReport {
        potential,
        sup_support: sup.0,
        sup_point: sup.1,
        support_samples: samples.len(),
        energy: wolff_energy(mu, s, opts),
        atomic,
    })
}

/// `|||𝔎_m|||² / Σθ_k²` for a Cantor measure through its atomic surrogate.
pub fn cantor_norm_ratio(m: &CantorMeasure, tol: f64) -> Result<f64> {
    let ctx = RieszContext::new(m.s(), m.dim())?;
    let sup = sup_operator_norm(&m.atomized(), &ctx, tol)?;
    Ok(sup.norm * sup.norm / m.theta_sq_sum())
}
