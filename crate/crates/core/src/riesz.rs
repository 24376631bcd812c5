//! The vector kernel `K^s(u) = u/|u|^{s+1}` and the truncated, maximal and
//! smoothly cut off transforms of discrete measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::discrete::{dist2, DiscreteMeasure};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RieszContext {
    pub s: f64,
    pub d: usize,
}

impl RieszContext {
    pub fn new(s: f64, d: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::arg("s", format!("must be positive, got {s}")));
        }
        if d == 0 {
            return Err(Error::arg("d", "dimension must be positive"));
        }
        Ok(Self { s, d })
    }

    /// `|u|^{−s−1}` given `|u|²`.
    #[inline]
    pub fn kernel_scale(&self, r2: f64) -> f64 {
        if self.s == 1.0 {
            1.0 / r2
        } else {
            r2.powf(-0.5 * (self.s + 1.0))
        }
    }

    /// `K^s(u)`.
    pub fn kernel(&self, u: &[f64]) -> Vec<f64> {
        let k = self.kernel_scale(u.iter().map(|v| v * v).sum());
        u.iter().map(|v| v * k).collect()
    }

    fn check(&self, nu: &DiscreteMeasure, x: &[f64]) -> Result<()> {
        if nu.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: nu.dim() });
        }
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        Ok(())
    }
}

/// A vector in ℝ^d with its Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorValue {
    pub components: Vec<f64>,
    pub magnitude: f64,
}

impl VectorValue {
    pub fn new(components: Vec<f64>) -> Self {
        let magnitude = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self { components, magnitude }
    }
}

/// Sums `weight(|y−x|) · w · K^s(y − x)` over atoms, largest terms first.
fn weighted_sum(
    nu: &DiscreteMeasure,
    ctx: &RieszContext,
    x: &[f64],
    weight: impl Fn(f64) -> f64,
) -> VectorValue {
    let d = ctx.d;
    let mut terms: Vec<(f64, usize, f64)> = Vec::with_capacity(nu.len());
    for i in 0..nu.len() {
        let r2 = dist2(nu.point(i), x);
        if r2 == 0.0 {
            continue;
        }
        let c = weight(r2.sqrt());
        if c == 0.0 {
            continue;
        }
        let k = c * nu.weights()[i] * ctx.kernel_scale(r2);
        terms.push((k.abs() * r2.sqrt(), i, k));
    }
    terms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut acc = vec![NeumaierSum::new(); d];
    for &(_, i, k) in &terms {
        let y = nu.point(i);
        for j in 0..d {
            acc[j].add(k * (y[j] - x[j]));
        }
    }
    VectorValue::new(acc.iter().map(|a| a.value()).collect())
}

/// `R_{ν,ε}(x) = Σ_{|y_j − x| > ε} w_j K^s(y_j − x)`.
pub fn truncated_transform(
    nu: &DiscreteMeasure,
    ctx: &RieszContext,
    x: &[f64],
    eps: f64,
) -> Result<VectorValue> {
    ctx.check(nu, x)?;
    if !(eps > 0.0) {
        return Err(Error::arg("eps", format!("must be positive, got {eps}")));
    }
    Ok(weighted_sum(nu, ctx, x, |r| if r > eps { 1.0 } else { 0.0 }))
}

/// Quintic smoothstep `S(u) = 6u⁵ − 15u⁴ + 10u³` on `[0, 1]`.
pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Cutoff weight `ψ(t)`: 0 for `t ≤ 1`, `S(t − 1)` on `[1, 2]`, 1 for `t ≥ 2`.
pub fn cutoff(t: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else if t >= 2.0 {
        1.0
    } else {
        smoothstep(t - 1.0)
    }
}

/// `R̃_ε(x) = Σ_j ψ(|y_j − x|/ε) w_j K^s(y_j − x)`.
pub fn modified_transform(
    nu: &DiscreteMeasure,
    ctx: &RieszContext,
    x: &[f64],
    eps: f64,
) -> Result<VectorValue> {
    ctx.check(nu, x)?;
    if !(eps > 0.0) {
        return Err(Error::arg("eps", format!("must be positive, got {eps}")));
    }
    Ok(weighted_sum(nu, ctx, x, |r| cutoff(r / eps)))
}

/// `sup_ε |R_{ν,ε}(x)|`, exact over the breakpoints `ε ∈ {atom distances}`
/// plus one `ε` below the smallest distance. `+∞` when `x` is an atom.
pub fn maximal_transform(nu: &DiscreteMeasure, ctx: &RieszContext, x: &[f64]) -> Result<f64> {
    ctx.check(nu, x)?;
    Ok(maximal_unchecked(nu, ctx, x))
}

pub(crate) fn maximal_unchecked(nu: &DiscreteMeasure, ctx: &RieszContext, x: &[f64]) -> f64 {
    let d = ctx.d;
    let mut items: Vec<(f64, usize)> = (0..nu.len()).map(|i| (dist2(nu.point(i), x), i)).collect();
    if items.iter().any(|it| it.0 == 0.0) {
        return f64::INFINITY;
    }
    // Farthest atoms enter first as ε decreases.
    items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut acc = vec![NeumaierSum::new(); d];
    let mut best: f64 = 0.0;
    let mut g = 0;
    while g < items.len() {
        let r2 = items[g].0;
        while g < items.len() && items[g].0 == r2 {
            let i = items[g].1;
            let k = nu.weights()[i] * ctx.kernel_scale(r2);
            let y = nu.point(i);
            for j in 0..d {
                acc[j].add(k * (y[j] - x[j]));
            }
            g += 1;
        }
        let m2: f64 = acc.iter().map(|a| a.value() * a.value()).sum();
        best = best.max(m2);
    }
    best.sqrt()
}

/// `|R_ν(x)|` without truncation; `+∞` when `x` is an atom.
pub fn untruncated_magnitude(nu: &DiscreteMeasure, ctx: &RieszContext, x: &[f64]) -> Result<f64> {
    ctx.check(nu, x)?;
    if (0..nu.len()).any(|i| dist2(nu.point(i), x) == 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(weighted_sum(nu, ctx, x, |_| 1.0).magnitude)
}

/// `Σ_j |w_j| / |y_j − x|^s`, which dominates the maximal transform.
pub fn absolute_potential(nu: &DiscreteMeasure, ctx: &RieszContext, x: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    let half = -0.5 * ctx.s;
    for i in 0..nu.len() {
        let r2 = dist2(nu.point(i), x);
        if r2 == 0.0 {
            return f64::INFINITY;
        }
        acc.add(nu.weights()[i].abs() * r2.powf(half));
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSum {
    pub q: f64,
    pub bound: f64,
    /// Input indices (0 = x, 1 = y, 2 = z) assigned to the roles `x, y, z`.
    pub permutation: [usize; 3],
}

/// `q = K(x−z)·K(y−z) + K(y−x)·K(z−x)` for the labelling with
/// `|z−x| ≤ |z−y| ≤ |y−x|`, and the bound `2^{s+1} |y−x|^{−s−1} |z−x|^{1−s}`.
pub fn symmetrized_pair_sum(x: &[f64], y: &[f64], z: &[f64], s: f64) -> Result<PairSum> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len().max(z.len()) });
    }
    if !(s > 0.0) {
        return Err(Error::arg("s", "must be positive"));
    }
    let pts = [x, y, z];
    let (dxy, dyz, dxz) = (dist2(x, y), dist2(y, z), dist2(x, z));
    if dxy == 0.0 || dyz == 0.0 || dxz == 0.0 {
        return Err(Error::arg("points", "the three points must be distinct"));
    }
    // The longest side joins the new x and y; the new x is the endpoint nearer z.
    let sides = [(dxy, 0usize, 1usize, 2usize), (dyz, 1, 2, 0), (dxz, 0, 2, 1)];
    let longest = sides
        .iter()
        .copied()
        .fold(sides[0], |b, c| if c.0 > b.0 { c } else { b });
    let (_, p, q, o) = longest;
    let (ix, iy) = if dist2(pts[o], pts[p]) <= dist2(pts[o], pts[q]) { (p, q) } else { (q, p) };
    let (px, py, pz) = (pts[ix], pts[iy], pts[o]);
    let ctx = RieszContext { s, d: x.len() };
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u - v).collect() };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(u, v)| u * v).sum() };
    let q = dot(&ctx.kernel(&diff(px, pz)), &ctx.kernel(&diff(py, pz)))
        + dot(&ctx.kernel(&diff(py, px)), &ctx.kernel(&diff(pz, px)));
    let a = dist2(px, py).sqrt();
    let c = dist2(pz, px).sqrt();
    let bound = 2f64.powf(s + 1.0) * a.powf(-s - 1.0) * c.powf(1.0 - s);
    Ok(PairSum { q, bound, permutation: [ix, iy, o] })
}
