//! Capacity functionals: the Wolff-energy functional, the content-based
//! functional and the comparison with the nonlinear Riesz energy.
//!
//! Every value here is a lower bound for a capacity only up to an unknown
//! constant `c(s, d)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{finiteness_test, GaugeFunction};
use crate::measure::{CubeMeasure, MeasureRef};
use crate::numeric::{integrate, integrate_log_to_zero, integrate_pieces, NeumaierSum};
use crate::operator::{wolff_energy, WolffOptions};
use crate::riesz::RieszContext;

pub const LOWER_BOUND_NOTE: &str = "lower bound modulo c(s,d)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityFunctionalReport {
    pub measure_id: String,
    pub norm_mu: f64,
    /// `∫ W^μ dμ`.
    pub energy: f64,
    /// `‖μ‖^{3/2} · energy^{−1/2}`.
    pub functional: f64,
    /// `‖I_α ∗ μ‖₃³` with `α = 2(d − s)/3` and unit normalizing constant.
    pub riesz_energy: Option<f64>,
    /// `energy / riesz_energy`.
    pub energy_ratio: Option<f64>,
    /// `‖μ‖^{3/2} / ‖I_α ∗ μ‖₃^{3/2}`.
    pub riesz_functional: Option<f64>,
    pub notes: Vec<String>,
}

pub fn measure_id(mu: MeasureRef) -> String {
    match mu {
        MeasureRef::Atoms(m) => format!("atoms[d={},n={}]", m.dim(), m.len()),
        MeasureRef::Cubes(m) => format!("cubes[d={},n={}]", m.dim(), m.len()),
        MeasureRef::Cantor(m) => format!("cantor[d={},n={}]", m.dim(), m.depth()),
    }
}

fn check(mu: MeasureRef, ctx: &RieszContext) -> Result<()> {
    if mu.dim() != ctx.d {
        return Err(Error::DimensionMismatch { expected: ctx.d, got: mu.dim() });
    }
    if !(ctx.s < ctx.d as f64) {
        return Err(Error::arg("s", format!("must be below d = {}", ctx.d)));
    }
    if !mu.is_nonnegative() {
        return Err(Error::arg("mu", "capacity functionals need a nonnegative measure"));
    }
    Ok(())
}

/// `‖μ‖^{3/2} [∫W^μ dμ]^{−1/2}`.
///
/// Atomic measures have infinite energy; they get functional 0 and a note.
pub fn gamma_functional_from_measure(
    mu: MeasureRef,
    ctx: &RieszContext,
    opts: &WolffOptions,
) -> Result<CapacityFunctionalReport> {
    check(mu, ctx)?;
    let norm_mu = mu.total_variation();
    let energy = wolff_energy(mu, ctx.s, opts);
    let mut notes = vec![LOWER_BOUND_NOTE.to_string()];
    let functional = if energy > 0.0 && energy.is_finite() {
        norm_mu.powf(1.5) / energy.sqrt()
    } else {
        if energy.is_infinite() {
            notes.push("atomic: use cube-smoothed surrogate".to_string());
        }
        0.0
    };
    Ok(CapacityFunctionalReport {
        measure_id: measure_id(mu),
        norm_mu,
        energy,
        functional,
        riesz_energy: None,
        energy_ratio: None,
        riesz_functional: None,
        notes,
    })
}

/// `Mh · [∫_0^{t₂} (h(t)/t^s)² dt/t]^{−1/2}` with `h(t₂) = Mh`.
pub fn gamma_functional_from_content(h: &GaugeFunction, ctx: &RieszContext, mh: f64) -> Result<f64> {
    if !(mh > 0.0 && mh.is_finite()) {
        return Err(Error::arg("Mh", format!("must be positive, got {mh}")));
    }
    if h.dim() != ctx.d {
        return Err(Error::DimensionMismatch { expected: ctx.d, got: h.dim() });
    }
    let s = ctx.s;
    if let Some(beta) = h.power_exponent() {
        if beta <= s {
            return Err(Error::DivergentIntegral(format!("(h(t)/t^{s})^2 dt/t at zero")));
        }
        return Ok((2.0 * (beta - s)).sqrt() * mh.powf(s / beta));
    }
    if !finiteness_test(h, s, 1.0, 1e-8)?.finite {
        return Err(Error::DivergentIntegral(format!("(h(t)/t^{s})^2 dt/t at zero")));
    }
    let t2 = h.inverse(mh);
    let tail = integrate_log_to_zero(
        |t| {
            let q = h.eval(t) / t.powf(s);
            q * q
        },
        t2,
        1e-10,
    );
    if !tail.finite {
        return Err(Error::DivergentIntegral(format!("(h(t)/t^{s})^2 dt/t at zero")));
    }
    Ok(mh / tail.value.sqrt())
}

/// `(I_α ∗ μ)(x)` for a union of uniform intervals, unit normalizing constant.
pub fn riesz_potential_1d(mu: &CubeMeasure, alpha: f64, x: f64) -> f64 {
    let mut acc = NeumaierSum::new();
    for i in 0..mu.len() {
        let a = mu.corner(i)[0];
        let l = mu.side(i);
        let b = a + l;
        let rho = mu.mass(i) / l;
        let v = if x > a && x < b {
            ((x - a).powf(alpha) + (b - x).powf(alpha)) / alpha
        } else {
            // difference of powers without cancellation
            let near = (x - a).abs().min((x - b).abs());
            near.powf(alpha) * (alpha * (l / near).ln_1p()).exp_m1() / alpha
        };
        acc.add(rho * v);
    }
    acc.value()
}

/// `∫_ℝ |I_α ∗ μ|³ dx` for a measure of uniform intervals.
///
/// The support hull is integrated piecewise between interval endpoints; each
/// half-line tail uses `x = edge ± L(1 − v)/v`, which turns it into an
/// integral over `v ∈ (0, 1]` with integrable endpoint behavior.
pub fn riesz_energy_1d(mu: &CubeMeasure, alpha: f64, tol: f64) -> RieszEnergy {
    let mut pts: Vec<f64> = (0..mu.len()).flat_map(|i| [mu.corner(i)[0], mu.corner(i)[0] + mu.side(i)]).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    let len = hi - lo;
    let cube = |x: f64| riesz_potential_1d(mu, alpha, x).abs().powi(3);
    let inner = integrate_pieces(cube, &pts, tol, 0.0, 200);
    let tail = |sign: f64, edge: f64| {
        integrate(
            |v: f64| {
                if v <= 0.0 {
                    return 0.0;
                }
                let x = edge + sign * len * (1.0 - v) / v;
                cube(x) * len / (v * v)
            },
            0.0,
            1.0,
            tol,
            0.0,
            400,
        )
    };
    let right = tail(1.0, hi);
    let left = tail(-1.0, lo);
    RieszEnergy {
        value: inner.value + right.value + left.value,
        converged: inner.converged && right.converged && left.converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszEnergy {
    pub value: f64,
    pub converged: bool,
}

/// Wolff energy next to `‖I_α ∗ μ‖₃³` with `α = 2(d − s)/3`, `p = 3/2`.
///
/// The Riesz energy is implemented for `d = 1`.
pub fn riesz_energy_comparison(
    mu: MeasureRef,
    ctx: &RieszContext,
    opts: &WolffOptions,
) -> Result<CapacityFunctionalReport> {
    let mut report = gamma_functional_from_measure(mu, ctx, opts)?;
    if report.norm_mu == 0.0 {
        report.riesz_energy = Some(0.0);
        report.energy_ratio = Some(0.0);
        report.riesz_functional = Some(0.0);
        return Ok(report);
    }
    let cubes = match mu {
        MeasureRef::Atoms(_) => {
            return Err(Error::Unsupported("Riesz energy of an atomic measure is infinite".into()));
        }
        MeasureRef::Cubes(m) => m.clone(),
        MeasureRef::Cantor(m) => m.to_cubes(),
    };
    if ctx.d != 1 {
        return Err(Error::Unsupported(format!("Riesz energy quadrature in d = {}", ctx.d)));
    }
    let alpha = 2.0 * (ctx.d as f64 - ctx.s) / 3.0;
    let q = riesz_energy_1d(&cubes, alpha, opts.quad_tol.max(1e-12));
    if !q.converged {
        report.notes.push("riesz energy quadrature did not reach tolerance".to_string());
    }
    report.riesz_energy = Some(q.value);
    report.energy_ratio = Some(report.energy / q.value);
    report.riesz_functional = Some(report.norm_mu.powf(1.5) / q.value.sqrt());
    Ok(report)
}
