//! The critical size `𝔐_h(κ, N)`: the unique `M > 0` with
//! `κ² ∫_{1/N}^1 [t / h⁻¹(Mt)^s]² dt/t = 1`.
//!
//! `N = f64::INFINITY` selects the lower limit `0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::numeric::{integrate_log_to_zero, integrate_pieces};

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct MhQuery<'a> {
    pub h: &'a GaugeFunction,
    pub s: f64,
    pub kappa: f64,
    /// Number of atoms; `f64::INFINITY` for the unbounded variant.
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MhSolution {
    pub m: f64,
    /// `F(M) − 1` at the returned `M`.
    pub residual: f64,
}

impl<'a> MhQuery<'a> {
    pub fn new(h: &'a GaugeFunction, s: f64, kappa: f64, n: f64) -> Result<Self> {
        let d = h.dim() as f64;
        if !(s > 0.0 && s < d) {
            return Err(Error::arg("s", format!("must lie in (0, {d}), got {s}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::arg("kappa", format!("must be positive, got {kappa}")));
        }
        if !(n > 1.0) {
            return Err(Error::arg("N", format!("must exceed 1, got {n}")));
        }
        Ok(Self { h, s, kappa, n })
    }

    /// `F(M)`, decreasing in `M`.
    pub fn f(&self, m: f64) -> Result<f64> {
        let (h, s) = (self.h, self.s);
        let g = |t: f64| {
            let q = t / h.inverse(m * t).powf(s);
            q * q
        };
        let lo = if self.n.is_finite() { -self.n.ln() } else { f64::NEG_INFINITY };
        // Pieces in ln t: kinks of h⁻¹(Mt) plus unit-length splits.
        let mut cuts: Vec<f64> = h
            .kinks()
            .into_iter()
            .map(|u| (u / m).ln())
            .filter(|&u| u < 0.0 && u > lo)
            .collect();
        let start = cuts.iter().copied().fold(if lo.is_finite() { lo } else { 0.0 }, f64::min);
        let mut u = -1.0;
        while u > start {
            cuts.push(u);
            u -= 1.0;
        }
        cuts.push(start);
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let body = integrate_pieces(|u: f64| g(u.exp()), &cuts, QUAD_TOL, 0.0, 400);
        let mut total = body.value;
        if !lo.is_finite() {
            let tail = integrate_log_to_zero(g, start.exp(), QUAD_TOL);
            if !tail.finite {
                return Err(Error::DivergentIntegral(format!(
                    "∫_0 [t/h⁻¹(Mt)^s]² dt/t diverges for {} with s = {s}",
                    h.id()
                )));
            }
            total += tail.value;
        }
        Ok(self.kappa * self.kappa * total)
    }
}

/// Starting guess from the power law matching the local slope of `h` at 1.
fn initial_guess(q: &MhQuery) -> f64 {
    let d = q.h.dim() as f64;
    let slope = (q.h.eval(2.0) / q.h.eval(1.0)).log2();
    let beta = slope.clamp(q.s * 1.001, d);
    let a = 2.0 - 2.0 * q.s / beta;
    let base = if q.n.is_finite() { (1.0 - q.n.powf(-a)) / a } else { 1.0 / a };
    let m = (q.kappa * q.kappa * base).powf(beta / (2.0 * q.s));
    if m.is_finite() && m > 0.0 { m } else { 1.0 }
}

/// Solves `F(M) = 1` to `|F(M) − 1| ≤ tol`.
pub fn solve_mh(q: &MhQuery, tol: f64) -> Result<MhSolution> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(Error::arg("tol", format!("must lie in (0, 1e-3], got {tol}")));
    }
    let m0 = initial_guess(q);
    let phi = |lm: f64| -> Result<f64> { Ok(q.f(lm.exp())?.ln()) };

    // Bracket ln M with phi(lo) > 0 > phi(hi), expanding geometrically.
    let (mut lo, mut hi) = (m0.ln(), m0.ln());
    let f0 = phi(lo)?;
    let (mut flo, mut fhi) = (f0, f0);
    let limit = 80.0 * std::f64::consts::LN_2;
    let mut step = std::f64::consts::LN_2;
    if f0 > 0.0 {
        loop {
            hi = lo + step;
            fhi = phi(hi)?;
            if fhi <= 0.0 {
                break;
            }
            lo = hi;
            flo = fhi;
            step *= 2.0;
            if hi - m0.ln() > limit {
                return Err(Error::NonBracketable(format!(
                    "F(M) stays above 1 up to M = {:e}",
                    hi.exp()
                )));
            }
        }
    } else {
        loop {
            lo = hi - step;
            flo = phi(lo)?;
            if flo > 0.0 {
                break;
            }
            hi = lo;
            fhi = flo;
            step *= 2.0;
            if m0.ln() - lo > limit {
                return Err(Error::NonBracketable(format!(
                    "F(M) stays below 1 down to M = {:e}",
                    lo.exp()
                )));
            }
        }
    }
    if !(flo.is_finite() && fhi.is_finite()) {
        return Err(Error::NonBracketable("F is not finite on the bracket".into()));
    }

    // Illinois regula falsi on ln F vs ln M (exactly linear for power gauges).
    let target = 1e-3 * tol;
    let mut side = 0i8;
    let mut best = (lo, flo);
    for _ in 0..200 {
        let x = if fhi == flo { 0.5 * (lo + hi) } else { (lo * fhi - hi * flo) / (fhi - flo) };
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let fx = phi(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= target || (hi - lo) <= 1e-15 * x.abs().max(1.0) {
            best = (x, fx);
            break;
        }
        if fx > 0.0 {
            lo = x;
            flo = fx;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            fhi = fx;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    let m = best.0.exp();
    let residual = q.f(m)? - 1.0;
    if residual.abs() > tol {
        return Err(Error::NonConvergence { iterations: 200, residual });
    }
    Ok(MhSolution { m, residual })
}

/// Exact solution for `h(t) = t^β`:
/// `M = [κ²(1 − N^{−a})/a]^{β/(2s)}`, `a = 2 − 2s/β`, with the limit
/// `κ^{β/s}(ln N)^{β/(2s)}` at `a = 0`.
pub fn power_gauge_mh(beta: f64, s: f64, kappa: f64, n: f64) -> Result<f64> {
    if !(s > 0.0 && beta > 0.0) {
        return Err(Error::arg("s", "s and beta must be positive"));
    }
    if !(kappa > 0.0) {
        return Err(Error::arg("kappa", "must be positive"));
    }
    if !(n > 1.0) {
        return Err(Error::arg("N", format!("must exceed 1, got {n}")));
    }
    let a = 2.0 - 2.0 * s / beta;
    let base = if n.is_infinite() {
        if a <= 0.0 {
            return Err(Error::DivergentIntegral(format!(
                "N = ∞ needs beta > s (beta = {beta}, s = {s})"
            )));
        }
        1.0 / a
    } else if a.abs() < 1e-12 {
        n.ln()
    } else {
        // (1 − N^{−a})/a without cancellation for small a
        -(-a * n.ln()).exp_m1() / a
    };
    Ok((kappa * kappa * base).powf(beta / (2.0 * s)))
}

/// `𝔐_h(2κ, 2N) / 𝔐_h(κ, N)`.
pub fn doubling_ratio(h: &GaugeFunction, s: f64, kappa: f64, n: f64, tol: f64) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::arg("N", format!("must be at least 2, got {n}")));
    }
    let m1 = solve_mh(&MhQuery::new(h, s, kappa, n)?, tol)?.m;
    let m2 = solve_mh(&MhQuery::new(h, s, 2.0 * kappa, 2.0 * n)?, tol)?.m;
    Ok(m2 / m1)
}

/// The alternative scale `M = κ [∫_{h⁻¹(cM/N)}^{h⁻¹(M)} (h(y)/y^s)² dy/y]^{1/2}`,
/// comparable to `𝔐_h(κ, N)` up to constants depending on `c`, `s`, `d`.
pub fn sandwich_scale(h: &GaugeFunction, s: f64, kappa: f64, n: f64, c: f64) -> Result<f64> {
    let q = MhQuery::new(h, s, kappa, n)?;
    if !(c > 0.0 && c < n) {
        return Err(Error::arg("c", format!("must lie in (0, N), got {c}")));
    }
    let integral = |m: f64| {
        let (a, b) = (h.inverse(c * m / n).ln(), h.inverse(m).ln());
        let steps = ((b - a).ceil() as usize).max(1);
        let pts: Vec<f64> = (0..=steps).map(|i| a + (b - a) * i as f64 / steps as f64).collect();
        integrate_pieces(
            |u: f64| {
                let y = u.exp();
                let r = h.eval(y) / y.powf(s);
                r * r
            },
            &pts,
            QUAD_TOL,
            0.0,
            400,
        )
        .value
    };
    // G(M) = κ² I(M)/M² − 1 is decreasing in ln M.
    let g = |lm: f64| {
        let m = lm.exp();
        (q.kappa * q.kappa * integral(m) / (m * m)).ln()
    };
    let m0 = initial_guess(&q).ln();
    let (mut lo, mut hi) = (m0 - 1.0, m0 + 1.0);
    for _ in 0..200 {
        if g(lo) > 0.0 {
            break;
        }
        lo -= 1.0;
    }
    for _ in 0..200 {
        if g(hi) < 0.0 {
            break;
        }
        hi += 1.0;
    }
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return Err(Error::NonBracketable("sandwich scale".into()));
    }
    let lm = crate::numeric::bisect(g, lo, hi, 1e-14);
    Ok(lm.exp())
}
