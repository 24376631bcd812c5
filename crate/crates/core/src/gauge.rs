//! Measuring (gauge) functions `h`, their inverses, the running-infimum
//! regularization, the truncation at a scale `t1`, and the square-integrability
//! test of `h(t)/t^s` near zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::integrate_log_to_zero;

/// Default number of log-grid nodes per decade used by [`regularize_gauge`].
pub const REGULARIZE_NODES_PER_DECADE: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Power {
        beta: f64,
    },
    /// Log-log piecewise linear through the nodes, with power-law extensions
    /// below the first and above the last node.
    Table {
        ts: Vec<f64>,
        hs: Vec<f64>,
        ln_t: Vec<f64>,
        ln_h: Vec<f64>,
        lower_exp: f64,
        upper_exp: f64,
    },
    Truncated {
        base: Box<GaugeFunction>,
        t1: f64,
        h_t1: f64,
    },
}

/// A measuring function `h : [0, ∞) → [0, ∞)` in dimension `d`.
///
/// Values are immutable after construction; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    d: usize,
    kind: Kind,
    /// Lower cut-off of the running infimum when built by [`regularize_gauge`].
    floor: Option<f64>,
}

/// Which invariants held on a sampled grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GaugeValidity {
    pub vanishes_at_zero: bool,
    pub increasing: bool,
    pub ratio_non_increasing: bool,
    pub inverse_consistent: bool,
    pub doubling: bool,
    pub unbounded: bool,
}

impl GaugeValidity {
    pub fn all(&self) -> bool {
        self.vanishes_at_zero
            && self.increasing
            && self.ratio_non_increasing
            && self.inverse_consistent
            && self.doubling
            && self.unbounded
    }
}

impl GaugeFunction {
    /// `h(t) = t^beta`, admissible for `0 < beta <= d`.
    pub fn power(beta: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("d", "dimension must be positive"));
        }
        if !(beta > 0.0 && beta <= d as f64) || !beta.is_finite() {
            return Err(Error::InvalidGauge(format!(
                "power exponent {beta} outside (0, {d}]"
            )));
        }
        Ok(Self { d, kind: Kind::Power { beta }, floor: None })
    }

    /// Log-log interpolated table through `(t, h)` nodes.
    ///
    /// Below the first node and above the last the gauge continues as a power
    /// law with the slope of the adjacent segment.
    pub fn table(points: &[(f64, f64)], d: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGauge("table needs at least two points".into()));
        }
        let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
        let hs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let ln_t: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ln_h: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let n = ts.len();
        let slope = |i: usize| (ln_h[i + 1] - ln_h[i]) / (ln_t[i + 1] - ln_t[i]);
        let (lower_exp, upper_exp) = (slope(0), slope(n - 2));
        Self::from_table_parts(ts, hs, ln_t, ln_h, lower_exp, upper_exp, d)
    }

    fn from_table_parts(
        ts: Vec<f64>,
        hs: Vec<f64>,
        ln_t: Vec<f64>,
        ln_h: Vec<f64>,
        lower_exp: f64,
        upper_exp: f64,
        d: usize,
    ) -> Result<Self> {
        let df = d as f64;
        for i in 0..ts.len() {
            if !(ts[i] > 0.0 && hs[i] > 0.0 && ts[i].is_finite() && hs[i].is_finite()) {
                return Err(Error::InvalidGauge(format!("table node {i} not positive and finite")));
            }
            if i > 0 {
                if ts[i] <= ts[i - 1] || hs[i] <= hs[i - 1] {
                    return Err(Error::InvalidGauge(format!(
                        "table not strictly increasing at node {i}"
                    )));
                }
                let slope = (ln_h[i] - ln_h[i - 1]) / (ln_t[i] - ln_t[i - 1]);
                if slope > df * (1.0 + 1e-12) {
                    return Err(Error::InvalidGauge(format!(
                        "h(t)/t^{d} increases on segment {i} (log slope {slope})"
                    )));
                }
            }
        }
        for (name, e) in [("lower", lower_exp), ("upper", upper_exp)] {
            if !(e > 0.0 && e <= df * (1.0 + 1e-12)) {
                return Err(Error::InvalidGauge(format!("{name} extension exponent {e} outside (0, {d}]")));
            }
        }
        Ok(Self {
            d,
            kind: Kind::Table { ts, hs, ln_t, ln_h, lower_exp, upper_exp },
            floor: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Exponent when this is a pure power gauge.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power { beta } => Some(beta),
            _ => None,
        }
    }

    /// The `t_min` floor used by the regularization, if any.
    pub fn regularization_floor(&self) -> Option<f64> {
        self.floor
    }

    /// Short identifier used in CSV output.
    pub fn id(&self) -> String {
        match &self.kind {
            Kind::Power { beta } => format!("power:{beta}"),
            Kind::Table { ts, .. } => format!("table:{}", ts.len()),
            Kind::Truncated { base, t1, .. } => format!("trunc({},{t1})", base.id()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { beta } => t.powf(*beta),
            Kind::Table { ts, hs, ln_t, ln_h, lower_exp, upper_exp } => {
                let n = ts.len();
                if t <= ts[0] {
                    return if t == ts[0] { hs[0] } else { hs[0] * (t / ts[0]).powf(*lower_exp) };
                }
                if t >= ts[n - 1] {
                    return if t == ts[n - 1] {
                        hs[n - 1]
                    } else {
                        hs[n - 1] * (t / ts[n - 1]).powf(*upper_exp)
                    };
                }
                let i = ts.partition_point(|&x| x <= t) - 1;
                if ts[i] == t {
                    return hs[i];
                }
                let lt = t.ln();
                let w = (lt - ln_t[i]) / (ln_t[i + 1] - ln_t[i]);
                (ln_h[i] + w * (ln_h[i + 1] - ln_h[i])).exp()
            }
            Kind::Truncated { base, t1, h_t1 } => {
                if t < *t1 {
                    h_t1 * (t / t1).powi(self.d as i32)
                } else {
                    base.eval(t)
                }
            }
        }
    }

    /// `h^{-1}(u)`.
    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { beta } => u.powf(1.0 / beta),
            Kind::Table { ts, hs, ln_t, ln_h, lower_exp, upper_exp } => {
                let n = hs.len();
                if u <= hs[0] {
                    return if u == hs[0] { ts[0] } else { ts[0] * (u / hs[0]).powf(1.0 / lower_exp) };
                }
                if u >= hs[n - 1] {
                    return if u == hs[n - 1] {
                        ts[n - 1]
                    } else {
                        ts[n - 1] * (u / hs[n - 1]).powf(1.0 / upper_exp)
                    };
                }
                let i = hs.partition_point(|&x| x <= u) - 1;
                if hs[i] == u {
                    return ts[i];
                }
                let lu = u.ln();
                let w = (lu - ln_h[i]) / (ln_h[i + 1] - ln_h[i]);
                (ln_t[i] + w * (ln_t[i + 1] - ln_t[i])).exp()
            }
            Kind::Truncated { base, t1, h_t1 } => {
                if u < *h_t1 {
                    t1 * (u / h_t1).powf(1.0 / self.d as f64)
                } else {
                    base.inverse(u)
                }
            }
        }
    }

    /// Values `u = h(t)` at which `h⁻¹` has a kink (table nodes, truncation point).
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Power { .. } => Vec::new(),
            Kind::Table { hs, .. } => hs.clone(),
            Kind::Truncated { base, h_t1, .. } => {
                let mut k: Vec<f64> = base.kinks().into_iter().filter(|u| u > h_t1).collect();
                k.insert(0, *h_t1);
                k
            }
        }
    }

    /// Checks the gauge invariants on a log grid of `[r_max·1e-8, r_max]`.
    pub fn validate(&self, r_max: f64, tol: f64) -> GaugeValidity {
        let n = 400;
        let lo = (r_max * 1e-8).ln();
        let hi = r_max.ln();
        let grid: Vec<f64> = (0..=n).map(|i| (lo + (hi - lo) * i as f64 / n as f64).exp()).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| self.eval(t)).collect();
        let df = self.d as i32;
        let increasing = vals.windows(2).all(|w| w[1] > w[0]);
        let ratio_non_increasing = grid.windows(2).zip(vals.windows(2)).all(|(t, h)| {
            let r0 = h[0] / t[0].powi(df);
            let r1 = h[1] / t[1].powi(df);
            r1 <= r0 * (1.0 + tol) + tol
        });
        let inverse_consistent = vals
            .iter()
            .all(|&u| (self.eval(self.inverse(u)) - u).abs() <= tol * u.max(1.0));
        let doubling = grid
            .iter()
            .zip(&vals)
            .all(|(&t, &h)| self.eval(2.0 * t) <= 2f64.powi(df) * h * (1.0 + tol));
        GaugeValidity {
            vanishes_at_zero: self.eval(0.0) == 0.0,
            increasing,
            ratio_non_increasing,
            inverse_consistent,
            doubling,
            unbounded: self.eval(r_max * 1e6) > 2.0 * self.eval(r_max),
        }
    }
}

impl fmt::Display for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// `h̄`: `t^d h(t1)/t1^d` below `t1`, `h` above.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGauge {
    gauge: GaugeFunction,
    t1: f64,
}

impl TruncatedGauge {
    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn base(&self) -> &GaugeFunction {
        match &self.gauge.kind {
            Kind::Truncated { base, .. } => base,
            _ => unreachable!("truncated gauge always wraps a base"),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.gauge.eval(t)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.gauge.inverse(u)
    }

    /// The truncation viewed as an ordinary gauge.
    pub fn as_gauge(&self) -> &GaugeFunction {
        &self.gauge
    }

    pub fn into_gauge(self) -> GaugeFunction {
        self.gauge
    }
}

pub fn truncate_gauge(h: &GaugeFunction, t1: f64) -> Result<TruncatedGauge> {
    if !(t1 > 0.0 && t1.is_finite()) {
        return Err(Error::arg("t1", format!("must be positive, got {t1}")));
    }
    let gauge = GaugeFunction {
        d: h.d,
        kind: Kind::Truncated { base: Box::new(h.clone()), t1, h_t1: h.eval(t1) },
        floor: h.floor,
    };
    Ok(TruncatedGauge { gauge, t1 })
}

/// Builds `h̃(r) = r^d · inf_{t_min <= t <= r} h_raw(t)/t^d` on a log grid of
/// `[t_min, r_max]`.
///
/// Below `t_min` the ratio is frozen at its value at `t_min`; above `r_max`
/// at its value at `r_max`.
pub fn regularize_gauge<F: Fn(f64) -> f64>(
    h_raw: F,
    d: usize,
    t_min: f64,
    r_max: f64,
) -> Result<GaugeFunction> {
    if !(t_min > 0.0 && t_min.is_finite()) {
        return Err(Error::arg("t_min", format!("must be positive, got {t_min}")));
    }
    if !(r_max > t_min && r_max.is_finite()) {
        return Err(Error::arg("r_max", format!("must exceed t_min, got {r_max}")));
    }
    if d == 0 {
        return Err(Error::arg("d", "dimension must be positive"));
    }
    if h_raw(0.0) != 0.0 {
        return Err(Error::InvalidGauge("h_raw(0) must be 0".into()));
    }
    let decades = (r_max / t_min).log10();
    let n = ((decades * REGULARIZE_NODES_PER_DECADE as f64).ceil() as usize).max(2);
    let (lo, hi) = (t_min.ln(), r_max.ln());
    let ts: Vec<f64> = (0..=n)
        .map(|i| match i {
            0 => t_min,
            i if i == n => r_max,
            i => (lo + (hi - lo) * i as f64 / n as f64).exp(),
        })
        .collect();
    let raw: Vec<f64> = ts.iter().map(|&t| h_raw(t)).collect();
    if let Some(i) = raw.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGauge(format!(
            "h_raw is not increasing near t = {}",
            ts[i + 1]
        )));
    }
    if raw[0] <= 0.0 || !raw.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidGauge("h_raw must be positive and finite on (0, r_max]".into()));
    }
    let di = d as i32;
    let mut inf = f64::INFINITY;
    let hs: Vec<f64> = ts
        .iter()
        .zip(&raw)
        .map(|(&t, &h)| {
            let td = t.powi(di);
            inf = inf.min(h / td);
            inf * td
        })
        .collect();
    let ln_t = ts.iter().map(|t| t.ln()).collect();
    let ln_h = hs.iter().map(|h| h.ln()).collect();
    let mut g = GaugeFunction::from_table_parts(ts, hs, ln_t, ln_h, d as f64, d as f64, d)?;
    g.floor = Some(t_min);
    Ok(g)
}

/// Outcome of the square-integrability test of `h(t)/t^s` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Finiteness {
    pub finite: bool,
    /// `∫_0^upper (h(t)/t^s)^2 dt/t` when finite, the partial value otherwise.
    pub value: f64,
}

pub fn finiteness_test(h: &GaugeFunction, s: f64, upper: f64, tol: f64) -> Result<Finiteness> {
    if !(s > 0.0 && s < h.d as f64) {
        return Err(Error::arg("s", format!("must lie in (0, {}), got {s}", h.d)));
    }
    if !(upper > 0.0) {
        return Err(Error::arg("upper", "must be positive"));
    }
    let r = integrate_log_to_zero(
        |t| {
            let q = h.eval(t) / t.powf(s);
            q * q
        },
        upper,
        tol,
    );
    Ok(Finiteness { finite: r.finite, value: r.value })
}

/// Serializable gauge description: `{"kind":"power","beta":..}` or
/// `{"kind":"table","points":[[t,h],..]}`. The dimension comes from context.
/// Deserialization also accepts the short string form `power:<beta>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(try_from = "GaugeSpecRepr")]
pub enum GaugeSpec {
    Power { beta: f64 },
    Table { points: Vec<[f64; 2]> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TaggedGauge {
    Power { beta: f64 },
    Table { points: Vec<[f64; 2]> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GaugeSpecRepr {
    Text(String),
    Tagged(TaggedGauge),
}

impl TryFrom<GaugeSpecRepr> for GaugeSpec {
    type Error = Error;

    fn try_from(r: GaugeSpecRepr) -> Result<Self> {
        match r {
            GaugeSpecRepr::Text(t) => t.parse(),
            GaugeSpecRepr::Tagged(TaggedGauge::Power { beta }) => Ok(GaugeSpec::Power { beta }),
            GaugeSpecRepr::Tagged(TaggedGauge::Table { points }) => Ok(GaugeSpec::Table { points }),
        }
    }
}

impl GaugeSpec {
    pub fn build(&self, d: usize) -> Result<GaugeFunction> {
        match self {
            GaugeSpec::Power { beta } => GaugeFunction::power(*beta, d),
            GaugeSpec::Table { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                GaugeFunction::table(&pts, d)
            }
        }
    }
}

impl FromStr for GaugeSpec {
    type Err = Error;

    /// Accepts `power:<beta>` or a JSON object.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(b) = s.strip_prefix("power:") {
            let beta = b
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("gauge exponent `{b}`: {e}")))?;
            return Ok(GaugeSpec::Power { beta });
        }
        let t: TaggedGauge = serde_json::from_str(s).map_err(|e| Error::Config(format!("gauge `{s}`: {e}")))?;
        GaugeSpec::try_from(GaugeSpecRepr::Tagged(t))
    }
}
