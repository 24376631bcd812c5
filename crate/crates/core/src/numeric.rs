//! Numerical building blocks: compensated summation, adaptive Gauss–Kronrod
//! quadrature, Gauss–Legendre rules and log-scale integrals down to zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of a sequence, in the order given.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 7/15-point Gauss–Kronrod panel: (kronrod estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed error
/// falls below `max(abs_tol, rel_tol * |value|)` or `max_panels` is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    while heap.len() < max_panels {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let p = heap.pop().expect("heap never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, err: e2 });
    }
    // Re-sum in a fixed order so the result does not depend on the update history.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = compensated_sum(panels.iter().map(|p| p.value));
    let error = panels.iter().map(|p| p.err).sum::<f64>();
    Quadrature {
        value,
        error,
        converged: error <= abs_tol.max(rel_tol * value.abs()),
    }
}

/// Integrate over consecutive pieces `[pts[i], pts[i+1]]`, each adaptively.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    pts: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Quadrature {
    let mut acc = NeumaierSum::new();
    let mut err = 0.0;
    let mut converged = true;
    for w in pts.windows(2) {
        let q = integrate(&f, w[0], w[1], rel_tol, abs_tol / pts.len() as f64, max_panels);
        acc.add(q.value);
        err += q.error;
        converged &= q.converged;
    }
    Quadrature {
        value: acc.value(),
        error: err,
        converged,
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Legendre P_n(x) and its derivative by the three-term recurrence.
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Outcome of integrating `g(t) dt/t` over `(0, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTail {
    /// Converged value (or the partial sum reached when divergent).
    pub value: f64,
    pub finite: bool,
    /// Smallest `t` reached.
    pub reached: f64,
}

/// Integrates `g(t) dt/t` over `(0, upper]` decade by decade in `ln t`.
///
/// Decade contributions of the integrands used here are asymptotically
/// geometric, so once three consecutive ratios agree below one the remaining
/// tail is summed as a geometric series. Ratios at or above one for three
/// decades in a row are reported as divergence.
pub fn integrate_log_to_zero<G: Fn(f64) -> f64>(g: G, upper: f64, rel_tol: f64) -> LogTail {
    const MAX_DECADES: usize = 280;
    let ln10 = std::f64::consts::LN_10;
    let integrand = |u: f64| g(u.exp());
    let mut total = NeumaierSum::new();
    let mut prev: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut hi = upper.ln();
    for _ in 0..MAX_DECADES {
        let lo = hi - ln10;
        let q = integrate(&integrand, lo, hi, rel_tol * 1e-2, 0.0, 200);
        let dk = q.value;
        total.add(dk);
        hi = lo;
        if let Some(p) = prev {
            if p > 0.0 {
                ratios.push(dk / p);
            } else if dk == 0.0 {
                return LogTail { value: total.value(), finite: true, reached: hi.exp() };
            }
        }
        prev = Some(dk);
        let sum = total.value();
        if ratios.len() >= 3 {
            let r = &ratios[ratios.len() - 3..];
            let stable = (r[2] - r[1]).abs() <= 1e-6 * r[2].abs().max(1e-300)
                && (r[1] - r[0]).abs() <= 1e-6 * r[1].abs().max(1e-300);
            if r.iter().all(|&x| x >= 1.0 - 1e-9) && stable {
                return LogTail { value: sum, finite: false, reached: hi.exp() };
            }
            let rr = r[2];
            if rr < 1.0 - 1e-9 && stable {
                let tail = dk * rr / (1.0 - rr);
                return LogTail { value: sum + tail, finite: true, reached: hi.exp() };
            }
            if dk.abs() <= 1e-3 * rel_tol * sum.abs() && rr < 1.0 {
                return LogTail { value: sum, finite: true, reached: hi.exp() };
            }
        }
    }
    // Too slow to settle within the decade budget: treat as divergent.
    LogTail { value: total.value(), finite: false, reached: hi.exp() }
}

/// Bisection for an increasing or decreasing function on `[lo, hi]`
/// until the bracket has relative width `rel_width`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_width: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_width * mid.abs().max(f64::MIN_POSITIVE) {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
