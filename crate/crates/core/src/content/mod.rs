//! Hausdorff-content estimates on dyadic cell sets and superlevel sets of
//! Riesz transforms.

pub mod cells;

pub use cells::DyadicCellSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::measure::discrete::dist2;
use crate::measure::{frostman_measure, DiscreteMeasure};
use crate::riesz::{absolute_potential, maximal_unchecked, truncated_transform, untruncated_magnitude, RieszContext};

use cells::min_cap_dp;

/// Optimal dyadic covering cost, each cube priced at `h(side·√d/2)`.
///
/// `cost(Q) = min(h(r_Q), Σ_children cost)`, evaluated bottom-up; the root
/// value is returned. Empty sets cost 0.
pub fn covering_upper_bound(cells: &DyadicCellSet, h: &GaugeFunction) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    let half_diag = (cells.dim() as f64).sqrt() / 2.0;
    let levels = min_cap_dp(cells, |k| h.eval(cells.side_at(k) * half_diag));
    levels[0].value[0]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanBound {
    pub mu: DiscreteMeasure,
    pub mass: f64,
}

/// Dyadic Frostman measure and its mass.
pub fn frostman_lower_bound(cells: &DyadicCellSet, h: &GaugeFunction) -> Result<FrostmanBound> {
    let mu = frostman_measure(cells, h)?;
    let mass = mu.total_variation();
    Ok(FrostmanBound { mu, mass })
}

/// `min_k h(side_k·√d/2) / h(side_k)` over the levels of the tree.
pub fn normalization_gap(cells: &DyadicCellSet, h: &GaugeFunction) -> f64 {
    let half_diag = (cells.dim() as f64).sqrt() / 2.0;
    (0..=cells.depth())
        .map(|k| {
            let side = cells.side_at(k);
            h.eval(side * half_diag) / h.eval(side)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Two-sided content estimate on one cell set.
///
/// `frostman_mass` is the dyadic Frostman value priced with `h(side)`;
/// `lower = gap · frostman_mass` rescales it to the covering normalization,
/// so that `lower ≤ upper ≤ frostman_mass` when `√d/2 ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentBracket {
    pub upper: f64,
    pub lower: f64,
    pub frostman_mass: f64,
    /// `min_k h(side_k √d/2)/h(side_k)`.
    pub gap: f64,
    pub gauge: String,
    pub depth: u32,
    pub cells: usize,
}

pub fn content_bracket(cells: &DyadicCellSet, h: &GaugeFunction) -> Result<ContentBracket> {
    let upper = covering_upper_bound(cells, h);
    let gap = normalization_gap(cells, h);
    let frostman_mass = if cells.is_empty() { 0.0 } else { frostman_lower_bound(cells, h)?.mass };
    Ok(ContentBracket {
        upper,
        lower: gap * frostman_mass,
        frostman_mass,
        gap,
        gauge: h.id(),
        depth: cells.depth(),
        cells: cells.len(),
    })
}

/// Which transform decides membership of a cell center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SuperlevelMode {
    /// `R_{ν,*}(x) > P`.
    Maximal,
    /// `|R_{ν,ε}(x)| > P`.
    FixedEps { eps: f64 },
    /// `|R_ν(x)| > P`, untruncated.
    Full,
    /// `Σ|w_j|/|y_j − x|^s > P`.
    Absolute,
}

/// An axis-parallel cube `[corner, corner + side]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub corner: Vec<f64>,
    pub side: f64,
}

impl Window {
    /// The cube of edge `2·half` centred at `center`.
    pub fn centered(center: &[f64], half: f64) -> Self {
        Self { corner: center.iter().map(|c| c - half).collect(), side: 2.0 * half }
    }
}

/// Marks every finest cell of `window` whose center satisfies the predicate.
///
/// Subtrees are skipped when an upper bound of `Σ|w_j|/|y_j − x|^s` over the
/// subtree is at most `P`; every mode is dominated by that sum, so skipping
/// never changes the result.
pub fn superlevel_cells(
    nu: &DiscreteMeasure,
    ctx: &RieszContext,
    p: f64,
    window: &Window,
    depth: u32,
    mode: SuperlevelMode,
) -> Result<DyadicCellSet> {
    if !(p > 0.0) {
        return Err(Error::arg("P", format!("must be positive, got {p}")));
    }
    if nu.dim() != ctx.d || window.corner.len() != ctx.d {
        return Err(Error::DimensionMismatch { expected: ctx.d, got: nu.dim() });
    }
    if let SuperlevelMode::FixedEps { eps } = mode {
        if !(eps > 0.0) {
            return Err(Error::arg("eps", "must be positive"));
        }
    }
    let empty = DyadicCellSet::empty(&window.corner, window.side, depth)?;
    if p.is_infinite() {
        return Ok(empty);
    }
    let mut marked = Vec::new();
    let mut stack = vec![(0u64, 0u32)];
    let d = ctx.d as u32;
    let abs_w: Vec<f64> = nu.weights().iter().map(|w| w.abs()).collect();
    while let Some((code, k)) = stack.pop() {
        let center = empty.center_at(code, k);
        if k < depth {
            // cells of this subtree have centers within `reach` of `center`
            let reach = 0.5 * empty.side_at(k) * (ctx.d as f64).sqrt();
            let mut bound = 0.0;
            for i in 0..nu.len() {
                let dist = dist2(nu.point(i), &center).sqrt() - reach;
                if dist <= 0.0 {
                    bound = f64::INFINITY;
                    break;
                }
                bound += abs_w[i] * dist.powf(-ctx.s);
            }
            if bound > p {
                for c in (0..1u64 << d).rev() {
                    stack.push(((code << d) | c, k + 1));
                }
            }
            continue;
        }
        let hit = match mode {
            SuperlevelMode::Maximal => maximal_unchecked(nu, ctx, &center) > p,
            SuperlevelMode::FixedEps { eps } => truncated_transform(nu, ctx, &center, eps)?.magnitude > p,
            SuperlevelMode::Full => untruncated_magnitude(nu, ctx, &center)? > p,
            SuperlevelMode::Absolute => absolute_potential(nu, ctx, &center) > p,
        };
        if hit {
            marked.push(code);
        }
    }
    Ok(empty.with_codes(marked))
}

/// All finest cells whose centers lie within `radius` of a center of `cells`.
pub fn dilate(cells: &DyadicCellSet, radius: f64) -> DyadicCellSet {
    let step = cells.cell_side();
    let reach = (radius / step).floor() as i64;
    let n = 1i64 << cells.depth();
    let d = cells.dim();
    let mut out = Vec::new();
    let offsets: Vec<Vec<i64>> = {
        let width = (2 * reach + 1) as usize;
        (0..width.pow(d as u32))
            .map(|mut f| {
                (0..d)
                    .map(|_| {
                        let o = (f % width) as i64 - reach;
                        f /= width;
                        o
                    })
                    .collect::<Vec<i64>>()
            })
            .filter(|o| (o.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt() * step <= radius)
            .collect()
    };
    for &code in cells.codes() {
        let idx = cells.decode(code);
        'off: for o in &offsets {
            let mut j = Vec::with_capacity(d);
            for (a, b) in idx.iter().zip(o) {
                let v = *a as i64 + b;
                if v < 0 || v >= n {
                    continue 'off;
                }
                j.push(v as u64);
            }
            out.push(cells.encode(&j));
        }
    }
    cells.with_codes(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(depth: u32, idx: &[u64]) -> DyadicCellSet {
        DyadicCellSet::from_indices(&[0.0], 1.0, depth, idx.iter().map(|&i| vec![i])).unwrap()
    }

    #[test]
    fn covering_examples() {
        let id = GaugeFunction::power(1.0, 1).unwrap();
        let one = segment(5, &[7]);
        assert!((covering_upper_bound(&one, &id) - 1.0 / 64.0).abs() < 1e-16);
        let full = segment(6, &(0..64).collect::<Vec<_>>());
        assert!((covering_upper_bound(&full, &id) - 0.5).abs() < 1e-15);
        let sq = GaugeFunction::power(0.5, 1).unwrap();
        let two = segment(4, &[0, 15]);
        let c = covering_upper_bound(&two, &sq);
        assert!((c - 2.0 * 2f64.powf(-2.5)).abs() < 1e-15, "{c}");
        assert_eq!(covering_upper_bound(&segment(3, &[]), &sq), 0.0);
    }

    #[test]
    fn frostman_examples() {
        let id = GaugeFunction::power(1.0, 1).unwrap();
        let sq = GaugeFunction::power(0.5, 1).unwrap();
        let full = segment(6, &(0..64).collect::<Vec<_>>());
        assert!((frostman_lower_bound(&full, &id).unwrap().mass - 1.0).abs() < 1e-14);
        assert!((frostman_lower_bound(&full, &sq).unwrap().mass - 1.0).abs() < 1e-14);
        let one = segment(5, &[7]);
        assert!((frostman_lower_bound(&one, &sq).unwrap().mass - sq.eval(1.0 / 32.0)).abs() < 1e-15);
        assert!(frostman_lower_bound(&segment(3, &[]), &sq).is_err());
    }

    #[test]
    fn bracket_orders_bounds() {
        let h = GaugeFunction::power(0.7, 2).unwrap();
        let set = DyadicCellSet::from_indices(&[0.0, 0.0], 1.0, 4, [vec![0, 0], vec![3, 9], vec![15, 15]]).unwrap();
        let b = content_bracket(&set, &h).unwrap();
        assert!(b.lower <= b.upper * (1.0 + 1e-12) && b.upper <= b.frostman_mass * (1.0 + 1e-12));
        assert!((b.gap - (0.5f64.sqrt()).powf(0.7)).abs() < 1e-12);
    }

    #[test]
    fn superlevel_single_atom() {
        let ctx = RieszContext::new(1.0, 1).unwrap();
        let nu = DiscreteMeasure::dirac(&[0.0], 1.0).unwrap();
        let w = Window { corner: vec![-2.0], side: 4.0 };
        let set = superlevel_cells(&nu, &ctx, 1.0, &w, 8, SuperlevelMode::Maximal).unwrap();
        let id = GaugeFunction::power(1.0, 1).unwrap();
        let c = covering_upper_bound(&set, &id);
        assert!((c - 1.0).abs() <= 2.0 * set.cell_side(), "{c}");
        // brute force agrees with the pruned walk
        let brute: Vec<u64> = (0..256u64)
            .filter(|&i| {
                let x = -2.0 + (i as f64 + 0.5) / 64.0;
                x.abs() < 1.0
            })
            .collect();
        assert_eq!(set.codes(), &brute[..]);
        let none = superlevel_cells(&nu, &ctx, f64::INFINITY, &w, 8, SuperlevelMode::Maximal).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn absolute_contains_maximal() {
        let ctx = RieszContext::new(0.5, 1).unwrap();
        let nu = DiscreteMeasure::new(1, &[vec![0.1], vec![0.4], vec![0.45]], &[1.0, -1.0, 0.5]).unwrap();
        let w = Window { corner: vec![-1.0], side: 2.0 };
        let a = superlevel_cells(&nu, &ctx, 3.0, &w, 10, SuperlevelMode::Absolute).unwrap();
        let m = superlevel_cells(&nu, &ctx, 3.0, &w, 10, SuperlevelMode::Maximal).unwrap();
        assert!(m.codes().iter().all(|c| a.contains(*c)));
        assert!(m.len() < a.len());
    }

    #[test]
    fn dilation_grows() {
        let set = segment(6, &[10]);
        let g = dilate(&set, 3.0 / 64.0);
        assert_eq!(g.len(), 7);
    }
}
