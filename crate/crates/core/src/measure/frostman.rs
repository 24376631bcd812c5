use crate::content::cells::{min_cap_dp, DpLevel, DyadicCellSet};
use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::measure::discrete::DiscreteMeasure;

/// Dyadic Frostman measure on a cell set.
///
/// Every finest cell starts with mass `h(cell side)`. Going up the tree, a
/// cube whose children carry more than `h(side)` is capped at `h(side)` and
/// its subtree is scaled down proportionally. The result has one atom per
/// cell (at its center, in cell order) and satisfies `μ(Q) ≤ h(side Q)` for
/// every dyadic cube `Q` of the root tree.
pub fn frostman_measure(cells: &DyadicCellSet, h: &GaugeFunction) -> Result<DiscreteMeasure> {
    if cells.is_empty() {
        return Err(Error::Empty("cell set"));
    }
    if h.dim() != cells.dim() {
        return Err(Error::DimensionMismatch { expected: cells.dim(), got: h.dim() });
    }
    let levels = min_cap_dp(cells, |k| h.eval(cells.side_at(k)));
    let m = cells.depth() as usize;
    // scale[k][i]: product of cap factors of node i and all its ancestors.
    let mut scale: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let factor = |lv: &DpLevel, i: usize| {
        if lv.child_sum[i] > 0.0 { lv.value[i] / lv.child_sum[i] } else { 1.0 }
    };
    scale.push(vec![factor(&levels[0], 0)]);
    for k in 1..m {
        let lv = &levels[k];
        let row = (0..lv.codes.len()).map(|i| scale[k - 1][lv.parent[i]] * factor(lv, i)).collect();
        scale.push(row);
    }
    let leaf_cap = h.eval(cells.cell_side());
    let weights: Vec<f64> = if m == 0 {
        vec![levels[0].value[0]]
    } else {
        levels[m].parent.iter().map(|&p| leaf_cap * scale[m - 1][p]).collect()
    };
    let coords = cells.codes().iter().flat_map(|&c| cells.cell_center(c)).collect();
    DiscreteMeasure::from_flat(cells.dim(), coords, weights)
}
