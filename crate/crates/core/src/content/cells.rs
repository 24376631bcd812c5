use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// A set of finest-level dyadic cells of a root cube.
///
/// Cells are stored as sorted Morton codes (bits interleaved from the most
/// significant level down, first axis first), so the parent of a code at
/// level `k` is `code >> d` at level `k − 1` and siblings are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCellSet {
    d: usize,
    corner: Vec<f64>,
    side: f64,
    depth: u32,
    codes: Vec<u64>,
}

impl DyadicCellSet {
    pub fn empty(corner: &[f64], side: f64, depth: u32) -> Result<Self> {
        let d = corner.len();
        if d == 0 {
            return Err(Error::arg("corner", "dimension must be positive"));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::arg("side", "root side must be positive"));
        }
        if d as u32 * depth > 63 {
            return Err(Error::arg("depth", format!("d·depth must be at most 63, got {}", d as u32 * depth)));
        }
        Ok(Self { d, corner: corner.to_vec(), side, depth, codes: Vec::new() })
    }

    /// Builds the set from per-axis integer cell indices in `[0, 2^depth)`.
    pub fn from_indices<I: IntoIterator<Item = Vec<u64>>>(
        corner: &[f64],
        side: f64,
        depth: u32,
        cells: I,
    ) -> Result<Self> {
        let mut set = Self::empty(corner, side, depth)?;
        let lim = 1u64 << depth;
        for idx in cells {
            if idx.len() != set.d {
                return Err(Error::DimensionMismatch { expected: set.d, got: idx.len() });
            }
            if idx.iter().any(|&i| i >= lim) {
                return Err(Error::arg("cells", format!("index {idx:?} outside the root cube")));
            }
            set.codes.push(set.encode(&idx));
        }
        set.codes.sort_unstable();
        set.codes.dedup();
        Ok(set)
    }

    pub fn from_codes(corner: &[f64], side: f64, depth: u32, mut codes: Vec<u64>) -> Result<Self> {
        let mut set = Self::empty(corner, side, depth)?;
        let lim = 1u64.checked_shl(set.d as u32 * depth).unwrap_or(0);
        if lim != 0 && codes.iter().any(|&c| c >= lim) {
            return Err(Error::arg("cells", "code outside the root cube"));
        }
        codes.sort_unstable();
        codes.dedup();
        set.codes = codes;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_corner(&self) -> &[f64] {
        &self.corner
    }

    pub fn root_side(&self) -> f64 {
        self.side
    }

    /// Edge of a level-`k` cell.
    pub fn side_at(&self, k: u32) -> f64 {
        self.side * 0.5f64.powi(k as i32)
    }

    pub fn cell_side(&self) -> f64 {
        self.side_at(self.depth)
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, code: u64) -> bool {
        self.codes.binary_search(&code).is_ok()
    }

    pub fn encode(&self, idx: &[u64]) -> u64 {
        let mut code = 0u64;
        for b in (0..self.depth).rev() {
            for &i in idx {
                code = (code << 1) | ((i >> b) & 1);
            }
        }
        code
    }

    pub fn decode(&self, code: u64) -> Vec<u64> {
        self.decode_at(code, self.depth)
    }

    /// Per-axis indices of a level-`k` code.
    pub fn decode_at(&self, code: u64, k: u32) -> Vec<u64> {
        let mut idx = vec![0u64; self.d];
        for b in 0..k {
            for (a, slot) in idx.iter_mut().enumerate() {
                let pos = b as usize * self.d + (self.d - 1 - a);
                *slot |= ((code >> pos) & 1) << b;
            }
        }
        idx
    }

    /// Lower corner of a level-`k` cell.
    pub fn corner_at(&self, code: u64, k: u32) -> Vec<f64> {
        let side = self.side_at(k);
        self.decode_at(code, k).iter().zip(&self.corner).map(|(&i, &c)| c + i as f64 * side).collect()
    }

    pub fn center_at(&self, code: u64, k: u32) -> Vec<f64> {
        let half = 0.5 * self.side_at(k);
        self.corner_at(code, k).into_iter().map(|c| c + half).collect()
    }

    pub fn cell_center(&self, code: u64) -> Vec<f64> {
        self.center_at(code, self.depth)
    }

    /// Finest cell containing `x`, if `x` lies in the root cube.
    pub fn locate(&self, x: &[f64]) -> Option<u64> {
        let n = 1u64 << self.depth;
        let step = self.cell_side();
        let mut idx = Vec::with_capacity(self.d);
        for (v, c) in x.iter().zip(&self.corner) {
            let t = ((v - c) / step).floor();
            if !(t >= 0.0 && t < n as f64) {
                return None;
            }
            idx.push(t as u64);
        }
        Some(self.encode(&idx))
    }

    /// Same geometry with a different cell list.
    pub fn with_codes(&self, codes: Vec<u64>) -> Self {
        let mut c = codes;
        c.sort_unstable();
        c.dedup();
        Self { codes: c, ..self.clone() }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.depth != other.depth || self.corner != other.corner || self.side != other.side {
            return Err(Error::arg("other", "cell sets live on different grids"));
        }
        let mut codes = self.codes.clone();
        codes.extend_from_slice(&other.codes);
        Ok(self.with_codes(codes))
    }

    /// Whether any cell touches the boundary of the root cube.
    pub fn touches_boundary(&self) -> bool {
        let last = (1u64 << self.depth) - 1;
        self.codes.iter().any(|&c| self.decode(c).iter().any(|&i| i == 0 || i == last))
    }
}

/// One level of a bottom-up pass over the cell tree.
#[derive(Debug, Clone)]
pub(crate) struct DpLevel {
    pub codes: Vec<u64>,
    /// `min(cap, Σ children)` (the cap alone on the finest level).
    pub value: Vec<f64>,
    /// `Σ children` (equal to `value` on the finest level).
    pub child_sum: Vec<f64>,
    /// Index of the parent in the next coarser level.
    pub parent: Vec<usize>,
}

/// Runs `value(Q) = min(cap(level Q), Σ_{children} value)` from the finest
/// level up to the root. `levels[k]` holds the occupied level-`k` cells.
pub(crate) fn min_cap_dp(cells: &DyadicCellSet, cap: impl Fn(u32) -> f64) -> Vec<DpLevel> {
    let m = cells.depth;
    let d = cells.d as u32;
    let leaf_cap = cap(m);
    let mut levels = Vec::with_capacity(m as usize + 1);
    levels.push(DpLevel {
        codes: cells.codes.clone(),
        value: vec![leaf_cap; cells.len()],
        child_sum: vec![leaf_cap; cells.len()],
        parent: Vec::new(),
    });
    for k in (0..m).rev() {
        let below = levels.last_mut().expect("at least the finest level");
        let c = cap(k);
        let mut codes = Vec::new();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut parent = Vec::with_capacity(below.codes.len());
        let mut i = 0;
        while i < below.codes.len() {
            let p = below.codes[i] >> d;
            let start = i;
            while i < below.codes.len() && below.codes[i] >> d == p {
                parent.push(codes.len());
                i += 1;
            }
            codes.push(p);
            groups.push((start, i));
        }
        below.parent = parent;
        let sums: Vec<f64> =
            groups.iter().map(|&(a, b)| compensated_sum(below.value[a..b].iter().copied())).collect();
        let value = sums.iter().map(|&s| s.min(c)).collect();
        levels.push(DpLevel { codes, value, child_sum: sums, parent: Vec::new() });
    }
    levels.reverse();
    levels
}
