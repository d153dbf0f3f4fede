//! Dense d-dimensional grids, lattice rectangles and prefix-sum tables.
//!
//! A [`GridField`] holds one observation per lattice point
//! `(i_1/m_1, ..., i_d/m_d)`, stored row-major with the last axis varying
//! fastest. Indices exposed through the public API are 1-based and
//! inclusive, matching the lattice labels; the flat storage is 0-based.
//!
//! A [`PrefixTable`] is a zero-padded summed-area table: the entry at padded
//! index `(i_1, ..., i_d)` with `0 <= i_k <= m_k` is the sum of all grid
//! values whose index is componentwise `<= i`. Any [`Rect`] sum is then a
//! `2^d`-term inclusion-exclusion over its corners.

mod io;

pub use io::{read_grid, read_grid_binary, read_grid_csv, write_grid_binary, write_grid_csv};

use crate::error::{Error, Result};

/// Per-axis grid sizes at or above which prefix sums use compensated accumulation.
pub const COMPENSATED_THRESHOLD: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: Vec<usize>,
    values: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("d must be at least 1".into()));
    }
    if let Some(k) = dims.iter().position(|&m| m == 0) {
        return Err(Error::InvalidDims(format!("axis {} has size 0", k + 1)));
    }
    dims.iter()
        .try_fold(1usize, |acc, &m| acc.checked_mul(m))
        .ok_or_else(|| Error::InvalidDims("point count overflows usize".into()))
}

/// Row-major strides (last axis contiguous).
pub(crate) fn strides_for(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

impl GridField {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = check_dims(&dims)?;
        if values.len() != n {
            return Err(Error::InvalidDims(format!(
                "expected {} values for dims {:?}, got {}",
                n,
                dims,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridField { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = check_dims(dims)?;
        Ok(GridField {
            dims: dims.to_vec(),
            values: vec![0.0; n],
        })
    }

    /// Builds a grid by evaluating `f` at every 1-based lattice index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = check_dims(dims)?;
        let mut values = Vec::with_capacity(n);
        let mut idx = vec![1usize; dims.len()];
        for _ in 0..n {
            values.push(f(&idx));
            advance_index(&mut idx, dims);
        }
        GridField::new(dims.to_vec(), values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat offset of a 1-based index, or `None` when out of range.
    pub fn flat_index(&self, idx: &[usize]) -> Option<usize> {
        if idx.len() != self.dims.len() {
            return None;
        }
        let mut flat = 0usize;
        for (&i, &m) in idx.iter().zip(&self.dims) {
            if i == 0 || i > m {
                return None;
            }
            flat = flat * m + (i - 1);
        }
        Some(flat)
    }

    pub fn get(&self, idx: &[usize]) -> Option<f64> {
        self.flat_index(idx).map(|f| self.values[f])
    }

    /// 1-based lattice index of a flat offset.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            idx[k] = flat % self.dims[k] + 1;
            flat /= self.dims[k];
        }
        idx
    }

    /// Entrywise sum of two grids with equal dims.
    pub fn add(&self, other: &GridField) -> Result<GridField> {
        if self.dims != other.dims {
            return Err(Error::InvalidDims(format!(
                "cannot add grids with dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        GridField::new(self.dims.clone(), values)
    }

    pub fn negated(&self) -> GridField {
        GridField {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Swaps axes 1 and 2 of a 2-d grid.
    pub fn transposed(&self) -> Result<GridField> {
        if self.d() != 2 {
            return Err(Error::InvalidDims("transpose needs d = 2".into()));
        }
        let (r, c) = (self.dims[0], self.dims[1]);
        let mut values = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                values[j * r + i] = self.values[i * c + j];
            }
        }
        Ok(GridField {
            dims: vec![c, r],
            values,
        })
    }

    /// Mirrors the grid along `axis` (0-based).
    pub fn reversed_axis(&self, axis: usize) -> Result<GridField> {
        if axis >= self.d() {
            return Err(Error::InvalidDims(format!("no axis {}", axis)));
        }
        let dims = self.dims.clone();
        GridField::from_fn(&dims, |idx| {
            let mut src = idx.to_vec();
            src[axis] = dims[axis] + 1 - idx[axis];
            self.values[self.flat_index(&src).unwrap()]
        })
    }
}

/// Advances a 1-based row-major odometer with axis `k` in `1..=limit[k]`.
/// Returns false on wrap-around.
fn advance_index(idx: &mut [usize], limit: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        if idx[k] < limit[k] {
            idx[k] += 1;
            return true;
        }
        idx[k] = 1;
    }
    false
}

/// Axis-aligned lattice rectangle with 1-based inclusive bounds per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl Rect {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        Rect { lo, hi }
    }

    pub fn full(dims: &[usize]) -> Self {
        Rect {
            lo: vec![1; dims.len()],
            hi: dims.to_vec(),
        }
    }

    /// Rectangle with given per-axis lengths and lower corner.
    pub fn from_lengths(lo: Vec<usize>, lengths: &[usize]) -> Self {
        let hi = lo.iter().zip(lengths).map(|(&l, &n)| l + n - 1).collect();
        Rect { lo, hi }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.lo.len() != dims.len() || self.hi.len() != dims.len() {
            return Err(Error::InvalidRect(format!(
                "rect has {}/{} bounds for a {}-dimensional grid",
                self.lo.len(),
                self.hi.len(),
                dims.len()
            )));
        }
        for k in 0..dims.len() {
            if self.lo[k] < 1 || self.lo[k] > self.hi[k] || self.hi[k] > dims[k] {
                return Err(Error::InvalidRect(format!(
                    "axis {}: need 1 <= {} <= {} <= {}",
                    k + 1,
                    self.lo[k],
                    self.hi[k],
                    dims[k]
                )));
            }
        }
        Ok(())
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h + 1 - l).collect()
    }

    pub fn point_count(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h + 1 - l).product()
    }

    /// Fraction of lattice points covered: the discrete stand-in for the box volume.
    pub fn fraction(&self, dims: &[usize]) -> f64 {
        self.point_count() as f64 / dims.iter().product::<usize>() as f64
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&i, (&l, &h))| l <= i && i <= h)
    }

    /// Visits every 1-based lattice index inside the rectangle in row-major order.
    pub fn for_each_index(&self, mut f: impl FnMut(&[usize])) {
        let mut idx = self.lo.clone();
        loop {
            f(&idx);
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if idx[k] < self.hi[k] {
                    idx[k] += 1;
                    break;
                }
                idx[k] = self.lo[k];
            }
        }
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| format!("{}..{}", l, h))
            .collect();
        write!(f, "[{}]", parts.join(" x "))
    }
}

/// Bounds on the side length (in lattice points) applied to every axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScaleFilter {
    pub min_side: Option<usize>,
    pub max_side: Option<usize>,
}

impl ScaleFilter {
    pub fn accepts(&self, lengths: &[usize]) -> bool {
        lengths.iter().all(|&l| {
            self.min_side.is_none_or(|lo| l >= lo) && self.max_side.is_none_or(|hi| l <= hi)
        })
    }

    pub fn is_unrestricted(&self) -> bool {
        self.min_side.is_none() && self.max_side.is_none()
    }
}

/// All per-axis length tuples admitted by `filter`, in lexicographic order.
pub fn size_classes(dims: &[usize], filter: Option<&ScaleFilter>) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if dims.is_empty() || dims.contains(&0) {
        return out;
    }
    let mut lengths = vec![1usize; dims.len()];
    loop {
        if filter.is_none_or(|f| f.accepts(&lengths)) {
            out.push(lengths.clone());
        }
        if !advance_index(&mut lengths, dims) {
            break;
        }
    }
    out
}

/// Closed-form count of all nonempty lattice rectangles: the product of m(m+1)/2.
pub fn rect_count(dims: &[usize]) -> u128 {
    dims.iter()
        .map(|&m| (m as u128) * (m as u128 + 1) / 2)
        .product()
}

/// Iterator over every lattice rectangle, ordered by per-axis lengths and then by lower corner.
pub struct RectIter {
    dims: Vec<usize>,
    classes: std::vec::IntoIter<Vec<usize>>,
    current: Option<(Vec<usize>, Vec<usize>)>,
}

impl Iterator for RectIter {
    type Item = Rect;

    fn next(&mut self) -> Option<Rect> {
        loop {
            if let Some((lengths, lo)) = &mut self.current {
                let rect = Rect::from_lengths(lo.clone(), lengths);
                // advance lo over 1..=m_k - l_k + 1
                let mut k = lo.len();
                let mut done = true;
                while k > 0 {
                    k -= 1;
                    if lo[k] + lengths[k] <= self.dims[k] {
                        lo[k] += 1;
                        done = false;
                        break;
                    }
                    lo[k] = 1;
                }
                if done {
                    self.current = None;
                }
                return Some(rect);
            }
            let lengths = self.classes.next()?;
            let lo = vec![1usize; lengths.len()];
            self.current = Some((lengths, lo));
        }
    }
}

pub fn enumerate_rects(dims: &[usize], filter: Option<&ScaleFilter>) -> RectIter {
    RectIter {
        dims: dims.to_vec(),
        classes: size_classes(dims, filter).into_iter(),
        current: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTable {
    dims: Vec<usize>,
    padded_strides: Vec<usize>,
    cumulative: Vec<f64>,
}

/// Builds the zero-padded cumulative-sum table of `grid`.
///
/// Accumulates one axis at a time, so the cost is `O(d * prod m_k)`. Grids with
/// an axis of at least [`COMPENSATED_THRESHOLD`] points use Neumaier-compensated
/// running sums.
pub fn build_prefix(grid: &GridField) -> Result<PrefixTable> {
    let total_abs: f64 = grid.values.iter().map(|v| v.abs()).sum();
    if !total_abs.is_finite() {
        return Err(Error::Overflow);
    }
    let dims = grid.dims.clone();
    let padded: Vec<usize> = dims.iter().map(|m| m + 1).collect();
    let strides = strides_for(&padded);
    let size: usize = padded.iter().product();
    let mut cumulative = vec![0.0f64; size];

    // scatter values into the interior
    let mut idx = vec![1usize; dims.len()];
    for &v in &grid.values {
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        cumulative[flat] = v;
        advance_index(&mut idx, &dims);
    }

    let compensated = dims.iter().any(|&m| m >= COMPENSATED_THRESHOLD);
    for axis in 0..dims.len() {
        let stride = strides[axis];
        let len = padded[axis];
        // every line along `axis` starts at an index whose axis coordinate is 0
        for start in 0..size {
            if !(start / stride).is_multiple_of(len) {
                continue;
            }
            if compensated {
                let mut sum = 0.0f64;
                let mut comp = 0.0f64;
                for i in 1..len {
                    let at = start + i * stride;
                    let x = cumulative[at];
                    let t = sum + x;
                    if sum.abs() >= x.abs() {
                        comp += (sum - t) + x;
                    } else {
                        comp += (x - t) + sum;
                    }
                    sum = t;
                    cumulative[at] = sum + comp;
                }
            } else {
                for i in 1..len {
                    let at = start + i * stride;
                    cumulative[at] += cumulative[at - stride];
                }
            }
        }
    }
    Ok(PrefixTable {
        dims,
        padded_strides: strides,
        cumulative,
    })
}

impl PrefixTable {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn total_points(&self) -> usize {
        self.dims.iter().product()
    }

    /// Cumulative sum up to and including the 1-based index `idx` (0 on any axis gives 0).
    pub fn cumulative_at(&self, idx: &[usize]) -> f64 {
        let flat: usize = idx.iter().zip(&self.padded_strides).map(|(i, s)| i * s).sum();
        self.cumulative[flat]
    }

    pub fn total(&self) -> f64 {
        self.cumulative_at(&self.dims)
    }

    pub fn rect_sum(&self, rect: &Rect) -> Result<f64> {
        rect.validate(&self.dims)?;
        Ok(self.rect_sum_unchecked(rect))
    }

    pub(crate) fn rect_sum_unchecked(&self, rect: &Rect) -> f64 {
        let base: usize = rect
            .lo
            .iter()
            .zip(&self.padded_strides)
            .map(|(l, s)| (l - 1) * s)
            .sum();
        let lengths = rect.lengths();
        self.corners(&lengths)
            .iter()
            .map(|&(off, sign)| sign * self.cumulative[base + off])
            .sum()
    }

    /// Inclusion-exclusion corner offsets (relative to the padded `lo - 1` corner)
    /// and signs for rectangles with the given per-axis lengths.
    pub(crate) fn corners(&self, lengths: &[usize]) -> Vec<(usize, f64)> {
        let d = lengths.len();
        (0..(1usize << d))
            .map(|mask| {
                let mut off = 0usize;
                for k in 0..d {
                    if mask & (1 << k) != 0 {
                        off += lengths[k] * self.padded_strides[k];
                    }
                }
                let sign = if (d - mask.count_ones() as usize).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                (off, sign)
            })
            .collect()
    }

    pub(crate) fn padded_strides(&self) -> &[usize] {
        &self.padded_strides
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.cumulative
    }
}
