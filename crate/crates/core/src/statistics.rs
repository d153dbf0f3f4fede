//! Test statistics over the lattice-rectangle family.
//!
//! Every statistic is a reduction over the normalized rectangle statistic
//! `psi_hat(B) = sum_{j in B} w_j Y_j / sqrt(sum_{j in B} w_j^2)`; for the box
//! indicator this is `sum_B Y / sqrt(#B)` and is evaluated in O(1) from a
//! prefix table. Rectangles are grouped by their per-axis lengths ("size
//! classes"): the penalty depends on a rectangle only through its point
//! fraction `r(B) = #B / prod m_k`, so within a class the penalized score is a
//! monotone function of `|psi_hat|` and only the class maximum is needed.
//!
//! Size classes are processed in parallel but collected and reduced in
//! enumeration order, so values and argmax rectangles do not depend on the
//! number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_prefix, size_classes, strides_for, GridField, PrefixTable, Rect, ScaleFilter};
use crate::kernels::{sampled_weights, Kernel, KernelKind, ScaledKernel};
use crate::penalties::{d_norm, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticKind {
    Multiscale,
    MultiscaleStar,
    Scan,
    Alr,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 4] = [
        StatisticKind::Multiscale,
        StatisticKind::MultiscaleStar,
        StatisticKind::Scan,
        StatisticKind::Alr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticKind::Multiscale => "multiscale",
            StatisticKind::MultiscaleStar => "multiscale-star",
            StatisticKind::Scan => "scan",
            StatisticKind::Alr => "alr",
        }
    }

    /// Whether the statistic subtracts a scale penalty.
    pub fn is_penalized(&self) -> bool {
        matches!(self, StatisticKind::Multiscale | StatisticKind::MultiscaleStar)
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown statistic {:?}; expected multiscale, multiscale-star, scan or alr",
                    s
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub kind: StatisticKind,
    pub penalty: PenaltySpec,
    pub kernel: KernelKind,
    pub scale_filter: ScaleFilter,
}

impl StatisticSpec {
    pub fn new(kind: StatisticKind) -> Self {
        StatisticSpec {
            kind,
            penalty: PenaltySpec::Standard,
            kernel: KernelKind::Indicator,
            scale_filter: ScaleFilter::default(),
        }
    }

    pub fn multiscale() -> Self {
        Self::new(StatisticKind::Multiscale)
    }

    pub fn multiscale_star() -> Self {
        Self::new(StatisticKind::MultiscaleStar)
    }

    pub fn scan() -> Self {
        Self::new(StatisticKind::Scan)
    }

    pub fn alr() -> Self {
        Self::new(StatisticKind::Alr)
    }

    pub fn with_penalty(mut self, penalty: PenaltySpec) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelKind) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_filter(mut self, filter: ScaleFilter) -> Self {
        self.scale_filter = filter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_penalized() && !self.kernel.is_indicator() {
            return Err(Error::UnsupportedKernel(format!(
                "{} requires the indicator kernel, got {}",
                self.kind, self.kernel
            )));
        }
        if let KernelKind::HolderBump { beta } = self.kernel {
            KernelKind::holder(beta)?;
        }
        if let PenaltySpec::GammaV { v } = self.penalty {
            PenaltySpec::gamma_v(v)?;
        }
        Ok(())
    }

    /// Penalty actually applied; scan and ALR ignore the configured one.
    pub fn effective_penalty(&self) -> Option<PenaltySpec> {
        self.kind.is_penalized().then_some(self.penalty)
    }

    /// Canonical text of the fields that change the statistic's value.
    pub fn canonical(&self) -> String {
        let v = self.effective_penalty().map_or("none".to_string(), |p| p.v().to_string());
        let variant = match self.effective_penalty() {
            None => "none",
            Some(PenaltySpec::Standard) => "standard",
            Some(PenaltySpec::GammaV { .. }) => "gamma_v",
        };
        format!(
            "stat={};kernel={};V={};penalty={};filter={}..{}",
            self.kind,
            self.kernel,
            v,
            variant,
            self.scale_filter.min_side.map_or("".into(), |x| x.to_string()),
            self.scale_filter.max_side.map_or("".into(), |x| x.to_string()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMax {
    pub lengths: Vec<usize>,
    pub max_abs_psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub kind: StatisticKind,
    /// The statistic; for ALR this is `log A_n`.
    pub value: f64,
    /// First maximizer in enumeration order (largest `|psi_hat|` for scan and ALR).
    pub argmax_rect: Rect,
    pub per_scale_max: Option<Vec<ScaleMax>>,
    pub rect_count: u64,
}

impl DetectionResult {
    /// `A_n` itself for an ALR result, when it is representable.
    pub fn alr_linear(&self) -> Option<f64> {
        if self.kind != StatisticKind::Alr {
            return None;
        }
        let a = self.value.exp();
        a.is_finite().then_some(a)
    }
}

/// `sum_B Y / sqrt(#B)`.
pub fn psi_hat_rect(table: &PrefixTable, rect: &Rect) -> Result<f64> {
    let s = table.rect_sum(rect)?;
    Ok(s / (rect.point_count() as f64).sqrt())
}

/// `sum_j w_j Y_j / sqrt(sum_j w_j^2)` over the lattice points in the kernel's support.
pub fn psi_hat_kernel(grid: &GridField, sk: &ScaledKernel) -> Result<f64> {
    let w = sampled_weights(sk, grid.dims())?;
    let s: f64 = w
        .entries
        .iter()
        .map(|(idx, wt)| wt * grid.get(idx).unwrap())
        .sum();
    Ok(s / w.norm)
}

#[derive(Debug, Clone)]
struct SizeClass {
    lengths: Vec<usize>,
    points: usize,
    /// Number of admissible lower corners per axis.
    span: Vec<usize>,
}

/// The rectangle family of one grid shape under a scale filter, grouped by size class.
#[derive(Debug, Clone)]
pub struct RectFamily {
    dims: Vec<usize>,
    classes: Vec<SizeClass>,
    total_points: usize,
    rect_count: u64,
}

impl RectFamily {
    pub fn new(dims: &[usize], filter: &ScaleFilter) -> Result<Self> {
        GridField::zeros(dims)?;
        let classes: Vec<SizeClass> = size_classes(dims, Some(filter))
            .into_iter()
            .map(|lengths| {
                let span = dims.iter().zip(&lengths).map(|(m, l)| m - l + 1).collect();
                SizeClass {
                    points: lengths.iter().product(),
                    lengths,
                    span,
                }
            })
            .collect();
        if classes.is_empty() {
            return Err(Error::EmptyEnumeration);
        }
        let rect_count = classes
            .iter()
            .map(|c| c.span.iter().product::<usize>() as u64)
            .sum();
        Ok(RectFamily {
            dims: dims.to_vec(),
            classes,
            total_points: dims.iter().product(),
            rect_count,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rect_count(&self) -> u64 {
        self.rect_count
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    fn fraction(&self, c: &SizeClass) -> f64 {
        c.points as f64 / self.total_points as f64
    }

    fn rect_at(&self, class: usize, mut pos: usize) -> Rect {
        let c = &self.classes[class];
        let mut lo = vec![0usize; c.span.len()];
        for k in (0..c.span.len()).rev() {
            lo[k] = pos % c.span[k] + 1;
            pos /= c.span[k];
        }
        Rect::from_lengths(lo, &c.lengths)
    }
}

/// Per-class maximum of `|psi_hat|` with its first maximizer, and optionally the
/// pieces of a log-sum-exp of `psi_hat^2 / 2` over the class.
#[derive(Debug, Clone, Copy)]
struct ClassSummary {
    max_abs_psi: f64,
    argmax_pos: usize,
    /// `(x_max, sum exp(x - x_max))` with `x = psi_hat^2 / 2`.
    lse: Option<(f64, f64)>,
}

/// Calls `f(position, rect_sum)` for every placement of a class, in row-major order of lower corners.
#[inline]
fn for_each_rect_sum(table: &PrefixTable, c: &SizeClass, mut f: impl FnMut(usize, f64)) {
    let raw = table.raw();
    let strides = table.padded_strides();
    let d = c.lengths.len();
    let inner = c.span[d - 1];
    let outer_count: usize = c.span[..d - 1].iter().product();
    let mut outer = vec![0usize; d - 1];
    let mut pos = 0usize;
    let corners = table.corners(&c.lengths);
    for _ in 0..outer_count {
        let base: usize = outer.iter().zip(strides).map(|(o, s)| o * s).sum();
        match d {
            1 => {
                let a = c.lengths[0];
                for j in 0..inner {
                    let x = base + j;
                    f(pos + j, raw[x + a] - raw[x]);
                }
            }
            2 => {
                let a = c.lengths[0] * strides[0];
                let b = c.lengths[1];
                for j in 0..inner {
                    let x = base + j;
                    f(pos + j, raw[x + a + b] - raw[x + a] - raw[x + b] + raw[x]);
                }
            }
            _ => {
                for j in 0..inner {
                    let x = base + j;
                    let s: f64 = corners.iter().map(|&(off, sign)| sign * raw[x + off]).sum();
                    f(pos + j, s);
                }
            }
        }
        pos += inner;
        for k in (0..d - 1).rev() {
            outer[k] += 1;
            if outer[k] < c.span[k] {
                break;
            }
            outer[k] = 0;
        }
    }
}

fn summarize_indicator_class(table: &PrefixTable, c: &SizeClass, want_lse: bool) -> ClassSummary {
    let mut best = -1.0f64;
    let mut best_pos = 0usize;
    for_each_rect_sum(table, c, |pos, s| {
        let a = s.abs();
        if a > best {
            best = a;
            best_pos = pos;
        }
    });
    let inv_sqrt = 1.0 / (c.points as f64).sqrt();
    let lse = want_lse.then(|| {
        let half_inv = 0.5 / c.points as f64;
        let x_max = best * best * half_inv;
        let mut acc = 0.0f64;
        for_each_rect_sum(table, c, |_, s| acc += (s * s * half_inv - x_max).exp());
        (x_max, acc)
    });
    ClassSummary {
        max_abs_psi: best * inv_sqrt,
        argmax_pos: best_pos,
        lse,
    }
}

fn summarize_kernel_class(grid: &GridField, kernel: &Kernel, c: &SizeClass) -> ClassSummary {
    let weights = kernel.rect_weights(&c.lengths);
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let strides = strides_for(grid.dims());
    // flat offsets of the rectangle's points relative to its lower corner, row-major
    let mut offsets = Vec::with_capacity(weights.len());
    Rect::from_lengths(vec![1; c.lengths.len()], &c.lengths).for_each_index(|idx| {
        offsets.push(idx.iter().zip(&strides).map(|(i, s)| (i - 1) * s).sum::<usize>());
    });
    let values = grid.values();
    let positions: usize = c.span.iter().product();
    let mut lo = vec![0usize; c.span.len()];
    let mut best = -1.0f64;
    let mut best_pos = 0usize;
    for pos in 0..positions {
        let base: usize = lo.iter().zip(&strides).map(|(l, s)| l * s).sum();
        let s: f64 = offsets
            .iter()
            .zip(&weights)
            .map(|(&off, &w)| w * values[base + off])
            .sum();
        let a = s.abs();
        if a > best {
            best = a;
            best_pos = pos;
        }
        for k in (0..lo.len()).rev() {
            lo[k] += 1;
            if lo[k] < c.span[k] {
                break;
            }
            lo[k] = 0;
        }
    }
    let max_abs_psi = if norm > 0.0 { best / norm } else { 0.0 };
    ClassSummary {
        max_abs_psi,
        argmax_pos: best_pos,
        lse: None,
    }
}

/// Class summaries of one grid, in enumeration order.
struct Summary {
    classes: Vec<ClassSummary>,
}

fn summarize(
    family: &RectFamily,
    grid: &GridField,
    table: Option<&PrefixTable>,
    kernel: KernelKind,
    want_lse: bool,
) -> Result<Summary> {
    let classes = match kernel {
        KernelKind::Indicator => {
            let owned;
            let table = match table {
                Some(t) => t,
                None => {
                    owned = build_prefix(grid)?;
                    &owned
                }
            };
            family
                .classes
                .par_iter()
                .map(|c| summarize_indicator_class(table, c, want_lse))
                .collect()
        }
        KernelKind::HolderBump { .. } => {
            let k = Kernel::new(kernel, grid.d())?;
            family
                .classes
                .par_iter()
                .map(|c| summarize_kernel_class(grid, &k, c))
                .collect()
        }
    };
    Ok(Summary { classes })
}

/// Penalized maximum over classes; returns `(value, class index)`.
fn reduce_penalized(family: &RectFamily, s: &Summary, penalty: PenaltySpec, use_d: bool) -> Result<(f64, usize)> {
    let mut best = f64::NEG_INFINITY;
    let mut best_class = 0;
    for (i, (c, cs)) in family.classes.iter().zip(&s.classes).enumerate() {
        let r = family.fraction(c);
        let mut v = cs.max_abs_psi - penalty.penalty(r)?;
        if use_d {
            v /= d_norm(r)?;
        }
        if v > best {
            best = v;
            best_class = i;
        }
    }
    Ok((best, best_class))
}

fn reduce_max(s: &Summary) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_class = 0;
    for (i, cs) in s.classes.iter().enumerate() {
        if cs.max_abs_psi > best {
            best = cs.max_abs_psi;
            best_class = i;
        }
    }
    (best, best_class)
}

/// `log( (1/|family|) sum_B exp(psi_hat(B)^2 / 2) )`, merging class partials in order.
fn reduce_log_alr(family: &RectFamily, s: &Summary) -> f64 {
    let x_max = s
        .classes
        .iter()
        .map(|c| c.lse.expect("lse requested").0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0f64;
    for c in &s.classes {
        let (xm, acc) = c.lse.unwrap();
        total += acc * (xm - x_max).exp();
    }
    x_max + total.ln() - (family.rect_count as f64).ln()
}

fn value_from_summary(family: &RectFamily, spec: &StatisticSpec, s: &Summary) -> Result<(f64, usize)> {
    match spec.kind {
        StatisticKind::Multiscale => reduce_penalized(family, s, spec.penalty, spec.penalty.uses_d_norm()),
        StatisticKind::MultiscaleStar => reduce_penalized(family, s, spec.penalty, false),
        StatisticKind::Scan => Ok(reduce_max(s)),
        StatisticKind::Alr => Ok((reduce_log_alr(family, s), reduce_max(s).1)),
    }
}

fn check_grid_shape(family: &RectFamily, grid: &GridField) -> Result<()> {
    if family.dims != grid.dims() {
        return Err(Error::InvalidDims(format!(
            "evaluator built for {:?}, grid has {:?}",
            family.dims,
            grid.dims()
        )));
    }
    Ok(())
}

/// Evaluates a fixed list of statistics on many grids of one shape, sharing the
/// prefix table and the per-class scan between statistics that use the same
/// kernel and scale filter.
#[derive(Debug, Clone)]
pub struct Evaluator {
    specs: Vec<StatisticSpec>,
    /// One family per distinct (kernel, filter) group, and the group of each spec.
    groups: Vec<(KernelKind, ScaleFilter, RectFamily, bool)>,
    group_of: Vec<usize>,
}

impl Evaluator {
    pub fn new(dims: &[usize], specs: &[StatisticSpec]) -> Result<Self> {
        let mut groups: Vec<(KernelKind, ScaleFilter, RectFamily, bool)> = Vec::new();
        let mut group_of = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            let want_lse = spec.kind == StatisticKind::Alr;
            let found = groups
                .iter()
                .position(|(k, f, _, _)| *k == spec.kernel && *f == spec.scale_filter);
            let g = match found {
                Some(g) => {
                    groups[g].3 |= want_lse;
                    g
                }
                None => {
                    groups.push((
                        spec.kernel,
                        spec.scale_filter,
                        RectFamily::new(dims, &spec.scale_filter)?,
                        want_lse,
                    ));
                    groups.len() - 1
                }
            };
            group_of.push(g);
        }
        Ok(Evaluator {
            specs: specs.to_vec(),
            groups,
            group_of,
        })
    }

    pub fn specs(&self) -> &[StatisticSpec] {
        &self.specs
    }

    fn summaries(&self, grid: &GridField) -> Result<Vec<Summary>> {
        let needs_table = self.groups.iter().any(|g| g.0.is_indicator());
        let table = if needs_table { Some(build_prefix(grid)?) } else { None };
        self.groups
            .iter()
            .map(|(kernel, _, family, lse)| {
                check_grid_shape(family, grid)?;
                summarize(family, grid, table.as_ref(), *kernel, *lse)
            })
            .collect()
    }

    /// Statistic values, one per spec.
    pub fn values(&self, grid: &GridField) -> Result<Vec<f64>> {
        let sums = self.summaries(grid)?;
        self.specs
            .iter()
            .zip(&self.group_of)
            .map(|(spec, &g)| value_from_summary(&self.groups[g].2, spec, &sums[g]).map(|v| v.0))
            .collect()
    }

    /// Full detection results, one per spec.
    pub fn detect(&self, grid: &GridField) -> Result<Vec<DetectionResult>> {
        let sums = self.summaries(grid)?;
        self.specs
            .iter()
            .zip(&self.group_of)
            .map(|(spec, &g)| {
                let family = &self.groups[g].2;
                let s = &sums[g];
                let (value, class) = value_from_summary(family, spec, s)?;
                let per_scale_max = family
                    .classes
                    .iter()
                    .zip(&s.classes)
                    .map(|(c, cs)| ScaleMax {
                        lengths: c.lengths.clone(),
                        max_abs_psi: cs.max_abs_psi,
                    })
                    .collect();
                Ok(DetectionResult {
                    kind: spec.kind,
                    value,
                    argmax_rect: family.rect_at(class, s.classes[class].argmax_pos),
                    per_scale_max: Some(per_scale_max),
                    rect_count: family.rect_count,
                })
            })
            .collect()
    }
}

fn expect_kind(spec: &StatisticSpec, kind: StatisticKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidParameter(format!(
            "spec is {}, expected {}",
            spec.kind, kind
        )));
    }
    Ok(())
}

/// Dispatches on `spec.kind`.
pub fn evaluate(grid: &GridField, spec: &StatisticSpec) -> Result<DetectionResult> {
    let ev = Evaluator::new(grid.dims(), std::slice::from_ref(spec))?;
    Ok(ev.detect(grid)?.remove(0))
}

/// `sup_B (|psi_hat(B)| - Gamma(r(B))) / D(r(B))`.
pub fn multiscale_t(grid: &GridField, spec: &StatisticSpec) -> Result<DetectionResult> {
    expect_kind(spec, StatisticKind::Multiscale)?;
    evaluate(grid, spec)
}

/// `sup_B |psi_hat(B)| - Gamma(r(B))`, or with `Gamma_V` under a `GammaV` penalty.
pub fn multiscale_t_star(grid: &GridField, spec: &StatisticSpec) -> Result<DetectionResult> {
    expect_kind(spec, StatisticKind::MultiscaleStar)?;
    evaluate(grid, spec)
}

/// `max_B |psi_hat(B)|`.
pub fn scan_mn(grid: &GridField, spec: &StatisticSpec) -> Result<DetectionResult> {
    expect_kind(spec, StatisticKind::Scan)?;
    evaluate(grid, spec)
}

/// `log A_n` with `A_n` the mean of `exp(psi_hat(B)^2 / 2)` over the family.
pub fn alr_an(grid: &GridField, spec: &StatisticSpec) -> Result<DetectionResult> {
    expect_kind(spec, StatisticKind::Alr)?;
    evaluate(grid, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid2(v: [[f64; 2]; 2]) -> GridField {
        GridField::new(vec![2, 2], vec![v[0][0], v[0][1], v[1][0], v[1][1]]).unwrap()
    }

    #[test]
    fn psi_hat_examples() {
        let ones = GridField::from_fn(&[3, 3], |_| 1.0).unwrap();
        let t = build_prefix(&ones).unwrap();
        assert_eq!(psi_hat_rect(&t, &Rect::new(vec![1, 1], vec![2, 2])).unwrap(), 2.0);
        let z = build_prefix(&GridField::zeros(&[3, 3]).unwrap()).unwrap();
        assert_eq!(psi_hat_rect(&z, &Rect::new(vec![1, 2], vec![3, 3])).unwrap(), 0.0);
        let sk = ScaledKernel::for_rect(Kernel::indicator(2), &Rect::new(vec![2, 2], vec![3, 3]), &[3, 3]).unwrap();
        assert_eq!(psi_hat_kernel(&ones, &sk).unwrap(), 2.0);
        let line = GridField::from_fn(&[4], |_| 1.0).unwrap();
        let bump = ScaledKernel::new(Kernel::holder(1.0, 1).unwrap(), vec![0.5], vec![0.5]).unwrap();
        assert_abs_diff_eq!(psi_hat_kernel(&line, &bump).unwrap(), 2.0 / 1.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(psi_hat_kernel(&line, &bump).unwrap(), 1.632993161855452, epsilon = 1e-12);
        assert_eq!(psi_hat_kernel(&GridField::zeros(&[4]).unwrap(), &bump).unwrap(), 0.0);
    }

    #[test]
    fn single_cell_grid() {
        let g = GridField::new(vec![1, 1], vec![-1.7]).unwrap();
        assert_abs_diff_eq!(multiscale_t(&g, &StatisticSpec::multiscale()).unwrap().value, 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(
            multiscale_t_star(&g, &StatisticSpec::multiscale_star()).unwrap().value,
            1.7,
            epsilon = 1e-15
        );
        assert_eq!(scan_mn(&g, &StatisticSpec::scan()).unwrap().value, 1.7);
        let a = alr_an(&g, &StatisticSpec::alr()).unwrap();
        assert_abs_diff_eq!(a.value, 1.7 * 1.7 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.alr_linear().unwrap(), (1.445f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn zero_grid_values() {
        let z = GridField::zeros(&[4, 4]).unwrap();
        assert_eq!(evaluate(&z, &StatisticSpec::scan()).unwrap().value, 0.0);
        assert_eq!(evaluate(&z, &StatisticSpec::alr()).unwrap().value, 0.0);
        let r = evaluate(&z, &StatisticSpec::alr()).unwrap();
        assert_eq!(r.alr_linear(), Some(1.0));
        assert_eq!(r.rect_count, 100);
    }

    #[test]
    fn two_by_two_multiscale_by_hand() {
        let g = grid2([[0.3, -1.2], [2.0, 0.4]]);
        let mut best = f64::NEG_INFINITY;
        for r in crate::grid::enumerate_rects(&[2, 2], None) {
            let mut s = 0.0;
            r.for_each_index(|i| s += g.get(i).unwrap());
            let c = r.point_count() as f64;
            let frac = c / 4.0;
            let v = ((s / c.sqrt()).abs() - crate::penalties::gamma_pen(frac).unwrap())
                / crate::penalties::d_norm(frac).unwrap();
            best = best.max(v);
        }
        let t = multiscale_t(&g, &StatisticSpec::multiscale()).unwrap();
        assert_abs_diff_eq!(t.value, best, epsilon = 1e-12);
        assert_eq!(t.rect_count, 9);
    }

    #[test]
    fn spike_is_found_by_scan() {
        let g = GridField::from_fn(&[5], |i| if i[0] == 3 { 4.0 } else { 0.0 }).unwrap();
        let r = scan_mn(&g, &StatisticSpec::scan()).unwrap();
        assert_eq!(r.value, 4.0);
        assert_eq!(r.argmax_rect, Rect::new(vec![3], vec![3]));
    }

    #[test]
    fn kind_mismatch_and_kernel_restrictions() {
        let g = GridField::zeros(&[3]).unwrap();
        assert!(scan_mn(&g, &StatisticSpec::alr()).is_err());
        let bad = StatisticSpec::scan().with_kernel(KernelKind::HolderBump { beta: 1.0 });
        assert!(matches!(evaluate(&g, &bad), Err(Error::UnsupportedKernel(_))));
        let f = ScaleFilter {
            min_side: Some(4),
            max_side: None,
        };
        assert_eq!(
            evaluate(&g, &StatisticSpec::scan().with_filter(f)).unwrap_err(),
            Error::EmptyEnumeration
        );
    }

    #[test]
    fn star_equals_multiscale_without_d() {
        let g = GridField::from_fn(&[4, 3], |i| (i[0] as f64 * 1.3 - i[1] as f64).sin()).unwrap();
        let family = RectFamily::new(&[4, 3], &ScaleFilter::default()).unwrap();
        let s = summarize(&family, &g, None, KernelKind::Indicator, false).unwrap();
        let forced = reduce_penalized(&family, &s, PenaltySpec::Standard, false).unwrap().0;
        let star = multiscale_t_star(&g, &StatisticSpec::multiscale_star()).unwrap().value;
        assert_eq!(forced, star);
    }

    #[test]
    fn spec_strings() {
        for k in StatisticKind::ALL {
            assert_eq!(k.as_str().parse::<StatisticKind>().unwrap(), k);
        }
        assert!("median".parse::<StatisticKind>().is_err());
        let a = StatisticSpec::alr().with_penalty(PenaltySpec::GammaV { v: 3.0 });
        assert_eq!(a.canonical(), StatisticSpec::alr().canonical());
        assert_ne!(
            StatisticSpec::multiscale().canonical(),
            StatisticSpec::multiscale()
                .with_penalty(PenaltySpec::GammaV { v: 1.0 })
                .canonical()
        );
    }
}
