//! Kernel functions on `[-1, 1]^d`: the box indicator and the Hölder bumps
//! `(1 - |x|^beta)_+` for `beta` in `(0, 1]`, with Euclidean `|x|`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Rect;

/// Default midpoint-rule resolution per axis for d = 1, 2, 3 (and above).
pub fn default_quad_res(d: usize) -> usize {
    match d {
        1 => 2001,
        2 => 501,
        _ => 121,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Indicator,
    HolderBump { beta: f64 },
}

impl KernelKind {
    pub fn holder(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "holder exponent {} outside (0, 1]",
                beta
            )));
        }
        Ok(KernelKind::HolderBump { beta })
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, KernelKind::Indicator)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Indicator => write!(f, "indicator"),
            KernelKind::HolderBump { beta } => write!(f, "holder:{}", beta),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "indicator" {
            return Ok(KernelKind::Indicator);
        }
        if let Some(beta) = s.strip_prefix("holder:") {
            let beta = beta
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("kernel {:?}: {}", s, e)))?;
            return KernelKind::holder(beta);
        }
        Err(Error::Parse(format!(
            "unknown kernel {:?}; expected \"indicator\" or \"holder:<beta>\"",
            s
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub d: usize,
}

impl Kernel {
    pub fn new(kind: KernelKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDims("kernel dimension must be >= 1".into()));
        }
        if let KernelKind::HolderBump { beta } = kind {
            KernelKind::holder(beta)?;
        }
        Ok(Kernel { kind, d })
    }

    pub fn indicator(d: usize) -> Self {
        Kernel {
            kind: KernelKind::Indicator,
            d,
        }
    }

    pub fn holder(beta: f64, d: usize) -> Result<Self> {
        Kernel::new(KernelKind::holder(beta)?, d)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Indicator => {
                if x.iter().all(|v| v.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::HolderBump { beta } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= 1.0 {
                    1.0 - norm.powf(beta)
                } else {
                    0.0
                }
            }
        }
    }

    /// Squared L2 norm by the tensor midpoint rule with `quad_res` nodes per axis.
    pub fn l2_norm_sq(&self, quad_res: usize) -> f64 {
        midpoint_integral(self.d, quad_res, |x| {
            let v = self.eval_unchecked(x);
            v * v
        })
    }

    pub fn inner_product(&self, other: &Kernel, quad_res: usize) -> Result<f64> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        Ok(midpoint_integral(self.d, quad_res, |x| {
            self.eval_unchecked(x) * other.eval_unchecked(x)
        }))
    }

    /// Weights at the lattice points of a rectangle with the given per-axis
    /// lengths, in row-major order, for the kernel centred on the rectangle's
    /// midpoint with half-width `length / 2` lattice steps on each axis.
    pub fn rect_weights(&self, lengths: &[usize]) -> Vec<f64> {
        let n: usize = lengths.iter().product();
        let mut out = Vec::with_capacity(n);
        let mut off = vec![0usize; lengths.len()];
        let mut x = vec![0.0; lengths.len()];
        for _ in 0..n {
            for k in 0..lengths.len() {
                let l = lengths[k] as f64;
                x[k] = (2.0 * off[k] as f64 - (l - 1.0)) / l;
            }
            out.push(self.eval_unchecked(&x));
            for k in (0..lengths.len()).rev() {
                off[k] += 1;
                if off[k] < lengths[k] {
                    break;
                }
                off[k] = 0;
            }
        }
        out
    }
}

fn midpoint_integral(d: usize, res: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let step = 2.0 / res as f64;
    let nodes: Vec<f64> = (0..res).map(|i| -1.0 + (i as f64 + 0.5) * step).collect();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    let count = res.pow(d as u32);
    for _ in 0..count {
        for k in 0..d {
            x[k] = nodes[idx[k]];
        }
        total += f(&x);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < res {
                break;
            }
            idx[k] = 0;
        }
    }
    total * step.powi(d as i32)
}

/// The kernel translated to `center` and dilated by `bandwidth` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledKernel {
    pub base: Kernel,
    pub center: Vec<f64>,
    pub bandwidth: Vec<f64>,
}

/// Relative slack for deciding whether a lattice point sits on the support boundary.
const BOUNDARY_EPS: f64 = 1e-9;

impl ScaledKernel {
    pub fn new(base: Kernel, center: Vec<f64>, bandwidth: Vec<f64>) -> Result<Self> {
        if center.len() != base.d || bandwidth.len() != base.d {
            return Err(Error::DimensionMismatch {
                expected: base.d,
                got: center.len().min(bandwidth.len()),
            });
        }
        if let Some(h) = bandwidth.iter().find(|h| !(**h > 0.0 && **h <= 0.5)) {
            return Err(Error::InvalidParameter(format!("bandwidth {} outside (0, 1/2]", h)));
        }
        if let Some(t) = center.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidParameter(format!("center {} outside [0, 1]", t)));
        }
        Ok(ScaledKernel {
            base,
            center,
            bandwidth,
        })
    }

    /// Centre and half-width induced by a lattice rectangle: the midpoint of the
    /// index range and half its extent, so the open support holds exactly the
    /// rectangle's lattice points.
    pub fn for_rect(base: Kernel, rect: &Rect, dims: &[usize]) -> Result<Self> {
        rect.validate(dims)?;
        let center = (0..dims.len())
            .map(|k| (rect.lo[k] + rect.hi[k]) as f64 / (2.0 * dims[k] as f64))
            .collect();
        let bandwidth = (0..dims.len())
            .map(|k| (rect.hi[k] + 1 - rect.lo[k]) as f64 / (2.0 * dims[k] as f64))
            .collect();
        ScaledKernel::new(base, center, bandwidth)
    }

    /// Whether `t` lies in `A_h`, i.e. the support stays inside the unit cube.
    pub fn in_unit_cube(&self) -> bool {
        self.center
            .iter()
            .zip(&self.bandwidth)
            .all(|(t, h)| *h <= *t + 1e-12 && *t <= 1.0 - *h + 1e-12)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.base.d {
            return Err(Error::DimensionMismatch {
                expected: self.base.d,
                got: x.len(),
            });
        }
        let u: Vec<f64> = (0..x.len())
            .map(|k| (x[k] - self.center[k]) / self.bandwidth[k])
            .collect();
        Ok(self.base.eval_unchecked(&u))
    }

    /// Lattice index range (1-based, inclusive) strictly inside the support on each axis.
    fn lattice_support(&self, dims: &[usize]) -> Option<Rect> {
        let mut lo = Vec::with_capacity(dims.len());
        let mut hi = Vec::with_capacity(dims.len());
        for k in 0..dims.len() {
            let m = dims[k] as f64;
            let a = m * (self.center[k] - self.bandwidth[k]);
            let b = m * (self.center[k] + self.bandwidth[k]);
            let first = ((a + BOUNDARY_EPS).floor() + 1.0).max(1.0);
            let last = ((b - BOUNDARY_EPS).ceil() - 1.0).min(m);
            if first > last {
                return None;
            }
            lo.push(first as usize);
            hi.push(last as usize);
        }
        Some(Rect::new(lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWeights {
    /// 1-based lattice index and kernel weight, row-major over the support.
    pub entries: Vec<(Vec<usize>, f64)>,
    /// `sqrt(sum w^2)`.
    pub norm: f64,
}

/// Evaluates the scaled kernel at every lattice point `i/m` inside its open support.
pub fn sampled_weights(sk: &ScaledKernel, dims: &[usize]) -> Result<SampledWeights> {
    if dims.len() != sk.base.d {
        return Err(Error::DimensionMismatch {
            expected: sk.base.d,
            got: dims.len(),
        });
    }
    let support = sk.lattice_support(dims).ok_or(Error::DegenerateBandwidth)?;
    let mut entries = Vec::with_capacity(support.point_count());
    let mut x = vec![0.0; dims.len()];
    let mut sq = 0.0;
    support.for_each_index(|idx| {
        for k in 0..idx.len() {
            x[k] = (idx[k] as f64 / dims[k] as f64 - sk.center[k]) / sk.bandwidth[k];
        }
        let w = sk.base.eval_unchecked(&x);
        sq += w * w;
        entries.push((idx.to_vec(), w));
    });
    if sq == 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    Ok(SampledWeights {
        entries,
        norm: sq.sqrt(),
    })
}
