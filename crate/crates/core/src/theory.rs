//! Numerical checks of two structural facts about the box family: the size
//! of packings in the symmetric-difference metric, and the growth of the
//! finest-scale statistic when the penalty constant is too small.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalties::gamma_v_pen;
use crate::simulation::{gaussian_grid, RngSpec};

const EDGE_TOL: f64 = 1e-12;

/// Axis-aligned box with center `t` and half-widths `h`, inside the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxParam {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
}

impl BoxParam {
    pub fn new(t: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != h.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: h.len(),
            });
        }
        for (&tk, &hk) in t.iter().zip(&h) {
            if !(hk > 0.0 && hk <= 0.5) {
                return Err(Error::InvalidScale(hk));
            }
            if !(tk >= hk - EDGE_TOL && tk <= 1.0 - hk + EDGE_TOL) {
                return Err(Error::InvalidParameter(format!(
                    "center {} with half-width {} leaves the unit cube",
                    tk, hk
                )));
            }
        }
        Ok(BoxParam { t, h })
    }

    pub fn d(&self) -> usize {
        self.t.len()
    }

    /// `2^d prod h_k`.
    pub fn volume(&self) -> f64 {
        self.h.iter().map(|h| 2.0 * h).product()
    }

    pub fn intersection_volume(&self, other: &BoxParam) -> f64 {
        self.t
            .iter()
            .zip(&self.h)
            .zip(other.t.iter().zip(&other.h))
            .map(|((ta, ha), (tb, hb))| (ha + hb - (ta - tb).abs()).clamp(0.0, 2.0 * ha.min(*hb)))
            .product()
    }
}

/// Square root of the volume of the symmetric difference.
pub fn sym_diff_rho(a: &BoxParam, b: &BoxParam) -> f64 {
    sym_diff_rho_sq(a, b).sqrt()
}

fn sym_diff_rho_sq(a: &BoxParam, b: &BoxParam) -> f64 {
    (a.volume() + b.volume() - 2.0 * a.intersection_volume(b)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub d: usize,
    pub delta: f64,
    pub u: f64,
    pub lattice_res: usize,
    pub candidates: usize,
    pub count: usize,
    pub bound_ratio: f64,
    pub selected: Vec<BoxParam>,
}

/// `N u^{2d} delta / log(e/delta)^{d-1}`.
pub fn bound_ratio(count: usize, d: usize, delta: f64, u: f64) -> f64 {
    let log = (std::f64::consts::E / delta).ln();
    count as f64 * u.powi(2 * d as i32) * delta / log.powi(d as i32 - 1)
}

/// Boxes with volume at most `delta`: half-widths `2^-j / 2` per axis for
/// `2^-j >= 1/lattice_res`, centers `i / lattice_res` with the box inside the
/// cube. Ordered by half-width vector (largest first), then center, both lexicographic.
pub fn packing_candidates(d: usize, delta: f64, lattice_res: usize) -> Result<Vec<BoxParam>> {
    if d == 0 {
        return Err(Error::InvalidDims("d must be positive".into()));
    }
    if lattice_res < 8 {
        return Err(Error::InvalidParameter(format!("lattice_res must be at least 8, got {}", lattice_res)));
    }
    let levels = (usize::BITS - 1 - lattice_res.leading_zeros()) as usize + 1;
    let res = lattice_res as f64;
    // admissible centers for each half-width level
    let centers: Vec<Vec<f64>> = (0..levels)
        .map(|j| {
            let h = 0.5f64.powi(j as i32 + 1);
            (0..=lattice_res)
                .map(|i| i as f64 / res)
                .filter(|&t| t >= h - EDGE_TOL && t <= 1.0 - h + EDGE_TOL)
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut js = vec![0usize; d];
    loop {
        let h: Vec<f64> = js.iter().map(|&j| 0.5f64.powi(j as i32 + 1)).collect();
        let vol: f64 = h.iter().map(|x| 2.0 * x).product();
        if vol <= delta * (1.0 + EDGE_TOL) {
            let mut pos = vec![0usize; d];
            'centers: loop {
                let t: Vec<f64> = (0..d).map(|k| centers[js[k]][pos[k]]).collect();
                out.push(BoxParam { t, h: h.clone() });
                for k in (0..d).rev() {
                    pos[k] += 1;
                    if pos[k] < centers[js[k]].len() {
                        continue 'centers;
                    }
                    pos[k] = 0;
                }
                break;
            }
        }
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            js[k] += 1;
            if js[k] < levels {
                break;
            }
            js[k] = 0;
        }
    }
}

/// Greedy maximal packing of the candidates: keeps a box when its distance to
/// every kept box exceeds `sqrt(u delta)`.
pub fn greedy_packing(d: usize, delta: f64, u: f64, lattice_res: usize) -> Result<PackingResult> {
    for (name, x) in [("delta", delta), ("u", u)] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidParameter(format!("{} must lie in (0,1], got {}", name, x)));
        }
    }
    let candidates = packing_candidates(d, delta, lattice_res)?;
    let selected = greedy_select(&candidates, delta, u);
    Ok(PackingResult {
        d,
        delta,
        u,
        lattice_res,
        candidates: candidates.len(),
        count: selected.len(),
        bound_ratio: bound_ratio(selected.len(), d, delta, u),
        selected,
    })
}

/// Keeps each candidate, in order, whose distance to every kept box exceeds `sqrt(u delta)`.
pub fn greedy_select(candidates: &[BoxParam], delta: f64, u: f64) -> Vec<BoxParam> {
    let thresh = u * delta;
    let mut selected: Vec<BoxParam> = Vec::new();
    for c in candidates {
        // recent picks are the nearest in scan order, so check them first
        if selected.iter().rev().all(|s| sym_diff_rho_sq(s, c) > thresh) {
            selected.push(c.clone());
        }
    }
    selected
}

/// Whether every pair of boxes is more than `sqrt(u delta)` apart.
pub fn packing_is_valid(boxes: &[BoxParam], delta: f64, u: f64) -> bool {
    let thresh = (u * delta).sqrt();
    boxes
        .iter()
        .enumerate()
        .all(|(i, a)| boxes[i + 1..].iter().all(|b| sym_diff_rho(a, b) > thresh))
}

/// Greedy packings over every `(delta, u)` pair, in row-major order of the inputs.
pub fn packing_bound_sweep(d: usize, deltas: &[f64], us: &[f64], lattice_res: usize) -> Result<Vec<PackingResult>> {
    let cells: Vec<(f64, f64)> = deltas
        .iter()
        .flat_map(|&dl| us.iter().map(move |&u| (dl, u)))
        .collect();
    cells
        .par_iter()
        .map(|&(dl, u)| greedy_packing(d, dl, u, lattice_res))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub m: usize,
    pub mean: f64,
    pub std_err: f64,
    /// `(1 - sqrt v) sqrt(2 d log m)`.
    pub reference: f64,
}

/// Mean over `seeds` null grids of `max_j |Y_j| - Gamma_V(m^-d)`, the
/// penalized statistic restricted to single-cell rectangles. Stream `s` of
/// `seed` is replication `s`.
pub fn finest_scale_statistic(d: usize, v: f64, m_list: &[usize], seeds: usize, seed: u64) -> Result<Vec<DivergenceRow>> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("v must be positive, got {}", v)));
    }
    if seeds < 2 {
        return Err(Error::InvalidParameter("need at least two seeds".into()));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("m_list must be increasing".into()));
    }
    m_list
        .iter()
        .map(|&m| {
            let dims = vec![m; d];
            let n = (m as f64).powi(d as i32);
            let pen = gamma_v_pen(1.0 / n, v)?;
            let vals: Vec<f64> = (0..seeds as u64)
                .into_par_iter()
                .map(|stream| {
                    let g = gaussian_grid(&dims, RngSpec { seed, stream })?;
                    Ok(g.values().iter().fold(0.0f64, |a, x| a.max(x.abs())) - pen)
                })
                .collect::<Result<_>>()?;
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(DivergenceRow {
                m,
                mean,
                std_err: (var / k).sqrt(),
                reference: (1.0 - v.sqrt()) * (2.0 * d as f64 * (m as f64).ln()).sqrt(),
            })
        })
        .collect()
}

/// [`finest_scale_statistic`] restricted to `v < 1`, where the statistic diverges.
pub fn v_less_one_divergence(d: usize, v: f64, m_list: &[usize], seeds: usize, seed: u64) -> Result<Vec<DivergenceRow>> {
    if v >= 1.0 {
        return Err(Error::NotDivergent(v));
    }
    finest_scale_statistic(d, v, m_list, seeds, seed)
}
