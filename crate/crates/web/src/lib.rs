//! Browser bindings for the `multiscan` demo page.
//!
//! The plain functions (`run_detection`, `curves`, `null_sample`) hold the
//! logic and are tested natively; the `#[wasm_bindgen]` exports wrap them.

use multiscan::calibration::{self, CalibrationRecord};
use multiscan::penalties::{d_norm, gamma_pen, gamma_v_pen};
use multiscan::simulation::observed_grid;
use multiscan::{Evaluator, Rect, RngSpec, SignalSpec, StatisticKind, StatisticSpec};
use wasm_bindgen::prelude::*;

/// Largest lattice side the page accepts; keeps one run well under a second.
pub const MAX_SIDE: usize = 40;

/// Seed of the demo's null calibrations; the observed grid uses `seed`.
const CALIBRATION_SEED: u64 = 7;

#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    m: usize,
    values: Vec<f64>,
    value: f64,
    kappa: f64,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

#[wasm_bindgen]
impl Detection {
    #[wasm_bindgen(getter)]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Observed grid, row-major.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[wasm_bindgen(getter)]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    #[wasm_bindgen(getter)]
    pub fn reject(&self) -> bool {
        self.value > self.kappa
    }

    /// 1-based inclusive `[row_lo, col_lo]` of the maximizing rectangle.
    #[wasm_bindgen(getter)]
    pub fn argmax_lo(&self) -> Vec<usize> {
        self.lo.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn argmax_hi(&self) -> Vec<usize> {
        self.hi.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRequest {
    pub m: usize,
    pub stat: StatisticKind,
    /// Signal square: 1-based top-left corner, side and height.
    pub row: usize,
    pub col: usize,
    pub side: usize,
    pub mu: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

fn check_side(m: usize) -> Result<(), String> {
    if m == 0 || m > MAX_SIDE {
        return Err(format!("grid side must lie in 1..={}", MAX_SIDE));
    }
    Ok(())
}

/// Simulates one grid with a square signal, calibrates the statistic on
/// `reps` null grids and tests the grid against the critical value.
pub fn run_detection(req: &DetectionRequest) -> Result<Detection, String> {
    check_side(req.m)?;
    let dims = [req.m, req.m];
    let spec = StatisticSpec::new(req.stat);
    let signal = if req.side == 0 || req.mu == 0.0 {
        SignalSpec::Null
    } else {
        let rect = Rect::from_lengths(vec![req.row, req.col], &[req.side, req.side]);
        SignalSpec::Rect { mu: req.mu, rect }
    };
    let grid = observed_grid(&dims, &signal, RngSpec::new(req.seed, 0)).map_err(|e| e.to_string())?;
    let cal: CalibrationRecord = calibration::calibrate(&dims, &spec, &[req.alpha], req.reps, CALIBRATION_SEED)
        .map_err(|e| e.to_string())?;
    let res = Evaluator::new(&dims, &[spec])
        .and_then(|ev| ev.detect(&grid))
        .map_err(|e| e.to_string())?
        .remove(0);
    Ok(Detection {
        m: req.m,
        values: grid.values().to_vec(),
        value: res.value,
        kappa: cal.kappa(req.alpha).ok_or("missing quantile")?,
        lo: res.argmax_rect.lo,
        hi: res.argmax_rect.hi,
    })
}

/// Columns `[r, Gamma(r), Gamma_V(r), D(r)]` at `points` log-spaced scales
/// from `r_min` to 1, concatenated.
pub fn curves(v: f64, r_min: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(r_min > 0.0 && r_min < 1.0) || points < 2 {
        return Err("need 0 < r_min < 1 and at least two points".into());
    }
    let rs: Vec<f64> = (0..points)
        .map(|i| (r_min.ln() * (1.0 - i as f64 / (points - 1) as f64)).exp())
        .collect();
    let map = |f: &dyn Fn(f64) -> multiscan::Result<f64>| {
        rs.iter().map(|&r| f(r)).collect::<multiscan::Result<Vec<f64>>>()
    };
    let err = |e: multiscan::Error| e.to_string();
    let mut out = rs.clone();
    out.extend(map(&gamma_pen).map_err(err)?);
    out.extend(map(&|r| gamma_v_pen(r, v)).map_err(err)?);
    out.extend(map(&d_norm).map_err(err)?);
    Ok(out)
}

/// Sorted null sample of the statistic on an `m x m` grid.
pub fn null_sample(m: usize, stat: StatisticKind, reps: usize, seed: u64) -> Result<Vec<f64>, String> {
    check_side(m)?;
    calibration::null_ecdf(&[m, m], &StatisticSpec::new(stat), reps, seed).map_err(|e| e.to_string())
}

fn parse_stat(stat: &str) -> Result<StatisticKind, JsError> {
    stat.parse().map_err(|e: multiscan::Error| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_detect(
    m: usize,
    stat: &str,
    row: usize,
    col: usize,
    side: usize,
    mu: f64,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<Detection, JsError> {
    let req = DetectionRequest {
        m,
        stat: parse_stat(stat)?,
        row,
        col,
        side,
        mu,
        alpha,
        reps,
        seed,
    };
    run_detection(&req).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn penalty_curves(v: f64, r_min: f64, points: usize) -> Result<Vec<f64>, JsError> {
    curves(v, r_min, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn null_ecdf(m: usize, stat: &str, reps: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    null_sample(m, parse_stat(stat)?, reps, seed).map_err(|e| JsError::new(&e))
}
