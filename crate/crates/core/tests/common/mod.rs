//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use multiscan::{GridField, Rect};

/// Every lattice rectangle of `dims` in enumeration order: side lengths
/// lexicographic, then lower corners lexicographic.
pub fn all_rects(dims: &[usize]) -> Vec<Rect> {
    let d = dims.len();
    let mut out = Vec::new();
    let mut lens = vec![1usize; d];
    loop {
        let mut lo = vec![1usize; d];
        loop {
            let hi: Vec<usize> = lo.iter().zip(&lens).map(|(a, l)| a + l - 1).collect();
            out.push(Rect::new(lo.clone(), hi));
            if !bump(&mut lo, |k| dims[k] - lens[k] + 1) {
                break;
            }
        }
        if !bump(&mut lens, |k| dims[k]) {
            break;
        }
    }
    out
}

fn bump(idx: &mut [usize], limit: impl Fn(usize) -> usize) -> bool {
    for k in (0..idx.len()).rev() {
        if idx[k] < limit(k) {
            idx[k] += 1;
            return true;
        }
        idx[k] = 1;
    }
    false
}

/// Sum over the rectangle by visiting every cell.
pub fn direct_sum(g: &GridField, r: &Rect) -> f64 {
    let mut s = 0.0;
    let mut idx = r.lo.clone();
    loop {
        s += g.get(&idx).unwrap();
        let mut k = idx.len();
        loop {
            if k == 0 {
                return s;
            }
            k -= 1;
            if idx[k] < r.hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = r.lo[k];
        }
    }
}

pub fn direct_psi(g: &GridField, r: &Rect) -> f64 {
    direct_sum(g, r) / (r.point_count() as f64).sqrt()
}

fn frac(g: &GridField, r: &Rect) -> f64 {
    r.point_count() as f64 / g.len() as f64
}

pub fn gamma(r: f64) -> f64 {
    (2.0 * (1.0 / r).ln()).sqrt()
}

pub fn dnorm(r: f64) -> f64 {
    let e = std::f64::consts::E;
    (e / r).ln().powf(-0.5) * (e.powf(e) / r).ln().ln()
}

/// `(value, first maximizer)` of `score` over all rectangles.
pub fn argmax_by(g: &GridField, score: impl Fn(&Rect) -> f64) -> (f64, Rect) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for r in all_rects(g.dims()) {
        let v = score(&r);
        if v > best {
            best = v;
            arg = Some(r);
        }
    }
    (best, arg.unwrap())
}

pub fn multiscale(g: &GridField) -> (f64, Rect) {
    argmax_by(g, |r| (direct_psi(g, r).abs() - gamma(frac(g, r))) / dnorm(frac(g, r)))
}

pub fn multiscale_star_v(g: &GridField, v: f64) -> (f64, Rect) {
    argmax_by(g, |r| direct_psi(g, r).abs() - (2.0 * v * (1.0 / frac(g, r)).ln()).sqrt())
}

pub fn scan(g: &GridField) -> (f64, Rect) {
    argmax_by(g, |r| direct_psi(g, r).abs())
}

/// `log` of the mean of `exp(psi^2 / 2)`, summed naively.
pub fn log_alr(g: &GridField) -> f64 {
    let rects = all_rects(g.dims());
    let n = rects.len() as f64;
    let s: f64 = rects.iter().map(|r| (direct_psi(g, r).powi(2) / 2.0).exp()).sum();
    (s / n).ln()
}

/// Small deterministic pseudo-random generator for test inputs.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 ^ (self.0 >> 29)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
