//! Scale penalties and the closed-form constants of the minimax theory.
//!
//! All logarithms are natural. The scale argument `r` is the volume of the
//! box `2^d h_1 ... h_d`; on a lattice it is the fraction of points a
//! rectangle covers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_scale(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidScale(r))
    }
}

/// `sqrt(2 log(1/r))`.
pub fn gamma_pen(r: f64) -> Result<f64> {
    check_scale(r)?;
    Ok((2.0 * (1.0 / r).ln()).sqrt())
}

/// `log(e/r)^(-1/2) * log(log(e^e / r))`.
pub fn d_norm(r: f64) -> Result<f64> {
    check_scale(r)?;
    let log_inv = -r.ln();
    Ok((1.0 + log_inv).powf(-0.5) * (std::f64::consts::E + log_inv).ln())
}

/// `sqrt(2 v log(1/r))`.
pub fn gamma_v_pen(r: f64, v: f64) -> Result<f64> {
    check_scale(r)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty factor v = {} must be > 0", v)));
    }
    if v == 1.0 {
        return gamma_pen(r);
    }
    Ok((2.0 * v * (1.0 / r).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PenaltySpec {
    #[default]
    Standard,
    GammaV { v: f64 },
}

impl PenaltySpec {
    pub fn gamma_v(v: f64) -> Result<Self> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("penalty factor v = {} must be > 0", v)));
        }
        Ok(PenaltySpec::GammaV { v })
    }

    /// Factor multiplying `2 log(1/r)` under the square root.
    pub fn v(&self) -> f64 {
        match self {
            PenaltySpec::Standard => 1.0,
            PenaltySpec::GammaV { v } => *v,
        }
    }

    pub fn penalty(&self, r: f64) -> Result<f64> {
        match self {
            PenaltySpec::Standard => gamma_pen(r),
            PenaltySpec::GammaV { v } => gamma_v_pen(r, *v),
        }
    }

    /// Whether the `D` rescaling applies (only under [`PenaltySpec::Standard`]).
    pub fn uses_d_norm(&self) -> bool {
        matches!(self, PenaltySpec::Standard)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::Standard => write!(f, "standard"),
            PenaltySpec::GammaV { v } => write!(f, "gamma_v:{}", v),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{} = {} must be positive", name, x)))
    }
}

/// Exact separation constant for Hölder alternatives:
/// `(2 d L^(d/beta) / ((2 beta + d) |psi_beta|^2))^(beta / (2 beta + d))`.
pub fn separation_constant(beta: f64, lipschitz: f64, d: usize, psi_norm_sq: f64) -> Result<f64> {
    positive("beta", beta)?;
    positive("L", lipschitz)?;
    positive("|psi|^2", psi_norm_sq)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let d = d as f64;
    let base = 2.0 * d * lipschitz.powf(d / beta) / ((2.0 * beta + d) * psi_norm_sq);
    Ok(base.powf(beta / (2.0 * beta + d)))
}

/// Lower bound on the constant `M` for which the triangle-kernel test is rate
/// optimal when only `beta <= 1` is known:
/// `(2 d L^(d/beta) |psi_1|^2 / ((2 beta + d) <psi_1, psi_beta>^2))^(beta / (2 beta + d))`.
pub fn triangle_kernel_constant(
    beta: f64,
    lipschitz: f64,
    d: usize,
    psi1_norm_sq: f64,
    inner_psi1_psi_beta: f64,
) -> Result<f64> {
    positive("beta", beta)?;
    positive("L", lipschitz)?;
    positive("|psi_1|^2", psi1_norm_sq)?;
    positive("<psi_1, psi_beta>", inner_psi1_psi_beta)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be >= 1".into()));
    }
    let d = d as f64;
    let base = 2.0 * d * lipschitz.powf(d / beta) * psi1_norm_sq
        / ((2.0 * beta + d) * inner_psi1_psi_beta * inner_psi1_psi_beta);
    Ok(base.powf(beta / (2.0 * beta + d)))
}

/// `((log n) / n)^(beta / (2 beta + d))`.
pub fn minimax_rate(n: f64, beta: f64, d: usize) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::InvalidParameter(format!("n = {} must be >= 2", n)));
    }
    positive("beta", beta)?;
    let d = d as f64;
    Ok((n.ln() / n).powf(beta / (2.0 * beta + d)))
}

/// Signal level `|mu|` at which `|mu| sqrt(n |B|) = sqrt(2 log(1/|B|))`.
pub fn detection_boundary(b_measure: f64, n: f64) -> Result<f64> {
    if !(b_measure > 0.0 && b_measure < 1.0) {
        return Err(Error::InvalidScale(b_measure));
    }
    if !(n >= 1.0) {
        return Err(Error::InvalidParameter(format!("n = {} must be >= 1", n)));
    }
    Ok((2.0 * (1.0 / b_measure).ln()).sqrt() / (n * b_measure).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{E, PI};

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_pen(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gamma_pen((-2.0f64).exp()).unwrap(), 2.0, epsilon = 1e-12);
        // sqrt(2 ln 4) = sqrt(4 ln 2)
        assert_abs_diff_eq!(gamma_pen(0.25).unwrap(), 1.6651092223153954, epsilon = 1e-9);
        assert_eq!(gamma_pen(0.0), Err(Error::InvalidScale(0.0)));
        assert!(gamma_pen(1.5).is_err());
        assert!(gamma_pen(f64::NAN).is_err());
    }

    #[test]
    fn d_norm_values() {
        assert_eq!(d_norm(1.0).unwrap(), 1.0);
        // r = e^(1 - e^e): log(e/r) = e^e and log(e^e/r) = e + e^e - 1
        let ee = E.powf(E);
        let r = (1.0 - ee).exp();
        let expect = ee.powf(-0.5) * (E + ee - 1.0).ln();
        assert_relative_eq!(d_norm(r).unwrap(), expect, max_relative = 1e-12);
        assert_abs_diff_eq!(d_norm(r).unwrap(), 0.7258665116464295, epsilon = 1e-12);
        // r = 0.5: loglog(2 e^e) / sqrt(log 2e)
        let expect = (E + 2f64.ln()).ln() / (1.0 + 2f64.ln()).sqrt();
        assert_abs_diff_eq!(d_norm(0.5).unwrap(), expect, epsilon = 1e-9);
        assert_abs_diff_eq!(d_norm(0.5).unwrap(), 0.9430694280636595, epsilon = 1e-9);
    }

    #[test]
    fn gamma_v_identities() {
        for i in 1..=50 {
            let r = i as f64 / 50.0;
            assert_eq!(gamma_v_pen(r, 1.0).unwrap(), gamma_pen(r).unwrap());
        }
        assert_abs_diff_eq!(gamma_v_pen((-2.0f64).exp(), 4.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(
            gamma_v_pen(0.1, 0.25).unwrap(),
            0.5 * gamma_pen(0.1).unwrap(),
            max_relative = 1e-14
        );
        assert!(gamma_v_pen(0.5, 0.0).is_err());
    }

    #[test]
    fn gamma_shape_on_grid() {
        let rs: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
        let g: Vec<f64> = rs.iter().map(|&r| gamma_pen(r).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[0] >= w[1]));
        // as a function of s = log(1/r), sqrt(2 s) is concave; -Gamma is convex in r
        // along log-spaced r the increments shrink
        let s: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let gs: Vec<f64> = s.iter().map(|&v| gamma_pen((-v).exp()).unwrap()).collect();
        assert!(gs.windows(3).all(|w| w[2] - w[1] <= w[1] - w[0] + 1e-12));
    }

    #[test]
    fn d_norm_shape() {
        // positive, bounded, eventually decreasing to zero
        let vals: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let r = (-(i as f64) * 0.25).exp();
                (r, d_norm(r).unwrap())
            })
            .collect();
        assert!(vals.iter().all(|(_, v)| *v > 0.0));
        let (mode_at, _) = vals
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, (_, v))| if *v > acc.1 { (i, *v) } else { acc });
        assert!(vals[mode_at..].windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(vals.last().unwrap().1 < 0.5);
        assert!(d_norm(1e-300).unwrap() < d_norm(1e-30).unwrap());
    }

    #[test]
    fn separation_constant_values() {
        assert_relative_eq!(
            separation_constant(1.0, 1.0, 1, 2.0 / 3.0).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        let c = separation_constant(1.0, 1.0, 2, PI / 6.0).unwrap();
        assert_relative_eq!(c, (6.0 / PI).powf(0.25), max_relative = 1e-12);
        assert_abs_diff_eq!(c, 1.1755750073412338, epsilon = 1e-12);
        // L scaling: c(beta, cL) = c^(d / (2 beta + d)) c(beta, L)
        for (beta, d) in [(0.5, 1usize), (1.0, 2), (0.3, 3)] {
            let base = separation_constant(beta, 1.0, d, 0.7).unwrap();
            let scaled = separation_constant(beta, 3.0, d, 0.7).unwrap();
            let factor = 3f64.powf(d as f64 / (2.0 * beta + d as f64));
            assert_relative_eq!(scaled, factor * base, max_relative = 1e-12);
        }
        assert!(separation_constant(0.0, 1.0, 1, 1.0).is_err());
        assert!(separation_constant(1.0, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn triangle_constant_reduces_at_beta_one() {
        // with beta = 1 the bound coincides with the separation constant of psi_1
        let n1 = 2.0 / 3.0;
        let m = triangle_kernel_constant(1.0, 1.0, 1, n1, n1).unwrap();
        assert_relative_eq!(m, separation_constant(1.0, 1.0, 1, n1).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn rate_values() {
        let r = minimax_rate(E * E, 1.0, 1).unwrap();
        assert_relative_eq!(r, (2.0 / (E * E)).powf(1.0 / 3.0), max_relative = 1e-12);
        assert!(minimax_rate(1e4, 1.0, 2).unwrap() < minimax_rate(1e3, 1.0, 2).unwrap());
        // exponent beta / (2 beta + d) for beta = 100, d = 1
        let n = 1e6;
        let exponent = minimax_rate(n, 100.0, 1).unwrap().ln() / (n.ln() / n).ln();
        assert_relative_eq!(exponent, 100.0 / 201.0, max_relative = 1e-12);
        assert!(minimax_rate(1.5, 1.0, 1).is_err());
        for i in 3..200 {
            let n = i as f64;
            assert!(minimax_rate(n + 1.0, 0.7, 2).unwrap() < minimax_rate(n, 0.7, 2).unwrap());
        }
    }

    #[test]
    fn boundary_values() {
        let n = 2.0 * E * E;
        assert_relative_eq!(
            detection_boundary((-2.0f64).exp(), n).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-12
        );
        let n = 5000.0;
        assert_relative_eq!(
            detection_boundary(1.0 / n, n).unwrap(),
            (2.0 * n.ln()).sqrt(),
            max_relative = 1e-12
        );
        assert!(detection_boundary(1.0 - 1e-12, 100.0).unwrap() < 1e-5);
        assert!(detection_boundary(1.0, 100.0).is_err());
        assert!(detection_boundary(0.0, 100.0).is_err());
    }
}
