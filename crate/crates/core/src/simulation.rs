//! Reproducible grids under the null and under rectangle or Hölder-bump alternatives.
//!
//! Noise is drawn from a counter-based ChaCha8 stream keyed by `(seed, stream)`;
//! the grid entry with flat index `j` always consumes 64-bit word `j` of that
//! stream, so any entry can be regenerated independently of the others and any
//! partition of the work across threads gives the same grid.

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::grid::{GridField, Rect};
use crate::kernels::{Kernel, ScaledKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Maps 64 random bits to a point strictly inside (0, 1).
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// The standard normal variate at flat index `index` of the stream.
pub fn gaussian_entry(rng: RngSpec, index: u64) -> f64 {
    let mut g = rng.generator();
    g.set_word_pos(2 * index as u128);
    normal_quantile(open_unit(g.next_u64()))
}

/// Fills `out` with the standard normal variates at flat indices `0..out.len()`.
pub fn fill_gaussian(rng: RngSpec, out: &mut [f64]) {
    let mut g = rng.generator();
    for v in out.iter_mut() {
        *v = normal_quantile(open_unit(g.next_u64()));
    }
}

pub fn gaussian_grid(dims: &[usize], rng: RngSpec) -> Result<GridField> {
    let mut grid = GridField::zeros(dims)?;
    let mut values = vec![0.0; grid.len()];
    fill_gaussian(rng, &mut values);
    grid = GridField::new(grid.dims().to_vec(), values)?;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Null,
    /// `mu` on the lattice points of `rect`, zero elsewhere.
    Rect { mu: f64, rect: Rect },
    /// `L min(h)^beta psi_beta((x - t) / h)`.
    HolderBump {
        beta: f64,
        lipschitz: f64,
        center: Vec<f64>,
        bandwidth: Vec<f64>,
    },
}

impl SignalSpec {
    /// A `k^d` square of height `mu` with its lower corner at index `(1, ..., 1)`.
    pub fn corner_square(dims: &[usize], k: usize, mu: f64) -> Result<Self> {
        let rect = Rect::from_lengths(vec![1; dims.len()], &vec![k; dims.len()]);
        rect.validate(dims)?;
        Ok(SignalSpec::Rect { mu, rect })
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        match self {
            SignalSpec::Null => Ok(()),
            SignalSpec::Rect { mu, rect } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!("signal height {}", mu)));
                }
                rect.validate(dims)
            }
            SignalSpec::HolderBump {
                beta,
                lipschitz,
                center,
                bandwidth,
            } => {
                if !(*lipschitz > 0.0 && lipschitz.is_finite()) {
                    return Err(Error::InvalidParameter(format!("L = {} must be > 0", lipschitz)));
                }
                let sk = ScaledKernel::new(Kernel::holder(*beta, dims.len())?, center.clone(), bandwidth.clone())?;
                if !sk.in_unit_cube() {
                    return Err(Error::InvalidParameter(
                        "bump centre must satisfy h <= t <= 1 - h on every axis".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let joinf = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            SignalSpec::Null => write!(f, "null"),
            SignalSpec::Rect { mu, rect } => {
                write!(f, "rect:mu={},lo={},hi={}", mu, join(&rect.lo), join(&rect.hi))
            }
            SignalSpec::HolderBump {
                beta,
                lipschitz,
                center,
                bandwidth,
            } => write!(
                f,
                "bump:beta={},L={},t={},h={}",
                beta,
                lipschitz,
                joinf(center),
                joinf(bandwidth)
            ),
        }
    }
}

/// Splits `key=v1,v2,key2=w1` into `(key, [values])` pairs.
fn parse_fields(body: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for tok in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => fields.push((k.trim().to_string(), vec![v.trim().to_string()])),
            None => match fields.last_mut() {
                Some((_, vals)) => vals.push(tok.to_string()),
                None => return Err(Error::Parse(format!("value {:?} before any key", tok))),
            },
        }
    }
    Ok(fields)
}

fn field<'a>(fields: &'a [(String, Vec<String>)], key: &str) -> Result<&'a [String]> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_slice())
        .ok_or_else(|| Error::Parse(format!("missing field {:?}", key)))
}

fn parse_list<T: FromStr>(vals: &[String], key: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    vals.iter()
        .map(|v| v.parse::<T>().map_err(|e| Error::Parse(format!("{} = {:?}: {}", key, v, e))))
        .collect()
}

fn parse_one(vals: &[String], key: &str) -> Result<f64> {
    match parse_list::<f64>(vals, key)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::Parse(format!("{} takes exactly one value", key))),
    }
}

impl FromStr for SignalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "null" {
            return Ok(SignalSpec::Null);
        }
        if let Some(body) = s.strip_prefix("rect:") {
            let f = parse_fields(body)?;
            return Ok(SignalSpec::Rect {
                mu: parse_one(field(&f, "mu")?, "mu")?,
                rect: Rect::new(parse_list(field(&f, "lo")?, "lo")?, parse_list(field(&f, "hi")?, "hi")?),
            });
        }
        if let Some(body) = s.strip_prefix("bump:") {
            let f = parse_fields(body)?;
            return Ok(SignalSpec::HolderBump {
                beta: parse_one(field(&f, "beta")?, "beta")?,
                lipschitz: parse_one(field(&f, "L")?, "L")?,
                center: parse_list(field(&f, "t")?, "t")?,
                bandwidth: parse_list(field(&f, "h")?, "h")?,
            });
        }
        Err(Error::Parse(format!(
            "unknown signal {:?}; expected null, rect:... or bump:...",
            s
        )))
    }
}

/// The mean grid `f` evaluated at the lattice points.
pub fn signal_grid(dims: &[usize], sig: &SignalSpec) -> Result<GridField> {
    sig.validate(dims)?;
    match sig {
        SignalSpec::Null => GridField::zeros(dims),
        SignalSpec::Rect { mu, rect } => {
            GridField::from_fn(dims, |idx| if rect.contains(idx) { *mu } else { 0.0 })
        }
        SignalSpec::HolderBump {
            beta,
            lipschitz,
            center,
            bandwidth,
        } => {
            let sk = ScaledKernel::new(Kernel::holder(*beta, dims.len())?, center.clone(), bandwidth.clone())?;
            let h_min = bandwidth.iter().cloned().fold(f64::INFINITY, f64::min);
            let height = lipschitz * h_min.powf(*beta);
            let mut x = vec![0.0; dims.len()];
            GridField::from_fn(dims, |idx| {
                for k in 0..idx.len() {
                    x[k] = idx[k] as f64 / dims[k] as f64;
                }
                height * sk.eval(&x).unwrap()
            })
        }
    }
}

/// `f + noise`, entry by entry.
pub fn observed_grid(dims: &[usize], sig: &SignalSpec, rng: RngSpec) -> Result<GridField> {
    let noise = gaussian_grid(dims, rng)?;
    match sig {
        SignalSpec::Null => Ok(noise),
        _ => signal_grid(dims, sig)?.add(&noise),
    }
}
