//! Monte Carlo critical values, null ECDFs, power estimates and the
//! calibration cache.
//!
//! Replication `i` always uses stream `i` of the run's seed, and results are
//! collected by stream index before any reduction, so every output here is
//! independent of the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::io::Write as _;
use std::path::Path;

use fnv::FnvHasher;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::penalties::PenaltySpec;
use crate::simulation::{gaussian_grid, RngSpec, SignalSpec};
use crate::statistics::{Evaluator, StatisticSpec};

pub const DEFAULT_CALIBRATION_REPS: usize = 3000;
pub const DEFAULT_POWER_REPS: usize = 1000;
pub const MIN_REPS: usize = 100;
/// Smallest number of null exceedances a requested level must leave.
pub const MIN_TAIL_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationKey {
    pub d: usize,
    pub dims: Vec<usize>,
    pub spec: StatisticSpec,
    pub reps: usize,
    pub seed: u64,
}

impl CalibrationKey {
    pub fn new(dims: &[usize], spec: StatisticSpec, reps: usize, seed: u64) -> Self {
        CalibrationKey {
            d: dims.len(),
            dims: dims.to_vec(),
            spec,
            reps,
            seed,
        }
    }

    /// `d=…;dims=…;stat=…;kernel=…;V=…;R=…;seed=…`, followed by the penalty
    /// variant and scale filter, which also change the statistic.
    pub fn canonical(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|m| m.to_string()).collect();
        let spec = &self.spec;
        let (v, variant) = match spec.effective_penalty() {
            None => ("none".to_string(), "none"),
            Some(p @ PenaltySpec::Standard) => (p.v().to_string(), "standard"),
            Some(p @ PenaltySpec::GammaV { .. }) => (p.v().to_string(), "gamma_v"),
        };
        let side = |s: Option<usize>| s.map_or(String::new(), |x| x.to_string());
        format!(
            "d={};dims={};stat={};kernel={};V={};R={};seed={};penalty={};filter={}..{}",
            self.d,
            dims.join(","),
            spec.kind,
            spec.kernel,
            v,
            self.reps,
            self.seed,
            variant,
            side(spec.scale_filter.min_side),
            side(spec.scale_filter.max_side),
        )
    }

    /// Hex FNV-1a 64 of the canonical string.
    pub fn fingerprint(&self) -> String {
        let mut h = FnvHasher::default();
        h.write(self.canonical().as_bytes());
        format!("{:016x}", h.finish())
    }

    /// Whether a calibration under `self` is valid for testing `spec` on `dims`.
    pub fn matches(&self, dims: &[usize], spec: &StatisticSpec) -> bool {
        self.dims == dims && self.spec.canonical() == spec.canonical()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub alpha: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub key: CalibrationKey,
    /// Sorted by increasing alpha.
    pub quantiles: Vec<Quantile>,
    /// Sorted null sample.
    pub ecdf_sample: Option<Vec<f64>>,
}

impl CalibrationRecord {
    pub fn kappa(&self, alpha: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|q| (q.alpha - alpha).abs() <= 1e-12)
            .map(|q| q.kappa)
    }

    /// Checks the ordering invariants and, when the sample is stored, that each
    /// quantile is its order statistic.
    pub fn validate(&self) -> Result<()> {
        for w in self.quantiles.windows(2) {
            if !(w[0].alpha < w[1].alpha && w[0].kappa >= w[1].kappa) {
                return Err(Error::Corrupt("quantiles not monotone in alpha".into()));
            }
        }
        if let Some(sample) = &self.ecdf_sample {
            if sample.len() != self.key.reps {
                return Err(Error::Corrupt("sample length differs from R".into()));
            }
            if sample.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Corrupt("sample not sorted".into()));
            }
            for q in &self.quantiles {
                if order_statistic_quantile(sample, q.alpha)?.to_bits() != q.kappa.to_bits() {
                    return Err(Error::Corrupt(format!("kappa at alpha={} disagrees with sample", q.alpha)));
                }
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64, reps: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {}", alpha)));
    }
    if alpha * reps as f64 + 1e-9 < MIN_TAIL_COUNT {
        return Err(Error::InsufficientReplications(format!(
            "alpha={} with R={} leaves fewer than {} exceedances",
            alpha, reps, MIN_TAIL_COUNT
        )));
    }
    Ok(())
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InsufficientReplications(format!(
            "R={} is below the minimum of {}",
            reps, MIN_REPS
        )));
    }
    Ok(())
}

/// The `ceil((1 - alpha) R)`-th smallest value of a sorted sample.
pub fn order_statistic_quantile(sorted: &[f64], alpha: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySeries);
    }
    let r = sorted.len() as f64;
    let rank = (((1.0 - alpha) * r) - 1e-9).ceil().clamp(1.0, r) as usize;
    Ok(sorted[rank - 1])
}

/// Null statistic values, `out[s][i]` for spec `s` and stream `i`.
pub fn null_samples(dims: &[usize], specs: &[StatisticSpec], reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let ev = Evaluator::new(dims, specs)?;
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|stream| {
            let g = gaussian_grid(dims, RngSpec { seed, stream })?;
            ev.values(&g)
        })
        .collect::<Result<_>>()?;
    Ok(transpose(rows, specs.len()))
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    cols
}

fn record_from_sample(key: CalibrationKey, mut sample: Vec<f64>, alphas: &[f64]) -> Result<CalibrationRecord> {
    sample.sort_by(f64::total_cmp);
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let quantiles = alphas
        .iter()
        .map(|&alpha| {
            Ok(Quantile {
                alpha,
                kappa: order_statistic_quantile(&sample, alpha)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationRecord {
        key,
        quantiles,
        ecdf_sample: Some(sample),
    })
}

/// Calibrates several statistics from one set of null grids.
pub fn calibrate_many(
    dims: &[usize],
    specs: &[StatisticSpec],
    alphas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<CalibrationRecord>> {
    check_reps(reps)?;
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("no alpha levels requested".into()));
    }
    for &a in alphas {
        check_alpha(a, reps)?;
    }
    let samples = null_samples(dims, specs, reps, seed)?;
    specs
        .iter()
        .zip(samples)
        .map(|(spec, sample)| record_from_sample(CalibrationKey::new(dims, *spec, reps, seed), sample, alphas))
        .collect()
}

pub fn calibrate(
    dims: &[usize],
    spec: &StatisticSpec,
    alphas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<CalibrationRecord> {
    Ok(calibrate_many(dims, std::slice::from_ref(spec), alphas, reps, seed)?.remove(0))
}

/// Sorted null sample.
pub fn null_ecdf(dims: &[usize], spec: &StatisticSpec, reps: usize, seed: u64) -> Result<Vec<f64>> {
    check_reps(reps)?;
    let mut s = null_samples(dims, std::slice::from_ref(spec), reps, seed)?.remove(0);
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `(value, i / R)` for the i-th smallest value.
pub fn ecdf_points(sorted: &[f64]) -> Vec<(f64, f64)> {
    let r = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, (i + 1) as f64 / r))
        .collect()
}

/// Two-sample Kolmogorov-Smirnov distance between sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value of the two-sample KS test: `c(alpha) sqrt((n+m)/(nm))`.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// `1.96 sqrt(p (1 - p) / R)`.
pub fn half_width(p: f64, reps: usize) -> f64 {
    1.96 * (p * (1.0 - p) / reps as f64).sqrt()
}

/// Column label of a statistic in power tables.
pub fn statistic_label(spec: &StatisticSpec) -> String {
    match spec.effective_penalty() {
        Some(PenaltySpec::GammaV { v }) => format!("{}@V={}", spec.kind, v),
        _ => spec.kind.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEntry {
    /// Side length of the square signal, when the signal is one.
    pub k: Option<usize>,
    pub mu: f64,
    pub statistic: String,
    pub power: f64,
    pub half_width: f64,
    pub reps: usize,
}

impl PowerEntry {
    fn new(k: Option<usize>, mu: f64, statistic: String, rejections: usize, reps: usize) -> Self {
        let power = rejections as f64 / reps as f64;
        PowerEntry {
            k,
            mu,
            statistic,
            power,
            half_width: half_width(power, reps),
            reps,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub entries: Vec<PowerEntry>,
}

pub const POWER_CSV_HEADER: &str = "k,mu,statistic,power,half_width,R";

impl PowerReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(POWER_CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let k = e.k.map_or(String::new(), |k| k.to_string());
            writeln!(
                out,
                "{},{:?},{},{:?},{:?},{}",
                k, e.mu, e.statistic, e.power, e.half_width, e.reps
            )
            .unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(POWER_CSV_HEADER) {
            return Err(Error::Parse(format!("power csv must start with {:?}", POWER_CSV_HEADER)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{:?}: {}", s, e)));
        let entries = lines
            .map(|line| {
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                if f.len() != 6 {
                    return Err(Error::Parse(format!("expected 6 fields in {:?}", line)));
                }
                let k = if f[0].is_empty() {
                    None
                } else {
                    Some(f[0].parse().map_err(|e| Error::Parse(format!("k {:?}: {}", f[0], e)))?)
                };
                Ok(PowerEntry {
                    k,
                    mu: num(f[1])?,
                    statistic: f[2].to_string(),
                    power: num(f[3])?,
                    half_width: num(f[4])?,
                    reps: f[5].parse().map_err(|e| Error::Parse(format!("R {:?}: {}", f[5], e)))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PowerReport { entries })
    }

    pub fn get(&self, k: usize, mu: f64, statistic: &str) -> Option<&PowerEntry> {
        self.entries
            .iter()
            .find(|e| e.k == Some(k) && e.mu == mu && e.statistic == statistic)
    }
}

fn kappa_for(dims: &[usize], spec: &StatisticSpec, cal: &CalibrationRecord, alpha: f64) -> Result<f64> {
    if !cal.key.matches(dims, spec) {
        return Err(Error::CalibrationMismatch(format!(
            "calibration key mismatch: calibrated {} on {:?}, testing {} on {:?}",
            cal.key.spec.canonical(),
            cal.key.dims,
            spec.canonical(),
            dims
        )));
    }
    cal.kappa(alpha).ok_or_else(|| {
        Error::CalibrationMismatch(format!("calibration key mismatch: no quantile stored for alpha={}", alpha))
    })
}

/// Rejection counts of each spec against its critical value over `reps` observed grids.
fn rejections(
    dims: &[usize],
    ev: &Evaluator,
    kappas: &[f64],
    signal: &GridField,
    reps: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let rows: Vec<Vec<bool>> = (0..reps as u64)
        .into_par_iter()
        .map(|stream| {
            let noise = gaussian_grid(dims, RngSpec { seed, stream })?;
            let y = noise.add(signal)?;
            Ok(ev.values(&y)?.iter().zip(kappas).map(|(v, k)| v > k).collect())
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; kappas.len()];
    for row in rows {
        for (c, r) in counts.iter_mut().zip(row) {
            *c += r as usize;
        }
    }
    Ok(counts)
}

/// Fraction of `reps` alternative replications whose statistic exceeds the calibrated `kappa_alpha`.
pub fn power(
    dims: &[usize],
    spec: &StatisticSpec,
    signal: &SignalSpec,
    calibration: &CalibrationRecord,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<PowerEntry> {
    if reps == 0 {
        return Err(Error::InsufficientReplications("R must be positive".into()));
    }
    let kappa = kappa_for(dims, spec, calibration, alpha)?;
    let ev = Evaluator::new(dims, std::slice::from_ref(spec))?;
    let sig = crate::simulation::signal_grid(dims, signal)?;
    let count = rejections(dims, &ev, &[kappa], &sig, reps, seed)?[0];
    let (k, mu) = square_side(dims, signal);
    Ok(PowerEntry::new(k, mu, statistic_label(spec), count, reps))
}

/// Side length and height of a square signal anchored at the origin corner.
fn square_side(dims: &[usize], signal: &SignalSpec) -> (Option<usize>, f64) {
    match signal {
        SignalSpec::Null => (None, 0.0),
        SignalSpec::Rect { mu, rect } => {
            let l = rect.lengths();
            let square = l.iter().all(|&x| x == l[0]) && rect.lo.iter().all(|&x| x == 1);
            (square.then_some(l[0]).filter(|_| rect.d() == dims.len()), *mu)
        }
        SignalSpec::HolderBump { .. } => (None, f64::NAN),
    }
}

/// Power of every calibrated statistic over a grid of `k^d` corner squares of height `mu`.
///
/// All cells reuse streams `0..R` of `seed`, so differences between cells
/// reflect the signal only.
pub fn compare_tests(
    dims: &[usize],
    cells: &[(usize, f64)],
    calibrations: &[CalibrationRecord],
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<PowerReport> {
    if calibrations.is_empty() {
        return Err(Error::CacheMiss("no calibrations supplied".into()));
    }
    if reps == 0 {
        return Err(Error::InsufficientReplications("R must be positive".into()));
    }
    let specs: Vec<StatisticSpec> = calibrations.iter().map(|c| c.key.spec).collect();
    let kappas = specs
        .iter()
        .zip(calibrations)
        .map(|(s, c)| kappa_for(dims, s, c, alpha))
        .collect::<Result<Vec<_>>>()?;
    let ev = Evaluator::new(dims, &specs)?;
    let mut report = PowerReport::default();
    for &(k, mu) in cells {
        let signal = crate::simulation::signal_grid(dims, &SignalSpec::corner_square(dims, k, mu)?)?;
        let counts = rejections(dims, &ev, &kappas, &signal, reps, seed)?;
        for (spec, count) in specs.iter().zip(counts) {
            report
                .entries
                .push(PowerEntry::new(Some(k), mu, statistic_label(spec), count, reps));
        }
    }
    Ok(report)
}

type CacheMap = BTreeMap<String, CalibrationRecord>;

fn read_cache(path: &Path) -> Result<Option<CacheMap>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Corrupt(format!("{}: {}", path.display(), e)))
}

/// Inserts the record under its key fingerprint, keeping other entries.
pub fn cache_store(path: &Path, record: &CalibrationRecord) -> Result<()> {
    record.validate()?;
    let mut map = read_cache(path)?.unwrap_or_default();
    map.insert(record.key.fingerprint(), record.clone());
    let text = serde_json::to_string_pretty(&map).map_err(|e| Error::Corrupt(e.to_string()))?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("cache")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads the record for `key`, re-deriving the fingerprint from the stored key fields.
pub fn cache_load(path: &Path, key: &CalibrationKey) -> Result<CalibrationRecord> {
    let map = read_cache(path)?.ok_or_else(|| Error::CacheMiss(format!("{} does not exist", path.display())))?;
    let wanted = key.fingerprint();
    let record = map
        .get(&wanted)
        .ok_or_else(|| Error::CacheMiss(format!("no entry for {}", key.canonical())))?;
    let computed = record.key.fingerprint();
    if computed != wanted || record.key != *key {
        return Err(Error::FingerprintMismatch {
            stored: wanted,
            computed,
        });
    }
    record.validate()?;
    Ok(record.clone())
}

/// Every record in a cache file, checking each entry's fingerprint.
pub fn cache_entries(path: &Path) -> Result<Vec<CalibrationRecord>> {
    let map = read_cache(path)?.ok_or_else(|| Error::CacheMiss(format!("{} does not exist", path.display())))?;
    map.into_iter()
        .map(|(stored, rec)| {
            let computed = rec.key.fingerprint();
            if stored != computed {
                return Err(Error::FingerprintMismatch { stored, computed });
            }
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_rank() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(order_statistic_quantile(&s, 0.05).unwrap(), 95.0);
        assert_eq!(order_statistic_quantile(&s, 0.1).unwrap(), 90.0);
        let s: Vec<f64> = (1..=3000).map(f64::from).collect();
        assert_eq!(order_statistic_quantile(&s, 0.05).unwrap(), 2850.0);
        assert_eq!(order_statistic_quantile(&s, 0.01).unwrap(), 2970.0);
    }

    #[test]
    fn replication_limits() {
        let spec = StatisticSpec::scan();
        assert!(matches!(
            calibrate(&[2], &spec, &[0.05], 99, 1),
            Err(Error::InsufficientReplications(_))
        ));
        assert!(matches!(
            calibrate(&[2], &spec, &[0.01], 100, 1),
            Err(Error::InsufficientReplications(_))
        ));
        assert!(calibrate(&[2], &spec, &[0.05], 100, 1).is_ok());
    }

    #[test]
    fn canonical_key_text() {
        let k = CalibrationKey::new(&[50, 50], StatisticSpec::multiscale(), 3000, 7);
        assert_eq!(
            k.canonical(),
            "d=2;dims=50,50;stat=multiscale;kernel=indicator;V=1;R=3000;seed=7;penalty=standard;filter=.."
        );
        assert_eq!(k.fingerprint().len(), 16);
        let a = CalibrationKey::new(&[5], StatisticSpec::alr(), 100, 1);
        assert!(a.canonical().contains("V=none"));
    }

    #[test]
    fn ks_distance_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_distance(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
        assert!((ks_critical(0.01, 3000, 3000) - 1.6276 * (2.0f64 / 3000.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn power_csv_round_trip() {
        let r = PowerReport {
            entries: vec![
                PowerEntry::new(Some(3), 0.25, "scan".into(), 17, 100),
                PowerEntry::new(None, 0.0, "multiscale@V=4".into(), 0, 100),
            ],
        };
        let csv = r.to_csv();
        assert!(csv.starts_with("k,mu,statistic,power,half_width,R\n3,0.25,scan,0.17,"));
        assert_eq!(PowerReport::from_csv(&csv).unwrap(), r);
        assert!(PowerReport::from_csv("k,mu\n").is_err());
    }
}
