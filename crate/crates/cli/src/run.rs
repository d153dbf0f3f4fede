use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use multiscan::calibration::{self, cache_load, cache_store, ecdf_points, CalibrationKey, CalibrationRecord};
use multiscan::plot::{emit_svg, Series};
use multiscan::theory::{packing_bound_sweep, packing_is_valid, v_less_one_divergence};
use multiscan::{grid::read_grid, Evaluator, PowerReport, Rect, StatisticKind, StatisticSpec};
use serde::{Deserialize, Serialize};

use crate::config::*;
use crate::manifest::{manifest_path, Manifest};

/// Exit status when `detect --exit-code-signal` rejects the null.
pub const EXIT_DETECTED: u8 = 2;

/// Files read and written by one run, for the manifest.
#[derive(Default)]
struct Artifacts {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

/// Executes `config`; returns the process exit status.
pub fn run(config: &RunConfig, argv: &[String]) -> Result<u8> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    let mut art = Artifacts::default();
    let code = pool.install(|| dispatch(&config.command, &mut art))?;
    if let Some(primary) = art.outputs.first() {
        Manifest::new(argv, config, &art.inputs, &art.outputs)?.write(&manifest_path(primary))?;
    }
    Ok(code)
}

fn dispatch(cmd: &Command, art: &mut Artifacts) -> Result<u8> {
    match cmd {
        Command::Calibrate(a) => calibrate(a, art),
        Command::Detect(a) => detect(a, art),
        Command::Power(a) => power(a, art),
        Command::NullEcdf(a) => null_ecdf(a, art),
        Command::PackingCheck(a) => packing(a, art),
        Command::Vlt1(a) => vlt1(a, art),
    }
    .map(|()| 0)
    .or_else(|e| match e.downcast_ref::<Detected>() {
        Some(_) => Ok(EXIT_DETECTED),
        None => Err(e),
    })
}

/// Signals a rejection that should become the exit status.
#[derive(Debug)]
struct Detected;

impl std::fmt::Display for Detected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("signal detected")
    }
}

impl std::error::Error for Detected {}

fn write_output(path: Option<&Path>, bytes: &[u8], art: &mut Artifacts) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?;
            art.outputs.push(p.to_path_buf());
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn emit<T: Serialize>(rows: &[T], output: &OutputArgs, art: &mut Artifacts) -> Result<()> {
    let bytes = match output.format {
        Format::Csv => to_csv(rows)?,
        Format::Json => (serde_json::to_string_pretty(rows)? + "\n").into_bytes(),
    };
    write_output(output.out.as_deref(), &bytes, art)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub statistic: String,
    pub alpha: f64,
    pub kappa: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    pub seed: u64,
    pub fingerprint: String,
}

pub fn kappa_rows(records: &[CalibrationRecord]) -> Vec<KappaRow> {
    records
        .iter()
        .flat_map(|rec| {
            rec.quantiles.iter().map(move |q| KappaRow {
                statistic: calibration::statistic_label(&rec.key.spec),
                alpha: q.alpha,
                kappa: q.kappa,
                reps: rec.key.reps,
                seed: rec.key.seed,
                fingerprint: rec.key.fingerprint(),
            })
        })
        .collect()
}

fn calibrate(a: &CalibrateArgs, art: &mut Artifacts) -> Result<()> {
    let dims = a.shape.dims()?;
    let specs = a.stat.iter().map(|&k| a.model.spec(k)).collect::<Result<Vec<_>>>()?;
    let mut alphas = a.alpha.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let records = calibration::calibrate_many(&dims, &specs, &alphas, a.reps, a.seed)?;
    if let Some(cache) = &a.kappa_cache {
        for rec in &records {
            cache_store(cache, rec)?;
        }
    }
    match a.output.format {
        Format::Csv => write_output(a.output.out.as_deref(), &to_csv(&kappa_rows(&records))?, art)?,
        Format::Json => emit(&records, &a.output, art)?,
    }
    if let Some(cache) = &a.kappa_cache {
        art.outputs.push(cache.clone());
    }
    Ok(())
}

fn load_or_calibrate(
    dims: &[usize],
    spec: &StatisticSpec,
    alpha: f64,
    reps: usize,
    seed: u64,
    cache: Option<&Path>,
    art: &mut Artifacts,
) -> Result<CalibrationRecord> {
    match cache {
        Some(path) => {
            let key = CalibrationKey::new(dims, *spec, reps, seed);
            let rec = cache_load(path, &key).with_context(|| {
                format!(
                    "no calibration for {} on {:?} (R={}, seed={}) in {}; run `multiscan calibrate` with --kappa-cache first",
                    spec.canonical(),
                    dims,
                    reps,
                    seed,
                    path.display()
                )
            })?;
            if !art.inputs.iter().any(|p| p == path) {
                art.inputs.push(path.to_path_buf());
            }
            Ok(rec)
        }
        None => Ok(calibration::calibrate(dims, spec, &[alpha], reps, seed)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub statistic: StatisticKind,
    pub spec: String,
    pub alpha: f64,
    pub kappa: f64,
    pub value: f64,
    pub reject: bool,
    pub argmax: Rect,
    pub rect_count: u64,
    pub calibration: String,
}

fn format_rect(r: &Rect) -> String {
    let axes: Vec<String> = r.lo.iter().zip(&r.hi).map(|(l, h)| format!("{}..{}", l, h)).collect();
    format!("[{}]", axes.join(", "))
}

fn detect(a: &DetectArgs, art: &mut Artifacts) -> Result<()> {
    let grid = read_grid(&a.grid).with_context(|| format!("reading grid {}", a.grid.display()))?;
    art.inputs.push(a.grid.clone());
    let dims = grid.dims().to_vec();
    let spec = a.model.spec(a.stat)?;
    let rec = load_or_calibrate(&dims, &spec, a.alpha, a.reps, a.seed, a.kappa_cache.as_deref(), art)?;
    let kappa = rec
        .kappa(a.alpha)
        .with_context(|| format!("calibration has no quantile for alpha={}", a.alpha))?;
    let result = Evaluator::new(&dims, &[spec])?.detect(&grid)?.remove(0);
    let report = DetectReport {
        statistic: a.stat,
        spec: spec.canonical(),
        alpha: a.alpha,
        kappa,
        value: result.value,
        reject: result.value > kappa,
        argmax: result.argmax_rect.clone(),
        rect_count: result.rect_count,
        calibration: rec.key.fingerprint(),
    };
    println!("decision: {}", if report.reject { "reject" } else { "accept" });
    println!("statistic: {} = {}", calibration::statistic_label(&spec), report.value);
    println!("kappa: {} (alpha = {})", report.kappa, report.alpha);
    println!("argmax: {}", format_rect(&report.argmax));
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&report)? + "\n";
        write_output(Some(out), text.as_bytes(), art)?;
    }
    if report.reject && a.exit_code_signal {
        return Err(Detected.into());
    }
    Ok(())
}

fn power(a: &PowerArgs, art: &mut Artifacts) -> Result<()> {
    let dims = a.shape.dims()?;
    let specs = a.stat.iter().map(|&k| a.model.spec(k)).collect::<Result<Vec<_>>>()?;
    let power_seed = a.power_seed.unwrap_or(a.seed.wrapping_add(1));
    let calibrations = match &a.kappa_cache {
        Some(path) => specs
            .iter()
            .map(|s| load_or_calibrate(&dims, s, a.alpha, a.cal_reps, a.seed, Some(path), art))
            .collect::<Result<Vec<_>>>()?,
        None => calibration::calibrate_many(&dims, &specs, &[a.alpha], a.cal_reps, a.seed)?,
    };
    let report = match &a.signal {
        Some(sig) => PowerReport {
            entries: specs
                .iter()
                .zip(&calibrations)
                .map(|(s, c)| calibration::power(&dims, s, sig, c, a.alpha, a.reps, power_seed))
                .collect::<multiscan::Result<_>>()?,
        },
        None => {
            let cells: Vec<(usize, f64)> = a.k.iter().flat_map(|&k| a.mu.iter().map(move |&mu| (k, mu))).collect();
            calibration::compare_tests(&dims, &cells, &calibrations, a.alpha, a.reps, power_seed)?
        }
    };
    let bytes = match a.output.format {
        Format::Csv => report.to_csv().into_bytes(),
        Format::Json => (serde_json::to_string_pretty(&report.entries)? + "\n").into_bytes(),
    };
    write_output(a.output.out.as_deref(), &bytes, art)?;
    if let Some(plot) = &a.plot {
        let mut series: Vec<Series> = Vec::new();
        for e in &report.entries {
            let name = match e.k {
                Some(k) => format!("{} k={}", e.statistic, k),
                None => e.statistic.clone(),
            };
            match series.iter_mut().find(|s| s.name == name) {
                Some(s) => s.points.push((e.mu, e.power)),
                None => series.push(Series::new(name, vec![(e.mu, e.power)])),
            }
        }
        emit_svg(&series, "mu", "power", plot)?;
        art.outputs.push(plot.clone());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfRow {
    pub value: f64,
    pub ecdf: f64,
}

/// `stem_m{m}.ext` next to `out`.
pub fn per_m_path(out: &Path, m: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{}_m{}.{}", stem, m, ext.to_string_lossy()),
        None => format!("{}_m{}", stem, m),
    };
    out.with_file_name(name)
}

fn null_ecdf(a: &NullEcdfArgs, art: &mut Artifacts) -> Result<()> {
    let spec = a.model.spec(a.stat)?;
    let mut series = Vec::new();
    for &m in &a.m {
        let dims = vec![m; a.d];
        let sample = calibration::null_ecdf(&dims, &spec, a.reps, a.seed)?;
        let points = ecdf_points(&sample);
        let rows: Vec<EcdfRow> = points.iter().map(|&(value, ecdf)| EcdfRow { value, ecdf }).collect();
        let out = match (&a.output.out, a.m.len()) {
            (Some(p), 1) => Some(p.clone()),
            (Some(p), _) => Some(per_m_path(p, m)),
            (None, _) => None,
        };
        emit(
            &rows,
            &OutputArgs {
                out,
                format: a.output.format,
            },
            art,
        )?;
        series.push(Series::new(format!("m={}", m), points));
    }
    if let Some(plot) = &a.plot {
        emit_svg(&series, calibration::statistic_label(&spec).as_str(), "ecdf", plot)?;
        art.outputs.push(plot.clone());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRow {
    pub d: usize,
    pub delta: f64,
    pub u: f64,
    pub lattice_res: usize,
    pub candidates: usize,
    pub count: usize,
    pub bound_ratio: f64,
    pub valid: bool,
}

fn packing(a: &PackingArgs, art: &mut Artifacts) -> Result<()> {
    let mut rows = Vec::new();
    for &d in &a.d {
        for p in packing_bound_sweep(d, &a.deltas, &a.us, a.res)? {
            rows.push(PackingRow {
                d: p.d,
                delta: p.delta,
                u: p.u,
                lattice_res: p.lattice_res,
                candidates: p.candidates,
                count: p.count,
                bound_ratio: p.bound_ratio,
                valid: packing_is_valid(&p.selected, p.delta, p.u),
            });
        }
    }
    if rows.iter().any(|r| !r.valid) {
        bail!("greedy packing failed pairwise validation");
    }
    emit(&rows, &a.output, art)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCsvRow {
    pub m: usize,
    pub mean: f64,
    pub std_err: f64,
    pub reference: f64,
}

fn vlt1(a: &Vlt1Args, art: &mut Artifacts) -> Result<()> {
    let mut ms = a.m.clone();
    ms.sort_unstable();
    ms.dedup();
    let rows: Vec<DivergenceCsvRow> = v_less_one_divergence(a.d, a.v, &ms, a.seeds, a.seed)?
        .into_iter()
        .map(|r| DivergenceCsvRow {
            m: r.m,
            mean: r.mean,
            std_err: r.std_err,
            reference: r.reference,
        })
        .collect();
    emit(&rows, &a.output, art)
}
