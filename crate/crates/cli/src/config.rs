use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use multiscan::{KernelKind, PenaltySpec, ScaleFilter, SignalSpec, StatisticKind, StatisticSpec};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "multiscan", version, about = "Multiscale detection of rectangular signals on lattices")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Monte Carlo critical values under the null.
    Calibrate(CalibrateArgs),
    /// Test one observed grid.
    Detect(DetectArgs),
    /// Rejection rates against square or custom signals.
    Power(PowerArgs),
    /// Null distribution of a statistic as an ECDF table.
    NullEcdf(NullEcdfArgs),
    /// Greedy packings of small boxes against the covering bound.
    PackingCheck(PackingArgs),
    /// Finest-scale statistic under a weakened penalty.
    Vlt1(Vlt1Args),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeArgs {
    /// Points per axis.
    #[arg(long, conflicts_with = "dims")]
    pub m: Option<usize>,
    /// Number of axes, used with --m.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Per-axis sizes, e.g. 40,30.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
}

impl ShapeArgs {
    pub fn dims(&self) -> Result<Vec<usize>> {
        let dims = match (&self.dims, self.m) {
            (Some(d), _) => d.clone(),
            (None, Some(m)) => vec![m; self.d],
            (None, None) => bail!("grid size required: pass --m or --dims"),
        };
        if dims.is_empty() || dims.contains(&0) {
            bail!("invalid dimensions {:?}", dims);
        }
        Ok(dims)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArgs {
    /// "indicator" or "holder:<beta>".
    #[arg(long, default_value = "indicator", value_parser = parse_kernel)]
    pub kernel: KernelKind,
    /// Use the weakened penalty sqrt(2 V log(1/r)) instead of the standard one.
    #[arg(long)]
    pub penalty_v: Option<f64>,
    /// Smallest side length (points) of scanned rectangles.
    #[arg(long)]
    pub min_side: Option<usize>,
    /// Largest side length (points) of scanned rectangles.
    #[arg(long)]
    pub max_side: Option<usize>,
}

impl ModelArgs {
    pub fn spec(&self, kind: StatisticKind) -> Result<StatisticSpec> {
        let mut spec = StatisticSpec::new(kind)
            .with_kernel(self.kernel)
            .with_filter(ScaleFilter {
                min_side: self.min_side,
                max_side: self.max_side,
            });
        if let Some(v) = self.penalty_v {
            if !kind.is_penalized() {
                bail!("penalty not applicable: {} takes no penalty", kind);
            }
            spec = spec.with_penalty(PenaltySpec::gamma_v(v)?);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Statistics to calibrate from one set of null grids.
    #[arg(long, value_delimiter = ',', default_value = "multiscale", value_parser = parse_kind)]
    pub stat: Vec<StatisticKind>,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = multiscan::calibration::DEFAULT_CALIBRATION_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also store the records in this cache file.
    #[arg(long)]
    pub kappa_cache: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectArgs {
    /// Grid file (CSV or binary).
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value = "multiscale", value_parser = parse_kind)]
    pub stat: StatisticKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Read the critical value from this cache instead of calibrating.
    #[arg(long)]
    pub kappa_cache: Option<PathBuf>,
    /// Replications of the calibration to use or run.
    #[arg(long, default_value_t = multiscan::calibration::DEFAULT_CALIBRATION_REPS)]
    pub reps: usize,
    /// Seed of the calibration to use or run.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Exit with status 2 when the null is rejected.
    #[arg(long)]
    pub exit_code_signal: bool,
    /// Write the result as JSON here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerArgs {
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "scan,multiscale,alr", value_parser = parse_kind)]
    pub stat: Vec<StatisticKind>,
    /// Side lengths of corner squares; every k is combined with every mu.
    #[arg(long, value_delimiter = ',', conflicts_with = "signal")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', conflicts_with = "signal")]
    pub mu: Vec<f64>,
    /// A custom signal such as "rect:mu=1,lo=1,1,hi=4,4" or "bump:beta=0.5,L=1,t=0.5,0.5,h=0.1,0.1".
    #[arg(long, value_parser = parse_signal)]
    pub signal: Option<SignalSpec>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Alternative replications per cell.
    #[arg(long, default_value_t = multiscan::calibration::DEFAULT_POWER_REPS)]
    pub reps: usize,
    /// Null replications of the calibration.
    #[arg(long, default_value_t = multiscan::calibration::DEFAULT_CALIBRATION_REPS)]
    pub cal_reps: usize,
    /// Calibration seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seed of the alternative replications (default: seed + 1).
    #[arg(long)]
    pub power_seed: Option<u64>,
    /// Read calibrations from this cache instead of running them.
    #[arg(long)]
    pub kappa_cache: Option<PathBuf>,
    /// Power against mu, one line per statistic and k.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullEcdfArgs {
    /// Points per axis; several values write one file per m.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value = "multiscale", value_parser = parse_kind)]
    pub stat: StatisticKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.125")]
    pub deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25")]
    pub us: Vec<f64>,
    /// Lattice resolution of candidate centers and widths.
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vlt1Args {
    #[arg(long)]
    pub v: f64,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
    pub m: Vec<usize>,
    /// Replications per m.
    #[arg(long, default_value_t = 50)]
    pub seeds: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_kind(s: &str) -> std::result::Result<StatisticKind, String> {
    s.parse().map_err(|e: multiscan::Error| e.to_string())
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    s.parse().map_err(|e: multiscan::Error| e.to_string())
}

fn parse_signal(s: &str) -> std::result::Result<SignalSpec, String> {
    s.parse().map_err(|e: multiscan::Error| e.to_string())
}

/// Parses `argv` (program name first) and checks combinations clap cannot.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = RunConfig::try_parse_from(argv)?;
    config.validate()?;
    Ok(config)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("alpha must lie in (0, 1), got {}", alpha);
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        match &self.command {
            Command::Calibrate(a) => {
                a.shape.dims()?;
                for &kind in &a.stat {
                    a.model.spec(kind)?;
                }
                a.alpha.iter().try_for_each(|&x| check_alpha(x))?;
            }
            Command::Detect(a) => {
                a.model.spec(a.stat)?;
                check_alpha(a.alpha)?;
            }
            Command::Power(a) => {
                let dims = a.shape.dims()?;
                for &kind in &a.stat {
                    a.model.spec(kind)?;
                }
                check_alpha(a.alpha)?;
                match &a.signal {
                    Some(sig) => sig.validate(&dims).context("invalid --signal")?,
                    None => {
                        if a.k.is_empty() || a.mu.is_empty() {
                            bail!("power needs --k and --mu, or --signal");
                        }
                        if let Some(&k) = a.k.iter().find(|&&k| k == 0 || dims.iter().any(|&m| k > m)) {
                            bail!("square side {} does not fit in {:?}", k, dims);
                        }
                    }
                }
            }
            Command::NullEcdf(a) => {
                if a.m.contains(&0) || a.d == 0 {
                    bail!("invalid dimensions");
                }
                a.model.spec(a.stat)?;
                if a.m.len() > 1 && a.output.out.is_none() {
                    bail!("several --m values need --out");
                }
            }
            Command::PackingCheck(a) => {
                if a.d.contains(&0) {
                    bail!("dimension must be at least 1");
                }
            }
            Command::Vlt1(a) => {
                if a.v >= 1.0 {
                    bail!("not in divergence regime: v = {} must be < 1", a.v);
                }
                if !(a.v > 0.0) {
                    bail!("v must be positive, got {}", a.v);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        parse_args(std::iter::once("multiscan").chain(s.split_whitespace()))
    }

    #[test]
    fn documented_examples() {
        let c = parse("calibrate --m 50 --d 2 --stat multiscale --alpha 0.05 --reps 3000 --seed 7").unwrap();
        let Command::Calibrate(a) = &c.command else { panic!() };
        assert_eq!(a.shape.dims().unwrap(), vec![50, 50]);
        assert_eq!((a.reps, a.seed), (3000, 7));

        let e = parse("calibrate --m 10 --penalty-v 0.5 --stat alr").unwrap_err();
        assert!(e.to_string().contains("penalty not applicable"), "{}", e);

        let c = parse("detect --grid in.csv --stat scan --kappa-cache cache.json").unwrap();
        assert!(matches!(c.command, Command::Detect(_)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("calibrate --m 10 --bogus 1").is_err());
        assert!(parse("frobnicate").is_err());
        assert!(parse("calibrate --m ten").is_err());
        assert!(parse("calibrate --m 10 --stat scan --kernel holder:0.5").is_err());
        assert!(parse("calibrate --m 10 --alpha 1.5").is_err());
        assert!(parse("calibrate").is_err());
        assert!(parse("power --m 10 --k 11 --mu 1").is_err());
        assert!(parse("vlt1 --v 1").unwrap_err().to_string().contains("not in divergence regime"));
        assert!(parse("calibrate --m 10 --threads 0").is_err());
    }

    #[test]
    fn round_trips_through_json() {
        for s in [
            "calibrate --m 50 --stat multiscale,scan --alpha 0.05,0.1 --reps 3000 --seed 7 --threads 4",
            "detect --grid in.csv --stat multiscale --penalty-v 4 --exit-code-signal",
            "power --dims 40,30 --k 1,18 --mu 0.3,5.5 --power-seed 9 --format csv",
            "power --m 20 --signal rect:mu=1,lo=1,1,hi=4,4 --stat multiscale --kernel holder:0.5",
            "null-ecdf --m 25,50 --out e.csv --plot e.svg --min-side 2",
            "packing-check --d 2 --deltas 0.5 --us 1",
            "vlt1 --v 0.25 --m 16,256",
        ] {
            let c = parse(s).unwrap();
            let json = serde_json::to_string(&c).unwrap();
            let back: RunConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c, "{}", s);
        }
    }
}
