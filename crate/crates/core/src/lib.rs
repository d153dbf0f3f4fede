//! Multiscale detection of sparse signals on regular lattices.
//!
//! A field `Y = f + noise` is observed on an `m_1 x ... x m_d` grid. The
//! statistics in [`statistics`] scan all axis-aligned lattice rectangles and
//! combine the normalized rectangle sums across scales; [`calibration`]
//! estimates null quantiles and power by Monte Carlo.
//!
//! ```
//! use multiscan::calibration::calibrate;
//! use multiscan::simulation::observed_grid;
//! use multiscan::{Evaluator, RngSpec, SignalSpec, StatisticSpec};
//!
//! let dims = [12, 12];
//! let spec = StatisticSpec::multiscale();
//! let cal = calibrate(&dims, &spec, &[0.05], 200, 1)?;
//!
//! let signal = SignalSpec::corner_square(&dims, 6, 1.5)?;
//! let y = observed_grid(&dims, &signal, RngSpec::new(42, 0))?;
//! let result = Evaluator::new(&dims, &[spec])?.detect(&y)?.remove(0);
//! assert!(result.value > cal.kappa(0.05).unwrap());
//! # Ok::<(), multiscan::Error>(())
//! ```

pub mod calibration;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod penalties;
pub mod plot;
pub mod simulation;
pub mod statistics;
pub mod theory;

pub use calibration::{CalibrationKey, CalibrationRecord, PowerReport};
pub use error::{Error, Result};
pub use grid::{build_prefix, enumerate_rects, GridField, PrefixTable, Rect, ScaleFilter};
pub use kernels::{Kernel, KernelKind, ScaledKernel};
pub use penalties::PenaltySpec;
pub use simulation::{RngSpec, SignalSpec};
pub use statistics::{DetectionResult, Evaluator, StatisticKind, StatisticSpec};
