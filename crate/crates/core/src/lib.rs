//! Low-rank adaptive subspace DOA estimation for uniform linear arrays.
//!
//! The crate provides two recursive-least-squares estimators that decompose
//! each scanning steering vector into short basis vectors through a
//! zero-padded Hankel embedding, plus classical baselines (minimum-variance,
//! subspace pseudospectrum, rotational-invariance), a snapshot simulator and
//! a Monte Carlo evaluation harness with a stochastic Cramer-Rao reference.

pub mod alrd;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod malrd;
pub mod selftest;
pub mod signal;
pub mod spectrum;

pub use alrd::{alrd_scan, AlrdConfig};
pub use baselines::{baseline_estimate, BaselineConfig, BaselineMethod};
pub use error::{DoaError, Result};
pub use eval::{
    check_resolution, complexity_probe, crb_reference, find_peaks, rmse, run_sweep, MethodSpec,
    ProbeMethod, ProbeVar, SweepReport, TrialResult,
};
pub use malrd::malrd_scan;
pub use selftest::{run_selftest, CheckResult, SelftestParams};
pub use signal::{
    generate_snapshots, steering_vector, trial_rng, SnapshotBatch, SourceScenario, UlaGeometry,
};
pub use spectrum::{GridSpec, ScanOutcome, Spectrum};
