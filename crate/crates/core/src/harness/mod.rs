//! Experiment configuration, link metrics and Monte Carlo sweeps.

mod output;
mod plot;
mod sweep;

pub use output::{
    read_csv, read_distance_csv, read_overhead_csv, write_csv, write_distance_csv, write_json, write_overhead_csv,
    DistanceRow, OverheadRow, ResultRow, ResultTable, CSV_HEADER,
};
pub use plot::{render_plots, PLOT_FILES};
pub use sweep::{
    overhead_table, run_sweep, simulate_trial, simulate_trial_detailed, trial_geometry, trial_schedule, ApScore,
    SweepOutput, TrialContext, TrialGeometry, TrialOutcome,
};

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{inner, norm, ArrayConfig};
use crate::codebook::{CodebookParams, RingAxis};
use crate::error::{domain, Error, Result};
use crate::hash::PartitionMode;
use crate::protocol::{DemuxMode, Method};

/// Environment variable overriding the master seed.
pub const SEED_ENV: &str = "HMB_SEED";

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Milliwatt-referenced level to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub m: usize,
    pub n: usize,
    pub carrier_hz: f64,
    /// Element spacing along x; half a wavelength when absent.
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub dz: Option<f64>,
}

impl ArraySpec {
    pub fn build(&self) -> Result<ArrayConfig> {
        let half = ArrayConfig::half_wavelength(self.m, self.n, self.carrier_hz)?;
        ArrayConfig::new(
            self.m,
            self.n,
            self.dx.unwrap_or(half.dx),
            self.dz.unwrap_or(half.dz),
            self.carrier_hz,
        )
    }
}

/// Fixed AP position relative to the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Random AP placement model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Direction uniform over the codebook span, distance log-uniform.
    #[default]
    Continuous,
    /// At a uniformly drawn codebook sampling point; far-field rows sit at
    /// the upper end of the distance range.
    Grid,
}

impl std::str::FromStr for PlacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(PlacementMode::Continuous),
            "grid" => Ok(PlacementMode::Grid),
            _ => domain(format!("unknown placement mode {s:?} (expected continuous or grid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub aps: usize,
    /// Fixed placements; random when empty.
    pub placements: Vec<PlacementSpec>,
    /// How random placements are drawn.
    pub placement: PlacementMode,
    /// Log-uniform AP distance range; the codebook range when absent.
    pub distance: Option<[f64; 2]>,
    pub rho0_db: f64,
    pub p0_dbm: f64,
    /// Noise power for single runs without an SNR target.
    pub sigma2_dbm: f64,
    /// Extra non-line-of-sight paths per AP.
    pub nlos_paths: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            aps: 2,
            placements: Vec::new(),
            placement: PlacementMode::default(),
            distance: None,
            rho0_db: -72.0,
            p0_dbm: 15.0,
            sigma2_dbm: -70.0,
            nlos_paths: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSpec {
    pub threshold: f64,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub axis: RingAxis,
    pub far_field_only: bool,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self {
            threshold: crate::codebook::DEFAULT_THRESHOLD,
            r_min: None,
            r_max: None,
            axis: RingAxis::Finer,
            far_field_only: false,
        }
    }
}

impl CodebookSpec {
    pub fn params(&self, cfg: &ArrayConfig) -> CodebookParams {
        let base = CodebookParams::for_array(cfg);
        CodebookParams {
            threshold: self.threshold,
            r_min: self.r_min.unwrap_or(base.r_min),
            r_max: self.r_max.unwrap_or(base.r_max),
            axis: self.axis,
            far_field_only: self.far_field_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub buckets: usize,
    pub rounds: usize,
    /// Hash independence order `k`.
    pub independence: usize,
    pub demux: DemuxMode,
    pub partition: PartitionMode,
    /// Hard-decision threshold as a fraction of the round maximum.
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub optimize_phases: bool,
    /// Deviation quadrature nodes per axis.
    pub quadrature: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            buckets: 16,
            rounds: 6,
            independence: 2,
            demux: DemuxMode::Plain,
            partition: PartitionMode::Balanced,
            alpha: 0.5,
            methods: Method::ALL.to_vec(),
            optimize_phases: false,
            quadrature: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    /// Bucket counts to sweep; the protocol value when empty.
    pub buckets: Vec<usize>,
    pub rounds: Vec<usize>,
    /// Log-spaced distance bins for the rate-versus-distance table.
    pub distance_bins: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: (-10..=30).step_by(5).map(f64::from).collect(),
            buckets: Vec::new(),
            rounds: Vec::new(),
            distance_bins: 8,
        }
    }
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub array: ArraySpec,
    pub scenario: ScenarioConfig,
    pub codebook: CodebookSpec,
    pub protocol: ProtocolConfig,
    pub sweep: SweepConfig,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Minutes-scale 4×32 setup with two APs.
    pub fn desk() -> Self {
        Self {
            array: ArraySpec {
                m: 4,
                n: 32,
                carrier_hz: 28e9,
                dx: None,
                dz: None,
            },
            scenario: ScenarioConfig::default(),
            codebook: CodebookSpec::default(),
            protocol: ProtocolConfig::default(),
            sweep: SweepConfig::default(),
            trials: 500,
            seed: 1,
        }
    }

    /// Full-scale 4×128 setup with five APs and 32 buckets.
    pub fn full() -> Self {
        let mut cfg = Self::desk();
        cfg.array.n = 128;
        cfg.scenario.aps = 5;
        cfg.protocol.buckets = 32;
        cfg
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            _ => domain(format!("unknown profile {name:?} (expected desk or full)")),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies [`SEED_ENV`] when set; returns whether it was.
    pub fn apply_seed_env(&mut self) -> Result<bool> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                self.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                Ok(true)
            }
            Err(_) => Ok(false),
        }
    }

    pub fn array_config(&self) -> Result<ArrayConfig> {
        self.array.build()
    }

    pub fn bucket_list(&self) -> Vec<usize> {
        if self.sweep.buckets.is_empty() {
            vec![self.protocol.buckets]
        } else {
            self.sweep.buckets.clone()
        }
    }

    pub fn round_list(&self) -> Vec<usize> {
        if self.sweep.rounds.is_empty() {
            vec![self.protocol.rounds]
        } else {
            self.sweep.rounds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.array_config()?;
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.sweep.snr_db.is_empty() || self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return domain("the SNR list must be nonempty and finite");
        }
        if self.protocol.methods.is_empty() {
            return domain("at least one method is required");
        }
        let methods = &self.protocol.methods;
        if (1..methods.len()).any(|i| methods[..i].contains(&methods[i])) {
            return domain("methods must not repeat");
        }
        if self.scenario.aps == 0 {
            return domain("at least one AP is required");
        }
        if !self.scenario.placements.is_empty() && self.scenario.placements.len() != self.scenario.aps {
            return domain(format!(
                "{} placements given for {} APs",
                self.scenario.placements.len(),
                self.scenario.aps
            ));
        }
        if let Some([lo, hi]) = self.scenario.distance {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return domain(format!("invalid AP distance range [{lo}, {hi}]"));
            }
        }
        if self.bucket_list().iter().any(|&b| b < 2) {
            return domain("bucket counts must be at least 2");
        }
        if self.round_list().contains(&0) {
            return domain("round counts must be at least 1");
        }
        if !(2..=crate::hash::MAX_INDEPENDENCE).contains(&self.protocol.independence) {
            return domain(format!(
                "independence order {} is out of range",
                self.protocol.independence
            ));
        }
        if !(self.protocol.alpha > 0.0 && self.protocol.alpha < 1.0) {
            return domain(format!("threshold α must lie in (0, 1) (got {})", self.protocol.alpha));
        }
        if self.protocol.quadrature < 4 {
            return domain("deviation quadrature needs at least 4 nodes per axis");
        }
        if self.sweep.distance_bins == 0 {
            return domain("distance_bins must be at least 1");
        }
        Ok(())
    }
}

/// Reference SNR `γ = P_0·MN·ρ_0/(r_0²·σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSnr(f64);

impl ReferenceSnr {
    pub fn from_db(db: f64) -> Self {
        Self(db_to_linear(db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        linear_to_db(self.0)
    }
}

pub fn reference_snr(p0: f64, elements: usize, rho0: f64, r0: f64, sigma2: f64) -> Result<ReferenceSnr> {
    if !(p0 > 0.0 && rho0 > 0.0 && r0 > 0.0 && sigma2 > 0.0 && elements > 0) {
        return domain("reference SNR inputs must all be positive");
    }
    Ok(ReferenceSnr(p0 * elements as f64 * rho0 / (r0 * r0 * sigma2)))
}

/// Noise power that puts the reference SNR at `snr` for distance `r0`.
pub fn sigma2_for_snr(p0: f64, elements: usize, rho0: f64, r0: f64, snr: ReferenceSnr) -> f64 {
    p0 * elements as f64 * rho0 / (r0 * r0 * snr.linear())
}

/// `log₂(1 + γ·|g₁ᴴ w|²)` for a unit-norm dominant-path response `g₁`.
pub fn achievable_rate(weights: &[Complex64], g1: &[Complex64], snr: f64) -> Result<f64> {
    if weights.len() != g1.len() {
        return domain(format!("{} weights for a {}-element response", weights.len(), g1.len()));
    }
    if (norm(g1) - 1.0).abs() > 1e-9 {
        return domain("the path response must have unit norm");
    }
    if !(snr >= 0.0) {
        return domain(format!("SNR must be nonnegative (got {snr})"));
    }
    Ok((1.0 + snr * inner(g1, weights).norm_sqr()).log2())
}

/// Training slots each method consumes.
pub fn overhead(method: Method, codebook_size: usize, aps: usize, buckets: usize, rounds: usize) -> usize {
    match method {
        Method::Exhaustive | Method::Dft => codebook_size * aps,
        Method::Eimb => buckets * rounds * aps,
        Method::Hmb | Method::HmbHard => buckets * rounds,
    }
}

/// [`overhead`] for a method name.
pub fn overhead_by_name(
    method: &str,
    codebook_size: usize,
    aps: usize,
    buckets: usize,
    rounds: usize,
) -> Result<usize> {
    Ok(overhead(method.parse()?, codebook_size, aps, buckets, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, PolarPoint, SteeringMode};
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_snr_unity_and_scaling() {
        let g = reference_snr(1.0, 1, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.linear(), 1.0);
        assert_abs_diff_eq!(g.db(), 0.0);
        let a = reference_snr(2.0, 16, 0.5, 3.0, 0.1).unwrap().linear();
        let b = reference_snr(2.0, 32, 0.5, 3.0, 0.1).unwrap().linear();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-12);
        assert!(reference_snr(0.0, 1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn reference_snr_db_arithmetic() {
        let r0 = 7.0;
        let g = reference_snr(dbm_to_watts(15.0), 512, db_to_linear(-72.0), r0, dbm_to_watts(-70.0)).unwrap();
        let hand = 15.0 - (-70.0) + (-72.0) + 10.0 * 512f64.log10() - 20.0 * r0.log10();
        assert_abs_diff_eq!(g.db(), hand, epsilon = 1e-9);
        let s2 = sigma2_for_snr(1.0, 512, 1e-7, r0, ReferenceSnr::from_db(10.0));
        assert_abs_diff_eq!(
            reference_snr(1.0, 512, 1e-7, r0, s2).unwrap().db(),
            10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rate_limits() {
        let cfg = ArrayConfig::half_wavelength(4, 8, 28e9).unwrap();
        let g = steering_vector(&cfg, &PolarPoint::new(2.0, 0.3, 1.2), SteeringMode::Exact);
        assert_abs_diff_eq!(achievable_rate(&g, &g, 10.0).unwrap(), 11f64.log2(), epsilon = 1e-12);
        let mut e0 = vec![Complex64::new(0.0, 0.0); g.len()];
        e0[0] = Complex64::new(1.0, 0.0);
        let proj = inner(&g, &e0);
        let orth: Vec<Complex64> = e0.iter().zip(&g).map(|(e, gi)| e - gi * proj).collect();
        assert_abs_diff_eq!(achievable_rate(&orth, &g, 10.0).unwrap(), 0.0, epsilon = 1e-12);
        let w: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in g.iter().zip(&w) {
            acc += a.conj() * b;
        }
        assert_abs_diff_eq!(
            achievable_rate(&w, &g, 3.0).unwrap(),
            (1.0 + 3.0 * acc.norm_sqr()).log2(),
            epsilon = 1e-12
        );
        assert!(achievable_rate(&w, &w, 3.0).is_err());
    }

    #[test]
    fn overhead_identities() {
        assert_eq!(overhead(Method::Hmb, 512, 5, 32, 6), 192);
        assert_eq!(overhead(Method::Hmb, 512, 1, 32, 6), 192);
        assert_eq!(overhead(Method::Exhaustive, 512, 5, 32, 6), 2560);
        assert_eq!(overhead(Method::Eimb, 512, 5, 32, 6), 960);
        assert!(overhead_by_name("bogus", 1, 1, 1, 1).is_err());
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = ExperimentConfig::desk();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
        let partial = ExperimentConfig::from_json(r#"{"trials": 3, "protocol": {"buckets": 8}}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.protocol.buckets, 8);
        assert_eq!(partial.protocol.rounds, 6);
        assert!(ExperimentConfig::from_json(r#"{"trials": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"sweep": {"snr_db": []}}"#).is_err());
        assert_eq!(ExperimentConfig::profile("full").unwrap().array.n, 128);
        assert!(ExperimentConfig::profile("huge").is_err());
    }
}
