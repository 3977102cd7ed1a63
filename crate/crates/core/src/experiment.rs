//! Config ingestion and the seeded Monte Carlo experiment runners.
//!
//! A config is a flat `key = value` file; overrides use the same keys. Every
//! runner renders its artifacts in memory first and each trial draws from a
//! generator derived from `(seed, cell keys, trial)`, so the output bytes are
//! a function of the config alone, never of the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::beamformer::{
    design, gs_design, target_magnitude_profile, Beamformer, BeamformerError, GainMask, MAX_BITS,
};
use crate::recovery::{
    nmse, nmse_analytic, omp_dictionary, omp_recover, precoder_dictionary, ColumnScaling, RecoveryError,
    Stopping, SupportSet,
};
use crate::scene::{
    add_noise, assemble_channel, direct_samples, random_scene, synthesize_with_noise, SceneError, SnrModel,
    TargetScene,
};
use crate::seed::derive_seed;
use crate::spectral::{is_prime, ComplexGrid};
use crate::tradeoff::{
    alpha, build_region, spectral_efficiency, weights_sweep, CommLink, Normalization, Selection,
    TradeoffError, TradeoffRegion, WaveformBudget,
};
use crate::trajectory::{
    analyze, atom_index, coherence_direct, optimized_trajectory, random_trajectory, rs_baseline_precoders,
    Trajectory, TrajectoryError, DIRECT_COHERENCE_LIMIT,
};

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Support-recovery rate that marks the analytic NMSE as trustworthy.
pub const CROSSOVER_SUCCESS_RATE: f64 = 0.95;

// Seed-derivation tags; shared across SNR/rho/split cells so curves use common random numbers.
const TAG_SCENE: u64 = 1;
const TAG_NOISE: u64 = 2;
const TAG_TRAJECTORY: u64 = 3;
const TAG_SWITCHING: u64 = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// One line per violated rule.
    #[error("{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("numerical degeneracy: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    fn config(msg: impl Into<String>) -> Self {
        ExperimentError::Config(vec![msg.into()])
    }
}

impl From<BeamformerError> for ExperimentError {
    fn from(e: BeamformerError) -> Self {
        match e {
            BeamformerError::DegenerateDesign { .. } => ExperimentError::Numerical(e.to_string()),
            other => ExperimentError::config(other.to_string()),
        }
    }
}

impl From<RecoveryError> for ExperimentError {
    fn from(e: RecoveryError) -> Self {
        match e {
            RecoveryError::IllConditioned { .. } => ExperimentError::Numerical(e.to_string()),
            other => ExperimentError::config(other.to_string()),
        }
    }
}

impl From<SceneError> for ExperimentError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Beamformer(b) => b.into(),
            other => ExperimentError::config(other.to_string()),
        }
    }
}

impl From<TrajectoryError> for ExperimentError {
    fn from(e: TrajectoryError) -> Self {
        ExperimentError::config(e.to_string())
    }
}

impl From<TradeoffError> for ExperimentError {
    fn from(e: TradeoffError) -> Self {
        match e {
            TradeoffError::InvalidNmse { .. } => ExperimentError::Numerical(e.to_string()),
            other => ExperimentError::config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Psf,
    NmseVsSnr,
    NmseVsK,
    CompareTrajectories,
    CompareRs,
    ParetoSweep,
    WeightsSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Psf,
        ExperimentKind::NmseVsSnr,
        ExperimentKind::NmseVsK,
        ExperimentKind::CompareTrajectories,
        ExperimentKind::CompareRs,
        ExperimentKind::ParetoSweep,
        ExperimentKind::WeightsSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Psf => "psf",
            ExperimentKind::NmseVsSnr => "nmse-vs-snr",
            ExperimentKind::NmseVsK => "nmse-vs-k",
            ExperimentKind::CompareTrajectories => "compare-trajectories",
            ExperimentKind::CompareRs => "compare-rs",
            ExperimentKind::ParetoSweep => "pareto-sweep",
            ExperimentKind::WeightsSweep => "weights-sweep",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Psf => "point spread function and coherence of a sampling trajectory",
            ExperimentKind::NmseVsSnr => "Monte Carlo and analytic NMSE against SNR",
            ExperimentKind::NmseVsK => "Monte Carlo and analytic NMSE against target count",
            ExperimentKind::CompareTrajectories => {
                "optimized vs random shifts vs random switching (split 0.5)"
            }
            ExperimentKind::CompareRs => "optimized vs random shifts vs random switching (split 30/31)",
            ExperimentKind::ParetoSweep => "radar/communication trade-off region and its convex hull",
            ExperimentKind::WeightsSweep => "weighted optimum against the communication weight",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn uses_lattice(self) -> bool {
        matches!(self, ExperimentKind::ParetoSweep | ExperimentKind::WeightsSweep)
    }

    fn compares(self) -> bool {
        matches!(
            self,
            ExperimentKind::CompareTrajectories | ExperimentKind::CompareRs
        )
    }
}

/// Which SNR the `snr_db` list sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrKnob {
    /// `zeta_net`: includes preamble integration and per-direction TX gain.
    Net,
    /// `zeta`: excludes both gains.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryChoice {
    Optimized,
    Random,
}

/// Gain mask used by the measurement model and the analytic NMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskChoice {
    /// The mask of the quantized Gerchberg-Saxton design.
    Designed,
    /// The ideal profile `[sqrt(split), sqrt(split_r), ...]`.
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmseSource {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub frames: usize,
    pub antennas: usize,
    pub targets: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub snr_knob: SnrKnob,
    pub rho: Vec<u32>,
    pub delta: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub bits: u32,
    pub gs_iterations: usize,
    pub trajectory: TrajectoryChoice,
    pub mask: MaskChoice,
    pub active_fraction: f64,
    pub min_separation: usize,
    pub zeta_c_db: f64,
    pub cpi: f64,
    pub symbol_rate: f64,
    pub ifs: f64,
    pub block_len: u32,
    pub max_blocks: u32,
    pub weights: Vec<f64>,
    pub normalization: Normalization,
    pub nmse_source: NmseSource,
    pub wavelength: f64,
    pub max_speed: Option<f64>,
}

/// Keys in canonical order, as echoed into the manifest.
pub const KEYS: [&str; 28] = [
    "experiment",
    "frames",
    "antennas",
    "targets",
    "snr_db",
    "snr_knob",
    "rho",
    "delta",
    "trials",
    "seed",
    "output_dir",
    "bits",
    "gs_iterations",
    "trajectory",
    "mask",
    "active_fraction",
    "min_separation",
    "zeta_c_db",
    "cpi",
    "symbol_rate",
    "ifs",
    "block_len",
    "max_blocks",
    "weights",
    "normalization",
    "nmse_source",
    "wavelength",
    "max_speed",
];

fn canonical_key(key: &str) -> String {
    let k = key.trim().trim_start_matches("--").replace('-', "_");
    match k.as_str() {
        "M" | "m" => "frames".into(),
        "N" | "n" => "antennas".into(),
        "K" | "k" => "targets".into(),
        _ => k.to_ascii_lowercase(),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => pairs.push((k.trim().to_string(), v.trim().to_string())),
            _ => errors.push(format!("line {}: expected `key = value`, got `{line}`", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(ExperimentError::Config(errors))
    }
}

/// Turns `--key value` arguments into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            return Err(ExperimentError::config(format!(
                "expected `--key value`, got `{flag}`"
            )));
        };
        if let Some((k, v)) = key.split_once('=') {
            pairs.push((k.to_string(), v.to_string()));
            continue;
        }
        let Some(value) = it.next() else {
            return Err(ExperimentError::config(format!("override `{flag}` has no value")));
        };
        pairs.push((key.to_string(), value.clone()));
    }
    Ok(pairs)
}

/// Accepts plain numbers and fractions such as `30/31`.
fn parse_f64(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a non-negative integer", s.trim()))
}

/// Comma-separated items; `start:step:stop` expands to an inclusive range.
fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_f64(v)?),
            [a, step, b] => {
                let (a, step, b) = (parse_f64(a)?, parse_f64(step)?, parse_f64(b)?);
                if step <= 0.0 || b < a {
                    return Err(format!("range `{item}` needs a positive step and start <= stop"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                if count > 100_000 {
                    return Err(format!("range `{item}` is too long"));
                }
                // Round to 12 decimals so 0:0.1:1 yields 0.3 rather than 0.30000000000000004.
                out.extend((0..=count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12));
            }
            _ => return Err(format!("cannot parse list item `{item}`")),
        }
    }
    Ok(out)
}

fn parse_int_list<T: TryFrom<u64>>(s: &str) -> Result<Vec<T>, String> {
    let mut out = Vec::new();
    let conv = |v: u64| T::try_from(v).map_err(|_| format!("{v} is out of range"));
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(conv(parse_int(v)?)?),
            [a, step, b] => {
                let (a, step, b): (u64, u64, u64) = (parse_int(a)?, parse_int(step)?, parse_int(b)?);
                if step == 0 || b < a || (b - a) / step > 100_000 {
                    return Err(format!("range `{item}` needs a positive step and start <= stop"));
                }
                for v in (a..=b).step_by(step as usize) {
                    out.push(conv(v)?);
                }
            }
            _ => return Err(format!("cannot parse list item `{item}`")),
        }
    }
    Ok(out)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for `kind`, following the simulation setup of an 802.11ad-like link.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            frames: 31,
            antennas: 31,
            targets: vec![1],
            snr_db: vec![20.0],
            snr_knob: SnrKnob::Net,
            rho: vec![2],
            delta: vec![0.5],
            trials: 500,
            seed: 1,
            output_dir: PathBuf::from(format!("out/{}", kind.name())),
            bits: crate::beamformer::DEFAULT_BITS,
            gs_iterations: crate::beamformer::DEFAULT_GS_ITERATIONS,
            trajectory: TrajectoryChoice::Optimized,
            mask: MaskChoice::Designed,
            active_fraction: 0.5,
            min_separation: 0,
            zeta_c_db: 20.0,
            cpi: 5e-3,
            symbol_rate: 1.76e9,
            ifs: 0.0,
            block_len: 512,
            max_blocks: 53,
            weights: (0..=10).map(|i| i as f64 / 10.0).collect(),
            normalization: Normalization::MinMax,
            nmse_source: NmseSource::Analytic,
            wavelength: 5e-3,
            max_speed: None,
        };
        match kind {
            ExperimentKind::Psf => {}
            ExperimentKind::NmseVsSnr => c.snr_db = (-2..=8).map(|i| i as f64 * 5.0).collect(),
            ExperimentKind::NmseVsK => {
                c.targets = (1..=9).collect();
                c.snr_db = vec![30.0];
            }
            ExperimentKind::CompareTrajectories => {
                c.targets = (1..=9).collect();
                c.snr_db = vec![10.0, 20.0, 30.0];
            }
            ExperimentKind::CompareRs => {
                c.targets = (1..=9).collect();
                c.snr_db = vec![10.0, 20.0, 30.0];
                c.delta = vec![30.0 / 31.0];
                // Same radiated fraction as the split, so both designs keep a comparable communication beam.
                c.active_fraction = 30.0 / 31.0;
            }
            ExperimentKind::ParetoSweep | ExperimentKind::WeightsSweep => {
                c.frames = 257;
                c.antennas = 257;
                c.targets = vec![2];
                c.snr_db = vec![-10.0];
                c.snr_knob = SnrKnob::Raw;
                c.rho = crate::tradeoff::default_rho_lattice(53);
                c.delta = crate::tradeoff::default_delta_lattice();
            }
        }
        c
    }

    /// Builds a config from pairs; the `experiment` key is required and
    /// selects the defaults the remaining pairs override, in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ExperimentError> {
        let kind_name = pairs
            .iter()
            .rev()
            .find(|(k, _)| canonical_key(k) == "experiment")
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| ExperimentError::config("missing required key `experiment`"))?;
        let kind = ExperimentKind::from_name(&kind_name).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            ExperimentError::config(format!(
                "unknown experiment `{kind_name}` (expected one of {})",
                names.join(", ")
            ))
        })?;
        let mut c = Self::defaults(kind);
        let mut errors = Vec::new();
        for (k, v) in pairs {
            let key = canonical_key(k);
            if let Err(e) = c.set(&key, v) {
                errors.push(format!("{key}: {e}"));
            }
        }
        if errors.is_empty() {
            Ok(c)
        } else {
            Err(ExperimentError::Config(errors))
        }
    }

    /// Parses a config file's text plus overrides and validates the result.
    pub fn load(text: &str, overrides: &[(String, String)]) -> Result<Self, ExperimentError> {
        let mut pairs = parse_pairs(text)?;
        pairs.extend(overrides.iter().cloned());
        let c = Self::from_pairs(&pairs)?;
        c.validate().map_err(ExperimentError::Config)?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let v = v.trim();
        match key {
            "experiment" => {}
            "frames" => self.frames = parse_int(v)?,
            "antennas" => self.antennas = parse_int(v)?,
            "targets" => self.targets = parse_int_list(v)?,
            "snr_db" => self.snr_db = parse_f64_list(v)?,
            "snr_knob" => {
                self.snr_knob = match v {
                    "net" => SnrKnob::Net,
                    "raw" => SnrKnob::Raw,
                    _ => return Err(format!("expected `net` or `raw`, got `{v}`")),
                }
            }
            "rho" => self.rho = parse_int_list(v)?,
            "delta" => self.delta = parse_f64_list(v)?,
            "trials" => self.trials = parse_int(v)?,
            "seed" => self.seed = parse_int(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "bits" => self.bits = parse_int(v)?,
            "gs_iterations" => self.gs_iterations = parse_int(v)?,
            "trajectory" => {
                self.trajectory = match v {
                    "optimized" => TrajectoryChoice::Optimized,
                    "random" => TrajectoryChoice::Random,
                    _ => return Err(format!("expected `optimized` or `random`, got `{v}`")),
                }
            }
            "mask" => {
                self.mask = match v {
                    "designed" => MaskChoice::Designed,
                    "ideal" => MaskChoice::Ideal,
                    _ => return Err(format!("expected `designed` or `ideal`, got `{v}`")),
                }
            }
            "active_fraction" => self.active_fraction = parse_f64(v)?,
            "min_separation" => self.min_separation = parse_int(v)?,
            "zeta_c_db" => self.zeta_c_db = parse_f64(v)?,
            "cpi" => self.cpi = parse_f64(v)?,
            "symbol_rate" => self.symbol_rate = parse_f64(v)?,
            "ifs" => self.ifs = parse_f64(v)?,
            "block_len" => self.block_len = parse_int(v)?,
            "max_blocks" => self.max_blocks = parse_int(v)?,
            "weights" => self.weights = parse_f64_list(v)?,
            "normalization" => {
                self.normalization = match v {
                    "minmax" => Normalization::MinMax,
                    "raw" => Normalization::Raw,
                    _ => return Err(format!("expected `minmax` or `raw`, got `{v}`")),
                }
            }
            "nmse_source" => {
                self.nmse_source = match v {
                    "analytic" => NmseSource::Analytic,
                    "monte-carlo" | "monte_carlo" => NmseSource::MonteCarlo,
                    _ => return Err(format!("expected `analytic` or `monte-carlo`, got `{v}`")),
                }
            }
            "wavelength" => self.wavelength = parse_f64(v)?,
            "max_speed" => self.max_speed = if v == "none" { None } else { Some(parse_f64(v)?) },
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn budget(&self) -> WaveformBudget {
        WaveformBudget {
            cpi: self.cpi,
            frames: self.frames,
            symbol_period: 1.0 / self.symbol_rate,
            ifs: self.ifs,
            block_len: self.block_len,
            max_blocks: self.max_blocks,
            doppler_interval: self.cpi / self.frames as f64,
        }
    }

    fn needs_optimized(&self) -> bool {
        self.experiment.compares()
            || self.experiment.uses_lattice()
            || (self.trajectory == TrajectoryChoice::Optimized)
    }

    /// Checks every precondition up front; one message per violation.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut e = Vec::new();
        let kind = self.experiment;
        if self.frames == 0 {
            e.push("frames must be at least 1".to_string());
        }
        if self.antennas < 2 {
            e.push(format!("antennas must be at least 2, got {}", self.antennas));
        }
        if self.needs_optimized() {
            if self.frames != self.antennas {
                e.push(format!(
                    "the optimized trajectory needs frames = antennas, got {} and {}",
                    self.frames, self.antennas
                ));
            } else if !is_prime(self.frames) {
                e.push(format!(
                    "frames={} is not prime; the optimized trajectory is only defined for prime frames = antennas",
                    self.frames
                ));
            }
        }
        if kind != ExperimentKind::Psf {
            let lists = [
                ("targets", self.targets.is_empty()),
                ("snr_db", self.snr_db.is_empty()),
                ("rho", self.rho.is_empty()),
                ("delta", self.delta.is_empty()),
            ];
            for (name, empty) in lists {
                if empty {
                    e.push(format!("{name} must not be empty"));
                }
            }
            if self.trials == 0 {
                e.push("trials must be at least 1".into());
            }
            for &k in &self.targets {
                if k == 0 {
                    e.push("targets must be at least 1".into());
                } else if k > self.frames {
                    e.push(format!(
                        "{k} targets exceed the {} measurements per CPI",
                        self.frames
                    ));
                } else if k > self.frames * self.antennas {
                    e.push(format!("{k} targets do not fit on the grid"));
                }
            }
            for &d in &self.delta {
                if !(d > 0.0 && d < 1.0) {
                    e.push(format!(
                        "delta={d} must lie in (0, 1) so that some power is left for sensing"
                    ));
                }
            }
            for &r in &self.rho {
                if r == 0 || r > self.max_blocks {
                    e.push(format!("rho={r} must lie in 1..={}", self.max_blocks));
                }
            }
            if self.bits == 0 || self.bits > MAX_BITS {
                e.push(format!("bits must lie in 1..={MAX_BITS}, got {}", self.bits));
            }
            if self.gs_iterations == 0 {
                e.push("gs_iterations must be at least 1".into());
            }
            if self.block_len == 0 {
                e.push("block_len must be at least 1".into());
            }
            if !(self.active_fraction > 0.0 && self.active_fraction <= 1.0) {
                e.push(format!(
                    "active_fraction must lie in (0, 1], got {}",
                    self.active_fraction
                ));
            }
        }
        if kind.uses_lattice() {
            if self.targets.len() != 1 {
                e.push("the trade-off experiments take a single `targets` value".into());
            }
            if self.snr_db.len() != 1 {
                e.push("the trade-off experiments take a single `snr_db` value".into());
            }
            if self.weights.is_empty() {
                e.push("weights must not be empty".into());
            }
            for &w in &self.weights {
                if !(0.0..=1.0).contains(&w) {
                    e.push(format!("weight {w} must lie in [0, 1]"));
                }
            }
            if self.symbol_rate <= 0.0 {
                e.push("symbol_rate must be positive".into());
            } else if self.frames > 0 {
                if let Err(err) = self.budget().validate() {
                    e.push(err.to_string());
                }
                if let Some(v) = self.max_speed {
                    if let Err(err) = self.budget().check_unambiguous_doppler(self.wavelength, v) {
                        e.push(err.to_string());
                    }
                }
            }
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(e)
        }
    }

    /// Canonical `key = value` listing of every setting.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let v = match key {
                "experiment" => self.experiment.name().to_string(),
                "frames" => self.frames.to_string(),
                "antennas" => self.antennas.to_string(),
                "targets" => join(&self.targets),
                "snr_db" => join(&self.snr_db),
                "snr_knob" => match self.snr_knob {
                    SnrKnob::Net => "net".into(),
                    SnrKnob::Raw => "raw".into(),
                },
                "rho" => join(&self.rho),
                "delta" => join(&self.delta),
                "trials" => self.trials.to_string(),
                "seed" => self.seed.to_string(),
                "output_dir" => self.output_dir.display().to_string(),
                "bits" => self.bits.to_string(),
                "gs_iterations" => self.gs_iterations.to_string(),
                "trajectory" => match self.trajectory {
                    TrajectoryChoice::Optimized => "optimized".into(),
                    TrajectoryChoice::Random => "random".into(),
                },
                "mask" => match self.mask {
                    MaskChoice::Designed => "designed".into(),
                    MaskChoice::Ideal => "ideal".into(),
                },
                "active_fraction" => self.active_fraction.to_string(),
                "min_separation" => self.min_separation.to_string(),
                "zeta_c_db" => self.zeta_c_db.to_string(),
                "cpi" => self.cpi.to_string(),
                "symbol_rate" => self.symbol_rate.to_string(),
                "ifs" => self.ifs.to_string(),
                "block_len" => self.block_len.to_string(),
                "max_blocks" => self.max_blocks.to_string(),
                "weights" => join(&self.weights),
                "normalization" => match self.normalization {
                    Normalization::MinMax => "minmax".into(),
                    Normalization::Raw => "raw".into(),
                },
                "nmse_source" => match self.nmse_source {
                    NmseSource::Analytic => "analytic".into(),
                    NmseSource::MonteCarlo => "monte-carlo".into(),
                },
                "wavelength" => self.wavelength.to_string(),
                "max_speed" => self.max_speed.map_or("none".into(), |v| v.to_string()),
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{key} = {v}");
        }
        s
    }

    /// Net SNR in dB as reported in the tables; exact when the net knob is swept.
    fn zeta_net_db(&self, snr_db: f64, model: &SnrModel) -> f64 {
        match self.snr_knob {
            SnrKnob::Net => snr_db,
            SnrKnob::Raw => model.zeta_net_db(),
        }
    }

    fn snr_model(&self, snr_db: f64, rho: u32, delta: f64) -> SnrModel {
        match self.snr_knob {
            SnrKnob::Net => SnrModel::from_net_db(snr_db, rho, self.block_len, delta, self.antennas),
            SnrKnob::Raw => SnrModel {
                zeta_db: snr_db,
                rho,
                block_len: self.block_len,
                split: delta,
                antennas: self.antennas,
            },
        }
    }
}

/// One output file, rendered in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// CSV float: 9 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub trials: usize,
    /// Trials whose least-squares step was ill-conditioned (scored as a zero estimate).
    pub degenerate: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Fraction of trials whose support matched the true bins exactly.
    pub support_rate: f64,
}

impl CellStats {
    pub fn mean_db(&self) -> f64 {
        10.0 * self.mean.log10()
    }
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    nmse: f64,
    exact: bool,
    degenerate: bool,
}

fn aggregate(trials: &[Trial]) -> CellStats {
    let n = trials.len() as f64;
    // Fixed summation order: collected results are indexed by trial.
    let mean = trials.iter().map(|t| t.nmse).sum::<f64>() / n;
    let std_error = if trials.len() > 1 {
        let var = trials.iter().map(|t| (t.nmse - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    CellStats {
        trials: trials.len(),
        degenerate: trials.iter().filter(|t| t.degenerate).count(),
        mean,
        std_error,
        support_rate: trials.iter().filter(|t| t.exact).count() as f64 / n,
    }
}

struct Design {
    beamformer: Beamformer,
    mask: GainMask,
}

fn designs(cfg: &ExperimentConfig) -> Result<Vec<Design>, ExperimentError> {
    cfg.delta
        .par_iter()
        .map(|&d| match cfg.mask {
            MaskChoice::Designed => {
                let (gs, mask) = design(d, cfg.antennas, cfg.bits, cfg.gs_iterations)?;
                Ok(Design {
                    beamformer: gs.beamformer,
                    mask,
                })
            }
            MaskChoice::Ideal => {
                let profile = target_magnitude_profile(d, cfg.antennas)?;
                let gs = gs_design(&profile, cfg.bits, cfg.gs_iterations)?;
                Ok(Design {
                    beamformer: gs.beamformer,
                    mask: GainMask::ideal(&profile)?,
                })
            }
        })
        .collect()
}

fn scene_for(cfg: &ExperimentConfig, k: usize, trial: usize) -> Result<TargetScene, ExperimentError> {
    let seed = derive_seed(cfg.seed, &[TAG_SCENE, k as u64, trial as u64]);
    Ok(random_scene(
        k,
        cfg.frames,
        cfg.antennas,
        seed,
        cfg.min_separation,
    )?)
}

fn noise_seed(cfg: &ExperimentConfig, k: usize, trial: usize) -> u64 {
    derive_seed(cfg.seed, &[TAG_NOISE, k as u64, trial as u64])
}

fn bins(scene: &TargetScene) -> Vec<(usize, usize)> {
    scene
        .targets()
        .iter()
        .map(|t| (t.doppler_bin, t.angle_bin))
        .collect()
}

fn zero_estimate(truth: &ComplexGrid, k: usize) -> f64 {
    truth.frobenius_norm().powi(2) / k as f64
}

/// One circulant-shift trial: synthesize, run OMP with known sparsity, score.
fn ccs_trial(
    scene: &TargetScene,
    truth: &ComplexGrid,
    d: &Design,
    trajectory: &Trajectory,
    noise_variance: f64,
    seed: u64,
) -> Result<Trial, ExperimentError> {
    let k = scene.len();
    let y = synthesize_with_noise(scene, &d.beamformer, &d.mask, trajectory, noise_variance, seed)?;
    match omp_recover(&y, Stopping::Sparsity(k)) {
        Ok(est) => Ok(Trial {
            nmse: nmse(truth, &est.h_hat, k),
            exact: est.support.same_bins(&bins(scene)),
            degenerate: false,
        }),
        Err(RecoveryError::IllConditioned { .. }) => Ok(Trial {
            nmse: zero_estimate(truth, k),
            exact: false,
            degenerate: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// One random-switching trial over the explicit precoder dictionary.
fn switching_trial(
    cfg: &ExperimentConfig,
    scene: &TargetScene,
    noise_variance: f64,
    trial: usize,
) -> Result<Trial, ExperimentError> {
    let k = scene.len();
    let (m, n) = (cfg.frames, cfg.antennas);
    let seed = derive_seed(cfg.seed, &[TAG_SWITCHING, k as u64, trial as u64]);
    let precoders = rs_baseline_precoders(m, n, seed, cfg.active_fraction)?;
    let (h, truth) = assemble_channel(scene)?;
    let mut y = direct_samples(&h, &precoders)?;
    add_noise(&mut y, noise_variance, noise_seed(cfg, k, trial));
    let dictionary = precoder_dictionary(&precoders)?;
    match omp_dictionary(&dictionary, &y, Stopping::Sparsity(k)) {
        Ok(est) => {
            let mut grid = ComplexGrid::zeros(m, n).expect("non-empty");
            for (&i, &c) in est.support.iter().zip(&est.coefficients) {
                grid.set(i % m, i / m, c);
            }
            let mut want: Vec<usize> = bins(scene).iter().map(|&(p, q)| atom_index(m, p, q)).collect();
            let mut got = est.support.clone();
            want.sort_unstable();
            got.sort_unstable();
            Ok(Trial {
                nmse: nmse(&truth, &grid, k),
                exact: want == got,
                degenerate: false,
            })
        }
        Err(RecoveryError::IllConditioned { .. }) => Ok(Trial {
            nmse: zero_estimate(&truth, k),
            exact: false,
            degenerate: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Sensing method compared in the trajectory experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    OptimizedShifts,
    RandomShifts,
    RandomSwitching,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::OptimizedShifts => "occs",
            Method::RandomShifts => "rccs",
            Method::RandomSwitching => "rs",
        }
    }
}

fn trajectory_for(
    cfg: &ExperimentConfig,
    method: Method,
    k: usize,
    trial: usize,
) -> Result<Trajectory, ExperimentError> {
    match method {
        Method::OptimizedShifts => Ok(optimized_trajectory(cfg.frames)?),
        _ => {
            let seed = derive_seed(cfg.seed, &[TAG_TRAJECTORY, k as u64, trial as u64]);
            Ok(random_trajectory(cfg.frames, cfg.antennas, seed)?)
        }
    }
}

/// Runs `trials` trials of one cell in parallel and aggregates in trial order.
fn run_cell(
    cfg: &ExperimentConfig,
    method: Method,
    d: &Design,
    k: usize,
    noise_variance: f64,
) -> Result<CellStats, ExperimentError> {
    let fixed = match method {
        Method::OptimizedShifts => Some(optimized_trajectory(cfg.frames)?),
        _ => None,
    };
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let scene = scene_for(cfg, k, i)?;
            if method == Method::RandomSwitching {
                return switching_trial(cfg, &scene, noise_variance, i);
            }
            let (_, truth) = assemble_channel(&scene)?;
            let t = match &fixed {
                Some(t) => t.clone(),
                None => trajectory_for(cfg, method, k, i)?,
            };
            ccs_trial(&scene, &truth, d, &t, noise_variance, noise_seed(cfg, k, i))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&trials))
}

/// Mean analytic NMSE over the true supports of the cell's scenes.
///
/// Trials whose support makes the least-squares problem ill-conditioned give NaN.
fn analytic_cell(
    cfg: &ExperimentConfig,
    method: Method,
    mask: &GainMask,
    k: usize,
    zeta_net: f64,
) -> Result<f64, ExperimentError> {
    let values = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let scene = scene_for(cfg, k, i)?;
            let t = trajectory_for(cfg, method, k, i)?;
            let support = SupportSet::new(bins(&scene))?;
            match nmse_analytic(&support, &t, mask, zeta_net, k, ColumnScaling::Raw) {
                Ok(v) => Ok(v),
                Err(RecoveryError::IllConditioned { .. }) => Ok(f64::NAN),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Smallest swept net SNR from which every higher point reaches the support-success threshold.
pub fn crossover_db(points: &[(f64, f64)]) -> Option<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut crossover = None;
    for &(snr, rate) in sorted.iter().rev() {
        if rate >= CROSSOVER_SUCCESS_RATE {
            crossover = Some(snr);
        } else {
            break;
        }
    }
    crossover
}

fn gnuplot_header(s: &mut String, title: &str, columns: &str) {
    let _ = writeln!(s, "# {title}");
    let _ = writeln!(s, "# {columns}");
}

fn run_psf(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, ExperimentError> {
    let t = match cfg.trajectory {
        TrajectoryChoice::Optimized => optimized_trajectory(cfg.frames)?,
        TrajectoryChoice::Random => {
            random_trajectory(cfg.frames, cfg.antennas, derive_seed(cfg.seed, &[TAG_TRAJECTORY]))?
        }
    };
    let a = analyze(&t);
    let mut csv = String::from("doppler_bin,angle_bin,magnitude\n");
    let mut dat = String::new();
    gnuplot_header(
        &mut dat,
        "|PSF| matrix, rows = Doppler bin, columns = angle bin",
        "matrix",
    );
    for p in 0..cfg.frames {
        let row: Vec<String> = (0..cfg.antennas)
            .map(|q| fmt_f64(a.psf.get(p, q).norm()))
            .collect();
        for (q, v) in row.iter().enumerate() {
            let _ = writeln!(csv, "{p},{q},{v}");
        }
        let _ = writeln!(dat, "{}", row.join(" "));
    }
    let direct = if cfg.frames * cfg.antennas <= DIRECT_COHERENCE_LIMIT {
        coherence_direct(&t)?
    } else {
        f64::NAN
    };
    let summary = format!(
        "trajectory,frames,antennas,coherence,coherence_direct,inverse_sqrt_frames\n{},{},{},{},{},{}\n",
        t.kind(),
        cfg.frames,
        cfg.antennas,
        fmt_f64(a.coherence),
        fmt_f64(direct),
        fmt_f64(1.0 / (cfg.frames as f64).sqrt())
    );
    Ok(vec![
        Artifact {
            name: "psf.csv".into(),
            contents: csv,
        },
        Artifact {
            name: "coherence.csv".into(),
            contents: summary,
        },
        Artifact {
            name: "trajectory.csv".into(),
            contents: format!("shifts\n{}\n", t.to_csv_line()),
        },
        Artifact {
            name: "psf.dat".into(),
            contents: dat,
        },
    ])
}

struct NmseRow {
    k: usize,
    rho: u32,
    delta: f64,
    snr_db: f64,
    zeta_net_db: f64,
    stats: CellStats,
    analytic: f64,
}

fn run_nmse(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, ExperimentError> {
    let designs = designs(cfg)?;
    let method = match cfg.trajectory {
        TrajectoryChoice::Optimized => Method::OptimizedShifts,
        TrajectoryChoice::Random => Method::RandomShifts,
    };
    let mut rows = Vec::new();
    for &k in &cfg.targets {
        for &rho in &cfg.rho {
            for (d, &delta) in designs.iter().zip(&cfg.delta) {
                for &snr in &cfg.snr_db {
                    let model = cfg.snr_model(snr, rho, delta);
                    model.validate()?;
                    let stats = run_cell(cfg, method, d, k, model.noise_variance())?;
                    let analytic = analytic_cell(cfg, method, &d.mask, k, model.zeta_net())?;
                    rows.push(NmseRow {
                        k,
                        rho,
                        delta,
                        snr_db: snr,
                        zeta_net_db: cfg.zeta_net_db(snr, &model),
                        stats,
                        analytic,
                    });
                }
            }
        }
    }

    let mut csv = String::from(
        "targets,rho,delta,snr_db,zeta_net_db,trials,degenerate,nmse_mean,nmse_se,nmse_db,analytic_db,support_rate\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.rho,
            fmt_f64(r.delta),
            fmt_f64(r.snr_db),
            fmt_f64(r.zeta_net_db),
            r.stats.trials,
            r.stats.degenerate,
            fmt_f64(r.stats.mean),
            fmt_f64(r.stats.std_error),
            fmt_f64(r.stats.mean_db()),
            fmt_f64(10.0 * r.analytic.log10()),
            fmt_f64(r.stats.support_rate)
        );
    }
    let mut artifacts = vec![Artifact {
        name: "nmse.csv".into(),
        contents: csv,
    }];

    let by_snr = cfg.experiment == ExperimentKind::NmseVsSnr;
    let mut dat = String::new();
    let mut crossover = String::from("targets,rho,delta,crossover_zeta_net_db\n");
    if by_snr {
        gnuplot_header(
            &mut dat,
            "NMSE against net SNR, one block per curve",
            "zeta_net_db nmse_db analytic_db",
        );
    } else {
        gnuplot_header(
            &mut dat,
            "NMSE against target count, one block per curve",
            "targets nmse_db analytic_db",
        );
    }
    let mut first = true;
    if by_snr {
        for &k in &cfg.targets {
            for &rho in &cfg.rho {
                for &delta in &cfg.delta {
                    let curve: Vec<&NmseRow> = rows
                        .iter()
                        .filter(|r| r.k == k && r.rho == rho && r.delta == delta)
                        .collect();
                    block_separator(
                        &mut dat,
                        &mut first,
                        &format!("targets={k} rho={rho} delta={delta}"),
                    );
                    for r in &curve {
                        let _ = writeln!(
                            dat,
                            "{} {} {}",
                            fmt_f64(r.zeta_net_db),
                            fmt_f64(r.stats.mean_db()),
                            fmt_f64(10.0 * r.analytic.log10())
                        );
                    }
                    let pts: Vec<(f64, f64)> = curve
                        .iter()
                        .map(|r| (r.zeta_net_db, r.stats.support_rate))
                        .collect();
                    let c = crossover_db(&pts).map(fmt_f64).unwrap_or_default();
                    let _ = writeln!(crossover, "{k},{rho},{},{c}", fmt_f64(delta));
                }
            }
        }
        artifacts.push(Artifact {
            name: "crossover.csv".into(),
            contents: crossover,
        });
    } else {
        for &snr in &cfg.snr_db {
            for &rho in &cfg.rho {
                for &delta in &cfg.delta {
                    block_separator(
                        &mut dat,
                        &mut first,
                        &format!("snr_db={snr} rho={rho} delta={delta}"),
                    );
                    for r in rows
                        .iter()
                        .filter(|r| r.snr_db == snr && r.rho == rho && r.delta == delta)
                    {
                        let _ = writeln!(
                            dat,
                            "{} {} {}",
                            r.k,
                            fmt_f64(r.stats.mean_db()),
                            fmt_f64(10.0 * r.analytic.log10())
                        );
                    }
                }
            }
        }
    }
    artifacts.push(Artifact {
        name: "nmse.dat".into(),
        contents: dat,
    });
    Ok(artifacts)
}

fn block_separator(dat: &mut String, first: &mut bool, title: &str) {
    if !*first {
        dat.push_str("\n\n");
    }
    *first = false;
    let _ = writeln!(dat, "# {title}");
}

fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, ExperimentError> {
    let designs = designs(cfg)?;
    let methods = [
        Method::OptimizedShifts,
        Method::RandomShifts,
        Method::RandomSwitching,
    ];
    let mut csv = String::from(
        "method,targets,rho,delta,snr_db,zeta_net_db,trials,degenerate,nmse_mean,nmse_se,nmse_db,support_rate\n",
    );
    let mut dat = String::new();
    gnuplot_header(
        &mut dat,
        "mean NMSE against target count, one block per method and SNR",
        "targets nmse_db nmse_se",
    );
    let mut first = true;
    for (d, &delta) in designs.iter().zip(&cfg.delta) {
        for &rho in &cfg.rho {
            for &snr in &cfg.snr_db {
                let model = cfg.snr_model(snr, rho, delta);
                model.validate()?;
                for method in methods {
                    block_separator(
                        &mut dat,
                        &mut first,
                        &format!("method={} snr_db={snr} rho={rho} delta={delta}", method.label()),
                    );
                    for &k in &cfg.targets {
                        let s = run_cell(cfg, method, d, k, model.noise_variance())?;
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{},{},{},{},{}",
                            method.label(),
                            k,
                            rho,
                            fmt_f64(delta),
                            fmt_f64(snr),
                            fmt_f64(cfg.zeta_net_db(snr, &model)),
                            s.trials,
                            s.degenerate,
                            fmt_f64(s.mean),
                            fmt_f64(s.std_error),
                            fmt_f64(s.mean_db()),
                            fmt_f64(s.support_rate)
                        );
                        let _ = writeln!(dat, "{} {} {}", k, fmt_f64(s.mean_db()), fmt_f64(s.std_error));
                    }
                }
            }
        }
    }
    Ok(vec![
        Artifact {
            name: "compare.csv".into(),
            contents: csv,
        },
        Artifact {
            name: "compare.dat".into(),
            contents: dat,
        },
    ])
}

/// NMSE at every `(rho, split)` lattice node, `rho`-major.
///
/// The analytic surface averages the approximation over the true supports of
/// `trials` random scenes; it scales as `1/zeta_net`, so one trace per split suffices.
pub fn nmse_surface(cfg: &ExperimentConfig) -> Result<Vec<f64>, ExperimentError> {
    let designs = designs(cfg)?;
    let k = cfg.targets[0];
    let snr = cfg.snr_db[0];
    let mut out = Vec::with_capacity(cfg.rho.len() * cfg.delta.len());
    match cfg.nmse_source {
        NmseSource::Analytic => {
            let traces = designs
                .iter()
                .map(|d| analytic_cell(cfg, Method::OptimizedShifts, &d.mask, k, 1.0))
                .collect::<Result<Vec<f64>, _>>()?;
            if let Some(i) = traces.iter().position(|t| !t.is_finite()) {
                return Err(ExperimentError::Numerical(format!(
                    "analytic NMSE at delta={} is ill-conditioned",
                    cfg.delta[i]
                )));
            }
            for &rho in &cfg.rho {
                for (&delta, &trace) in cfg.delta.iter().zip(&traces) {
                    out.push(trace / cfg.snr_model(snr, rho, delta).zeta_net());
                }
            }
        }
        NmseSource::MonteCarlo => {
            for &rho in &cfg.rho {
                for (d, &delta) in designs.iter().zip(&cfg.delta) {
                    let model = cfg.snr_model(snr, rho, delta);
                    model.validate()?;
                    out.push(run_cell(cfg, Method::OptimizedShifts, d, k, model.noise_variance())?.mean);
                }
            }
        }
    }
    Ok(out)
}

/// Builds the trade-off region of a lattice experiment.
pub fn tradeoff_region(cfg: &ExperimentConfig) -> Result<TradeoffRegion, ExperimentError> {
    let surface = nmse_surface(cfg)?;
    let nd = cfg.delta.len();
    let link = CommLink {
        zeta_c_db: cfg.zeta_c_db,
    };
    let rho_pos = |rho: u32| cfg.rho.iter().position(|&r| r == rho).expect("lattice rho");
    let delta_pos = |delta: f64| cfg.delta.iter().position(|&d| d == delta).expect("lattice delta");
    Ok(build_region(
        &cfg.budget(),
        &link,
        &cfg.rho,
        &cfg.delta,
        |rho, delta| surface[rho_pos(rho) * nd + delta_pos(delta)],
    )?)
}

fn run_tradeoff(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, ExperimentError> {
    let region = tradeoff_region(cfg)?;
    let picks = weights_sweep(&region, &cfg.weights, cfg.normalization)?;
    let mut artifacts = Vec::new();

    let mut csv = String::from("rho,delta,nmse_db,dmse_log2,on_hull,chosen_wc\n");
    let mut all = String::new();
    gnuplot_header(&mut all, "trade-off region", "nmse_db dmse_log2 rho delta");
    for (i, p) in region.points.iter().enumerate() {
        let chosen: Vec<String> = cfg
            .weights
            .iter()
            .zip(&picks)
            .filter(|(_, s)| s.index == i)
            .map(|(w, _)| w.to_string())
            .collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.rho,
            fmt_f64(p.delta),
            fmt_f64(p.nmse_db()),
            fmt_f64(p.log_dmse),
            u8::from(region.on_hull(i)),
            chosen.join(";")
        );
        let _ = writeln!(
            all,
            "{} {} {} {}",
            fmt_f64(p.nmse_db()),
            fmt_f64(p.log_dmse),
            p.rho,
            fmt_f64(p.delta)
        );
    }
    let mut hull_csv = String::from("rho,delta,nmse_db,dmse_log2\n");
    let mut hull_dat = String::new();
    gnuplot_header(
        &mut hull_dat,
        "lower-left convex hull vertices",
        "nmse_db dmse_log2",
    );
    for &i in region.vertices() {
        let p = &region.points[i];
        let _ = writeln!(
            hull_csv,
            "{},{},{},{}",
            p.rho,
            fmt_f64(p.delta),
            fmt_f64(p.nmse_db()),
            fmt_f64(p.log_dmse)
        );
        let _ = writeln!(hull_dat, "{} {}", fmt_f64(p.nmse_db()), fmt_f64(p.log_dmse));
    }
    artifacts.push(Artifact {
        name: "region.csv".into(),
        contents: csv,
    });
    artifacts.push(Artifact {
        name: "hull.csv".into(),
        contents: hull_csv,
    });
    artifacts.push(Artifact {
        name: "region.dat".into(),
        contents: all,
    });
    artifacts.push(Artifact {
        name: "hull.dat".into(),
        contents: hull_dat,
    });

    if cfg.experiment == ExperimentKind::WeightsSweep {
        let link = CommLink {
            zeta_c_db: cfg.zeta_c_db,
        };
        let budget = cfg.budget();
        let mut csv =
            String::from("w_c,w_r,rho,delta,nmse_db,dmse_log2,alpha,r_eff,edge_to_rho,edge_to_delta\n");
        let mut dat = String::new();
        gnuplot_header(
            &mut dat,
            "weighted optimum against communication weight",
            "w_c delta rho nmse_db dmse_log2",
        );
        for (&w, s) in cfg.weights.iter().zip(&picks) {
            let Selection {
                point: p, tied_with, ..
            } = *s;
            let a = alpha(&budget, p.rho)?;
            let r = spectral_efficiency(&link, p.delta, a)?;
            let (tr, td) = match tied_with {
                Some(j) => (region.points[j].rho.to_string(), fmt_f64(region.points[j].delta)),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{tr},{td}",
                fmt_f64(w),
                fmt_f64(1.0 - w),
                p.rho,
                fmt_f64(p.delta),
                fmt_f64(p.nmse_db()),
                fmt_f64(p.log_dmse),
                fmt_f64(a),
                fmt_f64(r)
            );
            let _ = writeln!(
                dat,
                "{} {} {} {} {}",
                fmt_f64(w),
                fmt_f64(p.delta),
                p.rho,
                fmt_f64(p.nmse_db()),
                fmt_f64(p.log_dmse)
            );
        }
        artifacts.push(Artifact {
            name: "weights.csv".into(),
            contents: csv,
        });
        artifacts.push(Artifact {
            name: "weights.dat".into(),
            contents: dat,
        });
    }
    Ok(artifacts)
}

fn manifest(cfg: &ExperimentConfig, artifacts: &[Artifact]) -> Artifact {
    let mut s = String::new();
    let _ = writeln!(s, "# run manifest");
    let _ = writeln!(s, "software = {SOFTWARE}");
    let _ = writeln!(s, "root_seed = {}", cfg.seed);
    s.push_str(&cfg.echo());
    let names: Vec<&str> = artifacts.iter().map(|a| a.name.as_str()).collect();
    let _ = writeln!(s, "artifacts = {}", names.join(","));
    Artifact {
        name: "manifest.txt".into(),
        contents: s,
    }
}

/// Validates and runs `cfg` on the current rayon pool, returning the artifacts
/// (manifest last) without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Artifact>, ExperimentError> {
    cfg.validate().map_err(ExperimentError::Config)?;
    let mut artifacts = match cfg.experiment {
        ExperimentKind::Psf => run_psf(cfg)?,
        ExperimentKind::NmseVsSnr | ExperimentKind::NmseVsK => run_nmse(cfg)?,
        ExperimentKind::CompareTrajectories | ExperimentKind::CompareRs => run_compare(cfg)?,
        ExperimentKind::ParetoSweep | ExperimentKind::WeightsSweep => run_tradeoff(cfg)?,
    };
    let m = manifest(cfg, &artifacts);
    artifacts.push(m);
    Ok(artifacts)
}

/// As [`execute`] on a dedicated pool of `workers` threads (`None`: all cores).
pub fn execute_with_workers(
    cfg: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<Artifact>, ExperimentError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ExperimentError::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute(cfg))
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

/// Runs the experiment and writes its artifacts under `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<PathBuf>, ExperimentError> {
    let artifacts = execute_with_workers(cfg, workers)?;
    write_artifacts(&cfg.output_dir, &artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
        list.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_f64_list("-10:5:5").unwrap(), vec![-10.0, -5.0, 0.0, 5.0]);
        assert_eq!(parse_f64_list("0:0.1:0.3").unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_f64_list("30/31").unwrap(), vec![30.0 / 31.0]);
        assert_eq!(parse_int_list::<u32>("1:2:7,9").unwrap(), vec![1, 3, 5, 7, 9]);
        assert!(parse_int_list::<u32>("5:1:2").is_err());
        assert!(parse_f64_list("x").is_err());
    }

    #[test]
    fn file_and_overrides() {
        let text = "# comment\nexperiment = nmse-vs-snr\nM = 7\nN = 7 # inline\nsnr_db = 0, 10\n";
        let ov = parse_overrides(&["--trials".into(), "3".into(), "--K=2".into()]).unwrap();
        let c = ExperimentConfig::load(text, &ov).unwrap();
        assert_eq!((c.frames, c.antennas, c.trials), (7, 7, 3));
        assert_eq!(c.targets, vec![2]);
        assert_eq!(c.snr_db, vec![0.0, 10.0]);
        assert!(parse_overrides(&["--trials".into()]).is_err());
        assert!(parse_pairs("no equals sign").is_err());
    }

    #[test]
    fn validation_reports_each_violation() {
        let c = ExperimentConfig::from_pairs(&pairs(&[
            ("experiment", "compare-trajectories"),
            ("frames", "32"),
            ("antennas", "32"),
            ("trials", "0"),
            ("delta", "1.0"),
        ]))
        .unwrap();
        let errs = c.validate().unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs[0].contains("not prime"));
        assert!(ExperimentConfig::from_pairs(&pairs(&[("frames", "7")])).is_err());
        let e = ExperimentConfig::from_pairs(&pairs(&[("experiment", "psf"), ("bogus", "1")])).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn random_psf_allows_composite_sizes() {
        let c = ExperimentConfig::from_pairs(&pairs(&[
            ("experiment", "psf"),
            ("frames", "8"),
            ("antennas", "6"),
            ("trajectory", "random"),
        ]))
        .unwrap();
        assert!(c.validate().is_ok());
        let a = execute(&c).unwrap();
        assert_eq!(a.last().unwrap().name, "manifest.txt");
    }

    #[test]
    fn crossover_needs_all_higher_points() {
        let pts = [(0.0, 0.5), (5.0, 0.97), (10.0, 0.9), (15.0, 1.0), (20.0, 1.0)];
        assert_eq!(crossover_db(&pts), Some(15.0));
        assert_eq!(crossover_db(&[(0.0, 0.1)]), None);
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::defaults(ExperimentKind::WeightsSweep);
        let back = ExperimentConfig::from_pairs(&parse_pairs(&c.echo()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn small_runs_are_deterministic() {
        let c = ExperimentConfig::from_pairs(&pairs(&[
            ("experiment", "compare-trajectories"),
            ("frames", "7"),
            ("antennas", "7"),
            ("targets", "1,2"),
            ("snr_db", "20"),
            ("trials", "8"),
        ]))
        .unwrap();
        let a = execute_with_workers(&c, Some(1)).unwrap();
        let b = execute_with_workers(&c, Some(3)).unwrap();
        assert_eq!(a, b);
    }
}
