//! Jones-matrix model of the preparation and measurement wave plates, plus the
//! Monte Carlo experiment driver.
//!
//! Preparation: source → HWP → QWP, so `ρₐ = U ρ_src U†` with `U = Q(θ_q) H(θ_h)`.
//! Measurement: QWP → HWP → PBS, so the observable is `Σ = U† σ₃ U` with
//! `U = H(θ_h) Q(θ_q)`; the counted port `E` transmits the `σ₃ = +1` component.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::scale;
use crate::qubit::{
    expectation, stokes_from_density, ComplexMatrix2, DensityMatrix, ObservableVector, StokesVector, INPUT_TOL,
    PAULI,
};
use crate::spam::{ExpectationMatrix, MatrixShape};

pub const DEFAULT_SHOTS: u64 = 10_000;
/// Standard deviation (radians) of the per-repetition wave-plate drift.
///
/// Calibrated by simulation so that std(S₁¹) ≈ 0.04 under a π/20 detector
/// HWP error with [`DEFAULT_SHOTS`] counts.
pub const DEFAULT_ANGLE_JITTER: f64 = 0.012;
pub const DEFAULT_REPETITIONS: usize = 10;

/// Rotation angles of one QWP/HWP pair, stored modulo π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSetting", into = "RawSetting")]
pub struct WavePlateSetting {
    qwp: f64,
    hwp: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSetting {
    qwp: f64,
    hwp: f64,
}

impl TryFrom<RawSetting> for WavePlateSetting {
    type Error = Error;
    fn try_from(r: RawSetting) -> Result<Self> {
        WavePlateSetting::new(r.qwp, r.hwp)
    }
}

impl From<WavePlateSetting> for RawSetting {
    fn from(s: WavePlateSetting) -> Self {
        RawSetting { qwp: s.qwp, hwp: s.hwp }
    }
}

impl WavePlateSetting {
    pub fn new(qwp: f64, hwp: f64) -> Result<Self> {
        if !qwp.is_finite() || !hwp.is_finite() {
            return Err(Error::config("wave plate angle", "angles must be finite"));
        }
        Ok(WavePlateSetting {
            qwp: qwp.rem_euclid(PI),
            hwp: hwp.rem_euclid(PI),
        })
    }

    pub fn qwp(&self) -> f64 {
        self.qwp
    }

    pub fn hwp(&self) -> f64 {
        self.hwp
    }

    fn shifted(&self, dq: f64, dh: f64) -> Self {
        WavePlateSetting {
            qwp: (self.qwp + dq).rem_euclid(PI),
            hwp: (self.hwp + dh).rem_euclid(PI),
        }
    }
}

/// The six angle pairs used for both preparation and measurement; the n+1
/// scheme uses the first four.
pub fn default_settings() -> Vec<WavePlateSetting> {
    let qwp = [0.0, FRAC_PI_4, FRAC_PI_4, PI / 16.0, 5.0 * PI / 16.0, 5.0 * PI / 16.0];
    let hwp = [0.0, 0.0, FRAC_PI_8, PI / 16.0, PI / 16.0, 3.0 * PI / 16.0];
    qwp.iter()
        .zip(hwp)
        .map(|(&q, h)| WavePlateSetting::new(q, h).expect("finite"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceState {
    /// |H⟩⟨H|
    PureH,
    /// (3/4)|H⟩⟨H| + (1/4)|V⟩⟨V|
    Mixed,
}

impl SourceState {
    pub fn density(&self) -> DensityMatrix {
        match self {
            SourceState::PureH => DensityMatrix::horizontal(),
            SourceState::Mixed => DensityMatrix::new(ComplexMatrix2::diag(0.75, 0.25)).expect("valid"),
        }
    }
}

/// Number of preparation/measurement settings used by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// 2n = 6 preparations × 6 settings.
    #[serde(rename = "2n", alias = "two_n")]
    TwoN,
    /// n+1 = 4 preparations × 4 settings, embedded into 6×6 for analysis.
    #[serde(rename = "n_plus_1", alias = "n+1")]
    NPlusOne,
}

impl Scheme {
    pub fn settings(&self) -> usize {
        match self {
            Scheme::TwoN => 6,
            Scheme::NPlusOne => 4,
        }
    }

    pub fn shape(&self) -> MatrixShape {
        match self {
            Scheme::TwoN => MatrixShape::Full6,
            Scheme::NPlusOne => MatrixShape::Compact4,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::TwoN => "2n",
            Scheme::NPlusOne => "n_plus_1",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2n" | "two_n" => Ok(Scheme::TwoN),
            "n+1" | "n_plus_1" | "nplus1" => Ok(Scheme::NPlusOne),
            other => Err(Error::config("scheme", format!("unknown scheme `{other}` (expected 2n or n+1)"))),
        }
    }
}

/// A correlated error: whenever preparation `prep` is measured with setting
/// `setting` (both 1-based), the detector plates are rotated by extra offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub prep: usize,
    pub setting: usize,
    pub hwp_offset: f64,
    #[serde(default)]
    pub qwp_offset: f64,
}

impl ErrorInjection {
    pub fn hwp(prep: usize, setting: usize, hwp_offset: f64) -> Self {
        ErrorInjection {
            prep,
            setting,
            hwp_offset,
            qwp_offset: 0.0,
        }
    }

    pub fn qwp(prep: usize, setting: usize, qwp_offset: f64) -> Self {
        ErrorInjection {
            prep,
            setting,
            hwp_offset: 0.0,
            qwp_offset,
        }
    }
}

/// Photon counts per matrix element and repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    /// Infinite counts: expectations are returned without sampling noise.
    Analytic,
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => s.serialize_u64(*n),
            Shots::Analytic => s.serialize_str("analytic"),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(n) => Ok(Shots::Finite(n)),
            Repr::Word(w) if matches!(w.as_str(), "analytic" | "inf" | "infinite") => Ok(Shots::Analytic),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "invalid shots `{w}`: expected a positive integer or \"analytic\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub shots: Shots,
    /// Standard deviation of the Gaussian drift added to every plate angle,
    /// redrawn once per plate per repetition.
    pub angle_jitter: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            shots: Shots::Finite(DEFAULT_SHOTS),
            angle_jitter: DEFAULT_ANGLE_JITTER,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn analytic() -> Self {
        NoiseModel {
            shots: Shots::Analytic,
            angle_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == Shots::Finite(0) {
            return Err(Error::config("shots", "shots per setting must be positive"));
        }
        if !(self.angle_jitter >= 0.0 && self.angle_jitter.is_finite()) {
            return Err(Error::config("angle_jitter", "jitter sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub source: SourceState,
    pub prep_settings: Vec<WavePlateSetting>,
    pub meas_settings: Vec<WavePlateSetting>,
    pub scheme: Scheme,
    pub errors: Vec<ErrorInjection>,
    pub noise: NoiseModel,
    pub repetitions: usize,
}

impl ExperimentPlan {
    /// Default angle sets (sliced to the scheme), default noise and 10 repetitions.
    pub fn standard(scheme: Scheme, source: SourceState) -> Self {
        let settings: Vec<_> = default_settings().into_iter().take(scheme.settings()).collect();
        ExperimentPlan {
            source,
            prep_settings: settings.clone(),
            meas_settings: settings,
            scheme,
            errors: Vec::new(),
            noise: NoiseModel::default(),
            repetitions: DEFAULT_REPETITIONS,
        }
    }

    pub fn with_errors(mut self, errors: Vec<ErrorInjection>) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.noise.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scheme.settings();
        if self.prep_settings.len() != n {
            return Err(Error::config(
                "prep_settings",
                format!("scheme {} needs {n} preparation settings, got {}", self.scheme, self.prep_settings.len()),
            ));
        }
        if self.meas_settings.len() != n {
            return Err(Error::config(
                "meas_settings",
                format!("scheme {} needs {n} measurement settings, got {}", self.scheme, self.meas_settings.len()),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be positive"));
        }
        for e in &self.errors {
            if e.prep == 0 || e.prep > n || e.setting == 0 || e.setting > n {
                return Err(Error::config(
                    "error_injections",
                    format!("injection at ({}, {}) is outside 1..={n}", e.prep, e.setting),
                ));
            }
            if !e.hwp_offset.is_finite() || !e.qwp_offset.is_finite() {
                return Err(Error::config("error_injections", "offsets must be finite"));
            }
        }
        self.noise.validate()
    }

    /// Summed detector offsets `(qwp, hwp)` injected at 0-based `(a, i)`.
    fn injected_offsets(&self, a: usize, i: usize) -> (f64, f64) {
        self.errors
            .iter()
            .filter(|e| e.prep == a + 1 && e.setting == i + 1)
            .fold((0.0, 0.0), |(q, h), e| (q + e.qwp_offset, h + e.hwp_offset))
    }
}

/// Half-wave plate Jones matrix, fast axis at `theta`.
pub fn hwp_unitary(theta: f64) -> ComplexMatrix2 {
    let (s, c) = (2.0 * theta).sin_cos();
    ComplexMatrix2::real(c, s, s, -c)
}

/// Quarter-wave plate Jones matrix, fast axis at `theta`.
pub fn qwp_unitary(theta: f64) -> ComplexMatrix2 {
    let (s, c) = theta.sin_cos();
    let off = Complex64::new(s * c, -s * c);
    ComplexMatrix2::new(Complex64::new(c * c, s * s), off, off, Complex64::new(s * s, c * c))
}

pub fn prepare_state(source: SourceState, setting: &WavePlateSetting) -> DensityMatrix {
    let u = qwp_unitary(setting.qwp) * hwp_unitary(setting.hwp);
    source.density().evolve(&u)
}

pub fn measurement_observable(setting: &WavePlateSetting) -> ObservableVector {
    let u = hwp_unitary(setting.hwp) * qwp_unitary(setting.qwp);
    let sigma = PAULI[2].conjugate_by(&u.adjoint());
    ObservableVector::with_tolerance(scale(&sigma.pauli_components(), 0.5), INPUT_TOL)
        .expect("unitary conjugation keeps |w| = 1")
}

/// Plate drift shared by every setting within one repetition.
#[derive(Debug, Clone, Copy, Default)]
struct PlateDrift {
    prep_hwp: f64,
    prep_qwp: f64,
    meas_qwp: f64,
    meas_hwp: f64,
}

impl PlateDrift {
    fn draw<R: Rng>(sigma: f64, rng: &mut R) -> Self {
        let mut next = || {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        };
        PlateDrift {
            prep_hwp: next(),
            prep_qwp: next(),
            meas_qwp: next(),
            meas_hwp: next(),
        }
    }
}

fn expectation_grid(plan: &ExperimentPlan, drift: &PlateDrift) -> Vec<f64> {
    let n = plan.scheme.settings();
    let states: Vec<StokesVector> = plan
        .prep_settings
        .iter()
        .map(|s| stokes_from_density(&prepare_state(plan.source, &s.shifted(drift.prep_qwp, drift.prep_hwp))))
        .collect();
    let mut out = Vec::with_capacity(n * n);
    for (a, state) in states.iter().enumerate() {
        for (i, setting) in plan.meas_settings.iter().enumerate() {
            let (dq, dh) = plan.injected_offsets(a, i);
            let w = measurement_observable(&setting.shifted(drift.meas_qwp + dq, drift.meas_hwp + dh));
            out.push(expectation(state, &w));
        }
    }
    out
}

/// Noiseless `S_a^i` (1-based indices), including any injected error at `(a, i)`.
pub fn true_expectation(plan: &ExperimentPlan, a: usize, i: usize) -> Result<f64> {
    let n = plan.prep_settings.len();
    if a == 0 || a > n {
        return Err(Error::Bounds {
            what: "preparation",
            index: a,
            max: n,
        });
    }
    let m = plan.meas_settings.len();
    if i == 0 || i > m {
        return Err(Error::Bounds {
            what: "setting",
            index: i,
            max: m,
        });
    }
    let state = stokes_from_density(&prepare_state(plan.source, &plan.prep_settings[a - 1]));
    let (dq, dh) = plan.injected_offsets(a - 1, i - 1);
    let w = measurement_observable(&plan.meas_settings[i - 1].shifted(dq, dh));
    Ok(expectation(&state, &w))
}

/// Draws a counting-noise sample of an expectation value:
/// `n_E ~ Binomial(shots, (1 + S)/2)`, returning `2 n_E / shots − 1`.
pub fn sample_expectation<R: Rng>(s_true: f64, shots: Shots, rng: &mut R) -> f64 {
    match shots {
        Shots::Analytic => s_true,
        Shots::Finite(n) => {
            let p = (0.5 * (1.0 + s_true)).clamp(0.0, 1.0);
            let counts = Binomial::new(n, p).expect("p in [0, 1]").sample(rng);
            2.0 * counts as f64 / n as f64 - 1.0
        }
    }
}

fn repetition_rng(seed: u64, repetition: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition as u64);
    rng
}

fn simulate_repetition(plan: &ExperimentPlan, repetition: usize) -> ExpectationMatrix {
    let mut rng = repetition_rng(plan.noise.seed, repetition);
    let drift = PlateDrift::draw(plan.noise.angle_jitter, &mut rng);
    let values = expectation_grid(plan, &drift)
        .into_iter()
        .map(|s| sample_expectation(s, plan.noise.shots, &mut rng))
        .collect();
    ExpectationMatrix::new(plan.scheme.shape(), values).expect("simulated values are in range")
}

/// Runs `plan.repetitions` independent measurements of the expectation matrix.
///
/// Each repetition owns a random stream derived from `(seed, repetition)`, so
/// the output does not depend on how repetitions are scheduled.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ExpectationMatrix>> {
    plan.validate()?;
    Ok((0..plan.repetitions)
        .into_par_iter()
        .map(|r| simulate_repetition(plan, r))
        .collect())
}

/// The noiseless matrix of an uncorrupted bench (no injections, no drift).
pub fn ideal_matrix(plan: &ExperimentPlan) -> ExpectationMatrix {
    let clean = ExperimentPlan {
        errors: Vec::new(),
        ..plan.clone()
    };
    analytic_matrix(&clean)
}

/// Noiseless matrix including injected errors.
pub fn analytic_matrix(plan: &ExperimentPlan) -> ExpectationMatrix {
    ExpectationMatrix::new(plan.scheme.shape(), expectation_grid(plan, &PlateDrift::default()))
        .expect("expectations are in range")
}

/// Stokes vectors the preparation settings produce on an ideal bench.
pub fn theoretical_states(plan: &ExperimentPlan) -> Vec<StokesVector> {
    plan.prep_settings
        .iter()
        .map(|s| stokes_from_density(&prepare_state(plan.source, s)))
        .collect()
}

/// Observable vectors the measurement settings produce on an ideal bench.
pub fn theoretical_observables(plan: &ExperimentPlan) -> Vec<ObservableVector> {
    plan.meas_settings.iter().map(measurement_observable).collect()
}
