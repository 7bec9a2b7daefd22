//! TOML run configuration.
//!
//! Every key is optional. Omitted angle lists fall back to the default angle
//! pairs sliced to the scheme; omitted noise fields fall back to
//! [`NoiseModel::default`].
//!
//! ```toml
//! mode = "full"            # simulate | analyze | reconstruct | full
//! scheme = "n_plus_1"      # 2n | n_plus_1
//! state = "pure_h"         # pure_h | mixed
//! seed = 1
//! shots = 10000            # or "analytic"
//! angle_jitter = 0.012     # radians, per plate per repetition
//! repetitions = 10
//! threshold = 3.0
//! prep_qwp = [0, "pi/4", "pi/4", "pi/16"]
//! prep_hwp = [0, 0, "pi/8", "pi/16"]
//! meas_qwp = [0, "pi/4", "pi/4", "pi/16"]
//! meas_hwp = [0, 0, "pi/8", "pi/16"]
//! input_data = "measurements.csv"      # relative to this file
//! known_povms = [[0, 0, 1], [0, 1, 0], [0, -1, 0]]
//! output_dir = "out"
//!
//! [[error_injections]]
//! prep = 1
//! setting = 1
//! hwp_offset = "pi/4"
//! qwp_offset = 0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::optics::{
    default_settings, theoretical_observables, ErrorInjection, ExperimentPlan, NoiseModel, Scheme, Shots,
    SourceState, WavePlateSetting, DEFAULT_REPETITIONS,
};
use crate::qubit::{ObservableVector, INPUT_TOL};
use crate::spam::DEFAULT_THRESHOLD;

pub const DEFAULT_OUTPUT_DIR: &str = "loopspam-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Produce measurements only.
    Simulate,
    /// Detection and localization.
    Analyze,
    /// Detection, then reconstruction when no correlation is found.
    Reconstruct,
    /// Simulate or load, detect, localize and reconstruct.
    #[default]
    Full,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Analyze => "analyze",
            Mode::Reconstruct => "reconstruct",
            Mode::Full => "full",
        })
    }
}

/// An angle in radians, written as a number or as a fraction of pi such as
/// `"pi/16"`, `"5pi/16"`, `"-pi/4"` or `"3*pi/8"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AngleRepr", into = "f64")]
pub struct Angle(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Int(i64),
    Float(f64),
    Text(String),
}

impl TryFrom<AngleRepr> for Angle {
    type Error = String;
    fn try_from(r: AngleRepr) -> std::result::Result<Self, String> {
        match r {
            AngleRepr::Int(i) => Ok(Angle(i as f64)),
            AngleRepr::Float(x) => Ok(Angle(x)),
            AngleRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl FromStr for Angle {
    type Err = String;
    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let bad = || format!("invalid angle `{text}`: expected radians or a fraction like \"5pi/16\"");
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let lower = compact.to_ascii_lowercase().replace('π', "pi");
        if let Ok(x) = lower.parse::<f64>() {
            return if x.is_finite() { Ok(Angle(x)) } else { Err(bad()) };
        }
        let (num, den) = match lower.split_once('/') {
            Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
            None => (lower.as_str(), 1.0),
        };
        let coeff = num.strip_suffix("pi").ok_or_else(bad)?;
        let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
        let k = match coeff {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        if den == 0.0 {
            return Err(bad());
        }
        Ok(Angle(k * std::f64::consts::PI / den))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionEntry {
    pub prep: usize,
    pub setting: usize,
    #[serde(default = "zero_angle")]
    pub hwp_offset: Angle,
    #[serde(default = "zero_angle")]
    pub qwp_offset: Angle,
}

fn zero_angle() -> Angle {
    Angle(0.0)
}

/// The file as written, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<Mode>,
    pub scheme: Option<Scheme>,
    pub state: Option<SourceState>,
    pub seed: Option<u64>,
    pub shots: Option<Shots>,
    pub angle_jitter: Option<f64>,
    pub repetitions: Option<usize>,
    pub threshold: Option<f64>,
    pub prep_qwp: Option<Vec<Angle>>,
    pub prep_hwp: Option<Vec<Angle>>,
    pub meas_qwp: Option<Vec<Angle>>,
    pub meas_hwp: Option<Vec<Angle>>,
    pub error_injections: Option<Vec<InjectionEntry>>,
    pub input_data: Option<PathBuf>,
    pub known_povms: Option<Vec<Vec3>>,
    pub output_dir: Option<PathBuf>,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub plan: ExperimentPlan,
    pub input_data: Option<PathBuf>,
    /// Observables of settings 1–3 that anchor the loop reconstruction.
    pub known_povms: Vec<ObservableVector>,
    pub detection_threshold: f64,
    pub output_dir: PathBuf,
}

fn angle_list(field: &str, given: &Option<Vec<Angle>>, fallback: &[f64], n: usize) -> Result<Vec<f64>> {
    match given {
        None => Ok(fallback[..n].to_vec()),
        Some(v) if v.len() != n => Err(Error::config(
            field,
            format!("expected {n} angles for this scheme, got {}", v.len()),
        )),
        Some(v) => {
            if v.iter().any(|a| !a.0.is_finite()) {
                return Err(Error::config(field, "angles must be finite"));
            }
            Ok(v.iter().map(|a| a.0).collect())
        }
    }
}

fn settings(field_q: &str, q: &Option<Vec<Angle>>, field_h: &str, h: &Option<Vec<Angle>>, n: usize) -> Result<Vec<WavePlateSetting>> {
    let defaults = default_settings();
    let dq: Vec<f64> = defaults.iter().map(|s| s.qwp()).collect();
    let dh: Vec<f64> = defaults.iter().map(|s| s.hwp()).collect();
    let qs = angle_list(field_q, q, &dq, n)?;
    let hs = angle_list(field_h, h, &dh, n)?;
    qs.into_iter().zip(hs).map(|(q, h)| WavePlateSetting::new(q, h)).collect()
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    /// Reads a config file. A relative `input_data` is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cf = ConfigFile::parse(&text, path)?;
        if let (Some(data), Some(dir)) = (&cf.input_data, path.parent()) {
            if data.is_relative() {
                cf.input_data = Some(dir.join(data));
            }
        }
        Ok(cf)
    }

    /// Applies defaults and checks every field.
    pub fn resolve(&self) -> Result<RunConfig> {
        let scheme = self.scheme.unwrap_or(Scheme::NPlusOne);
        let n = scheme.settings();
        let prep_settings = settings("prep_qwp", &self.prep_qwp, "prep_hwp", &self.prep_hwp, n)?;
        let meas_settings = settings("meas_qwp", &self.meas_qwp, "meas_hwp", &self.meas_hwp, n)?;
        let defaults = NoiseModel::default();
        let noise = NoiseModel {
            shots: self.shots.unwrap_or(defaults.shots),
            angle_jitter: self.angle_jitter.unwrap_or(defaults.angle_jitter),
            seed: self.seed.unwrap_or(defaults.seed),
        };
        let errors = self
            .error_injections
            .iter()
            .flatten()
            .map(|e| ErrorInjection {
                prep: e.prep,
                setting: e.setting,
                hwp_offset: e.hwp_offset.0,
                qwp_offset: e.qwp_offset.0,
            })
            .collect();
        let plan = ExperimentPlan {
            source: self.state.unwrap_or(SourceState::PureH),
            prep_settings,
            meas_settings,
            scheme,
            errors,
            noise,
            repetitions: self.repetitions.unwrap_or(DEFAULT_REPETITIONS),
        };
        plan.validate()?;
        if plan.repetitions < 2 && self.mode.unwrap_or_default() != Mode::Simulate {
            return Err(Error::config("repetitions", "analysis needs at least 2 repetitions"));
        }

        let threshold = self.threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::config("threshold", "must be positive and finite"));
        }

        let known_povms = match &self.known_povms {
            None => theoretical_observables(&plan)[..3].to_vec(),
            Some(v) if v.len() != 3 => {
                return Err(Error::config(
                    "known_povms",
                    format!("expected 3 observable vectors (settings 1-3), got {}", v.len()),
                ))
            }
            Some(v) => v
                .iter()
                .map(|w| ObservableVector::with_tolerance(*w, INPUT_TOL))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::config("known_povms", e.to_string()))?,
        };

        Ok(RunConfig {
            mode: self.mode.unwrap_or_default(),
            plan,
            input_data: self.input_data.clone(),
            known_povms,
            detection_threshold: threshold,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    ConfigFile::load(path)?.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn parse(text: &str) -> Result<RunConfig> {
        ConfigFile::parse(text, Path::new("test.toml"))?.resolve()
    }

    #[test]
    fn angle_strings() {
        let cases = [
            ("pi/16", PI / 16.0),
            ("5pi/16", 5.0 * PI / 16.0),
            ("-pi/4", -PI / 4.0),
            ("3*pi/8", 3.0 * PI / 8.0),
            ("pi", PI),
            ("0.25", 0.25),
            (" 2 pi / 3 ", 2.0 * PI / 3.0),
        ];
        for (text, want) in cases {
            let got: Angle = text.parse().unwrap();
            assert!((got.0 - want).abs() < 1e-15, "{text}");
        }
        for bad in ["pi/0", "tau", "5/16", "", "inf"] {
            assert!(bad.parse::<Angle>().is_err(), "{bad}");
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("scheme = \"n_plus_1\"\nstate = \"pure_h\"\nseed = 1\n").unwrap();
        assert_eq!(c.plan.prep_settings, default_settings()[..4].to_vec());
        assert_eq!(c.plan.meas_settings.len(), 4);
        assert_eq!(c.plan.noise.shots, Shots::Finite(10_000));
        assert_eq!(c.plan.repetitions, 10);
        assert_eq!(c.plan.noise.seed, 1);
        assert_eq!(c.detection_threshold, 3.0);
        assert_eq!(c.mode, Mode::Full);
        assert_eq!(c.known_povms.len(), 3);
    }

    #[test]
    fn injection_entries() {
        let c = parse(
            "scheme = \"2n\"\n[[error_injections]]\nprep = 1\nsetting = 1\nhwp_offset = 0.7853981634\n",
        )
        .unwrap();
        assert_eq!(c.plan.errors.len(), 1);
        assert_eq!(c.plan.errors[0].prep, 1);
        assert!((c.plan.errors[0].hwp_offset - PI / 4.0).abs() < 1e-10);
        assert_eq!(c.plan.errors[0].qwp_offset, 0.0);
        let c = parse("[[error_injections]]\nprep = 1\nsetting = 3\nqwp_offset = \"pi/8\"\n").unwrap();
        assert_eq!(c.plan.errors[0].qwp_offset, PI / 8.0);
        let e = parse("[[error_injections]]\nprep = 5\nsetting = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "error_injections"));
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let field_of = |text: &str| match parse(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field_of("shots = 0"), "shots");
        assert_eq!(field_of("scheme = \"2n\"\nprep_qwp = [0, 0, 0, 0, 0]"), "prep_qwp");
        assert_eq!(field_of("threshold = -1.0"), "threshold");
        assert_eq!(field_of("known_povms = [[0, 0, 1]]"), "known_povms");
        assert_eq!(field_of("known_povms = [[0, 0, 2], [0, 1, 0], [1, 0, 0]]"), "known_povms");
        assert_eq!(field_of("repetitions = 1"), "repetitions");
        assert_eq!(field_of("angle_jitter = -0.1"), "angle_jitter");
    }

    #[test]
    fn parse_errors_carry_location() {
        match parse("scheme = \"2n\"\nshots = [1, 2]\n") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("line 2"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("bogus = 1"), Err(Error::Parse { .. })));
        assert!(matches!(parse("shots = -5"), Err(Error::Parse { .. })));
    }

    #[test]
    fn analytic_shots_and_explicit_angles() {
        let c = parse(
            "scheme = \"n+1\"\nshots = \"analytic\"\nprep_qwp = [0, \"pi/4\", \"pi/4\", \"pi/16\"]\nprep_hwp = [0, 0, \"pi/8\", \"pi/16\"]\n",
        )
        .unwrap();
        assert_eq!(c.plan.noise.shots, Shots::Analytic);
        assert_eq!(c.plan.prep_settings, default_settings()[..4].to_vec());
    }

    #[test]
    fn relative_data_path_follows_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "input_data = \"data.csv\"\n").unwrap();
        let c = load_config(&path).unwrap();
        assert_eq!(c.input_data.unwrap(), dir.path().join("data.csv"));
        assert!(matches!(load_config(&dir.path().join("missing.toml")), Err(Error::Io { .. })));
    }
}
