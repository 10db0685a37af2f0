//! Scenario files.
//!
//! A scenario is a TOML document with `schema = 1`. Operators are given
//! either as a generator expression (see [`crate::expr`]) or as an explicit
//! matrix of `[re, im]` pairs, row by row:
//!
//! ```toml
//! schema = 1
//! name = "qubit-qnd"
//!
//! [model]
//! kind = "explicit"
//! h_s = "pauli_z"
//! h_m = "pauli_z"
//! h_c = "kron(pauli_z, pauli_z)"
//!
//! [preparation]
//! kind = "eigenbasis"
//! system = 0
//! apparatus = 0
//!
//! [schedule]
//! tau = 1.0
//! delta_tau = 0.5
//! repeats = 5
//! trials = 1000
//! ```
//!
//! Random models use `kind = "random"` with `d_s`, `d_m`, `family`
//! (`qnd`, `violating` or `interpolated` plus `eta`) and `seed`. The
//! pointer observable defaults to `h_m`; the calibration table defaults to
//! the pointer eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse_operator;
use crate::linalg::{ComplexMatrix, DensityOperator, HermitianOperator, C64};
use crate::measurement::{Calibration, PointerObservable, RepeatSchedule};
use crate::model::{random_model, BipartiteModel, ModelFamily, Preparation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    /// Pointer observable; defaults to `h_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer: Option<OperatorSpec>,
    /// `c_{iλ}` as `d_s` rows of `d_m` readings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Vec<Vec<f64>>>,
    pub model: ModelSpec,
    pub preparation: PreparationSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Expression(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Explicit {
        h_s: OperatorSpec,
        h_m: OperatorSpec,
        h_c: OperatorSpec,
    },
    Random {
        d_s: usize,
        d_m: usize,
        family: FamilySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySpec {
    Qnd,
    Violating,
    Interpolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreparationSpec {
    Eigenbasis { system: usize, apparatus: usize },
    Product { rho: OperatorSpec, mu: OperatorSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Time of the first reading.
    pub tau: f64,
    /// Spacing of repeated readings.
    pub delta_tau: f64,
    /// Readings per trial.
    pub repeats: usize,
    /// Independent trials.
    pub trials: usize,
    /// End of the constancy check window `[0, horizon]`.
    pub horizon: f64,
    /// Intervals in the constancy grid.
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self { tau: 1.0, delta_tau: 0.5, repeats: 5, trials: 1000, horizon: 10.0, grid_points: 100, seed: 0 }
    }
}

impl ScheduleSpec {
    pub fn repeat_schedule(&self) -> RepeatSchedule {
        RepeatSchedule { tau: self.tau, delta_tau: self.delta_tau, repeats: self.repeats }
    }
}

/// A scenario with every operator evaluated and validated.
#[derive(Clone, Debug)]
pub struct ResolvedScenario {
    pub name: String,
    pub model: BipartiteModel,
    pub pointer: PointerObservable,
    pub preparation: Preparation,
    pub calibration: Calibration,
    pub schedule: ScheduleSpec,
    /// Interpolation parameter of a random interpolated model.
    pub eta: Option<f64>,
    /// Seed of a random model.
    pub model_seed: Option<u64>,
}

/// A resolution failure tied to a key of the document.
#[derive(Debug)]
struct FieldError {
    section: &'static str,
    key: &'static str,
    source: Error,
}

impl FieldError {
    fn path(&self) -> String {
        if self.section.is_empty() {
            self.key.to_string()
        } else {
            format!("{}.{}", self.section, self.key)
        }
    }
}

trait AtField<T> {
    fn at(self, section: &'static str, key: &'static str) -> std::result::Result<T, FieldError>;
}

impl<T> AtField<T> for Result<T> {
    fn at(self, section: &'static str, key: &'static str) -> std::result::Result<T, FieldError> {
        self.map_err(|source| FieldError { section, key, source })
    }
}

impl OperatorSpec {
    pub fn to_operator(&self) -> Result<HermitianOperator> {
        match self {
            OperatorSpec::Expression(e) => parse_operator(e),
            OperatorSpec::Matrix(rows) => {
                let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect()).collect();
                HermitianOperator::new(ComplexMatrix::from_rows(&rows)?)
            }
        }
    }

    fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.to_operator()?.into_matrix())
    }

    /// Explicit matrix form of an operator.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        OperatorSpec::Matrix((0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect())
    }
}

impl Scenario {
    /// Parses a document; syntax and schema errors carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            Error::Parse { line, column, message: e.message().to_string() }
        })?;
        if scenario.schema != SCHEMA_VERSION {
            let line = locate_key(text, None, "schema").unwrap_or(1);
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("unsupported schema {} (expected {SCHEMA_VERSION})", scenario.schema),
            });
        }
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    /// Parses and resolves a document, anchoring semantic errors to the
    /// line of the offending key.
    pub fn load(text: &str) -> Result<(Self, ResolvedScenario)> {
        let scenario = Self::from_toml_str(text)?;
        let resolved = scenario.resolve_fields().map_err(|f| Error::Parse {
            line: locate_key(text, (!f.section.is_empty()).then_some(f.section), f.key).unwrap_or(1),
            column: 1,
            message: format!("{}: {}", f.path(), f.source),
        })?;
        Ok((scenario, resolved))
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.resolve_fields().map_err(|f| Error::Scenario {
            name: self.name.clone(),
            source: Box::new(Error::InvalidArgument(format!("{}: {}", f.path(), f.source))),
        })
    }

    fn resolve_fields(&self) -> std::result::Result<ResolvedScenario, FieldError> {
        let (model, eta, model_seed) = match &self.model {
            ModelSpec::Explicit { h_s, h_m, h_c } => {
                let h_s = h_s.to_operator().at("model", "h_s")?;
                let h_m = h_m.to_operator().at("model", "h_m")?;
                let h_c = h_c.to_operator().at("model", "h_c")?;
                (BipartiteModel::new(h_s, h_m, h_c).at("model", "h_c")?, None, None)
            }
            ModelSpec::Random { d_s, d_m, family, eta, seed } => {
                let family = match (family, eta) {
                    (FamilySpec::Qnd, None) => ModelFamily::Qnd,
                    (FamilySpec::Violating, None) => ModelFamily::Violating,
                    (FamilySpec::Interpolated, Some(eta)) => ModelFamily::Interpolated(*eta),
                    (FamilySpec::Interpolated, None) => {
                        return Err(Error::invalid("interpolated family needs `eta`")).at("model", "family")
                    }
                    (_, Some(_)) => return Err(Error::invalid("`eta` only applies to the interpolated family")).at("model", "eta"),
                };
                let eta = match family {
                    ModelFamily::Interpolated(e) => Some(e),
                    _ => None,
                };
                (random_model(*d_s, *d_m, family, *seed).at("model", "d_s")?, eta, Some(*seed))
            }
        };
        let pointer_op = match &self.pointer {
            Some(spec) => spec.to_operator().at("", "pointer")?,
            None => model.h_m().clone(),
        };
        if pointer_op.dim() != model.d_m() {
            return Err(Error::DimensionMismatch { context: "pointer observable", expected: model.d_m(), found: pointer_op.dim() })
                .at("", "pointer");
        }
        let pointer = PointerObservable::new(pointer_op);
        let preparation = match &self.preparation {
            PreparationSpec::Eigenbasis { system, apparatus } => {
                if *system >= model.d_s() {
                    return Err(Error::IndexOutOfRange { what: "system", index: *system, bound: model.d_s() }).at("preparation", "system");
                }
                if *apparatus >= model.d_m() {
                    return Err(Error::IndexOutOfRange { what: "apparatus", index: *apparatus, bound: model.d_m() })
                        .at("preparation", "apparatus");
                }
                Preparation::Eigenbasis { system: *system, apparatus: *apparatus }
            }
            PreparationSpec::Product { rho, mu } => {
                let rho = rho.to_density().at("preparation", "rho")?;
                let mu = mu.to_density().at("preparation", "mu")?;
                if rho.dim() != model.d_s() {
                    return Err(Error::DimensionMismatch { context: "system state", expected: model.d_s(), found: rho.dim() })
                        .at("preparation", "rho");
                }
                if mu.dim() != model.d_m() {
                    return Err(Error::DimensionMismatch { context: "apparatus state", expected: model.d_m(), found: mu.dim() })
                        .at("preparation", "mu");
                }
                Preparation::Product { rho, mu }
            }
        };
        let calibration = match &self.calibration {
            Some(table) => {
                if table.len() != model.d_s() {
                    return Err(Error::DimensionMismatch { context: "calibration rows", expected: model.d_s(), found: table.len() })
                        .at("", "calibration");
                }
                Calibration::from_table(table.clone(), &pointer).at("", "calibration")?
            }
            None => Calibration::from_pointer(&pointer, model.d_s()),
        };
        let s = &self.schedule;
        let schedule_ok =
            s.tau > 0.0 && s.delta_tau > 0.0 && s.tau.is_finite() && s.delta_tau.is_finite() && s.horizon >= 0.0 && s.horizon.is_finite();
        if !schedule_ok {
            return Err(Error::invalid("tau and delta_tau must be positive, horizon non-negative")).at("schedule", "tau");
        }
        if s.repeats < 2 {
            return Err(Error::invalid("at least 2 repeats are required")).at("schedule", "repeats");
        }
        if s.trials == 0 {
            return Err(Error::invalid("at least 1 trial is required")).at("schedule", "trials");
        }
        Ok(ResolvedScenario {
            name: self.name.clone(),
            model,
            pointer,
            preparation,
            calibration,
            schedule: self.schedule.clone(),
            eta,
            model_seed,
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map(|i| offset - i).unwrap_or(offset + 1);
    (line, column)
}

/// 1-based line of `key = …` inside `[section]` (or at top level).
fn locate_key(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut section_line = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            if current.as_deref() == section {
                section_line = Some(n + 1);
            }
            continue;
        }
        if current.as_deref() == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(n + 1);
                }
            }
        }
    }
    section_line
}

const QUBIT_QND: &str = include_str!("../scenarios/qubit-qnd.toml");
const QUBIT_VIOLATING: &str = include_str!("../scenarios/qubit-violating.toml");
const QUTRIT_SYSTEM: &str = include_str!("../scenarios/qutrit-system.toml");

/// Source text of the bundled scenarios, by name.
pub fn bundled_sources() -> [(&'static str, &'static str); 3] {
    [("qubit-qnd", QUBIT_QND), ("qubit-violating", QUBIT_VIOLATING), ("qutrit-system", QUTRIT_SYSTEM)]
}

pub fn bundled(name: &str) -> Option<Scenario> {
    bundled_sources()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_toml_str(text).expect("bundled scenarios are valid"))
}

pub fn bundled_scenarios() -> Vec<Scenario> {
    bundled_sources().iter().map(|(_, text)| Scenario::from_toml_str(text).expect("bundled scenarios are valid")).collect()
}
