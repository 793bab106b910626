//! JSON run configuration.
//!
//! ```json
//! {
//!   "name": "fig1a",
//!   "scenario": {
//!     "dims": { "n_cm": 96, "n_field": 4 },
//!     "delta": 0.0,
//!     "couplings": [
//!       { "kind": "quadratic", "g0": 1.0, "lambda": 1.0, "sign": "+" },
//!       { "kind": "quadratic", "g0": 1.0, "lambda": 1.0, "sign": "-" }
//!     ],
//!     "times": { "start": 0.0, "stop": 6.0, "steps": 240 }
//!   },
//!   "initial": { "c_e": [1, 0], "c_g": [0, 0], "beta": [-0.1767766952966369, 0.1767766952966369], "field": { "fock": 0 } },
//!   "units": { "g_hz": 16e6 },
//!   "method": "all",
//!   "output": "out/fig1a",
//!   "q_function": { "times": [0.0, 3.0, 6.0] }
//! }
//! ```
//!
//! `couplings` and `initial` accept a single object or a list; every coupling is
//! run against every initial state. Complex numbers are `[re, im]` pairs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingSpec;
use crate::dynamics::{ScenarioParams, TimeGrid};
use crate::error::{Error, Result};
use crate::hilbert::{self, SpaceDims};
use crate::observables::{FieldState, InitialStateSpec, QGrid, UnitSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    #[default]
    Decomposed,
    Analytic,
    All,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Decomposed => "decomposed",
            Method::Analytic => "analytic",
            Method::All => "all",
        }
    }

    /// Concrete propagators selected by this method.
    pub fn expand(self) -> Vec<Method> {
        match self {
            Method::All => vec![Method::Oracle, Method::Decomposed, Method::Analytic],
            m => vec![m],
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "decomposed" => Ok(Method::Decomposed),
            "analytic" => Ok(Method::Analytic),
            "all" => Ok(Method::All),
            other => Err(Error::invalid(
                "method",
                format!("unknown method `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub n_cm: usize,
    pub n_field: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_cm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_field: Option<usize>,
}

impl DimsConfig {
    pub fn resolve(&self) -> Result<SpaceDims> {
        let default = SpaceDims {
            n_cm: self.n_cm,
            n_field: self.n_field,
            guard_cm: self.n_cm / 4,
            guard_field: 2,
        };
        SpaceDims::with_guards(
            self.n_cm,
            self.n_field,
            self.guard_cm.unwrap_or(default.guard_cm),
            self.guard_field.unwrap_or(default.guard_field),
        )
    }
}

impl From<SpaceDims> for DimsConfig {
    fn from(d: SpaceDims) -> Self {
        DimsConfig {
            n_cm: d.n_cm,
            n_field: d.n_field,
            guard_cm: Some(d.guard_cm),
            guard_field: Some(d.guard_field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dims: DimsConfig,
    #[serde(default)]
    pub delta: f64,
    /// Field frequency; `omega_q = omega + delta`.
    #[serde(default)]
    pub omega: f64,
    #[serde(alias = "coupling")]
    pub couplings: OneOrMany<CouplingSpec>,
    pub times: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub spec: InitialStateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFunctionConfig {
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<QGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: ScenarioConfig,
    pub initial: OneOrMany<NamedInitialState>,
    #[serde(default)]
    pub units: UnitSystem,
    #[serde(default)]
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_function: Option<QFunctionConfig>,
}

/// One coupling paired with one initial state.
#[derive(Debug, Clone)]
pub struct RunCase {
    pub label: String,
    pub coupling_index: usize,
    pub initial_label: String,
    pub initial: InitialStateSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "run".into())
    }

    pub fn dims(&self) -> Result<SpaceDims> {
        self.scenario.dims.resolve()
    }

    pub fn couplings(&self) -> Vec<CouplingSpec> {
        self.scenario.couplings.to_vec()
    }

    pub fn initial_states(&self) -> Vec<(String, InitialStateSpec)> {
        let all = self.initial.to_vec();
        let single = all.len() == 1;
        all.into_iter()
            .enumerate()
            .map(|(i, s)| {
                let label = s.label.clone().unwrap_or_else(|| {
                    if single {
                        String::new()
                    } else {
                        format!("s{i}")
                    }
                });
                (label, s.spec)
            })
            .collect()
    }

    pub fn scenario(&self, coupling_index: usize) -> Result<ScenarioParams> {
        let coupling = self
            .couplings()
            .get(coupling_index)
            .cloned()
            .ok_or(Error::OutOfRange {
                index: coupling_index,
                dim: self.couplings().len(),
            })?;
        let sc = &self.scenario;
        Ok(ScenarioParams {
            omega: sc.omega,
            omega_q: sc.omega + sc.delta,
            delta: sc.delta,
            coupling,
            dims: self.dims()?,
            times: sc.times.points(),
        })
    }

    pub fn cases(&self) -> Vec<RunCase> {
        let couplings = self.couplings();
        let mut out = Vec::new();
        for (ci, c) in couplings.iter().enumerate() {
            for (label, spec) in self.initial_states() {
                let case_label = if label.is_empty() {
                    c.label()
                } else {
                    format!("{}_{}", c.label(), label)
                };
                out.push(RunCase {
                    label: case_label,
                    coupling_index: ci,
                    initial_label: label,
                    initial: spec,
                });
            }
        }
        out
    }

    /// Methods actually run: `all` drops the closed form where it does not apply.
    pub fn methods(&self) -> Vec<Method> {
        let analytic_ok = self.analytic_applicable();
        self.method
            .expand()
            .into_iter()
            .filter(|m| *m != Method::Analytic || analytic_ok)
            .collect()
    }

    pub fn analytic_applicable(&self) -> bool {
        self.scenario.delta == 0.0 && self.couplings().iter().all(|c| c.is_quadratic())
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims()?;
        let sc = &self.scenario;
        if !sc.delta.is_finite() || !sc.omega.is_finite() {
            return Err(Error::invalid("scenario.delta", "must be finite"));
        }
        let t = &sc.times;
        if !(t.start >= 0.0) || !t.stop.is_finite() || !(t.stop >= t.start) {
            return Err(Error::invalid("scenario.times", "need 0 <= start <= stop"));
        }
        if t.steps == 0 && t.stop > t.start {
            return Err(Error::invalid(
                "scenario.times.steps",
                "must be positive when stop > start",
            ));
        }
        let couplings = self.couplings();
        if couplings.is_empty() {
            return Err(Error::invalid(
                "scenario.couplings",
                "at least one coupling required",
            ));
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, c) in couplings.iter().enumerate() {
            c.validate()
                .map_err(|e| prefix(e, &format!("scenario.couplings[{i}]")))?;
            if !labels.insert(c.label()) {
                return Err(Error::invalid(
                    format!("scenario.couplings[{i}].label"),
                    format!("duplicate label `{}`", c.label()),
                ));
            }
        }
        let initial = self.initial.to_vec();
        if initial.is_empty() {
            return Err(Error::invalid(
                "initial",
                "at least one initial state required",
            ));
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, (label, s)) in self.initial_states().iter().enumerate() {
            s.validate()
                .map_err(|e| prefix(e, &format!("initial[{i}]")))?;
            if let FieldState::Fock(n) = s.field {
                if n >= dims.n_field {
                    return Err(Error::invalid(
                        format!("initial[{i}].field"),
                        format!(
                            "Fock level {n} outside the field truncation n_field = {}",
                            dims.n_field
                        ),
                    ));
                }
            }
            if !labels.insert(label.clone()) {
                return Err(Error::invalid(
                    format!("initial[{i}].label"),
                    format!("duplicate label `{label}`"),
                ));
            }
        }
        self.units.validate()?;
        if self.method == Method::Analytic && !self.analytic_applicable() {
            return Err(Error::invalid(
                "method",
                "analytic requires delta = 0 and quadratic couplings; use oracle or decomposed",
            ));
        }
        if let Some(q) = &self.q_function {
            if let Some(g) = &q.grid {
                g.validate()?;
            }
            if q.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                return Err(Error::invalid(
                    "q_function.times",
                    "must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Truncation weights of the initial coherent states, for warnings.
    pub fn truncation_warnings(&self) -> Vec<String> {
        let Ok(dims) = self.dims() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (label, s) in self.initial_states() {
            let cm = hilbert::coherent_state(s.beta, dims.n_cm).truncation_weight;
            if cm > 1e-8 {
                out.push(format!(
                    "initial `{label}`: CM coherent state loses weight {cm:.3e} at n_cm = {}",
                    dims.n_cm
                ));
            }
            if let FieldState::Coherent(a) = s.field {
                let w = hilbert::coherent_state(a, dims.n_field).truncation_weight;
                if w > 1e-8 {
                    out.push(format!("initial `{label}`: field coherent state loses weight {w:.3e} at n_field = {}", dims.n_field));
                }
            }
        }
        out
    }

    pub fn with_dims(&self, n_cm: usize, n_field: usize) -> Self {
        let mut c = self.clone();
        c.scenario.dims = DimsConfig {
            n_cm,
            n_field,
            guard_cm: None,
            guard_field: None,
        };
        c
    }
}

fn prefix(e: Error, at: &str) -> Error {
    match e {
        Error::Invalid { field, message } => {
            let tail = field
                .split_once('.')
                .map(|(_, t)| t.to_string())
                .unwrap_or(field);
            Error::Invalid {
                field: format!("{at}.{tail}"),
                message,
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Sign;
    use num_complex::Complex64 as C64;

    const MINIMAL: &str = r#"{
        "scenario": {
            "dims": { "n_cm": 16, "n_field": 4 },
            "coupling": { "kind": "quadratic", "g0": 1.0, "lambda": 1.0, "sign": "-" },
            "times": { "start": 0.0, "stop": 1.0, "steps": 4 }
        },
        "initial": { "c_e": [1, 0], "c_g": [0, 0], "beta": [0.1, 0.2], "field": { "fock": 1 } }
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.method, Method::Decomposed);
        assert_eq!(cfg.dims().unwrap(), SpaceDims::new(16, 4).unwrap());
        assert_eq!(cfg.couplings()[0].sign, Sign::Minus);
        let (label, init) = &cfg.initial_states()[0];
        assert_eq!(label, "");
        assert_eq!(init.beta, C64::new(0.1, 0.2));
        assert_eq!(init.field, FieldState::Fock(1));
        assert_eq!(cfg.scenario(0).unwrap().times.len(), 5);
        assert_eq!(cfg.cases()[0].label, "gminus");
        assert_eq!(cfg.units, UnitSystem::default());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    fn edited(f: impl FnOnce(&mut serde_json::Value)) -> Result<RunConfig> {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        f(&mut v);
        RunConfig::from_json(&v.to_string())
    }

    #[test]
    fn field_level_validation_messages() {
        let err = edited(|v| v["initial"]["c_g"] = serde_json::json!([1, 0])).unwrap_err();
        assert!(err.to_string().contains("initial[0].c_e/c_g"), "{err}");
        let err = edited(|v| v["initial"]["field"] = serde_json::json!({ "fock": 4 })).unwrap_err();
        assert!(err.to_string().contains("initial[0].field"), "{err}");
        let err =
            edited(|v| v["scenario"]["dims"] = serde_json::json!({ "n_cm": 8, "n_field": 2 }))
                .unwrap_err();
        assert!(matches!(err, Error::InvalidDim { .. }), "{err}");
        let err =
            edited(|v| v["scenario"]["coupling"]["lambda"] = serde_json::json!(-1.0)).unwrap_err();
        assert!(
            err.to_string().contains("scenario.couplings[0].lambda"),
            "{err}"
        );
        let err = edited(|v| v["bogus"] = serde_json::json!(1)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn analytic_preconditions() {
        let err = edited(|v| {
            v["method"] = serde_json::json!("analytic");
            v["scenario"]["delta"] = serde_json::json!(0.5);
        })
        .unwrap_err();
        assert!(err.to_string().contains("analytic requires"), "{err}");
        let cfg = edited(|v| {
            v["method"] = serde_json::json!("all");
            v["scenario"]["coupling"] =
                serde_json::json!({ "kind": "sech2", "g0": 1.0, "params": { "width": 2.0 } });
        })
        .unwrap();
        assert_eq!(cfg.methods(), vec![Method::Oracle, Method::Decomposed]);
    }

    #[test]
    fn cases_cross_couplings_with_states() {
        let cfg = edited(|v| {
            v["scenario"]["coupling"] = serde_json::json!([
                { "kind": "quadratic", "g0": 1.0, "lambda": 1.0, "sign": "+" },
                { "kind": "quadratic", "g0": 1.0, "lambda": 1.0, "sign": "-" }
            ]);
            let one = v["initial"].clone();
            let mut two = one.clone();
            two["label"] = serde_json::json!("slow");
            v["initial"] = serde_json::json!([one, two]);
        })
        .unwrap();
        let labels: Vec<_> = cfg.cases().into_iter().map(|c| c.label).collect();
        assert_eq!(
            labels,
            ["gplus_s0", "gplus_slow", "gminus_s0", "gminus_slow"]
        );
    }

    #[test]
    fn method_strings() {
        for m in [
            Method::Oracle,
            Method::Decomposed,
            Method::Analytic,
            Method::All,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("fast".parse::<Method>().is_err());
    }
}
