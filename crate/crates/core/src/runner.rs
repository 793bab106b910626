//! Simulation, verification and convergence drivers behind the command-line tool.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::{self, AnalyticPropagator};
use crate::config::{Method, RunCase, RunConfig};
use crate::coupling::{CouplingSpec, Sign};
use crate::dynamics::{self, DecomposedPropagator, ScenarioParams, TimeGrid};
use crate::error::{Error, Result};
use crate::hilbert::{self, Slot, SpaceDims};
use crate::linalg::{self, SpectralDecomposition, StateVector};
use crate::observables::{
    self, FieldState, InitialStateSpec, QGrid, RecordBuilder, TimeSeriesRecord, UnitSystem,
};

/// Row-level norm tolerance for emitted series.
pub const ROW_NORM_TOL: f64 = 1e-8;
/// Cross-method `|Δ⟨σz⟩|` tolerance for `method = all`.
pub const SIGMA_Z_TOL: f64 = 1e-6;
/// Drift tolerance for norm and `⟨n̂ + σz/2⟩`.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Successive-dims `|Δ⟨σz⟩|` below which a scenario is declared converged.
pub const CONVERGENCE_TOL: f64 = 1e-7;

pub const TIME_SERIES_HEADER: &str = "t,sigma_z,z_mean,p_mean,field_n_mean,norm";
pub const Q_HEADER: &str = "re_alpha,im_alpha,q";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Verification = 2,
}

impl ExitCode {
    pub fn for_error(e: &Error) -> ExitCode {
        match e {
            Error::Io { .. } | Error::Eigen(_) => ExitCode::Verification,
            _ => ExitCode::Validation,
        }
    }
}

/// Seventeen significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn time_series_csv(records: &[TimeSeriesRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 140);
    out.push_str(TIME_SERIES_HEADER);
    out.push('\n');
    for r in records {
        let cols = [r.t, r.sigma_z, r.z_mean, r.p_mean, r.field_n_mean, r.norm].map(format_float);
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn q_function_csv(q: &observables::QField) -> String {
    let mut out = String::from(Q_HEADER);
    out.push('\n');
    for (re, im, v) in q.triples() {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_float(re),
            format_float(im),
            format_float(v)
        );
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Lazily built propagators for one scenario.
struct Propagators {
    scenario: ScenarioParams,
    oracle: Option<SpectralDecomposition>,
    decomposed: Option<DecomposedPropagator>,
    analytic: Option<AnalyticPropagator>,
}

impl Propagators {
    fn new(scenario: ScenarioParams) -> Self {
        Propagators {
            scenario,
            oracle: None,
            decomposed: None,
            analytic: None,
        }
    }

    fn evolve(
        &mut self,
        method: Method,
        psi0: &StateVector,
        times: &[f64],
    ) -> Result<Vec<StateVector>> {
        match method {
            Method::Oracle => {
                if self.oracle.is_none() {
                    let h = dynamics::build_interaction_hamiltonian(&self.scenario)?;
                    self.oracle = Some(linalg::hermitian_spectral(&h)?);
                }
                let d = self.oracle.as_ref().expect("built");
                let c = d.coefficients(psi0);
                Ok(times.iter().map(|&t| d.evolve_from(&c, t)).collect())
            }
            Method::Decomposed => {
                if self.decomposed.is_none() {
                    self.decomposed = Some(DecomposedPropagator::new(&self.scenario)?);
                }
                self.decomposed
                    .as_ref()
                    .expect("built")
                    .propagate(psi0, times)
            }
            Method::Analytic => {
                if self.analytic.is_none() {
                    self.analytic = Some(AnalyticPropagator::new(&self.scenario)?);
                }
                self.analytic
                    .as_ref()
                    .expect("built")
                    .propagate(psi0, times)
            }
            Method::All => Err(Error::invalid("method", "`all` is not a single propagator")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationStats {
    pub method: Method,
    /// `max |‖ψ(t)‖ − 1|`.
    pub max_norm_error: f64,
    pub norm_drift: f64,
    pub excitation_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDeviation {
    pub a: Method,
    pub b: Method,
    pub max_sigma_z_deviation: f64,
    pub min_fidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub label: String,
    pub coupling: CouplingSpec,
    pub initial: InitialStateSpec,
    pub files: Vec<String>,
    pub conservation: Vec<ConservationStats>,
    pub deviations: Vec<PairDeviation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialUnits {
    pub label: String,
    pub z0_scaled: f64,
    pub p0_scaled: f64,
    pub z0_nm: f64,
    /// `p0² ħ g / (2 k_B)` expressed in microkelvin.
    pub temperature_uk: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitsReport {
    pub units: UnitSystem,
    pub time_unit_ns: f64,
    pub length_unit_nm: f64,
    pub momentum_unit_si: f64,
    pub initial: Vec<InitialUnits>,
    pub temperature_note: &'static str,
}

pub const TEMPERATURE_NOTE: &str =
    "temperature = p0^2 * hbar * g / (2 k_B); for g/(2 pi) = 16 MHz the values are microkelvin, \
     so numerals quoted in millikelvin elsewhere correspond to these microkelvin values";

pub fn units_report(cfg: &RunConfig) -> Result<UnitsReport> {
    let u = cfg.units;
    u.validate()?;
    let initial = cfg
        .initial_states()
        .into_iter()
        .map(|(label, s)| {
            let z0 = 2f64.sqrt() * s.beta.re;
            let p0 = 2f64.sqrt() * s.beta.im;
            InitialUnits {
                label,
                z0_scaled: z0,
                p0_scaled: p0,
                z0_nm: z0 * u.length_unit() * 1e9,
                temperature_uk: p0 * p0 * u.temperature_scale() * 1e6,
            }
        })
        .collect();
    Ok(UnitsReport {
        units: u,
        time_unit_ns: u.time_unit() * 1e9,
        length_unit_nm: u.length_unit() * 1e9,
        momentum_unit_si: u.momentum_unit(),
        initial,
        temperature_note: TEMPERATURE_NOTE,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub dims: SpaceDims,
    pub methods: Vec<Method>,
    pub tolerances: Tolerances,
    pub cases: Vec<CaseReport>,
    pub baselines: Vec<String>,
    pub units: UnitsReport,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub row_norm: f64,
    pub sigma_z: f64,
    pub conservation: f64,
}

impl RunSummary {
    pub fn exit_code(&self) -> ExitCode {
        if self.failures.is_empty() {
            ExitCode::Success
        } else {
            ExitCode::Verification
        }
    }
}

/// Series produced for one case by one method.
#[derive(Debug, Clone)]
pub struct MethodSeries {
    pub method: Method,
    pub records: Vec<TimeSeriesRecord>,
    pub states: Vec<StateVector>,
}

/// All methods for one case, before any output is written.
#[derive(Debug, Clone)]
pub struct CaseSeries {
    pub case: RunCase,
    pub scenario: ScenarioParams,
    pub series: Vec<MethodSeries>,
}

fn conservation(
    method: Method,
    states: &[StateVector],
    records: &[TimeSeriesRecord],
    dims: &SpaceDims,
) -> Result<ConservationStats> {
    let n0 = records.first().map(|r| r.norm).unwrap_or(1.0);
    let e0 = observables::excitation_number(&states[0], dims)?;
    let mut excitation_drift = 0.0f64;
    for psi in states {
        excitation_drift =
            excitation_drift.max((observables::excitation_number(psi, dims)? - e0).abs());
    }
    Ok(ConservationStats {
        method,
        max_norm_error: records
            .iter()
            .map(|r| (r.norm - 1.0).abs())
            .fold(0.0, f64::max),
        norm_drift: records
            .iter()
            .map(|r| (r.norm - n0).abs())
            .fold(0.0, f64::max),
        excitation_drift,
    })
}

fn pair_deviation(a: &MethodSeries, b: &MethodSeries) -> PairDeviation {
    PairDeviation {
        a: a.method,
        b: b.method,
        max_sigma_z_deviation: a
            .records
            .iter()
            .zip(&b.records)
            .map(|(x, y)| (x.sigma_z - y.sigma_z).abs())
            .fold(0.0, f64::max),
        min_fidelity: a
            .states
            .iter()
            .zip(&b.states)
            .map(|(x, y)| linalg::inner(x.view(), y.view()).norm_sqr())
            .fold(1.0, f64::min),
    }
}

/// Evolves every case with every selected method.
pub fn simulate_cases(cfg: &RunConfig, methods: &[Method]) -> Result<Vec<CaseSeries>> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let records = RecordBuilder::new(dims)?;
    let cases = cfg.cases();
    let mut out = Vec::with_capacity(cases.len());
    let mut current: Option<(usize, Propagators)> = None;
    for case in cases {
        if current.as_ref().map(|(i, _)| *i) != Some(case.coupling_index) {
            current = Some((
                case.coupling_index,
                Propagators::new(cfg.scenario(case.coupling_index)?),
            ));
        }
        let (_, props) = current.as_mut().expect("set above");
        let psi0 = observables::initial_state(&case.initial, &dims)?;
        let times = props.scenario.times.clone();
        let mut series = Vec::new();
        for &m in methods {
            log::info!(
                "{}: propagating with {m} over {} time points",
                case.label,
                times.len()
            );
            let states = props.evolve(m, &psi0, &times)?;
            let recs = times
                .iter()
                .zip(&states)
                .map(|(&t, psi)| records.record(t, psi))
                .collect::<Result<Vec<_>>>()?;
            series.push(MethodSeries {
                method: m,
                records: recs,
                states,
            });
        }
        out.push(CaseSeries {
            case,
            scenario: props.scenario.clone(),
            series,
        });
    }
    Ok(out)
}

/// JC inversion for `|e⟩ ⊗ |β⟩ ⊗ field`, averaging over the field photon distribution.
pub fn jc_baseline_series(
    spec: &InitialStateSpec,
    g0: f64,
    times: &[f64],
    n_field: usize,
) -> Option<Vec<(f64, f64)>> {
    if spec.c_g.norm_sqr() > 1e-24 {
        return None;
    }
    let weights: Vec<f64> = match spec.field {
        FieldState::Fock(n) => (0..n_field)
            .map(|k| if k == n { 1.0 } else { 0.0 })
            .collect(),
        FieldState::Coherent(a) => hilbert::coherent_state(a, n_field)
            .vector
            .iter()
            .map(|c| c.norm_sqr())
            .collect(),
    };
    Some(
        times
            .iter()
            .map(|&t| {
                let s = weights
                    .iter()
                    .enumerate()
                    .map(|(n, w)| w * observables::jc_baseline_inversion(n, g0, t))
                    .sum();
                (t, s)
            })
            .collect(),
    )
}

fn baseline_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("t,sigma_z\n");
    for (t, s) in rows {
        let _ = writeln!(out, "{},{}", format_float(*t), format_float(*s));
    }
    out
}

fn label_time(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

/// `simulate`: evolve, write per-method CSVs, baselines, Q-functions and `summary.json`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let mut warnings = cfg.truncation_warnings();
    for w in &warnings {
        log::warn!("{w}");
    }
    let methods = cfg.methods();
    if cfg.method == Method::All && !methods.contains(&Method::Analytic) {
        warnings
            .push("analytic propagator skipped: requires delta = 0 and quadratic couplings".into());
    }
    let dims = cfg.dims()?;
    let all = simulate_cases(cfg, &methods)?;
    let mut failures = Vec::new();
    let mut cases = Vec::new();
    for cs in &all {
        let mut files = Vec::new();
        let mut cons = Vec::new();
        for s in &cs.series {
            let name = format!("{}.{}.csv", cs.case.label, s.method);
            write_atomic(&out_dir.join(&name), &time_series_csv(&s.records))?;
            files.push(name);
            let c = conservation(s.method, &s.states, &s.records, &dims)?;
            if c.max_norm_error > ROW_NORM_TOL {
                failures.push(format!(
                    "{} [{}]: |norm - 1| reaches {:.3e} > {ROW_NORM_TOL:e}",
                    cs.case.label, s.method, c.max_norm_error
                ));
            }
            cons.push(c);
        }
        let mut deviations = Vec::new();
        for i in 0..cs.series.len() {
            for j in i + 1..cs.series.len() {
                let d = pair_deviation(&cs.series[i], &cs.series[j]);
                if d.max_sigma_z_deviation > SIGMA_Z_TOL {
                    failures.push(format!(
                        "{} [{} vs {}]: max |d sigma_z| = {:.3e} > {SIGMA_Z_TOL:e}",
                        cs.case.label, d.a, d.b, d.max_sigma_z_deviation
                    ));
                }
                deviations.push(d);
            }
        }
        if let Some(q) = &cfg.q_function {
            let mut props = Propagators::new(cs.scenario.clone());
            let psi0 = observables::initial_state(&cs.case.initial, &dims)?;
            let method = methods[0];
            let states = props.evolve(method, &psi0, &q.times)?;
            let alpha0 = match cs.case.initial.field {
                FieldState::Coherent(a) => a.norm(),
                FieldState::Fock(n) => (n as f64).sqrt(),
            };
            let grid = q.grid.unwrap_or_else(|| QGrid::for_amplitude(alpha0));
            for (&t, psi) in q.times.iter().zip(&states) {
                let rho = observables::reduce_density(psi, Slot::Field, &dims)?;
                let field = observables::husimi_q(&rho, &grid)?;
                let name = format!("{}.q_t{}.csv", cs.case.label, label_time(t));
                write_atomic(&out_dir.join(&name), &q_function_csv(&field))?;
                files.push(name);
            }
        }
        cases.push(CaseReport {
            label: cs.case.label.clone(),
            coupling: cs.scenario.coupling.clone(),
            initial: cs.case.initial,
            files,
            conservation: cons,
            deviations,
        });
    }
    let mut baselines = Vec::new();
    let g0 = cfg.couplings()[0].g0;
    let times = cfg.scenario.times.points();
    for (label, spec) in cfg.initial_states() {
        if let Some(rows) = jc_baseline_series(&spec, g0, &times, dims.n_field) {
            let name = if label.is_empty() {
                "jc.csv".to_string()
            } else {
                format!("jc_{label}.csv")
            };
            write_atomic(&out_dir.join(&name), &baseline_csv(&rows))?;
            baselines.push(name);
        }
    }
    let summary = RunSummary {
        name: cfg.name(),
        dims,
        methods,
        tolerances: Tolerances {
            row_norm: ROW_NORM_TOL,
            sigma_z: SIGMA_Z_TOL,
            conservation: CONSERVATION_TOL,
        },
        cases,
        baselines,
        units: units_report(cfg)?,
        warnings,
        failures,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> ExitCode {
        if self.passed() {
            ExitCode::Success
        } else {
            ExitCode::Verification
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{status} {:<48} {:>12.3e} (threshold {:.1e})",
                c.name, c.value, c.threshold
            );
        }
        out
    }
}

/// Configuration used by `verify` when none is given: quadratic `g±` at `λ = 0.5`, dims (48, 8).
pub fn default_verify_config() -> RunConfig {
    let json = r#"{
        "name": "verify-default",
        "scenario": {
            "dims": { "n_cm": 48, "n_field": 8 },
            "couplings": [
                { "kind": "quadratic", "g0": 1.0, "lambda": 0.5, "sign": "+" },
                { "kind": "quadratic", "g0": 1.0, "lambda": 0.5, "sign": "-" }
            ],
            "times": { "start": 0.0, "stop": 1.0, "steps": 20 }
        },
        "initial": { "c_e": [1, 0], "c_g": [0, 0], "beta": [-0.1767766952966369, 0.1767766952966369], "field": { "fock": 0 } },
        "method": "all"
    }"#;
    RunConfig::from_json(json).expect("built-in config is valid")
}

/// Residuals of the two right-unitary identities on the field truncation.
pub fn susskind_glogower_residuals(dims: &SpaceDims) -> Result<(f64, f64)> {
    let (v, v_dag) = hilbert::susskind_glogower(dims.n_field)?;
    let n = dims.n_field;
    let keep = n - dims.guard_field;
    let vvd = v.dot(&v_dag);
    let right = linalg::leading_block_deviation(&vvd, &linalg::identity(n), keep);
    let mut proj = linalg::identity(n);
    proj[[0, 0]] = C64::new(0.0, 0.0);
    let left = linalg::leading_block_deviation(&v_dag.dot(&v), &proj, n);
    Ok((right, left))
}

/// Largest elementwise gap between the disentangled and squeeze-conjugated `S±`
/// over `k ∈ {1..4}`, `t ∈ {0.1, 0.5, 1.0}`, both signs, on the guarded block of a 48-level CM basis.
pub fn disentangling_lattice(lambda: f64) -> Result<f64> {
    let (dim, keep) = (48, 36);
    let mut worst = 0.0f64;
    for k in 1..=4 {
        for t in [0.1, 0.5, 1.0] {
            for sign in [Sign::Plus, Sign::Minus] {
                let f = analytic::s_pm_factored(k, t, lambda, dim, sign)?;
                let d = analytic::s_direct(k, t, lambda, dim, sign)?;
                worst = worst.max(linalg::leading_block_deviation(&f, &d, keep));
            }
        }
    }
    Ok(worst)
}

pub const SQUEEZE_CHECK_DIM: usize = 96;

/// Squeezing with |ξ| = 0.3 spreads the kept levels well past `dim / 4`;
/// only the lower third stays clear of the truncation.
pub fn squeeze_check_keep(dim: usize) -> usize {
    dim / 3
}

/// Largest guarded deviation of `S(ξ) ẑ S†(ξ)` from `ẑ e^ξ` and `S(ξ) p̂ S†(ξ)` from `p̂ e^{−ξ}`
/// over `ξ ∈ {±0.1, ±0.3}`.
pub fn squeeze_action_residual(dim: usize, keep: usize) -> Result<f64> {
    let q = hilbert::quadrature_ops(dim)?;
    let mut worst = 0.0f64;
    for xi in [-0.3, -0.1, 0.1, 0.3] {
        let s =
            analytic::squeeze_operator(analytic::SqueezeParameter::new(C64::new(xi, 0.0))?, dim)?;
        let sd = linalg::dagger(&s);
        let z = s.dot(&q.z).dot(&sd);
        let p = s.dot(&q.p).dot(&sd);
        worst = worst
            .max(linalg::leading_block_deviation(
                &z,
                &q.z.mapv(|x| x * xi.exp()),
                keep,
            ))
            .max(linalg::leading_block_deviation(
                &p,
                &q.p.mapv(|x| x * (-xi).exp()),
                keep,
            ));
    }
    Ok(worst)
}

/// JC limit: `λ = 0`, initial `|e, β, n⟩`; max deviation of every propagator from `cos(2g0√(n+1)t)`.
pub fn jc_limit_deviation(
    dims: SpaceDims,
    beta: C64,
    n: usize,
    g0: f64,
    times: &[f64],
) -> Result<Vec<(Method, f64)>> {
    let s = ScenarioParams::new(
        CouplingSpec::quadratic(g0, 0.0, Sign::Plus),
        dims,
        0.0,
        times.to_vec(),
    );
    let psi0 =
        observables::initial_state(&InitialStateSpec::excited(beta, FieldState::Fock(n)), &dims)?;
    let mut props = Propagators::new(s);
    let mut out = Vec::new();
    for m in [Method::Oracle, Method::Decomposed, Method::Analytic] {
        let states = props.evolve(m, &psi0, times)?;
        let mut worst = 0.0f64;
        for (&t, psi) in times.iter().zip(&states) {
            let sz = observables::atomic_inversion(psi, &dims)?;
            worst = worst.max((sz - observables::jc_baseline_inversion(n, g0, t)).abs());
        }
        out.push((m, worst));
    }
    Ok(out)
}

/// `verify`: the invariant suite on the configured scenario.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let dims = cfg.dims()?;
    let mut checks = Vec::new();
    for (ci, c) in cfg.couplings().iter().enumerate() {
        let s = cfg.scenario(ci)?;
        let r = dynamics::verify_decomposition(&s)?;
        let tag = c.label();
        checks.push(Check::at_most(
            format!("decomposition j=1 [{tag}]"),
            r.residuals[0],
            1e-10,
        ));
        checks.push(Check::at_most(
            format!("decomposition j=2 [{tag}]"),
            r.residuals[1],
            1e-9,
        ));
        checks.push(Check::at_most(
            format!("decomposition j=3 [{tag}]"),
            r.residuals[2],
            1e-9,
        ));
    }
    let (vvd, vdv) = susskind_glogower_residuals(&dims)?;
    checks.push(Check::at_most("V V^dag = I (guarded)", vvd, 1e-15));
    checks.push(Check::at_most("V^dag V = I - |0><0|", vdv, 1e-15));
    let lambda = cfg
        .couplings()
        .iter()
        .find(|c| c.is_quadratic() && c.lambda > 0.0)
        .map(|c| c.lambda)
        .unwrap_or(1.0);
    checks.push(Check::at_most(
        "disentangled vs squeezed S+-",
        disentangling_lattice(lambda)?,
        1e-9,
    ));
    let sq_dim = dims.n_cm.max(SQUEEZE_CHECK_DIM);
    checks.push(Check::at_most(
        "squeeze action on z, p",
        squeeze_action_residual(sq_dim, squeeze_check_keep(sq_dim))?,
        1e-8,
    ));

    let methods = cfg.methods();
    let series = simulate_cases(cfg, &methods)?;
    for cs in &series {
        for s in &cs.series {
            let c = conservation(s.method, &s.states, &s.records, &dims)?;
            checks.push(Check::at_most(
                format!("norm drift [{} {}]", cs.case.label, s.method),
                c.norm_drift,
                CONSERVATION_TOL,
            ));
            checks.push(Check::at_most(
                format!("excitation drift [{} {}]", cs.case.label, s.method),
                c.excitation_drift,
                CONSERVATION_TOL,
            ));
        }
        for i in 0..cs.series.len() {
            for j in i + 1..cs.series.len() {
                let d = pair_deviation(&cs.series[i], &cs.series[j]);
                checks.push(Check::at_most(
                    format!("sigma_z {} vs {} [{}]", d.a, d.b, cs.case.label),
                    d.max_sigma_z_deviation,
                    SIGMA_Z_TOL,
                ));
                if (d.a, d.b) == (Method::Oracle, Method::Decomposed) {
                    checks.push(Check::at_least(
                        format!("fidelity oracle vs decomposed [{}]", cs.case.label),
                        d.min_fidelity,
                        1.0 - 1e-8,
                    ));
                }
            }
        }
    }
    let times = cfg.scenario.times.points();
    let jc_dims = SpaceDims::new(dims.n_cm.clamp(16, 32), 4)?;
    for n in [0, 2] {
        for (m, dev) in
            jc_limit_deviation(jc_dims, C64::new(-0.25, 0.25) / 2f64.sqrt(), n, 1.0, &times)?
        {
            checks.push(Check::at_most(format!("JC limit n={n} [{m}]"), dev, 1e-8));
        }
    }
    Ok(VerifyReport {
        name: cfg.name(),
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeStep {
    pub n_cm: usize,
    pub n_field: usize,
    /// Max pointwise `|Δ⟨σz⟩|` against the previous step; absent for the first.
    pub delta_sigma_z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeReport {
    pub name: String,
    pub steps: Vec<ConvergeStep>,
    pub converged: bool,
    pub tolerance: f64,
}

impl ConvergeReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            match s.delta_sigma_z {
                Some(d) => {
                    let _ = writeln!(
                        out,
                        "n_cm={:<5} n_field={:<4} max|d sigma_z|={d:.3e}",
                        s.n_cm, s.n_field
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "n_cm={:<5} n_field={:<4} (reference)",
                        s.n_cm, s.n_field
                    );
                }
            }
        }
        let verdict = if self.converged {
            "converged"
        } else {
            "not converged at caps"
        };
        let _ = writeln!(out, "{verdict} (tolerance {:.1e})", self.tolerance);
        out
    }
}

fn sigma_z_series(cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    Ok(simulate_cases(cfg, &[Method::Decomposed])?
        .into_iter()
        .map(|cs| cs.series[0].records.iter().map(|r| r.sigma_z).collect())
        .collect())
}

/// `converge`: double `n_cm` and `n_field` up to the caps and compare `⟨σz⟩` between successive dims.
pub fn converge(cfg: &RunConfig, max_cm: usize, max_field: usize) -> Result<ConvergeReport> {
    cfg.validate()?;
    let start = cfg.dims()?;
    if max_cm < start.n_cm || max_field < start.n_field {
        return Err(Error::invalid(
            "converge",
            format!(
                "caps ({max_cm}, {max_field}) below configured dims ({}, {})",
                start.n_cm, start.n_field
            ),
        ));
    }
    let (mut n_cm, mut n_field) = (start.n_cm, start.n_field);
    let mut prev = sigma_z_series(cfg)?;
    let mut steps = vec![ConvergeStep {
        n_cm,
        n_field,
        delta_sigma_z: None,
    }];
    let mut converged = false;
    while n_cm < max_cm || n_field < max_field {
        n_cm = (2 * n_cm).min(max_cm);
        n_field = (2 * n_field).min(max_field);
        let next = sigma_z_series(&cfg.with_dims(n_cm, n_field))?;
        let delta = prev
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        log::info!("({n_cm}, {n_field}): max |d sigma_z| = {delta:.3e}");
        steps.push(ConvergeStep {
            n_cm,
            n_field,
            delta_sigma_z: Some(delta),
        });
        prev = next;
        if delta < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    Ok(ConvergeReport {
        name: cfg.name(),
        steps,
        converged,
        tolerance: CONVERGENCE_TOL,
    })
}

pub fn write_verify_report(report: &VerifyReport, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("verify.json");
    write_json(&path, report)?;
    Ok(path)
}

pub fn write_converge_report(report: &ConvergeReport, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("converge.json");
    write_json(&path, report)?;
    Ok(path)
}

/// Decoupled free particle; used by the convergence smoke checks.
pub fn free_particle_config(beta: C64, dims: SpaceDims, times: TimeGrid) -> RunConfig {
    let mut cfg = default_verify_config();
    cfg.name = Some("free-particle".into());
    cfg.scenario.dims = dims.into();
    cfg.scenario.couplings =
        crate::config::OneOrMany::One(CouplingSpec::quadratic(0.0, 0.0, Sign::Plus));
    cfg.scenario.times = times;
    cfg.initial = crate::config::OneOrMany::One(crate::config::NamedInitialState {
        label: None,
        spec: InitialStateSpec::excited(beta, FieldState::Fock(0)),
    });
    cfg.method = Method::Decomposed;
    cfg
}
