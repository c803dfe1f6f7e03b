//! Run configuration: TOML parsing, validation and the canonical hash.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use tcl_core::bath::discrete::DEFAULT_OSCILLATOR_LEVELS;
use tcl_core::bath::{
    correlation_from_spectral_density, super_correlation, BathMode, DiscreteBath, SpectralDensity,
};
use tcl_core::resummation::{
    DerivativeStencil, ResummationOptions, DEFAULT_START_OFFSET, DEFAULT_SVD_CUTOFF,
};
use tcl_core::tcl::{BathMoments, TimeGrid};
use tcl_core::{CMatrix, Operator, Picture, SystemModel, SystemState, C64};

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<RawSystem>,
    bath: Option<RawBath>,
    method: Option<RawMethod>,
    initial_state: Option<RawInitialState>,
    output: Option<RawOutput>,
    oracle: Option<RawOracle>,
    correlation: Option<RawCorrelation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dim: Option<usize>,
    h_s: Option<RawMatrix>,
    s: Option<RawMatrix>,
    lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBath {
    kind: Option<String>,
    eta: Option<f64>,
    cutoff: Option<f64>,
    reorganization: Option<f64>,
    width: Option<f64>,
    beta: Option<f64>,
    mean: Option<f64>,
    offset: Option<f64>,
    modes: Option<Vec<RawMode>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    kind: String,
    frequency: f64,
    coupling: f64,
    n_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    tcl_order: Option<usize>,
    grid: Option<RawGrid>,
    resummation: Option<RawResummation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t0: Option<f64>,
    dt: Option<f64>,
    n_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResummation {
    #[serde(default)]
    enabled: bool,
    cutoff: Option<f64>,
    epsilon_steps: Option<usize>,
    truncation: Option<usize>,
    stencil: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitialState {
    rho: Option<RawMatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    prefix: Option<String>,
    formats: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    lambdas: Option<Vec<f64>>,
    tcl2_window: Option<[f64; 2]>,
    tcl4_window: Option<[f64; 2]>,
    cutoff: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrelation {
    a: Option<RawMatrix>,
    b: Option<RawMatrix>,
    c: Option<RawMatrix>,
    stride: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum BathSpec {
    Continuous {
        density: SpectralDensity,
        beta: Option<f64>,
        mean: f64,
    },
    Discrete(DiscreteBath),
}

impl BathSpec {
    pub fn moments(&self) -> tcl_core::Result<BathMoments> {
        Ok(match self {
            BathSpec::Continuous {
                density,
                beta,
                mean,
            } => BathMoments::Gaussian(super_correlation(
                correlation_from_spectral_density(*density, *beta)?.with_mean(*mean),
            )),
            BathSpec::Discrete(bath) => BathMoments::Exact(bath.clone()),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BathSpec::Continuous {
                density: SpectralDensity::Ohmic { .. },
                ..
            } => "ohmic",
            BathSpec::Continuous { .. } => "drude",
            BathSpec::Discrete(_) => "discrete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

#[derive(Clone, Debug)]
pub struct OracleSpec {
    pub lambdas: Vec<f64>,
    pub tcl2_window: [f64; 2],
    pub tcl4_window: [f64; 2],
    pub cutoff: f64,
}

#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    pub a: Operator,
    pub b: Operator,
    pub c: Operator,
    pub stride: usize,
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub prefix: String,
    pub hash: String,
    pub system: SystemModel,
    pub lambda: f64,
    pub bath: BathSpec,
    pub tcl_order: usize,
    pub grid: TimeGrid,
    pub resummation: Option<ResummationOptions>,
    /// Schrödinger-picture state at `t0`.
    pub initial_state: Option<Operator>,
    pub formats: Formats,
    pub oracle: Option<OracleSpec>,
    pub correlation: Option<CorrelationSpec>,
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration ({} error(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Canonical form: the parsed document re-serialized with sorted keys.
pub fn canonicalize(text: &str) -> Result<String, String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    toml::to_string(&table).map_err(|e| e.to_string())
}

/// SHA-256 of the canonical form, lower-case hex.
pub fn config_hash(text: &str) -> Result<String, String> {
    let canonical = canonicalize(text)?;
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    parse_config_str(&text, &stem)
}

pub fn parse_config_str(text: &str, default_prefix: &str) -> Result<RunConfig, ConfigErrors> {
    let hash = config_hash(text).map_err(|e| ConfigErrors(vec![e]))?;
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigErrors(vec![e.to_string()]))?;
    Validator::default().finish(raw, hash, default_prefix)
}

#[derive(Default)]
struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn error(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn required<T>(&mut self, value: Option<T>, key: &str) -> Option<T> {
        if value.is_none() {
            self.error(format!("missing key {key}"));
        }
        value
    }

    fn matrix(&mut self, raw: &RawMatrix, key: &str, dim: Option<usize>) -> Option<CMatrix> {
        let rows = raw.len();
        if rows == 0 {
            self.error(format!("{key} is empty"));
            return None;
        }
        if let Some(row) = raw.iter().position(|r| r.len() != rows) {
            self.error(format!(
                "{key} must be square: row {row} has {} entries, expected {rows}",
                raw[row].len()
            ));
            return None;
        }
        if let Some(d) = dim {
            if d != rows {
                self.error(format!("{key} is {rows}x{rows} but system.dim is {d}"));
                return None;
            }
        }
        if raw.iter().flatten().flatten().any(|x| !x.is_finite()) {
            self.error(format!("{key} has non-finite entries"));
            return None;
        }
        Some(CMatrix::from_fn(rows, rows, |i, j| {
            C64::new(raw[i][j][0], raw[i][j][1])
        }))
    }

    fn hermitian(&mut self, raw: &RawMatrix, key: &str, dim: Option<usize>) -> Option<Operator> {
        let m = self.matrix(raw, key, dim)?;
        let op = Operator::new(m).ok()?;
        if let Err(e) = op.ensure_hermitian(key) {
            self.error(e.to_string());
            return None;
        }
        Some(op)
    }

    fn operator(&mut self, raw: &RawMatrix, key: &str, dim: Option<usize>) -> Option<Operator> {
        Operator::new(self.matrix(raw, key, dim)?).ok()
    }

    fn positive(&mut self, value: Option<f64>, key: &str) -> Option<f64> {
        let v = self.required(value, key)?;
        if !(v > 0.0 && v.is_finite()) {
            self.error(format!("{key} must be positive"));
            return None;
        }
        Some(v)
    }

    fn finite(&mut self, value: Option<f64>, key: &str, default: f64) -> Option<f64> {
        let v = value.unwrap_or(default);
        if !v.is_finite() {
            self.error(format!("{key} must be finite"));
            return None;
        }
        Some(v)
    }

    fn window(
        &mut self,
        value: Option<[f64; 2]>,
        key: &str,
        default: [f64; 2],
    ) -> Option<[f64; 2]> {
        let w = value.unwrap_or(default);
        if !(w[0] > 0.0 && w[0] < w[1] && w[1].is_finite()) {
            self.error(format!("{key} must satisfy 0 < low < high"));
            return None;
        }
        Some(w)
    }

    fn system(&mut self, raw: Option<RawSystem>) -> (Option<SystemModel>, Option<f64>) {
        let Some(raw) = self.required(raw, "[system]") else {
            return (None, None);
        };
        let dim = self.required(raw.dim, "system.dim");
        if dim == Some(0) {
            self.error("system.dim must be at least 1");
        }
        let h_s = raw
            .h_s
            .as_ref()
            .or_else(|| {
                self.error("missing key system.h_s");
                None
            })
            .and_then(|m| self.hermitian(m, "system.h_s", dim));
        let s = raw
            .s
            .as_ref()
            .or_else(|| {
                self.error("missing key system.s");
                None
            })
            .and_then(|m| self.hermitian(m, "system.s", dim));
        let lambda = self.finite(raw.lambda, "system.lambda", 1.0);
        let model = match (h_s, s) {
            (Some(h), Some(s)) => match SystemModel::new(h, s) {
                Ok(m) => Some(m),
                Err(e) => {
                    self.error(format!("system: {e}"));
                    None
                }
            },
            _ => None,
        };
        (model, lambda)
    }

    fn bath(&mut self, raw: Option<RawBath>) -> Option<BathSpec> {
        let raw = self.required(raw, "[bath]")?;
        let kind = self.required(raw.kind.clone(), "bath.kind")?;
        if let Some(b) = raw.beta {
            if !(b > 0.0 && b.is_finite()) {
                self.error("bath.beta must be positive (omit it for zero temperature)");
            }
        }
        match kind.as_str() {
            "ohmic" | "drude" => {
                if raw.modes.is_some() {
                    self.error(format!("bath.modes is not used by bath.kind = \"{kind}\""));
                }
                if raw.offset.is_some() {
                    self.error(format!(
                        "bath.offset is not used by bath.kind = \"{kind}\" (use bath.mean)"
                    ));
                }
                let density = if kind == "ohmic" {
                    let eta = self.positive(raw.eta, "bath.eta");
                    let cutoff = self.positive(raw.cutoff, "bath.cutoff");
                    SpectralDensity::Ohmic {
                        eta: eta?,
                        cutoff: cutoff?,
                    }
                } else {
                    let reorganization = self.positive(raw.reorganization, "bath.reorganization");
                    let width = self.positive(raw.width, "bath.width");
                    SpectralDensity::DrudeLorentz {
                        reorganization: reorganization?,
                        width: width?,
                    }
                };
                let mean = self.finite(raw.mean, "bath.mean", 0.0)?;
                Some(BathSpec::Continuous {
                    density,
                    beta: raw.beta,
                    mean,
                })
            }
            "discrete" => {
                for (key, present) in [
                    ("eta", raw.eta.is_some()),
                    ("cutoff", raw.cutoff.is_some()),
                    ("reorganization", raw.reorganization.is_some()),
                    ("width", raw.width.is_some()),
                    ("mean", raw.mean.is_some()),
                ] {
                    if present {
                        self.error(format!(
                            "bath.{key} is not used by bath.kind = \"discrete\""
                        ));
                    }
                }
                let raw_modes = self.required(raw.modes, "bath.modes")?;
                let mut modes = Vec::with_capacity(raw_modes.len());
                for (i, m) in raw_modes.iter().enumerate() {
                    match m.kind.as_str() {
                        "qubit" => {
                            if m.n_max.is_some() {
                                self.error(format!("bath.modes[{i}].n_max applies to oscillators only"));
                            }
                            modes.push(BathMode::qubit(m.frequency, m.coupling));
                        }
                        "oscillator" => modes.push(BathMode::oscillator(
                            m.frequency,
                            m.coupling,
                            m.n_max.unwrap_or(DEFAULT_OSCILLATOR_LEVELS),
                        )),
                        other => self.error(format!(
                            "bath.modes[{i}].kind must be \"qubit\" or \"oscillator\", got \"{other}\""
                        )),
                    }
                }
                let offset = self.finite(raw.offset, "bath.offset", 0.0)?;
                match DiscreteBath::new(modes, raw.beta, offset) {
                    Ok(b) => Some(BathSpec::Discrete(b)),
                    Err(e) => {
                        self.error(format!("bath: {e}"));
                        None
                    }
                }
            }
            other => {
                self.error(format!(
                    "bath.kind must be \"ohmic\", \"drude\" or \"discrete\", got \"{other}\""
                ));
                None
            }
        }
    }

    fn method(
        &mut self,
        raw: Option<RawMethod>,
    ) -> (
        Option<usize>,
        Option<TimeGrid>,
        Option<Option<ResummationOptions>>,
    ) {
        let Some(raw) = self.required(raw, "[method]") else {
            return (None, None, None);
        };
        let order = self
            .required(raw.tcl_order, "method.tcl_order")
            .and_then(|n| {
                if n == 2 || n == 4 {
                    Some(n)
                } else {
                    self.error(format!("method.tcl_order must be 2 or 4, got {n}"));
                    None
                }
            });
        let grid = self.required(raw.grid, "[method.grid]").and_then(|g| {
            let t0 = self.finite(g.t0, "grid.t0", 0.0);
            let dt = self.required(g.dt, "grid.dt");
            let dt = dt.filter(|&dt| {
                let ok = dt > 0.0 && dt.is_finite();
                if !ok {
                    self.error("grid.dt must be positive");
                }
                ok
            });
            let n = self.required(g.n_steps, "grid.n_steps").filter(|&n| {
                if n < 4 {
                    self.error("grid.n_steps must be at least 4");
                }
                n >= 4
            });
            match TimeGrid::new(t0?, dt?, n?) {
                Ok(grid) => Some(grid),
                Err(e) => {
                    self.error(format!("grid: {e}"));
                    None
                }
            }
        });
        let resummation = match raw.resummation {
            Some(r) if r.enabled => {
                if order.is_some_and(|n| n < 4) {
                    self.error("method.resummation requires method.tcl_order = 4");
                }
                let mut options = ResummationOptions {
                    cutoff: r.cutoff.unwrap_or(DEFAULT_SVD_CUTOFF),
                    start_offset: r.epsilon_steps.unwrap_or(DEFAULT_START_OFFSET),
                    truncation: r.truncation.unwrap_or(2),
                    stencil: DerivativeStencil::default(),
                };
                if !(options.cutoff > 0.0 && options.cutoff < 1.0) {
                    self.error("method.resummation.cutoff must lie in (0, 1)");
                }
                if options.start_offset == 0 {
                    self.error("method.resummation.epsilon_steps must be at least 1");
                }
                if options.truncation == 0 {
                    self.error("method.resummation.truncation must be at least 1");
                }
                match r.stencil.as_deref() {
                    None | Some("fourth") => {}
                    Some("second") => options.stencil = DerivativeStencil::Second,
                    Some(other) => self.error(format!(
                        "method.resummation.stencil must be \"second\" or \"fourth\", got \"{other}\""
                    )),
                }
                Some(Some(options))
            }
            _ => Some(None),
        };
        (order, grid, resummation)
    }

    fn finish(
        mut self,
        raw: RawConfig,
        hash: String,
        default_prefix: &str,
    ) -> Result<RunConfig, ConfigErrors> {
        let (system, lambda) = self.system(raw.system);
        let dim = system.as_ref().map(SystemModel::dim);
        let bath = self.bath(raw.bath);
        let (tcl_order, grid, resummation) = self.method(raw.method);

        let initial_state = raw.initial_state.and_then(|s| {
            let rho = self.required(s.rho, "initial_state.rho")?;
            let op = self.operator(&rho, "initial_state.rho", dim)?;
            match SystemState::new(op, Picture::Schrodinger) {
                Ok(s) => Some(s.rho),
                Err(e) => {
                    self.error(format!("initial_state.rho: {e}"));
                    None
                }
            }
        });

        let (prefix, formats) = match raw.output {
            Some(o) => {
                let mut formats = Formats {
                    csv: false,
                    json: false,
                };
                for f in o
                    .formats
                    .unwrap_or_else(|| vec!["csv".into(), "json".into()])
                {
                    match f.as_str() {
                        "csv" => formats.csv = true,
                        "json" => formats.json = true,
                        other => self.error(format!(
                            "output.formats entries must be \"csv\" or \"json\", got \"{other}\""
                        )),
                    }
                }
                (
                    o.prefix.unwrap_or_else(|| default_prefix.to_string()),
                    formats,
                )
            }
            None => (
                default_prefix.to_string(),
                Formats {
                    csv: true,
                    json: true,
                },
            ),
        };
        if prefix.is_empty() || prefix.contains(['/', '\\']) {
            self.error("output.prefix must be a non-empty file name prefix without separators");
        }

        let oracle = raw.oracle.and_then(|o| {
            let lambdas = self.required(o.lambdas, "oracle.lambdas")?;
            if lambdas.is_empty() {
                self.error("oracle.lambdas must not be empty");
            }
            if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                self.error("oracle.lambdas must be finite and non-negative");
            }
            let tcl2_window = self.window(o.tcl2_window, "oracle.tcl2_window", [8.0, 32.0]);
            let tcl4_window = self.window(o.tcl4_window, "oracle.tcl4_window", [32.0, 128.0]);
            let cutoff = o.cutoff.unwrap_or(DEFAULT_SVD_CUTOFF);
            if !(cutoff > 0.0 && cutoff < 1.0) {
                self.error("oracle.cutoff must lie in (0, 1)");
            }
            Some(OracleSpec {
                lambdas,
                tcl2_window: tcl2_window?,
                tcl4_window: tcl4_window?,
                cutoff,
            })
        });

        let correlation = raw.correlation.and_then(|c| {
            let mut op = |m: Option<RawMatrix>, key: &str| {
                m.or_else(|| {
                    self.error(format!("missing key {key}"));
                    None
                })
                .and_then(|m| self.operator(&m, key, dim))
            };
            let a = op(c.a, "correlation.a");
            let b = op(c.b, "correlation.b");
            let cc = op(c.c, "correlation.c");
            let stride = c.stride.unwrap_or(1);
            if stride == 0 {
                self.error("correlation.stride must be at least 1");
            }
            Some(CorrelationSpec {
                a: a?,
                b: b?,
                c: cc?,
                stride,
            })
        });

        if !self.errors.is_empty() {
            return Err(ConfigErrors(self.errors));
        }
        match (system, lambda, bath, tcl_order, grid, resummation) {
            (
                Some(system),
                Some(lambda),
                Some(bath),
                Some(tcl_order),
                Some(grid),
                Some(resummation),
            ) => Ok(RunConfig {
                prefix,
                hash,
                system,
                lambda,
                bath,
                tcl_order,
                grid,
                resummation,
                initial_state,
                formats,
                oracle,
                correlation,
            }),
            _ => Err(ConfigErrors(vec!["incomplete configuration".into()])),
        }
    }
}
