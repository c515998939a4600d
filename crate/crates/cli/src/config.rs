//! Run configuration: a TOML key-value file merged with command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use pushfit::fitlaw::{ControlLawSpec, Metric, PolyDerivative, DEFAULT_LAMBDA};
use pushfit::segment::ClassifierParams;
use pushfit::signal::FilterSpec;
use pushfit::simulate::ArchetypeParams;
use pushfit::trialdata::{StartMode, StrategyTag};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a command needs, resolved before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Trial directory; defaults to `<out_dir>/trials`.
    pub input: Option<PathBuf>,
    pub include_abandoned: bool,
    /// Worker threads for per-trial work.
    pub workers: usize,
    pub lambda: f64,
    /// Control laws as `LAW/metric`, e.g. `PD/linear`.
    pub laws: Vec<String>,
    pub poly_derivative: PolyDerivative,
    pub filter: FilterConfig,
    pub preprocess: PreprocessConfig,
    pub classifier: ClassifierParams,
    pub cohort: CohortConfig,
    pub simulate: SimulateConfig,
    pub plot: PlotConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            input: None,
            include_abandoned: false,
            workers: 4,
            lambda: DEFAULT_LAMBDA,
            laws: default_laws(),
            poly_derivative: PolyDerivative::default(),
            filter: FilterConfig::default(),
            preprocess: PreprocessConfig::default(),
            classifier: ClassifierParams::default(),
            cohort: CohortConfig::default(),
            simulate: SimulateConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

pub fn default_laws() -> Vec<String> {
    [
        "P/linear",
        "PI/linear",
        "PD/linear",
        "PID/linear",
        "PD/polynomial",
        "PD/exponential",
    ]
    .map(String::from)
    .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub enabled: bool,
    pub order: usize,
    pub cutoff_hz: f64,
    pub zero_phase: bool,
    /// Optional extra low-pass (e.g. 6 Hz) applied to position before the
    /// main filter. Off by default.
    pub pre_cutoff_hz: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            order: 4,
            cutoff_hz: 30.0,
            zero_phase: true,
            pre_cutoff_hz: None,
        }
    }
}

impl FilterConfig {
    pub fn spec(&self, sample_rate_hz: f64) -> FilterSpec {
        FilterSpec {
            order: self.order,
            cutoff_hz: self.cutoff_hz,
            sample_rate_hz,
            zero_phase: self.zero_phase,
        }
    }

    pub fn pre_spec(&self, sample_rate_hz: f64) -> Option<FilterSpec> {
        self.pre_cutoff_hz.map(|cutoff_hz| FilterSpec {
            cutoff_hz,
            ..self.spec(sample_rate_hz)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeriveMode {
    /// Re-derive velocity and acceleration from position.
    Always,
    /// Derive only when a trial lacks either column.
    #[default]
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// How `fit`, `classify` and friends treat recorded kinematics. The
    /// `preprocess` command always derives.
    pub derive: DeriveMode,
    /// Directory of treadmill logs named `<trial id>.csv`.
    pub treadmill_dir: Option<PathBuf>,
    pub shift_origin: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            derive: DeriveMode::default(),
            treadmill_dir: None,
            shift_origin: true,
        }
    }
}

/// Trial filters for statistics. Empty lists admit everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub strategies: Vec<StrategyTag>,
    pub start_modes: Vec<StartMode>,
}

impl CohortConfig {
    pub fn admits(&self, strategy: Option<StrategyTag>, mode: StartMode) -> bool {
        let tag_ok =
            self.strategies.is_empty() || strategy.is_some_and(|s| self.strategies.contains(&s));
        let mode_ok = self.start_modes.is_empty() || self.start_modes.contains(&mode);
        tag_ok && mode_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStartMode {
    #[default]
    Unknown,
    Informed,
    Random,
    /// Informed for even indices, random for odd.
    Alternate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// A strategy tag or `all`.
    pub strategy: String,
    /// Trials per strategy.
    pub n: usize,
    pub start_mode: SimStartMode,
    pub archetype: ArchetypeParams,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            strategy: "all".into(),
            n: 5,
            start_mode: SimStartMode::default(),
            archetype: ArchetypeParams::default(),
        }
    }
}

impl SimulateConfig {
    pub fn strategies(&self) -> Result<Vec<StrategyTag>, CliError> {
        if self.strategy.trim().eq_ignore_ascii_case("all") {
            return Ok(StrategyTag::ALL.to_vec());
        }
        self.strategy
            .parse()
            .map(|t| vec![t])
            .map_err(|e| CliError::Config(format!("simulate.strategy: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    /// Law whose prediction is drawn.
    pub law: String,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            law: "PD/linear".into(),
            width: 640,
            height: 480,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub include_abandoned: bool,
    pub lambda: Option<f64>,
    pub laws: Vec<String>,
    pub metric: Option<Metric>,
    pub workers: Option<usize>,
}

/// Parses `LAW` or `LAW/metric` into a spec.
pub fn parse_law(
    text: &str,
    lambda: f64,
    poly: PolyDerivative,
) -> Result<ControlLawSpec, CliError> {
    let (law, metric) = match text.split_once('/') {
        Some((law, metric)) => {
            let metric: Metric = metric
                .parse()
                .map_err(|e| CliError::Config(format!("law '{text}': {e}")))?;
            (law, metric)
        }
        None => (text, Metric::Linear),
    };
    ControlLawSpec::parse(law.trim(), metric, lambda)
        .map(|s| s.with_poly_derivative(poly))
        .map_err(|e| CliError::Config(format!("law '{text}': {e}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.out_dir = dir.clone();
        }
        self.include_abandoned |= o.include_abandoned;
        if let Some(lambda) = o.lambda {
            self.lambda = lambda;
        }
        if let Some(workers) = o.workers {
            self.workers = workers;
        }
        if !o.laws.is_empty() || o.metric.is_some() {
            let laws = if o.laws.is_empty() {
                vec!["PD".to_string()]
            } else {
                o.laws.clone()
            };
            let metric = o.metric.unwrap_or_default();
            self.laws = laws
                .iter()
                .map(|law| format!("{}/{}", law.trim(), metric.as_str()))
                .collect();
        }
    }

    /// Checks every section against the preconditions of the module that
    /// consumes it.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        self.specs()?;
        self.plot_spec()?;
        // Any sample rate above twice the cutoffs exercises the order and
        // cutoff checks; the real rate is checked per trial.
        let nyquist_safe = 4.0
            * self
                .filter
                .cutoff_hz
                .max(self.filter.pre_cutoff_hz.unwrap_or(0.0))
                .max(1.0);
        self.filter
            .spec(nyquist_safe)
            .validate()
            .map_err(|e| CliError::Config(format!("filter: {e}")))?;
        if let Some(pre) = self.filter.pre_spec(nyquist_safe) {
            pre.validate()
                .map_err(|e| CliError::Config(format!("filter.pre_cutoff_hz: {e}")))?;
        }
        self.classifier
            .validate()
            .map_err(|e| CliError::Config(format!("classifier: {e}")))?;
        self.simulate.strategies()?;
        if self.simulate.n == 0 {
            return bad("simulate.n must be at least 1".into());
        }
        self.simulate
            .archetype
            .validate()
            .map_err(|e| CliError::Config(format!("simulate.archetype: {e}")))?;
        if self.plot.width < 100 || self.plot.height < 100 {
            return bad("plot width and height must be at least 100".into());
        }
        Ok(())
    }

    pub fn specs(&self) -> Result<Vec<ControlLawSpec>, CliError> {
        if self.laws.is_empty() {
            return Err(CliError::Config("at least one law is required".into()));
        }
        self.laws
            .iter()
            .map(|l| parse_law(l, self.lambda, self.poly_derivative))
            .collect()
    }

    pub fn plot_spec(&self) -> Result<ControlLawSpec, CliError> {
        parse_law(&self.plot.law, self.lambda, self.poly_derivative)
    }

    pub fn input_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.input.clone())
            .unwrap_or_else(|| self.out_dir.join("trials"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::default().specs().unwrap().len(), 6);
    }

    #[test]
    fn toml_sections_and_overrides() {
        let mut cfg = RunConfig::from_toml(
            r#"
            seed = 9
            laws = ["PD", "PID/linear"]
            [filter]
            cutoff_hz = 12.0
            [simulate]
            strategy = "toe"
            n = 3
            [simulate.archetype]
            dt = 0.002
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.filter.cutoff_hz, 12.0);
        assert_eq!(cfg.filter.order, 4);
        assert_eq!(cfg.simulate.archetype.dt, 0.002);
        assert_eq!(cfg.simulate.strategies().unwrap(), [StrategyTag::Toe]);
        assert_eq!(cfg.specs().unwrap()[1].law(), "PID");

        cfg.apply(&Overrides {
            laws: vec!["P".into(), "PD".into()],
            metric: Some(Metric::Polynomial),
            lambda: Some(0.5),
            ..Default::default()
        });
        assert_eq!(cfg.laws, ["P/polynomial", "PD/polynomial"]);
        assert!(cfg
            .specs()
            .iter()
            .all(|s| s.iter().all(|s| s.lambda == 0.5)));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        let cases = [
            "workers = 0",
            "lambda = -1.0",
            "laws = [\"PX\"]",
            "laws = [\"PID/polynomial\"]",
            "[filter]\ncutoff_hz = 0.0",
            "[simulate]\nstrategy = \"hop\"",
            "[simulate.archetype]\ndt = 0.0",
            "[classifier]\nvalley_depth = -1.0",
        ];
        for text in cases {
            let cfg = RunConfig::from_toml(text).unwrap();
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn cohort_filters() {
        let c = CohortConfig {
            strategies: vec![StrategyTag::Ankle],
            start_modes: vec![],
        };
        assert!(c.admits(Some(StrategyTag::Ankle), StartMode::Random));
        assert!(!c.admits(Some(StrategyTag::Toe), StartMode::Random));
        assert!(!c.admits(None, StartMode::Random));
        assert!(CohortConfig::default().admits(None, StartMode::Unknown));
    }
}
