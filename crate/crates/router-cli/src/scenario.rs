//! Declarative scenario files: source parameters, router configuration,
//! signal states, and run settings. The schema is strict: unknown keys are
//! rejected.

use num_complex::Complex64;
use serde::Deserialize;

use router_core::noise::{ChannelEfficiencies, SourceParams};
use router_core::router::{
    ControlSetting, ProbeState, RouterConfig, RouterVariant, RoutingRegime, SignalQubit,
};

#[derive(Debug)]
pub struct ScenarioError(pub String);

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "scenario error: {}", self.0)
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub source: SourceSection,
    pub router: RouterSection,
    pub signals: Vec<SignalSpec>,
    pub run: RunSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default = "default_mu")]
    pub mu_signal: f64,
    #[serde(default = "default_p_pair")]
    pub p_pair: f64,
    #[serde(default = "default_rep_rate")]
    pub rep_rate_hz: f64,
    #[serde(default)]
    pub eta: EtaSection,
    #[serde(default)]
    pub distinguishable: bool,
}

fn default_mu() -> f64 {
    0.00125
}

fn default_p_pair() -> f64 {
    2.5e-5
}

fn default_rep_rate() -> f64 {
    80.0e6
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            mu_signal: default_mu(),
            p_pair: default_p_pair(),
            rep_rate_hz: default_rep_rate(),
            eta: EtaSection::default(),
            distinguishable: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum EtaSection {
    Uniform(f64),
    PerChannel {
        signal: f64,
        control1: f64,
        control2: f64,
        out1: f64,
        out2: f64,
    },
}

impl Default for EtaSection {
    fn default() -> Self {
        EtaSection::Uniform(1.0)
    }
}

impl SourceSection {
    pub fn to_params(&self) -> SourceParams {
        let eta = match self.eta {
            EtaSection::Uniform(e) => ChannelEfficiencies::uniform(e),
            EtaSection::PerChannel {
                signal,
                control1,
                control2,
                out1,
                out2,
            } => ChannelEfficiencies {
                signal,
                control1,
                control2,
                out1,
                out2,
            },
        };
        SourceParams {
            mu_signal: self.mu_signal,
            p_pair: self.p_pair,
            rep_rate_hz: self.rep_rate_hz,
            eta,
            distinguishable: self.distinguishable,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterSection {
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub controls: Option<Vec<ControlSpec>>,
    pub regime: RegimeSpec,
    #[serde(default)]
    pub variant: VariantSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ControlSpec {
    Named(String),
    Phi { phi_rad: f64 },
}

impl ControlSpec {
    pub fn to_setting(&self) -> Result<ControlSetting, ScenarioError> {
        match self {
            ControlSpec::Named(name) => match name.to_ascii_lowercase().as_str() {
                "off" => Ok(ControlSetting::OFF),
                "on" => Ok(ControlSetting::ON),
                "balanced" => Ok(ControlSetting::BALANCED),
                other => Err(ScenarioError(format!(
                    "unknown control setting `{other}` (expected off, on, balanced, or {{\"phi_rad\": x}})"
                ))),
            },
            ControlSpec::Phi { phi_rad } => Ok(ControlSetting::with_phi(*phi_rad)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ControlSpec::Named(name) => name.to_ascii_uppercase(),
            ControlSpec::Phi { phi_rad } => format!("phi={phi_rad}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum RegimeSpec {
    #[serde(rename = "basic_1_16")]
    Basic,
    #[serde(rename = "swap_1_8")]
    Swap,
    #[serde(rename = "feedforward_1_4")]
    FeedForward,
}

impl RegimeSpec {
    pub fn to_regime(self) -> RoutingRegime {
        match self {
            RegimeSpec::Basic => RoutingRegime::Basic,
            RegimeSpec::Swap => RoutingRegime::SwapAugmented,
            RegimeSpec::FeedForward => RoutingRegime::FeedForward,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RegimeSpec::Basic => "basic_1_16",
            RegimeSpec::Swap => "swap_1_8",
            RegimeSpec::FeedForward => "feedforward_1_4",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
pub enum VariantSpec {
    #[default]
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "coherence_test")]
    CoherenceTest,
}

impl VariantSpec {
    pub fn to_variant(self) -> RouterVariant {
        match self {
            VariantSpec::Full => RouterVariant::Full,
            VariantSpec::CoherenceTest => RouterVariant::CoherenceTest { bd4_tilt: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SignalSpec {
    Named(String),
    Explicit { alpha: [f64; 2], beta: [f64; 2] },
}

impl SignalSpec {
    pub fn to_qubit(&self) -> Result<SignalQubit, ScenarioError> {
        match self {
            SignalSpec::Named(name) => ProbeState::from_label(name)
                .map(ProbeState::qubit)
                .ok_or_else(|| {
                    ScenarioError(format!(
                        "unknown signal state `{name}` (expected one of H, V, D, A, R, L)"
                    ))
                }),
            SignalSpec::Explicit { alpha, beta } => SignalQubit::new(
                Complex64::new(alpha[0], alpha[1]),
                Complex64::new(beta[0], beta[1]),
            )
            .map_err(|e| ScenarioError(e.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SignalSpec::Named(name) => name.to_ascii_uppercase(),
            SignalSpec::Explicit { alpha, beta } => {
                format!("({}+{}i|{}+{}i)", alpha[0], alpha[1], beta[0], beta[1])
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: RunMode,
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_interval")]
    pub interval_s: f64,
    #[serde(default)]
    pub measurement: MeasurementSpec,
}

fn default_interval() -> f64 {
    120.0
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
pub enum RunMode {
    #[serde(rename = "ideal")]
    Ideal,
    #[serde(rename = "monte_carlo")]
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
pub enum MeasurementSpec {
    #[default]
    #[serde(rename = "routing")]
    Routing,
    #[serde(rename = "fidelity")]
    Fidelity,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub path: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError(format!("invalid scenario JSON: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.signals.is_empty() {
            return Err(ScenarioError("signals list is empty".into()));
        }
        match (&self.router.control, &self.router.controls) {
            (Some(_), Some(_)) => Err(ScenarioError(
                "router.control and router.controls are mutually exclusive".into(),
            )),
            (None, None) => Err(ScenarioError(
                "router needs either a control or a controls list".into(),
            )),
            _ => Ok(()),
        }?;
        if self.run.mode == RunMode::MonteCarlo {
            if self.run.seed.is_none() {
                return Err(ScenarioError(
                    "monte_carlo runs require a seed (reproducibility is mandatory)".into(),
                ));
            }
            if self.run.duration_s.is_none() {
                return Err(ScenarioError("monte_carlo runs require duration_s".into()));
            }
        }
        self.source
            .to_params()
            .validate()
            .map_err(|e| ScenarioError(e.to_string()))?;
        Ok(())
    }

    pub fn control_specs(&self) -> Vec<ControlSpec> {
        match (&self.router.control, &self.router.controls) {
            (Some(c), None) => vec![c.clone()],
            (None, Some(cs)) => cs.clone(),
            _ => unreachable!("validated"),
        }
    }

    pub fn config_for(&self, control: &ControlSpec) -> Result<RouterConfig, ScenarioError> {
        Ok(RouterConfig {
            control: control.to_setting()?,
            regime: self.router.regime.to_regime(),
            variant: self.router.variant.to_variant(),
        })
    }
}
