//! Assembly of the two-control routing interferometer and its coherence-test
//! variant.
//!
//! The device routes a polarization signal qubit `α|H⟩ + β|V⟩` into a
//! coherent superposition of two output ports controlled by the phase φ of
//! two identical control photons (the second prepared with an extra π). The
//! heralded output is
//!
//! ```text
//! cos(φ/2)·(α|H⟩ + β|V⟩)_OUT1  −  i·sin(φ/2)·(α|H⟩ + β|V⟩)_OUT2
//! ```
//!
//! up to a global phase, with success probability 1/16 when both controls
//! herald on H, 1/8 when the VV outcome is accepted with crossed output
//! fibers, and 1/4 with per-rail V → −V feed-forward corrections.
//!
//! Layout: an input beam displacer splits the signal over two rails; each
//! rail passes a Hadamard plate and meets one control on a polarizing beam
//! splitter (a programmable phase gate per rail); the controls pass Hadamard
//! plates and herald on polarization; the rails pass Hadamard plates again
//! and recombine on two output displacers. A fixed π shifter on the first
//! control's V mode compensates the PBS reflection convention, and a
//! half-wave plate at 45° on the crossed output rail restores the qubit
//! orientation. In the coherence-test variant the mirror and the first
//! recombining displacer are removed, a tilt phase is inserted on the
//! surviving rail's V mode, and the rail runs straight into the first output
//! analyzer.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{
    CircuitError, CircuitSpec, DetectionPattern, DetectorSpec, ElementSpec, FeedForwardBranch,
    PolarizationProjection, UndetectedPolicy, feed_forward, postselect,
};
use crate::elements::{DisplacerDirection, WavePlateSetting};
use crate::fock::{FockError, ModeRegistry, ModeUnitary, PhotonicState, Polarization};

pub const PATH_SIGNAL_IN: &str = "S_IN";
pub const PATH_RAIL_1: &str = "S1";
pub const PATH_RAIL_2: &str = "S2";
pub const PATH_CONTROL_1: &str = "C1";
pub const PATH_CONTROL_2: &str = "C2";
pub const PATH_OUT_1: &str = "OUT1";
pub const PATH_OUT_2: &str = "OUT2";

#[derive(Debug, Error, PartialEq)]
pub enum RouterError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("signal qubit is not normalized: |α|²+|β|² = {0}")]
    UnnormalizedSignal(f64),
    #[error("operation requires the coherence-test variant")]
    WrongVariant,
}

/// Polarization qubit of the routed photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalQubit {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl SignalQubit {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self, RouterError> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(RouterError::UnnormalizedSignal(n));
        }
        Ok(SignalQubit { alpha, beta })
    }
}

/// The six probe states used to test the router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeState {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl ProbeState {
    pub const ALL: [ProbeState; 6] = [
        ProbeState::H,
        ProbeState::V,
        ProbeState::D,
        ProbeState::A,
        ProbeState::R,
        ProbeState::L,
    ];

    pub fn qubit(self) -> SignalQubit {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i = Complex64::I;
        let (alpha, beta) = match self {
            ProbeState::H => (Complex64::ONE, Complex64::ZERO),
            ProbeState::V => (Complex64::ZERO, Complex64::ONE),
            ProbeState::D => (s, s),
            ProbeState::A => (s, -s),
            ProbeState::R => (s, s * i),
            ProbeState::L => (s, -s * i),
        };
        SignalQubit { alpha, beta }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProbeState::H => "H",
            ProbeState::V => "V",
            ProbeState::D => "D",
            ProbeState::A => "A",
            ProbeState::R => "R",
            ProbeState::L => "L",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == label)
    }
}

/// Control-photon phase setting; OFF and ON route to the first and second
/// output port, BALANCED routes to an even superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSetting {
    pub phi: f64,
}

impl ControlSetting {
    pub const OFF: ControlSetting = ControlSetting { phi: 0.0 };
    pub const ON: ControlSetting = ControlSetting { phi: PI };
    pub const BALANCED: ControlSetting = ControlSetting { phi: FRAC_PI_2 };

    pub fn with_phi(phi: f64) -> Self {
        ControlSetting { phi }
    }
}

/// Post-selection regime and its exact success probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoutingRegime {
    /// Herald on H ⊗ H only: 1/16.
    Basic,
    /// Also accept V ⊗ V with crossed output fibers: 1/8.
    SwapAugmented,
    /// Accept all four control outcomes with V → −V rail corrections: 1/4.
    FeedForward,
}

impl RoutingRegime {
    pub fn success_probability(self) -> f64 {
        match self {
            RoutingRegime::Basic => 1.0 / 16.0,
            RoutingRegime::SwapAugmented => 1.0 / 8.0,
            RoutingRegime::FeedForward => 0.25,
        }
    }
}

/// Full router or the interference test layout with mirror and first
/// recombining displacer removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RouterVariant {
    Full,
    /// `bd4_tilt` is the phase introduced by tilting the last displacer.
    CoherenceTest {
        bd4_tilt: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouterConfig {
    pub control: ControlSetting,
    pub regime: RoutingRegime,
    pub variant: RouterVariant,
}

impl RouterConfig {
    pub fn full(control: ControlSetting, regime: RoutingRegime) -> Self {
        RouterConfig {
            control,
            regime,
            variant: RouterVariant::Full,
        }
    }
}

/// The assembled interferometer: full element list, its split at the
/// feed-forward correction point, and the heralding/coincidence patterns.
#[derive(Debug, Clone)]
pub struct RouterAssembly {
    pub registry: Arc<ModeRegistry>,
    /// All elements in order (gate stage followed by output stage).
    pub circuit: CircuitSpec,
    /// Through the control Hadamard plates; corrections insert after this.
    pub gate_stage: CircuitSpec,
    /// Rail Hadamard plates and output recombination.
    pub output_stage: CircuitSpec,
    /// Accepted herald branches with their corrections, per regime.
    pub branches: Vec<FeedForwardBranch>,
    /// Three-fold coincidence patterns (port 1, port 2) with
    /// polarization-unresolved output detection.
    pub coincidence: (DetectionPattern, DetectionPattern),
}

pub fn router_registry() -> Arc<ModeRegistry> {
    ModeRegistry::new([
        PATH_SIGNAL_IN,
        PATH_RAIL_1,
        PATH_RAIL_2,
        PATH_CONTROL_1,
        PATH_CONTROL_2,
        PATH_OUT_1,
        PATH_OUT_2,
    ])
    .expect("static registry is valid")
}

fn gate_stage_elements() -> Vec<ElementSpec> {
    vec![
        // input displacer: signal H to rail 1, V to rail 2
        ElementSpec::BeamDisplacer {
            trunk: PATH_SIGNAL_IN.into(),
            arm_h: PATH_RAIL_1.into(),
            arm_v: PATH_RAIL_2.into(),
            direction: DisplacerDirection::Split,
        },
        ElementSpec::HadamardPlate {
            path: PATH_RAIL_1.into(),
        },
        ElementSpec::HadamardPlate {
            path: PATH_RAIL_2.into(),
        },
        // compensates the i-on-reflection PBS convention for the first gate;
        // the second gate's double reflection combines with the φ+π control
        ElementSpec::PhaseShifter {
            path: PATH_CONTROL_1.into(),
            pol: Polarization::V,
            phi: PI,
        },
        ElementSpec::Pbs {
            path_a: PATH_RAIL_1.into(),
            path_b: PATH_CONTROL_1.into(),
        },
        ElementSpec::Pbs {
            path_a: PATH_RAIL_2.into(),
            path_b: PATH_CONTROL_2.into(),
        },
        ElementSpec::HadamardPlate {
            path: PATH_CONTROL_1.into(),
        },
        ElementSpec::HadamardPlate {
            path: PATH_CONTROL_2.into(),
        },
    ]
}

fn output_stage_elements(variant: RouterVariant) -> Vec<ElementSpec> {
    let mut els = vec![
        ElementSpec::HadamardPlate {
            path: PATH_RAIL_1.into(),
        },
        ElementSpec::HadamardPlate {
            path: PATH_RAIL_2.into(),
        },
    ];
    match variant {
        RouterVariant::Full => {
            els.push(ElementSpec::Mirror {
                path: PATH_RAIL_1.into(),
            });
            // first recombiner: rail-2 H and rail-1 V form the crossed port
            els.push(ElementSpec::BeamDisplacer {
                trunk: PATH_OUT_2.into(),
                arm_h: PATH_RAIL_2.into(),
                arm_v: PATH_RAIL_1.into(),
                direction: DisplacerDirection::Merge,
            });
            // restore the crossed port's qubit orientation
            els.push(ElementSpec::WavePlate {
                path: PATH_OUT_2.into(),
                setting: WavePlateSetting::half(PI / 4.0).expect("valid angle"),
            });
            // second recombiner: rail-1 H and rail-2 V form the straight port
            els.push(ElementSpec::BeamDisplacer {
                trunk: PATH_OUT_1.into(),
                arm_h: PATH_RAIL_1.into(),
                arm_v: PATH_RAIL_2.into(),
                direction: DisplacerDirection::Merge,
            });
        }
        RouterVariant::CoherenceTest { bd4_tilt } => {
            // mirror and first recombiner removed: rail 1 runs straight into
            // the first output analyzer through the tilted displacer
            els.push(ElementSpec::PhaseShifter {
                path: PATH_RAIL_1.into(),
                pol: Polarization::V,
                phi: bd4_tilt,
            });
            els.push(ElementSpec::BeamDisplacer {
                trunk: PATH_RAIL_1.into(),
                arm_h: PATH_OUT_1.into(),
                arm_v: PATH_OUT_1.into(),
                direction: DisplacerDirection::Merge,
            });
        }
    }
    els
}

fn herald_pattern(c1: Polarization, c2: Polarization) -> DetectionPattern {
    let proj = |p: Polarization| match p {
        Polarization::H => PolarizationProjection::horizontal(),
        Polarization::V => PolarizationProjection::vertical(),
    };
    DetectionPattern {
        detectors: vec![
            DetectorSpec::exactly_one(PATH_CONTROL_1, proj(c1)),
            DetectorSpec::exactly_one(PATH_CONTROL_2, proj(c2)),
        ],
        undetected: UndetectedPolicy::Unconstrained,
    }
}

fn coincidence_pattern(out_path: &str, projection: PolarizationProjection) -> DetectionPattern {
    DetectionPattern {
        detectors: vec![
            DetectorSpec::exactly_one(PATH_CONTROL_1, PolarizationProjection::horizontal()),
            DetectorSpec::exactly_one(PATH_CONTROL_2, PolarizationProjection::horizontal()),
            DetectorSpec::exactly_one(out_path, projection),
        ],
        undetected: UndetectedPolicy::Vacuum,
    }
}

/// Diagonal unitary flipping the sign of the listed rails' V modes.
fn v_flip_correction(
    registry: &Arc<ModeRegistry>,
    rails: &[&str],
) -> Result<ModeUnitary, RouterError> {
    let modes: Vec<_> = rails
        .iter()
        .map(|r| Ok(registry.mode(registry.require_path(r)?, Polarization::V)))
        .collect::<Result<_, FockError>>()?;
    let n = rails.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r == c {
                        -Complex64::ONE
                    } else {
                        Complex64::ZERO
                    }
                })
                .collect()
        })
        .collect();
    Ok(ModeUnitary::new(registry.clone(), modes, &rows)?)
}

/// Build the interferometer, its stage split, and the heralding patterns for
/// the configured regime.
pub fn build_router(config: &RouterConfig) -> Result<RouterAssembly, RouterError> {
    let registry = router_registry();
    let gate = gate_stage_elements();
    let output = output_stage_elements(config.variant);
    let mut all = gate.clone();
    all.extend(output.clone());
    let circuit = CircuitSpec::new(registry.clone(), all)?;
    let gate_stage = CircuitSpec::new(registry.clone(), gate)?;
    let output_stage = CircuitSpec::new(registry.clone(), output.clone())?;

    let completion = |extra: Option<ElementSpec>| -> Result<CircuitSpec, RouterError> {
        let mut els = output.clone();
        if let Some(e) = extra {
            els.push(e);
        }
        Ok(CircuitSpec::new(registry.clone(), els)?)
    };
    let port_swap = ElementSpec::BeamDisplacer {
        trunk: PATH_OUT_1.into(),
        arm_h: PATH_OUT_2.into(),
        arm_v: PATH_OUT_2.into(),
        direction: DisplacerDirection::Merge,
    };

    use Polarization::{H, V};
    let branches = match config.regime {
        RoutingRegime::Basic => vec![FeedForwardBranch {
            label: "HH".into(),
            herald: herald_pattern(H, H),
            correction: None,
            completion: completion(None)?,
        }],
        RoutingRegime::SwapAugmented => vec![
            FeedForwardBranch {
                label: "HH".into(),
                herald: herald_pattern(H, H),
                correction: None,
                completion: completion(None)?,
            },
            // both controls vertical: same transformation with crossed fibers
            FeedForwardBranch {
                label: "VV".into(),
                herald: herald_pattern(V, V),
                correction: None,
                completion: completion(Some(port_swap))?,
            },
        ],
        RoutingRegime::FeedForward => {
            let mut branches = Vec::new();
            for (c1, c2) in [(H, H), (H, V), (V, H), (V, V)] {
                let mut rails = Vec::new();
                if c1 == V {
                    rails.push(PATH_RAIL_1);
                }
                if c2 == V {
                    rails.push(PATH_RAIL_2);
                }
                let correction = if rails.is_empty() {
                    None
                } else {
                    Some(v_flip_correction(&registry, &rails)?)
                };
                branches.push(FeedForwardBranch {
                    label: format!("{c1}{c2}"),
                    herald: herald_pattern(c1, c2),
                    correction,
                    completion: completion(None)?,
                });
            }
            branches
        }
    };

    Ok(RouterAssembly {
        registry,
        circuit,
        gate_stage,
        output_stage,
        branches,
        coincidence: (
            coincidence_pattern(PATH_OUT_1, PolarizationProjection::Any),
            coincidence_pattern(PATH_OUT_2, PolarizationProjection::Any),
        ),
    })
}

/// Three-photon input: the signal qubit plus the two control photons at
/// φ and φ+π.
pub fn router_input(
    registry: &Arc<ModeRegistry>,
    signal: &SignalQubit,
    control: &ControlSetting,
) -> Result<PhotonicState, RouterError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sig_reg = ModeRegistry::new([PATH_SIGNAL_IN])?;
    let sig = PhotonicState::single_photon(
        sig_reg.clone(),
        sig_reg.require_path(PATH_SIGNAL_IN)?,
        signal.alpha,
        signal.beta,
    )?;
    let c1_reg = ModeRegistry::new([PATH_CONTROL_1])?;
    let c1 = PhotonicState::single_photon(
        c1_reg.clone(),
        c1_reg.require_path(PATH_CONTROL_1)?,
        Complex64::new(s, 0.0),
        Complex64::from_polar(s, control.phi),
    )?;
    let c2_reg = ModeRegistry::new([PATH_CONTROL_2])?;
    let c2 = PhotonicState::single_photon(
        c2_reg.clone(),
        c2_reg.require_path(PATH_CONTROL_2)?,
        Complex64::new(s, 0.0),
        // the second control undergoes φ → φ + π during preparation
        Complex64::from_polar(s, control.phi + PI),
    )?;
    Ok(sig.tensor(&c1)?.tensor(&c2)?.embed_into(registry.clone())?)
}

/// Alternative preparation of the second control's φ → φ + π shift: both
/// controls at φ, with a zero-oriented half-wave plate on the second control
/// path providing the V sign flip in the circuit instead. Equivalent to
/// [`router_input`] followed by the standard gate stage.
pub fn router_input_with_plate_shift(
    registry: &Arc<ModeRegistry>,
    signal: &SignalQubit,
    control: &ControlSetting,
) -> Result<(PhotonicState, ElementSpec), RouterError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sig_reg = ModeRegistry::new([PATH_SIGNAL_IN])?;
    let sig = PhotonicState::single_photon(
        sig_reg.clone(),
        sig_reg.require_path(PATH_SIGNAL_IN)?,
        signal.alpha,
        signal.beta,
    )?;
    let mut photons = sig;
    for path in [PATH_CONTROL_1, PATH_CONTROL_2] {
        let reg = ModeRegistry::new([path])?;
        let ctrl = PhotonicState::single_photon(
            reg.clone(),
            reg.require_path(path)?,
            Complex64::new(s, 0.0),
            Complex64::from_polar(s, control.phi),
        )?;
        photons = photons.tensor(&ctrl)?;
    }
    let plate = ElementSpec::WavePlate {
        path: PATH_CONTROL_2.into(),
        setting: WavePlateSetting::half(0.0).expect("valid angle"),
    };
    Ok((photons.embed_into(registry.clone())?, plate))
}

/// Routing outcome: conditional port qubits and probabilities plus the
/// closed-form routing amplitudes for the configured phase.
#[derive(Debug, Clone)]
pub struct RouterResult {
    pub out1_qubit: (Complex64, Complex64),
    pub out2_qubit: (Complex64, Complex64),
    /// `(cos(φ/2), −i·sin(φ/2))`.
    pub routing_amplitudes: (Complex64, Complex64),
    pub success_probability: f64,
    /// Port probabilities conditioned on success; `p1 + p2 = 1`.
    pub p1: f64,
    pub p2: f64,
    /// Normalized conditional output state over the two port qubits.
    pub output_state: PhotonicState,
}

/// Closed-form routing amplitudes `(cos(φ/2), −i·sin(φ/2))`.
pub fn routing_amplitudes(phi: f64) -> (Complex64, Complex64) {
    (
        Complex64::new((phi / 2.0).cos(), 0.0),
        Complex64::new(0.0, -(phi / 2.0).sin()),
    )
}

/// Optional phase shifter cancelling the residual −i between the output
/// ports (a π/2 shift on both second-port modes). Results keep the −i by
/// default; apply this to the output state when a phase-flat port relation
/// is wanted.
pub fn output_phase_corrector(registry: &Arc<ModeRegistry>) -> Result<ModeUnitary, RouterError> {
    let out2 = registry.require_path(PATH_OUT_2)?;
    let modes = vec![
        registry.mode(out2, Polarization::H),
        registry.mode(out2, Polarization::V),
    ];
    let i = Complex64::I;
    let z = Complex64::ZERO;
    Ok(ModeUnitary::new(registry.clone(), modes, &[vec![i, z], vec![z, i]])?)
}

/// Run the full Fock evolution and decompose the heralded output over the
/// two ports.
pub fn run_router(
    signal: &SignalQubit,
    config: &RouterConfig,
) -> Result<RouterResult, RouterError> {
    let assembly = build_router(config)?;
    let input = router_input(&assembly.registry, signal, &config.control)?;
    let after_gates = assembly.gate_stage.evolve(&input)?;
    let combined = feed_forward(&after_gates, &assembly.branches)?;
    let registry = &assembly.registry;
    let out = &combined.state;

    let amp = |path: &str, pol: Polarization| {
        out.basis_amplitude(&[(registry.path(path).expect("registered"), pol, 1)])
    };
    let a1h = amp(PATH_OUT_1, Polarization::H);
    let a1v = amp(PATH_OUT_1, Polarization::V);
    let a2h = amp(PATH_OUT_2, Polarization::H);
    let a2v = amp(PATH_OUT_2, Polarization::V);
    let w1 = a1h.norm_sqr() + a1v.norm_sqr();
    let w2 = a2h.norm_sqr() + a2v.norm_sqr();
    let total = w1 + w2;
    let norm_port = |ah: Complex64, av: Complex64, w: f64| {
        if w > 1e-24 {
            let n = w.sqrt();
            (ah / n, av / n)
        } else {
            (Complex64::ZERO, Complex64::ZERO)
        }
    };
    Ok(RouterResult {
        out1_qubit: norm_port(a1h, a1v, w1),
        out2_qubit: norm_port(a2h, a2v, w2),
        routing_amplitudes: routing_amplitudes(config.control.phi),
        success_probability: combined.probability,
        p1: w1 / total,
        p2: w2 / total,
        output_state: out.clone(),
    })
}

/// Heralded state after both phase gates, before the output stage:
/// `(α/√2)(|H⟩+e^{iφ}|V⟩)_S1 + (β/√2)(|H⟩−e^{iφ}|V⟩)_S2` up to global phase.
pub fn post_gate_state(signal: &SignalQubit, phi: f64) -> Result<PhotonicState, RouterError> {
    let config = RouterConfig::full(ControlSetting::with_phi(phi), RoutingRegime::Basic);
    let assembly = build_router(&config)?;
    let input = router_input(&assembly.registry, signal, &config.control)?;
    let after_gates = assembly.gate_stage.evolve(&input)?;
    let heralded = postselect(
        &after_gates,
        &herald_pattern(Polarization::H, Polarization::H),
    )?;
    Ok(heralded.state)
}

/// One sample of the interference fringe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeSample {
    pub phase: f64,
    /// Three-fold coincidence probability at the first output analyzer.
    pub probability: f64,
}

/// Scan the displacer tilt phase in the coherence-test variant and record the
/// port-1 coincidence probability behind the given analyzer projection
/// (diagonal in the reference scenario).
pub fn coherence_scan(
    signal: &SignalQubit,
    config: &RouterConfig,
    tilt_phases: &[f64],
    projection: PolarizationProjection,
) -> Result<Vec<FringeSample>, RouterError> {
    if !matches!(config.variant, RouterVariant::CoherenceTest { .. }) {
        return Err(RouterError::WrongVariant);
    }
    let mut samples = Vec::with_capacity(tilt_phases.len());
    for &tilt in tilt_phases {
        let cfg = RouterConfig {
            control: config.control,
            regime: config.regime,
            variant: RouterVariant::CoherenceTest { bd4_tilt: tilt },
        };
        let assembly = build_router(&cfg)?;
        let input = router_input(&assembly.registry, signal, &cfg.control)?;
        let evolved = assembly.circuit.evolve(&input)?;
        let pattern = coincidence_pattern(PATH_OUT_1, projection);
        let res = postselect(&evolved, &pattern)?;
        samples.push(FringeSample {
            phase: tilt,
            probability: res.probability,
        });
    }
    Ok(samples)
}
