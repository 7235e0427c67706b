//! Photon-number statistics of the three-photon source and estimation and
//! simulation of accidental three-fold coincidences.
//!
//! The source produces an attenuated coherent signal mode (Poissonian,
//! mean `mu_signal` per pulse) and down-conversion pairs feeding the two
//! control inputs (single-mode thermal pair number, detected pair rate
//! `p_pair` per pulse). Multi-photon emissions fire the three-fold
//! coincidence patterns without one photon per input; those accidental
//! events are estimated by propagating each photon-number configuration
//! through the circuit classically.
//!
//! Classical propagation is exact for mutually distinguishable photons:
//! every photon evolves coherently through the full single-photon transfer
//! matrix (so its self-interference survives), while different photons
//! combine in probability. Detectors are threshold buckets with the channel
//! efficiency folded in as pre-detector binomial loss.
//!
//! The pair brightness is referenced to detected rates: the source-level
//! thermal mean entering the enumeration is `p_pair/(η_C1·η_C2)`, matching
//! how the pair rate of such a source is measured. The signal mean is a
//! source-level attenuation setting and enters directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::circuit::{CircuitError, DetectionPattern, PolarizationProjection, postselect};
use crate::fock::{FockError, Polarization};
use crate::linalg::CMat;
use crate::router::{
    self, ControlSetting, RouterConfig, RouterError, RouterVariant, SignalQubit, build_router,
    router_input,
};

/// Total-photon cutoff for the accidental enumeration; contributions beyond
/// two-pair or two-signal events are far below the estimator tolerance at
/// the reference source brightness.
pub const DEFAULT_ACCIDENTAL_CUTOFF: u32 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid source parameter: {0}")]
    InvalidParams(String),
    #[error("distribution cutoff {0} too small (need ≥ 2)")]
    CutoffTooSmall(u32),
    #[error(
        "calibration target {target} unreachable: accidental fraction spans [{lo:.6}, {hi:.6}]"
    )]
    CalibrationUnreachable { target: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Per-channel detection efficiencies (source-to-click, detector included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEfficiencies {
    pub signal: f64,
    pub control1: f64,
    pub control2: f64,
    pub out1: f64,
    pub out2: f64,
}

impl ChannelEfficiencies {
    pub fn uniform(eta: f64) -> Self {
        ChannelEfficiencies {
            signal: eta,
            control1: eta,
            control2: eta,
            out1: eta,
            out2: eta,
        }
    }

    fn validate(&self) -> Result<(), NoiseError> {
        for (name, eta) in [
            ("signal", self.signal),
            ("control1", self.control1),
            ("control2", self.control2),
            ("out1", self.out1),
            ("out2", self.out2),
        ] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(NoiseError::InvalidParams(format!(
                    "eta.{name} = {eta} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ChannelEfficiencies {
    fn default() -> Self {
        ChannelEfficiencies::uniform(1.0)
    }
}

/// Source brightness and detection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Mean photons per pulse of the attenuated coherent signal mode.
    pub mu_signal: f64,
    /// Detected pair rate per pulse of the down-conversion source.
    pub p_pair: f64,
    /// Laser repetition rate in pulses per second.
    pub rep_rate_hz: f64,
    pub eta: ChannelEfficiencies,
    /// Temporal overlap deliberately detuned: photons do not interfere.
    pub distinguishable: bool,
}

impl SourceParams {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if self.mu_signal < 0.0 {
            return Err(NoiseError::InvalidParams(format!(
                "mu_signal = {}",
                self.mu_signal
            )));
        }
        if !(0.0..1.0).contains(&self.p_pair) {
            return Err(NoiseError::InvalidParams(format!(
                "p_pair = {}",
                self.p_pair
            )));
        }
        if self.rep_rate_hz <= 0.0 {
            return Err(NoiseError::InvalidParams(format!(
                "rep_rate_hz = {}",
                self.rep_rate_hz
            )));
        }
        self.eta.validate()
    }

    /// Source-level thermal mean of the pair number, unfolded from the
    /// detected pair rate by the control-channel efficiencies.
    pub fn pair_mean_at_source(&self) -> f64 {
        self.p_pair / (self.eta.control1 * self.eta.control2)
    }

    pub fn with_uniform_eta(&self, eta: f64) -> SourceParams {
        SourceParams {
            eta: ChannelEfficiencies::uniform(eta),
            ..*self
        }
    }
}

impl Default for SourceParams {
    /// Reference operating point: μ = 0.00125 photons/pulse, 2000 detected
    /// pairs/s at 80 MHz repetition (2.5·10⁻⁵ pairs/pulse).
    fn default() -> Self {
        SourceParams {
            mu_signal: 0.00125,
            p_pair: 2.5e-5,
            rep_rate_hz: 80.0e6,
            eta: ChannelEfficiencies::default(),
            distinguishable: false,
        }
    }
}

fn poisson_pmf(n: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut p = (-mean).exp();
    for k in 1..=n {
        p *= mean / k as f64;
    }
    p
}

fn thermal_pmf(n: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let r = mean / (1.0 + mean);
    r.powi(n as i32) / (1.0 + mean)
}

/// Joint distribution over (signal photons, pair number) with the truncated
/// tail mass reported.
#[derive(Debug, Clone)]
pub struct JointPhotonDistribution {
    /// `probabilities[(n_signal, n_pairs)]`, both margins ≤ cutoff.
    pub probabilities: Vec<((u32, u32), f64)>,
    pub tail: f64,
    /// Set when the tail exceeds 10⁻⁹ of the total mass.
    pub cutoff_warning: bool,
}

impl JointPhotonDistribution {
    pub fn probability(&self, n_signal: u32, n_pairs: u32) -> f64 {
        self.probabilities
            .iter()
            .find(|((s, p), _)| *s == n_signal && *p == n_pairs)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

/// Product of the signal Poissonian (mean μ) and the thermal pair-number
/// distribution (mean `p_pair`), truncated at `cutoff` per margin.
pub fn photon_number_distribution(
    params: &SourceParams,
    cutoff: u32,
) -> Result<JointPhotonDistribution, NoiseError> {
    params.validate()?;
    if cutoff < 2 {
        return Err(NoiseError::CutoffTooSmall(cutoff));
    }
    let mut probabilities = Vec::new();
    let mut mass = 0.0;
    for n_signal in 0..=cutoff {
        for n_pairs in 0..=cutoff {
            let p = poisson_pmf(n_signal, params.mu_signal) * thermal_pmf(n_pairs, params.p_pair);
            probabilities.push(((n_signal, n_pairs), p));
            mass += p;
        }
    }
    let tail = (1.0 - mass).max(0.0);
    Ok(JointPhotonDistribution {
        probabilities,
        tail,
        cutoff_warning: tail > 1e-9,
    })
}

/// A photon entering the circuit classically: input path and polarization
/// amplitudes.
#[derive(Debug, Clone, Copy)]
struct ClassicalPhoton {
    path: &'static str,
    amp_h: Complex64,
    amp_v: Complex64,
}

/// One bucket detector with its polarization analysis and efficiency.
#[derive(Debug, Clone, Copy)]
struct ClassicalDetector {
    path: &'static str,
    projection: PolarizationProjection,
    eta: f64,
}

/// Click probability of one photon at one detector: coherent single-photon
/// propagation through the full transfer matrix, then the analyzer
/// projection and the binomial detection loss.
fn click_probability(
    transfer: &CMat,
    registry: &std::sync::Arc<crate::fock::ModeRegistry>,
    photon: &ClassicalPhoton,
    det: &ClassicalDetector,
) -> f64 {
    let n = registry.mode_count();
    let mut input = vec![Complex64::ZERO; n];
    let in_path = registry.path(photon.path).expect("registered input path");
    input[registry.mode(in_path, Polarization::H).index()] = photon.amp_h;
    input[registry.mode(in_path, Polarization::V).index()] = photon.amp_v;
    let out = transfer.apply(&input);
    let out_path = registry.path(det.path).expect("registered detector path");
    let ah = out[registry.mode(out_path, Polarization::H).index()];
    let av = out[registry.mode(out_path, Polarization::V).index()];
    let passed = match det.projection {
        PolarizationProjection::Any => ah.norm_sqr() + av.norm_sqr(),
        PolarizationProjection::State(qh, qv) => (qh.conj() * ah + qv.conj() * av).norm_sqr(),
    };
    det.eta * passed
}

/// Probability that every detector registers at least one of the mutually
/// distinguishable photons, by inclusion-exclusion over the detector set.
fn pattern_hit_probability(click: &[Vec<f64>]) -> f64 {
    if click.is_empty() {
        return 0.0;
    }
    let n_det = click[0].len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n_det) {
        let sign = if mask.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        let mut prod = 1.0;
        for photon in click {
            let mut miss = 1.0;
            for (d, p) in photon.iter().enumerate() {
                if mask >> d & 1 == 1 {
                    miss -= p;
                }
            }
            prod *= miss;
        }
        total += sign * prod;
    }
    total.clamp(0.0, 1.0)
}

/// Detected three-fold coincidence probabilities per pulse, split into the
/// genuine one-photon-per-input part and the accidental multi-photon part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceRates {
    pub genuine_cc1: f64,
    pub genuine_cc2: f64,
    pub accidental_cc1: f64,
    pub accidental_cc2: f64,
}

impl CoincidenceRates {
    pub fn genuine(&self) -> f64 {
        self.genuine_cc1 + self.genuine_cc2
    }

    pub fn accidental(&self) -> f64 {
        self.accidental_cc1 + self.accidental_cc2
    }

    pub fn total(&self) -> f64 {
        self.genuine() + self.accidental()
    }

    /// Accidental share of all detected three-fold coincidences.
    pub fn accidental_fraction(&self) -> f64 {
        let total = self.total();
        if total == 0.0 {
            0.0
        } else {
            self.accidental() / total
        }
    }
}

fn out_detectors(
    params: &SourceParams,
    projections: (PolarizationProjection, PolarizationProjection),
) -> [ClassicalDetector; 4] {
    [
        ClassicalDetector {
            path: router::PATH_CONTROL_1,
            projection: PolarizationProjection::horizontal(),
            eta: params.eta.control1,
        },
        ClassicalDetector {
            path: router::PATH_CONTROL_2,
            projection: PolarizationProjection::horizontal(),
            eta: params.eta.control2,
        },
        ClassicalDetector {
            path: router::PATH_OUT_1,
            projection: projections.0,
            eta: params.eta.out1,
        },
        ClassicalDetector {
            path: router::PATH_OUT_2,
            projection: projections.1,
            eta: params.eta.out2,
        },
    ]
}

fn source_photons(
    signal: &SignalQubit,
    control: &ControlSetting,
    n_signal: u32,
    n_pairs: u32,
) -> Vec<ClassicalPhoton> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut photons = Vec::new();
    for _ in 0..n_signal {
        photons.push(ClassicalPhoton {
            path: router::PATH_SIGNAL_IN,
            amp_h: signal.alpha,
            amp_v: signal.beta,
        });
    }
    for _ in 0..n_pairs {
        photons.push(ClassicalPhoton {
            path: router::PATH_CONTROL_1,
            amp_h: Complex64::new(s, 0.0),
            amp_v: Complex64::from_polar(s, control.phi),
        });
        photons.push(ClassicalPhoton {
            path: router::PATH_CONTROL_2,
            amp_h: Complex64::new(s, 0.0),
            amp_v: Complex64::from_polar(s, control.phi + PI),
        });
    }
    photons
}

/// Classical three-fold pattern probabilities (CC1, CC2) for a fixed photon
/// configuration; efficiencies folded into the detector click probabilities.
fn classical_coincidence(
    transfer: &CMat,
    registry: &std::sync::Arc<crate::fock::ModeRegistry>,
    params: &SourceParams,
    photons: &[ClassicalPhoton],
    projections: (PolarizationProjection, PolarizationProjection),
) -> (f64, f64) {
    if photons.len() < 3 {
        return (0.0, 0.0);
    }
    let dets = out_detectors(params, projections);
    // detector order: C1, C2, OUT1, OUT2
    let clicks: Vec<Vec<f64>> = photons
        .iter()
        .map(|ph| {
            dets.iter()
                .map(|d| click_probability(transfer, registry, ph, d))
                .collect()
        })
        .collect();
    let take = |indices: [usize; 3]| -> f64 {
        let sub: Vec<Vec<f64>> = clicks
            .iter()
            .map(|row| indices.iter().map(|&i| row[i]).collect())
            .collect();
        pattern_hit_probability(&sub)
    };
    (take([0, 1, 2]), take([0, 1, 3]))
}

/// Quantum heralded coincidence probabilities (CC1, CC2) for the ideal
/// one-photon-per-input configuration, before detection efficiency.
fn quantum_coincidence(
    signal: &SignalQubit,
    config: &RouterConfig,
    projections: (PolarizationProjection, PolarizationProjection),
) -> Result<(f64, f64), NoiseError> {
    let assembly = build_router(config)?;
    let input = router_input(&assembly.registry, signal, &config.control)?;
    let evolved = assembly.circuit.evolve(&input)?;
    let probe = |pattern: &DetectionPattern,
                 projection: PolarizationProjection,
                 out_path: &str|
     -> Result<f64, NoiseError> {
        let mut pattern = pattern.clone();
        for det in &mut pattern.detectors {
            if det.path == out_path {
                det.projection = projection;
            }
        }
        Ok(postselect(&evolved, &pattern)?.probability)
    };
    let p1 = probe(&assembly.coincidence.0, projections.0, router::PATH_OUT_1)?;
    let p2 = probe(&assembly.coincidence.1, projections.1, router::PATH_OUT_2)?;
    Ok((p1, p2))
}

/// Estimate detected genuine and accidental coincidence probabilities per
/// pulse for the configured router and output analyses.
///
/// Accidentals enumerate every photon-number configuration up to `cutoff`
/// total photons that is not one-photon-per-input, propagate it classically
/// with threshold detectors, and sum the probability-weighted pattern hits.
pub fn accidental_rate(
    params: &SourceParams,
    signal: &SignalQubit,
    config: &RouterConfig,
    projections: (PolarizationProjection, PolarizationProjection),
    cutoff: u32,
) -> Result<CoincidenceRates, NoiseError> {
    params.validate()?;
    let pair_mean = params.pair_mean_at_source();
    let assembly = build_router(config)?;
    let transfer = assembly.circuit.single_photon_transfer()?;
    let registry = &assembly.registry;

    // genuine part: exact quantum pattern probability times the three
    // detector efficiencies
    let p11 = poisson_pmf(1, params.mu_signal) * thermal_pmf(1, pair_mean);
    let (q1, q2) = quantum_coincidence(signal, config, projections)?;
    let herald_eta = params.eta.control1 * params.eta.control2;
    let genuine_cc1 = p11 * q1 * herald_eta * params.eta.out1;
    let genuine_cc2 = p11 * q2 * herald_eta * params.eta.out2;

    let mut accidental_cc1 = 0.0;
    let mut accidental_cc2 = 0.0;
    for n_signal in 0..=cutoff {
        for n_pairs in 0..=cutoff / 2 {
            if n_signal + 2 * n_pairs > cutoff {
                continue;
            }
            if (n_signal, n_pairs) == (1, 1) || n_signal + 2 * n_pairs < 3 {
                continue;
            }
            let weight = poisson_pmf(n_signal, params.mu_signal) * thermal_pmf(n_pairs, pair_mean);
            if weight < 1e-30 {
                continue;
            }
            let photons = source_photons(signal, &config.control, n_signal, n_pairs);
            let (h1, h2) =
                classical_coincidence(&transfer, registry, params, &photons, projections);
            accidental_cc1 += weight * h1;
            accidental_cc2 += weight * h2;
        }
    }
    Ok(CoincidenceRates {
        genuine_cc1,
        genuine_cc2,
        accidental_cc1,
        accidental_cc2,
    })
}

/// Classical (distinguishable-photon) coincidence probabilities for the
/// one-photon-per-input configuration: the detuned normalization regime.
pub fn detuned_coincidence_rate(
    params: &SourceParams,
    signal: &SignalQubit,
    config: &RouterConfig,
    projections: (PolarizationProjection, PolarizationProjection),
) -> Result<(f64, f64), NoiseError> {
    params.validate()?;
    let assembly = build_router(config)?;
    let transfer = assembly.circuit.single_photon_transfer()?;
    let p11 = poisson_pmf(1, params.mu_signal) * thermal_pmf(1, params.pair_mean_at_source());
    let photons = source_photons(signal, &config.control, 1, 1);
    let (h1, h2) =
        classical_coincidence(&transfer, &assembly.registry, params, &photons, projections);
    Ok((p11 * h1, p11 * h2))
}

/// Find the uniform channel efficiency at which the accidental fraction
/// matches `target`, by bisection over the bracket (the fraction is strictly
/// decreasing in η for this source model).
pub fn calibrate_efficiency(
    params: &SourceParams,
    signal: &SignalQubit,
    config: &RouterConfig,
    target: f64,
) -> Result<f64, NoiseError> {
    if !(0.0..1.0).contains(&target) || target == 0.0 {
        return Err(NoiseError::InvalidParams(format!(
            "target fraction {target}"
        )));
    }
    let projections = (PolarizationProjection::Any, PolarizationProjection::Any);
    let fraction = |eta: f64| -> Result<f64, NoiseError> {
        let rates = accidental_rate(
            &params.with_uniform_eta(eta),
            signal,
            config,
            projections,
            DEFAULT_ACCIDENTAL_CUTOFF,
        )?;
        Ok(rates.accidental_fraction())
    };
    let (mut lo, mut hi) = (1e-3, 1.0);
    let f_hi = fraction(hi)?;
    let f_lo = fraction(lo)?;
    if (target - f_hi).abs() < 1e-9 {
        return Ok(1.0);
    }
    if target < f_hi || target > f_lo {
        return Err(NoiseError::CalibrationUnreachable {
            target,
            lo: f_hi,
            hi: f_lo,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = fraction(mid)?;
        if (f_mid - target).abs() < 1e-6 || (hi - lo) < 1e-12 {
            return Ok(mid);
        }
        if f_mid > target {
            // fraction decreasing in η: too much accidental → raise η
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Interfering measurement block or the deliberately detuned normalization
/// block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountRegime {
    Interfering,
    Detuned,
}

impl CountRegime {
    pub fn label(self) -> &'static str {
        match self {
            CountRegime::Interfering => "interfering",
            CountRegime::Detuned => "detuned",
        }
    }
}

/// Simulated (or ingested) coincidence counts for one measurement block.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub regime: CountRegime,
    pub duration_s: f64,
    pub cc1: u64,
    pub cc2: u64,
    /// Estimated accidental contributions over the block (real-valued
    /// expectations, not draws).
    pub accidental_cc1: f64,
    pub accidental_cc2: f64,
}

fn draw_poisson(rng: &mut ChaCha12Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("positive rate");
    dist.sample(rng) as u64
}

/// Simulate coincidence counting over `duration_s`, alternating interfering
/// and detuned blocks of `interval_s` (the power-drift compensation
/// procedure). Identical seeds reproduce identical records.
pub fn simulate_counts(
    params: &SourceParams,
    signal: &SignalQubit,
    config: &RouterConfig,
    projections: (PolarizationProjection, PolarizationProjection),
    duration_s: f64,
    interval_s: f64,
    seed: u64,
) -> Result<Vec<CountRecord>, NoiseError> {
    params.validate()?;
    if duration_s < 0.0 || interval_s <= 0.0 {
        return Err(NoiseError::InvalidParams(format!(
            "duration_s = {duration_s}, interval_s = {interval_s}"
        )));
    }
    let rates = accidental_rate(
        params,
        signal,
        config,
        projections,
        DEFAULT_ACCIDENTAL_CUTOFF,
    )?;
    let (d1, d2) = detuned_coincidence_rate(params, signal, config, projections)?;
    let pulses_per_s = params.rep_rate_hz;
    let interfering = (
        (rates.genuine_cc1 + rates.accidental_cc1) * pulses_per_s,
        (rates.genuine_cc2 + rates.accidental_cc2) * pulses_per_s,
    );
    let detuned = (
        (d1 + rates.accidental_cc1) * pulses_per_s,
        (d2 + rates.accidental_cc2) * pulses_per_s,
    );
    let acc_per_s = (
        rates.accidental_cc1 * pulses_per_s,
        rates.accidental_cc2 * pulses_per_s,
    );

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut remaining = duration_s;
    let mut regime = CountRegime::Interfering;
    while remaining > 0.0 {
        let block = remaining.min(interval_s);
        let (r1, r2) = match regime {
            CountRegime::Interfering => interfering,
            CountRegime::Detuned => detuned,
        };
        records.push(CountRecord {
            regime,
            duration_s: block,
            cc1: draw_poisson(&mut rng, r1 * block),
            cc2: draw_poisson(&mut rng, r2 * block),
            accidental_cc1: acc_per_s.0 * block,
            accidental_cc2: acc_per_s.1 * block,
        });
        remaining -= block;
        regime = match regime {
            CountRegime::Interfering => CountRegime::Detuned,
            CountRegime::Detuned => CountRegime::Interfering,
        };
    }
    Ok(records)
}

/// Fringe scan honoring the source's distinguishability flag: quantum
/// interference when photons overlap, flat classical coincidences when the
/// temporal overlap is detuned.
pub fn coherence_scan(
    params: &SourceParams,
    signal: &SignalQubit,
    config: &RouterConfig,
    tilt_phases: &[f64],
    projection: PolarizationProjection,
) -> Result<Vec<router::FringeSample>, NoiseError> {
    if !matches!(config.variant, RouterVariant::CoherenceTest { .. }) {
        return Err(NoiseError::Router(RouterError::WrongVariant));
    }
    if !params.distinguishable {
        return Ok(router::coherence_scan(
            signal,
            config,
            tilt_phases,
            projection,
        )?);
    }
    params.validate()?;
    let mut samples = Vec::with_capacity(tilt_phases.len());
    for &tilt in tilt_phases {
        let cfg = RouterConfig {
            control: config.control,
            regime: config.regime,
            variant: RouterVariant::CoherenceTest { bd4_tilt: tilt },
        };
        let (p1, _) = detuned_coincidence_rate(
            params,
            signal,
            &cfg,
            (projection, PolarizationProjection::Any),
        )?;
        samples.push(router::FringeSample {
            phase: tilt,
            probability: p1,
        });
    }
    Ok(samples)
}
