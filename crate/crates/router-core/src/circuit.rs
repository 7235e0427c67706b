//! Ordered evolution through an element list, projective post-selection on
//! detection patterns, and feed-forward branching.
//!
//! Detectors are photon-number-resolving exact-`k` projectors by default;
//! threshold (`≥ k`) requirements are supported for polarization-unresolved
//! detection, as used by the noise studies. A detector with a polarization
//! projection removes the detected photon from the conditional state (partial
//! inner product against the projected ket); an `Any` detector only filters
//! the photon count and leaves the port modes live, so the conditional output
//! qubit can still be read off the port amplitudes.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::elements::{
    DisplacerDirection, WavePlateSetting, beam_displacer_unitary, hadamard_plate_unitary,
    mirror_unitary, pbs_unitary, phase_shifter_unitary, waveplate_unitary,
};
use crate::fock::{
    AMPLITUDE_EPS, FockError, FockOccupation, ModeRegistry, ModeUnitary, PathId, PhotonicState,
    Polarization,
};

/// `1 − |⟨a|b⟩|` below which two normalized states count as equal up to
/// global phase.
pub const GLOBAL_PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Element(#[from] crate::elements::ElementError),
    #[error("unknown spatial path `{0}` in circuit description")]
    UnknownPath(String),
    #[error("state registry does not match circuit registry")]
    RegistryMismatch,
    #[error("detection pattern references unknown path `{0}`")]
    UnknownDetectorPath(String),
    #[error("polarization projection is not normalized")]
    BadProjection,
    #[error(
        "threshold detection combined with a polarization projection is only supported in the classical pipeline"
    )]
    UnsupportedPattern,
    #[error("detector paths must be distinct")]
    DuplicateDetector,
    #[error("no control photon on path `{0}`")]
    MissingControlPhoton(String),
    #[error(
        "corrected feed-forward branches disagree up to global phase (worst overlap defect {0:.3e})"
    )]
    InconsistentCorrections(f64),
    #[error("feed-forward needs at least one accepted branch")]
    NoBranches,
}

/// Declarative description of one optical element, bound to named paths.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSpec {
    WavePlate {
        path: String,
        setting: WavePlateSetting,
    },
    HadamardPlate {
        path: String,
    },
    Pbs {
        path_a: String,
        path_b: String,
    },
    BeamDisplacer {
        trunk: String,
        arm_h: String,
        arm_v: String,
        direction: DisplacerDirection,
    },
    PhaseShifter {
        path: String,
        pol: Polarization,
        phi: f64,
    },
    Mirror {
        path: String,
    },
}

impl ElementSpec {
    fn paths(&self) -> Vec<&str> {
        match self {
            ElementSpec::WavePlate { path, .. }
            | ElementSpec::HadamardPlate { path }
            | ElementSpec::PhaseShifter { path, .. }
            | ElementSpec::Mirror { path } => vec![path],
            ElementSpec::Pbs { path_a, path_b } => vec![path_a, path_b],
            ElementSpec::BeamDisplacer {
                trunk,
                arm_h,
                arm_v,
                ..
            } => {
                vec![trunk, arm_h, arm_v]
            }
        }
    }

    pub fn compile(&self, registry: &Arc<ModeRegistry>) -> Result<ModeUnitary, CircuitError> {
        let resolve = |name: &str| -> Result<PathId, CircuitError> {
            registry
                .path(name)
                .ok_or_else(|| CircuitError::UnknownPath(name.to_string()))
        };
        let u = match self {
            ElementSpec::WavePlate { path, setting } => {
                waveplate_unitary(registry, resolve(path)?, *setting)?
            }
            ElementSpec::HadamardPlate { path } => {
                hadamard_plate_unitary(registry, resolve(path)?)?
            }
            ElementSpec::Pbs { path_a, path_b } => {
                pbs_unitary(registry, resolve(path_a)?, resolve(path_b)?)?
            }
            ElementSpec::BeamDisplacer {
                trunk,
                arm_h,
                arm_v,
                direction,
            } => beam_displacer_unitary(
                registry,
                resolve(trunk)?,
                resolve(arm_h)?,
                resolve(arm_v)?,
                *direction,
            )?,
            ElementSpec::PhaseShifter { path, pol, phi } => {
                phase_shifter_unitary(registry, resolve(path)?, *pol, *phi)?
            }
            ElementSpec::Mirror { path } => mirror_unitary(registry, resolve(path)?)?,
        };
        Ok(u)
    }
}

/// An ordered element list over a fixed mode registry.
#[derive(Debug, Clone)]
pub struct CircuitSpec {
    registry: Arc<ModeRegistry>,
    elements: Vec<ElementSpec>,
}

impl CircuitSpec {
    pub fn new(
        registry: Arc<ModeRegistry>,
        elements: Vec<ElementSpec>,
    ) -> Result<Self, CircuitError> {
        for el in &elements {
            for p in el.paths() {
                if registry.path(p).is_none() {
                    return Err(CircuitError::UnknownPath(p.to_string()));
                }
            }
        }
        Ok(CircuitSpec { registry, elements })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn elements(&self) -> &[ElementSpec] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Apply the elements in order.
    pub fn evolve(&self, state: &PhotonicState) -> Result<PhotonicState, CircuitError> {
        if **state.registry() != *self.registry {
            return Err(CircuitError::RegistryMismatch);
        }
        let mut out = state.clone();
        for el in &self.elements {
            out = out.apply_unitary(&el.compile(&self.registry)?)?;
        }
        Ok(out)
    }

    /// Full single-photon transfer matrix (product of the embedded element
    /// matrices); used by the classical-propagation pipeline.
    pub(crate) fn single_photon_transfer(&self) -> Result<crate::linalg::CMat, CircuitError> {
        let mut t = crate::linalg::CMat::identity(self.registry.mode_count());
        for el in &self.elements {
            t = el.compile(&self.registry)?.embed_full().mul(&t);
        }
        Ok(t)
    }
}

/// Polarization analysis in front of a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarizationProjection {
    /// Polarization-unresolved detection.
    Any,
    /// Projection onto the normalized qubit state `q_h|H⟩ + q_v|V⟩`.
    State(Complex64, Complex64),
}

impl PolarizationProjection {
    pub fn horizontal() -> Self {
        PolarizationProjection::State(Complex64::ONE, Complex64::ZERO)
    }

    pub fn vertical() -> Self {
        PolarizationProjection::State(Complex64::ZERO, Complex64::ONE)
    }

    pub fn diagonal() -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PolarizationProjection::State(s, s)
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if let PolarizationProjection::State(qh, qv) = self
            && ((qh.norm_sqr() + qv.norm_sqr()) - 1.0).abs() > 1e-9
        {
            return Err(CircuitError::BadProjection);
        }
        Ok(())
    }
}

/// Photon-count requirement at one detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonRequirement {
    Exactly(u32),
    AtLeast(u32),
}

/// One detector: a spatial path, its polarization analysis, and the required
/// photon count.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub path: String,
    pub projection: PolarizationProjection,
    pub requirement: PhotonRequirement,
}

impl DetectorSpec {
    pub fn exactly_one(path: &str, projection: PolarizationProjection) -> Self {
        DetectorSpec {
            path: path.to_string(),
            projection,
            requirement: PhotonRequirement::Exactly(1),
        }
    }
}

/// Constraint on modes not covered by any detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndetectedPolicy {
    /// Every unlisted path must be empty.
    Vacuum,
    /// Unlisted paths are unconstrained.
    Unconstrained,
}

/// A post-selection event over a set of detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPattern {
    pub detectors: Vec<DetectorSpec>,
    pub undetected: UndetectedPolicy,
}

/// Conditional state and success probability of a post-selection.
#[derive(Debug, Clone)]
pub struct PostselectResult {
    /// Conditional state, renormalized; zero-amplitude state when the
    /// probability vanishes.
    pub state: PhotonicState,
    pub probability: f64,
}

/// Project `state` onto the detection pattern.
///
/// Detectors with a polarization projection use photon-number-resolving
/// exact-`k` semantics and absorb the detected photons; `Any` detectors
/// filter the path's total count and keep its modes live. Threshold
/// requirements are supported for `Any` detectors only.
pub fn postselect(
    state: &PhotonicState,
    pattern: &DetectionPattern,
) -> Result<PostselectResult, CircuitError> {
    let registry = state.registry().clone();
    let mut seen: Vec<PathId> = Vec::new();
    struct Det {
        path: PathId,
        projection: PolarizationProjection,
        requirement: PhotonRequirement,
    }
    let mut dets = Vec::new();
    for d in &pattern.detectors {
        d.projection.validate()?;
        let path = registry
            .path(&d.path)
            .ok_or_else(|| CircuitError::UnknownDetectorPath(d.path.clone()))?;
        if seen.contains(&path) {
            return Err(CircuitError::DuplicateDetector);
        }
        if matches!(d.requirement, PhotonRequirement::AtLeast(_))
            && matches!(d.projection, PolarizationProjection::State(..))
        {
            return Err(CircuitError::UnsupportedPattern);
        }
        seen.push(path);
        dets.push(Det {
            path,
            projection: d.projection,
            requirement: d.requirement,
        });
    }

    let mut covered = vec![false; registry.path_count()];
    for d in &dets {
        for (idx, (p, _)) in registry.paths().enumerate() {
            if p == d.path {
                covered[idx] = true;
            }
        }
    }

    let mut amps: BTreeMap<FockOccupation, Complex64> = BTreeMap::new();
    let mut photons_out: Option<u32> = None;
    'term: for (occ, amp) in state.terms() {
        // vacuum policy on uncovered paths
        if pattern.undetected == UndetectedPolicy::Vacuum {
            for (idx, (p, _)) in registry.paths().enumerate() {
                if !covered[idx] {
                    let n = occ.count(registry.mode(p, Polarization::H))
                        + occ.count(registry.mode(p, Polarization::V));
                    if n != 0 {
                        continue 'term;
                    }
                }
            }
        }
        let mut factor = amp;
        let mut removed = Vec::new();
        for d in &dets {
            let mh = registry.mode(d.path, Polarization::H);
            let mv = registry.mode(d.path, Polarization::V);
            let nh = occ.count(mh);
            let nv = occ.count(mv);
            let total = nh + nv;
            match (&d.projection, d.requirement) {
                (PolarizationProjection::Any, PhotonRequirement::Exactly(k)) => {
                    if total != k {
                        continue 'term;
                    }
                }
                (PolarizationProjection::Any, PhotonRequirement::AtLeast(k)) => {
                    if total < k {
                        continue 'term;
                    }
                }
                (PolarizationProjection::State(qh, qv), PhotonRequirement::Exactly(k)) => {
                    if total != k {
                        continue 'term;
                    }
                    // ⟨k photons in q, none orthogonal | n_h, n_v⟩
                    let coeff = qh.conj().powu(nh)
                        * qv.conj().powu(nv)
                        * (fact(k) / (fact(nh) * fact(nv))).sqrt();
                    factor *= coeff;
                    removed.push((mh, mv));
                }
                (PolarizationProjection::State(..), PhotonRequirement::AtLeast(_)) => {
                    unreachable!("rejected above");
                }
            }
        }
        if factor.norm() < AMPLITUDE_EPS {
            continue;
        }
        // zero out modes of projected detectors (photons absorbed)
        let mut out_occ = occ.clone();
        let mut kept_photons = occ.total();
        for (mh, mv) in removed {
            kept_photons -= occ.count(mh) + occ.count(mv);
            out_occ = out_occ.cleared(&[mh, mv]);
        }
        match photons_out {
            None => photons_out = Some(kept_photons),
            Some(n) => debug_assert_eq!(n, kept_photons),
        }
        *amps.entry(out_occ).or_insert(Complex64::ZERO) += factor;
    }

    let probability: f64 = amps.values().map(|a| a.norm_sqr()).sum();
    let photons = photons_out.unwrap_or(0);
    let conditional = PhotonicState::from_parts(registry, photons, state.cutoff(), amps);
    let state_out = if probability > AMPLITUDE_EPS * AMPLITUDE_EPS {
        conditional.scale(Complex64::new(1.0 / probability.sqrt(), 0.0))
    } else {
        conditional
    };
    Ok(PostselectResult {
        state: state_out,
        probability,
    })
}

fn fact(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// One accepted feed-forward branch: a heralding pattern on the control
/// detectors, an optional correction unitary applied to the heralded state,
/// and the remaining circuit to complete after the correction.
#[derive(Debug, Clone)]
pub struct FeedForwardBranch {
    pub label: String,
    pub herald: DetectionPattern,
    pub correction: Option<ModeUnitary>,
    pub completion: CircuitSpec,
}

/// Combined result of evaluating all accepted feed-forward branches.
#[derive(Debug, Clone)]
pub struct FeedForwardResult {
    /// Total success probability (sum over accepted branches).
    pub probability: f64,
    /// Representative corrected output state (first branch, normalized).
    pub state: PhotonicState,
    /// Per-branch probabilities, in input order.
    pub branch_probabilities: Vec<(String, f64)>,
    /// Worst pairwise `1 − |⟨a|b⟩|` between corrected branch states.
    pub overlap_defect: f64,
}

/// Evaluate the accepted detector outcomes of `state`, apply each branch's
/// correction, and combine.
///
/// All corrected branch states must coincide up to global phase within
/// [`GLOBAL_PHASE_TOL`]; otherwise the correction map is flagged as
/// inconsistent.
pub fn feed_forward(
    state: &PhotonicState,
    branches: &[FeedForwardBranch],
) -> Result<FeedForwardResult, CircuitError> {
    if branches.is_empty() {
        return Err(CircuitError::NoBranches);
    }
    let mut total = 0.0;
    let mut probs = Vec::new();
    let mut states: Vec<PhotonicState> = Vec::new();
    for branch in branches {
        let heralded = postselect(state, &branch.herald)?;
        total += heralded.probability;
        probs.push((branch.label.clone(), heralded.probability));
        if heralded.probability <= AMPLITUDE_EPS * AMPLITUDE_EPS {
            continue;
        }
        let mut out = heralded.state;
        if let Some(correction) = &branch.correction {
            out = out.apply_unitary(correction)?;
        }
        out = branch.completion.evolve(&out)?;
        states.push(out);
    }
    if states.is_empty() {
        return Err(CircuitError::NoBranches);
    }
    let mut worst = 0.0f64;
    for s in states.iter().skip(1) {
        let overlap = states[0].overlap(s)?;
        worst = worst.max(1.0 - overlap);
    }
    if worst > GLOBAL_PHASE_TOL {
        return Err(CircuitError::InconsistentCorrections(worst));
    }
    Ok(FeedForwardResult {
        probability: total,
        state: states.remove(0),
        branch_probabilities: probs,
        overlap_defect: worst,
    })
}

/// Operating regime of the programmable phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseGateRegime {
    /// Herald only on the H control outcome: success probability 1/4.
    PostselectQuarter,
    /// Accept both control outcomes with a V → −V correction on the signal
    /// for the V outcome: success probability 1/2.
    FeedforwardHalf,
}

/// Run the programmable phase gate block on `state`.
///
/// The control photon must already be prepared as `(|H⟩ + e^{iφ}|V⟩)/√2` on
/// `control_path`. The gate interferes signal and control on a PBS, applies a
/// Hadamard plate to the control and heralds on its polarization; the signal
/// qubit then carries the relative phase φ on its V component. A fixed π
/// pre-shift on the control's V mode compensates the two `i` reflection
/// phases of the PBS convention.
pub fn ppg(
    state: &PhotonicState,
    signal_path: &str,
    control_path: &str,
    _phi: f64,
    regime: PhaseGateRegime,
) -> Result<PostselectResult, CircuitError> {
    let registry = state.registry().clone();
    let control = registry
        .path(control_path)
        .ok_or_else(|| CircuitError::UnknownPath(control_path.to_string()))?;
    let has_control = state.terms().any(|(occ, _)| {
        occ.count(registry.mode(control, Polarization::H))
            + occ.count(registry.mode(control, Polarization::V))
            > 0
    });
    if !has_control {
        return Err(CircuitError::MissingControlPhoton(control_path.to_string()));
    }
    let gate = CircuitSpec::new(
        registry.clone(),
        vec![
            ElementSpec::PhaseShifter {
                path: control_path.to_string(),
                pol: Polarization::V,
                phi: std::f64::consts::PI,
            },
            ElementSpec::Pbs {
                path_a: signal_path.to_string(),
                path_b: control_path.to_string(),
            },
            ElementSpec::HadamardPlate {
                path: control_path.to_string(),
            },
        ],
    )?;
    let evolved = gate.evolve(state)?;
    let herald = |projection: PolarizationProjection| DetectionPattern {
        detectors: vec![
            DetectorSpec::exactly_one(control_path, projection),
            DetectorSpec::exactly_one(signal_path, PolarizationProjection::Any),
        ],
        undetected: UndetectedPolicy::Unconstrained,
    };
    match regime {
        PhaseGateRegime::PostselectQuarter => {
            postselect(&evolved, &herald(PolarizationProjection::horizontal()))
        }
        PhaseGateRegime::FeedforwardHalf => {
            let empty = CircuitSpec::new(registry.clone(), vec![])?;
            let correction = phase_shifter_unitary(
                &registry,
                registry
                    .path(signal_path)
                    .ok_or_else(|| CircuitError::UnknownPath(signal_path.to_string()))?,
                Polarization::V,
                std::f64::consts::PI,
            )?;
            let branches = vec![
                FeedForwardBranch {
                    label: "control H".into(),
                    herald: herald(PolarizationProjection::horizontal()),
                    correction: None,
                    completion: empty.clone(),
                },
                FeedForwardBranch {
                    label: "control V".into(),
                    herald: herald(PolarizationProjection::vertical()),
                    correction: Some(correction),
                    completion: empty,
                },
            ];
            let combined = feed_forward(&evolved, &branches)?;
            Ok(PostselectResult {
                state: combined.state,
                probability: combined.probability,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reg(paths: &[&str]) -> Arc<ModeRegistry> {
        ModeRegistry::new(paths.iter().copied()).unwrap()
    }

    fn qubit(
        r: &Arc<ModeRegistry>,
        path: &str,
        alpha: Complex64,
        beta: Complex64,
    ) -> PhotonicState {
        PhotonicState::single_photon(r.clone(), r.path(path).unwrap(), alpha, beta).unwrap()
    }

    fn ppg_input(
        r: &Arc<ModeRegistry>,
        alpha: Complex64,
        beta: Complex64,
        phi: f64,
    ) -> PhotonicState {
        let s = c(FRAC_1_SQRT_2, 0.0);
        let sig_reg = reg(&["sig"]);
        let sig = qubit(&sig_reg, "sig", alpha, beta);
        let ctrl_reg = reg(&["ctrl"]);
        let ctrl = qubit(
            &ctrl_reg,
            "ctrl",
            s,
            Complex64::from_polar(FRAC_1_SQRT_2, phi),
        );
        sig.tensor(&ctrl).unwrap().embed_into(r.clone()).unwrap()
    }

    #[test]
    fn empty_circuit_returns_input() {
        let r = reg(&["a"]);
        let circuit = CircuitSpec::new(r.clone(), vec![]).unwrap();
        let input = qubit(&r, "a", c(0.6, 0.0), c(0.0, 0.8));
        let out = circuit.evolve(&input).unwrap();
        assert!((out.inner_product(&input).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_hadamard_plates_cancel() {
        let r = reg(&["a"]);
        let circuit = CircuitSpec::new(
            r.clone(),
            vec![
                ElementSpec::HadamardPlate { path: "a".into() },
                ElementSpec::HadamardPlate { path: "a".into() },
            ],
        )
        .unwrap();
        let input = qubit(&r, "a", c(0.6, 0.1), c(0.2, 0.77));
        let out = circuit.evolve(&input).unwrap();
        assert!((out.inner_product(&input).unwrap().norm() - input.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn evolve_rejects_registry_mismatch() {
        let r = reg(&["a"]);
        let other = reg(&["b"]);
        let circuit = CircuitSpec::new(r, vec![]).unwrap();
        let input = qubit(&other, "b", Complex64::ONE, Complex64::ZERO);
        assert_eq!(
            circuit.evolve(&input).unwrap_err(),
            CircuitError::RegistryMismatch
        );
    }

    #[test]
    fn circuit_rejects_unknown_path() {
        let r = reg(&["a"]);
        let err = CircuitSpec::new(
            r,
            vec![ElementSpec::Mirror {
                path: "nope".into(),
            }],
        )
        .unwrap_err();
        assert_eq!(err, CircuitError::UnknownPath("nope".into()));
    }

    #[test]
    fn projecting_a_state_on_itself_gives_unit_probability() {
        let r = reg(&["a"]);
        let s = c(FRAC_1_SQRT_2, 0.0);
        let input = qubit(&r, "a", s, s);
        let pattern = DetectionPattern {
            detectors: vec![DetectorSpec::exactly_one(
                "a",
                PolarizationProjection::State(s, s),
            )],
            undetected: UndetectedPolicy::Vacuum,
        };
        let res = postselect(&input, &pattern).unwrap();
        assert!((res.probability - 1.0).abs() < 1e-12);
        assert_eq!(res.state.photon_number(), 0);
    }

    #[test]
    fn projecting_h_on_v_gives_zero() {
        let r = reg(&["a"]);
        let input = qubit(&r, "a", Complex64::ONE, Complex64::ZERO);
        let pattern = DetectionPattern {
            detectors: vec![DetectorSpec::exactly_one(
                "a",
                PolarizationProjection::vertical(),
            )],
            undetected: UndetectedPolicy::Vacuum,
        };
        let res = postselect(&input, &pattern).unwrap();
        assert!(res.probability < 1e-15);
        assert!(res.state.is_zero());
    }

    #[test]
    fn polarization_outcomes_partition_the_any_probability() {
        let r = reg(&["a", "b"]);
        // photon split coherently over two paths with mixed polarization
        let circuit = CircuitSpec::new(
            r.clone(),
            vec![
                ElementSpec::HadamardPlate { path: "a".into() },
                ElementSpec::Pbs {
                    path_a: "a".into(),
                    path_b: "b".into(),
                },
            ],
        )
        .unwrap();
        let input = qubit(&r, "a", c(0.6, 0.0), c(0.0, 0.8));
        let out = circuit.evolve(&input).unwrap();
        let prob = |proj, path: &str| {
            let pattern = DetectionPattern {
                detectors: vec![DetectorSpec::exactly_one(path, proj)],
                undetected: UndetectedPolicy::Unconstrained,
            };
            postselect(&out, &pattern).unwrap().probability
        };
        for path in ["a", "b"] {
            let ph = prob(PolarizationProjection::horizontal(), path);
            let pv = prob(PolarizationProjection::vertical(), path);
            let pany = prob(PolarizationProjection::Any, path);
            assert!((ph + pv - pany).abs() < 1e-12);
        }
        // complete set over which path holds the photon sums to one
        let total = prob(PolarizationProjection::Any, "a") + prob(PolarizationProjection::Any, "b");
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn postselect_rejects_bad_patterns() {
        let r = reg(&["a"]);
        let input = qubit(&r, "a", Complex64::ONE, Complex64::ZERO);
        let unknown = DetectionPattern {
            detectors: vec![DetectorSpec::exactly_one("zz", PolarizationProjection::Any)],
            undetected: UndetectedPolicy::Vacuum,
        };
        assert_eq!(
            postselect(&input, &unknown).unwrap_err(),
            CircuitError::UnknownDetectorPath("zz".into())
        );
        let threshold_state = DetectionPattern {
            detectors: vec![DetectorSpec {
                path: "a".into(),
                projection: PolarizationProjection::horizontal(),
                requirement: PhotonRequirement::AtLeast(1),
            }],
            undetected: UndetectedPolicy::Vacuum,
        };
        assert_eq!(
            postselect(&input, &threshold_state).unwrap_err(),
            CircuitError::UnsupportedPattern
        );
    }

    #[test]
    fn threshold_any_detection_keeps_bunched_terms() {
        let r = reg(&["a"]);
        let pa = r.path("a").unwrap();
        let two = PhotonicState::basis(r.clone(), &[(pa, Polarization::H, 2)]).unwrap();
        let pattern = DetectionPattern {
            detectors: vec![DetectorSpec {
                path: "a".into(),
                projection: PolarizationProjection::Any,
                requirement: PhotonRequirement::AtLeast(1),
            }],
            undetected: UndetectedPolicy::Vacuum,
        };
        let res = postselect(&two, &pattern).unwrap();
        assert!((res.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_gate_identity_program_preserves_diagonal() {
        let r = reg(&["sig", "ctrl"]);
        let s = c(FRAC_1_SQRT_2, 0.0);
        let input = ppg_input(&r, s, s, 0.0);
        let res = ppg(
            &input,
            "sig",
            "ctrl",
            0.0,
            PhaseGateRegime::PostselectQuarter,
        )
        .unwrap();
        assert!((res.probability - 0.25).abs() < 1e-12);
        let d = qubit(&r, "sig", s, s);
        assert!(res.state.overlap(&d).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn phase_gate_pi_program_maps_diagonal_to_antidiagonal() {
        let r = reg(&["sig", "ctrl"]);
        let s = c(FRAC_1_SQRT_2, 0.0);
        let input = ppg_input(&r, s, s, PI);
        let res = ppg(
            &input,
            "sig",
            "ctrl",
            PI,
            PhaseGateRegime::PostselectQuarter,
        )
        .unwrap();
        assert!((res.probability - 0.25).abs() < 1e-12);
        let a = qubit(&r, "sig", s, -s);
        assert!(res.state.overlap(&a).unwrap() > 1.0 - 1e-12);
        // orthogonal to the input |D⟩
        let d = qubit(&r, "sig", s, s);
        assert!(res.state.overlap(&d).unwrap() < 1e-9);
    }

    #[test]
    fn phase_gate_imprints_phi_on_v_for_random_programs() {
        // independent analytic oracle: x|H⟩ + y e^{iφ}|V⟩ at probability 1/4
        let r = reg(&["sig", "ctrl"]);
        for (k, phi) in [0.4, 1.3, 2.2, 4.0, 5.5].into_iter().enumerate() {
            let alpha = c(0.6, 0.1 * k as f64);
            let beta = c(0.2, 0.7);
            let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
            let (alpha, beta) = (alpha / n, beta / n);
            let input = ppg_input(&r, alpha, beta, phi);
            let res = ppg(
                &input,
                "sig",
                "ctrl",
                phi,
                PhaseGateRegime::PostselectQuarter,
            )
            .unwrap();
            let expected = qubit(&r, "sig", alpha, beta * Complex64::from_polar(1.0, phi));
            assert!((res.probability - 0.25).abs() < 1e-12, "phi={phi}");
            assert!(
                res.state.overlap(&expected).unwrap() > 1.0 - 1e-10,
                "phi={phi}"
            );
        }
    }

    #[test]
    fn phase_gate_feedforward_doubles_success() {
        let r = reg(&["sig", "ctrl"]);
        let s = c(FRAC_1_SQRT_2, 0.0);
        let phi = 1.1;
        let input = ppg_input(&r, s, s, phi);
        let res = ppg(&input, "sig", "ctrl", phi, PhaseGateRegime::FeedforwardHalf).unwrap();
        assert!((res.probability - 0.5).abs() < 1e-12);
        let expected = qubit(&r, "sig", s, s * Complex64::from_polar(1.0, phi));
        assert!(res.state.overlap(&expected).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn phase_gate_then_inverse_phase_gate_is_identity() {
        let r = reg(&["sig", "ctrl"]);
        let phi = 0.9;
        let alpha = c(0.48, 0.36);
        let beta = c(0.6, -0.53);
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let (alpha, beta) = (alpha / n, beta / n);
        let first = ppg(
            &ppg_input(&r, alpha, beta, phi),
            "sig",
            "ctrl",
            phi,
            PhaseGateRegime::PostselectQuarter,
        )
        .unwrap();
        // feed the conditional signal qubit into a second gate programmed at −φ
        let sig_h = first
            .state
            .basis_amplitude(&[(r.path("sig").unwrap(), Polarization::H, 1)]);
        let sig_v = first
            .state
            .basis_amplitude(&[(r.path("sig").unwrap(), Polarization::V, 1)]);
        let r2 = reg(&["sig", "ctrl"]);
        let sig_reg = reg(&["sig"]);
        let sig = qubit(&sig_reg, "sig", sig_h, sig_v);
        let ctrl_reg = reg(&["ctrl"]);
        let ctrl = PhotonicState::single_photon(
            ctrl_reg.clone(),
            ctrl_reg.path("ctrl").unwrap(),
            c(FRAC_1_SQRT_2, 0.0),
            Complex64::from_polar(FRAC_1_SQRT_2, -phi),
        )
        .unwrap();
        let input2 = sig.tensor(&ctrl).unwrap().embed_into(r2.clone()).unwrap();
        let second = ppg(
            &input2,
            "sig",
            "ctrl",
            -phi,
            PhaseGateRegime::PostselectQuarter,
        )
        .unwrap();
        assert!((second.probability - 0.25).abs() < 1e-12);
        let original = qubit(&r2, "sig", alpha, beta);
        assert!(second.state.overlap(&original).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn phase_gate_requires_control_photon() {
        let r = reg(&["sig", "ctrl"]);
        let sig_only = qubit(&r, "sig", Complex64::ONE, Complex64::ZERO);
        let err = ppg(
            &sig_only,
            "sig",
            "ctrl",
            0.0,
            PhaseGateRegime::PostselectQuarter,
        )
        .unwrap_err();
        assert_eq!(err, CircuitError::MissingControlPhoton("ctrl".into()));
    }

    #[test]
    fn inconsistent_corrections_are_flagged() {
        let r = reg(&["sig", "ctrl"]);
        let s = c(FRAC_1_SQRT_2, 0.0);
        let phi = 0.7;
        let input = ppg_input(&r, s, s, phi);
        let gate = CircuitSpec::new(
            r.clone(),
            vec![
                ElementSpec::PhaseShifter {
                    path: "ctrl".into(),
                    pol: Polarization::V,
                    phi: PI,
                },
                ElementSpec::Pbs {
                    path_a: "sig".into(),
                    path_b: "ctrl".into(),
                },
                ElementSpec::HadamardPlate {
                    path: "ctrl".into(),
                },
            ],
        )
        .unwrap();
        let evolved = gate.evolve(&input).unwrap();
        let herald = |projection| DetectionPattern {
            detectors: vec![
                DetectorSpec::exactly_one("ctrl", projection),
                DetectorSpec::exactly_one("sig", PolarizationProjection::Any),
            ],
            undetected: UndetectedPolicy::Unconstrained,
        };
        let empty = CircuitSpec::new(r.clone(), vec![]).unwrap();
        // deliberately omit the V-outcome correction: branches disagree
        let branches = vec![
            FeedForwardBranch {
                label: "H".into(),
                herald: herald(PolarizationProjection::horizontal()),
                correction: None,
                completion: empty.clone(),
            },
            FeedForwardBranch {
                label: "V".into(),
                herald: herald(PolarizationProjection::vertical()),
                correction: None,
                completion: empty,
            },
        ];
        let err = feed_forward(&evolved, &branches).unwrap_err();
        assert!(matches!(err, CircuitError::InconsistentCorrections(_)));
    }
}
