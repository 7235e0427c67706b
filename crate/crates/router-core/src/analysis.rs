//! Estimators turning raw or simulated coincidence counts into routing
//! probabilities, fidelities, contrasts and fringe visibilities, with
//! first-order uncertainty propagation from Poissonian counting errors
//! (`σ_N = √N`).
//!
//! Count corrections subtract the estimated accidental contribution without
//! clamping: small negative corrected counts are propagated as-is with their
//! enlarged uncertainties. Summary spreads use the population standard
//! deviation, which reproduces the reference tables' quoted spreads.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::invert_real;
use crate::noise::CountRecord;
use crate::router::SignalQubit;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no counts to analyze")]
    ZeroCounts,
    #[error("corrected counts sum to {0}, cannot form a probability")]
    NonPositiveTotal(f64),
    #[error("fringe fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("fringe fit needs > π of phase span, got {0:.4} rad")]
    InsufficientSpan(f64),
    #[error("fringe fit inputs have mismatched lengths")]
    LengthMismatch,
    #[error("singular normal equations in fringe fit")]
    SingularFit,
    #[error("noise floor {floor} is not below the fitted offset {offset}")]
    FloorAboveOffset { floor: f64, offset: f64 },
    #[error("fidelity table needs exactly 12 entries (6 states × 2 settings), got {0}")]
    IncompleteTable(usize),
    #[error("density matrix is not {0}")]
    InvalidDensity(&'static str),
}

/// A derived quantity with its propagated one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Estimate { value, sigma }
    }

    /// A raw count with Poisson error √N.
    pub fn from_count(count: u64) -> Self {
        Estimate {
            value: count as f64,
            sigma: (count as f64).sqrt(),
        }
    }
}

/// Probability of leaving by the second output port, `P2 = cc2/(cc1+cc2)`,
/// with binomial/Poisson error propagation. `P1 = 1 − P2` by construction.
pub fn routing_probability(cc1: u64, cc2: u64) -> Result<Estimate, AnalysisError> {
    if cc1 + cc2 == 0 {
        return Err(AnalysisError::ZeroCounts);
    }
    routing_probability_corrected(&Estimate::from_count(cc1), &Estimate::from_count(cc2))
}

/// `P2` from corrected (possibly non-integer, possibly negative) counts with
/// independent uncertainties.
pub fn routing_probability_corrected(
    cc1: &Estimate,
    cc2: &Estimate,
) -> Result<Estimate, AnalysisError> {
    let total = cc1.value + cc2.value;
    if total <= 0.0 {
        return Err(AnalysisError::NonPositiveTotal(total));
    }
    let p2 = cc2.value / total;
    let sigma =
        ((cc1.value * cc2.sigma).powi(2) + (cc2.value * cc1.sigma).powi(2)).sqrt() / total.powi(2);
    Ok(Estimate::new(p2, sigma))
}

/// Corrected counts for both ports: raw minus the accidental estimate, with
/// the Poisson error of the raw count and of the accidental estimate
/// combined in quadrature. Not clamped at zero.
pub fn subtract_accidentals(record: &CountRecord) -> (Estimate, Estimate) {
    let corrected =
        |raw: u64, acc: f64| Estimate::new(raw as f64 - acc, (raw as f64 + acc.max(0.0)).sqrt());
    (
        corrected(record.cc1, record.accidental_cc1),
        corrected(record.cc2, record.accidental_cc2),
    )
}

/// Fidelity from the coincidence rates under the parallel and orthogonal
/// projections: `R = n_par/n_orth`, `F = R/(1+R) = n_par/(n_par+n_orth)`;
/// `R = ∞` (no orthogonal counts) gives `F = 1`.
pub fn fidelity_from_counts(n_parallel: u64, n_orthogonal: u64) -> Result<Estimate, AnalysisError> {
    if n_parallel + n_orthogonal == 0 {
        return Err(AnalysisError::ZeroCounts);
    }
    fidelity_from_counts_corrected(
        &Estimate::from_count(n_parallel),
        &Estimate::from_count(n_orthogonal),
    )
}

/// Fidelity from corrected projection counts.
pub fn fidelity_from_counts_corrected(
    n_parallel: &Estimate,
    n_orthogonal: &Estimate,
) -> Result<Estimate, AnalysisError> {
    // same ratio form as the routing probability with the roles swapped
    let p = routing_probability_corrected(n_orthogonal, n_parallel)?;
    Ok(p)
}

/// 2×2 Hermitian unit-trace polarization density matrix over {H, V}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationDensity {
    pub hh: f64,
    pub hv: Complex64,
    pub vv: f64,
}

impl PolarizationDensity {
    pub fn new(hh: f64, hv: Complex64, vh: Complex64, vv: f64) -> Result<Self, AnalysisError> {
        if (hv - vh.conj()).norm() > 1e-12 {
            return Err(AnalysisError::InvalidDensity("Hermitian"));
        }
        if (hh + vv - 1.0).abs() > 1e-12 {
            return Err(AnalysisError::InvalidDensity("unit trace"));
        }
        let disc = ((hh - vv) / 2.0).powi(2) + hv.norm_sqr();
        let lambda_min = (hh + vv) / 2.0 - disc.sqrt();
        if lambda_min < -1e-12 {
            return Err(AnalysisError::InvalidDensity("positive semidefinite"));
        }
        Ok(PolarizationDensity { hh, hv, vv })
    }

    pub fn from_pure(qubit: &SignalQubit) -> Self {
        PolarizationDensity {
            hh: qubit.alpha.norm_sqr(),
            hv: qubit.alpha * qubit.beta.conj(),
            vv: qubit.beta.norm_sqr(),
        }
    }

    pub fn maximally_mixed() -> Self {
        PolarizationDensity {
            hh: 0.5,
            hv: Complex64::ZERO,
            vv: 0.5,
        }
    }
}

/// State-level fidelity `⟨ψ|ρ|ψ⟩` of the output density against the target
/// qubit.
pub fn fidelity_from_state(rho: &PolarizationDensity, target: &SignalQubit) -> f64 {
    let a = target.alpha;
    let b = target.beta;
    let value = a.conj() * a * rho.hh
        + a.conj() * b * rho.hv
        + b.conj() * a * rho.hv.conj()
        + b.conj() * b * rho.vv;
    value.re
}

/// Per-state routing probabilities for both control settings.
#[derive(Debug, Clone)]
pub struct ContrastRow {
    pub state: String,
    pub p2_off: Estimate,
    pub p2_on: Estimate,
}

/// Mean ON/OFF routing contrast per output port.
#[derive(Debug, Clone)]
pub struct ContrastSummary {
    /// `(1 − P2(OFF)) / (1 − P2(ON))` averaged over states.
    pub port1: Estimate,
    /// `P2(ON) / P2(OFF)` averaged over states.
    pub port2: Estimate,
    pub per_state_port1: Vec<(String, Estimate)>,
    pub per_state_port2: Vec<(String, Estimate)>,
    /// States whose contrast was unbounded (division by a non-positive
    /// corrected probability), excluded from the means.
    pub unbounded: Vec<String>,
}

fn ratio(numer: &Estimate, denom: &Estimate) -> Option<Estimate> {
    if denom.value <= 0.0 {
        return None;
    }
    let value = numer.value / denom.value;
    let sigma = ((numer.sigma / denom.value).powi(2)
        + (numer.value * denom.sigma / denom.value.powi(2)).powi(2))
    .sqrt();
    Some(Estimate::new(value, sigma))
}

fn mean_and_population_sigma(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Estimate::new(mean, var.sqrt())
}

/// Routing contrast summary over the probe-state table: per-state contrast
/// ratios and their unweighted means with population spreads.
pub fn contrast_summary(rows: &[ContrastRow]) -> Result<ContrastSummary, AnalysisError> {
    if rows.is_empty() {
        return Err(AnalysisError::ZeroCounts);
    }
    let mut per1 = Vec::new();
    let mut per2 = Vec::new();
    let mut unbounded = Vec::new();
    for row in rows {
        let p1_off = Estimate::new(1.0 - row.p2_off.value, row.p2_off.sigma);
        let p1_on = Estimate::new(1.0 - row.p2_on.value, row.p2_on.sigma);
        match (ratio(&p1_off, &p1_on), ratio(&row.p2_on, &row.p2_off)) {
            (Some(c1), Some(c2)) => {
                per1.push((row.state.clone(), c1));
                per2.push((row.state.clone(), c2));
            }
            _ => unbounded.push(row.state.clone()),
        }
    }
    if per1.is_empty() {
        return Err(AnalysisError::ZeroCounts);
    }
    let port1 = mean_and_population_sigma(&per1.iter().map(|(_, e)| e.value).collect::<Vec<_>>());
    let port2 = mean_and_population_sigma(&per2.iter().map(|(_, e)| e.value).collect::<Vec<_>>());
    Ok(ContrastSummary {
        port1,
        port2,
        per_state_port1: per1,
        per_state_port2: per2,
        unbounded,
    })
}

/// Weighted harmonic fit `c(φ) = A + B·cos(scale·φ − φ0)`.
#[derive(Debug, Clone)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase0: f64,
    /// Abscissa scale applied before the unit-frequency fit (1 when the
    /// phases are already fringe radians).
    pub phase_scale: f64,
    /// Raw visibility `B/A`.
    pub visibility: Estimate,
    pub chi2: f64,
    /// Covariance of the linear coefficients (A, B·cosφ0, B·sinφ0).
    cov: [[f64; 3]; 3],
}

const MIN_FRINGE_SAMPLES: usize = 5;

fn linear_harmonic_fit(
    phases: &[f64],
    counts: &[f64],
    sigmas: &[f64],
    scale: f64,
) -> Result<FringeFit, AnalysisError> {
    let weights: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    // normal equations for c = A + C·cos(scale·φ) + S·sin(scale·φ)
    let mut m = vec![vec![0.0; 3]; 3];
    let mut b = [0.0; 3];
    for ((&x, &y), &w) in phases.iter().zip(counts).zip(&weights) {
        let basis = [1.0, (scale * x).cos(), (scale * x).sin()];
        for i in 0..3 {
            b[i] += w * basis[i] * y;
            for j in 0..3 {
                m[i][j] += w * basis[i] * basis[j];
            }
        }
    }
    let cov_full = invert_real(&m).ok_or(AnalysisError::SingularFit)?;
    let sol = {
        let mut x = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                x[i] += cov_full[i][j] * b[j];
            }
        }
        x
    };
    let (a, c, s) = (sol[0], sol[1], sol[2]);
    let amplitude = c.hypot(s);
    let phase0 = s.atan2(c);
    let chi2: f64 = phases
        .iter()
        .zip(counts)
        .zip(&weights)
        .map(|((&x, &y), &w)| {
            let model = a + c * (scale * x).cos() + s * (scale * x).sin();
            w * (y - model).powi(2)
        })
        .sum();
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = cov_full[i][j];
        }
    }
    // delta method for V = √(C²+S²)/A
    let visibility = amplitude / a;
    let grad = if amplitude > 0.0 {
        [
            -amplitude / (a * a),
            c / (a * amplitude),
            s / (a * amplitude),
        ]
    } else {
        [0.0, 1.0 / a, 1.0 / a]
    };
    let var = quadratic_form(&cov, &grad);
    Ok(FringeFit {
        offset: a,
        amplitude,
        phase0,
        phase_scale: scale,
        visibility: Estimate::new(visibility, var.max(0.0).sqrt()),
        chi2,
        cov,
    })
}

fn quadratic_form(cov: &[[f64; 3]; 3], grad: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += grad[i] * cov[i][j] * grad[j];
        }
    }
    acc
}

fn validate_fringe_inputs(
    phases: &[f64],
    counts: &[f64],
    sigmas: &[f64],
) -> Result<(), AnalysisError> {
    if phases.len() != counts.len() || counts.len() != sigmas.len() {
        return Err(AnalysisError::LengthMismatch);
    }
    if phases.len() < MIN_FRINGE_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            needed: MIN_FRINGE_SAMPLES,
            got: phases.len(),
        });
    }
    Ok(())
}

fn span(phases: &[f64]) -> f64 {
    let max = phases.iter().copied().fold(f64::MIN, f64::max);
    let min = phases.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

/// Weighted least-squares harmonic fit at unit frequency. Phases must be in
/// fringe radians and span more than π. The model is linear in
/// (A, B·cosφ0, B·sinφ0), so the normal-equation solve is the exact global
/// optimum.
pub fn fit_fringe(
    phases: &[f64],
    counts: &[f64],
    sigmas: &[f64],
) -> Result<FringeFit, AnalysisError> {
    validate_fringe_inputs(phases, counts, sigmas)?;
    let s = span(phases);
    if s <= std::f64::consts::PI {
        return Err(AnalysisError::InsufficientSpan(s));
    }
    linear_harmonic_fit(phases, counts, sigmas, 1.0)
}

/// Harmonic fit with the abscissa scale estimated from the data.
///
/// Instrument tilt readouts are not generally in fringe radians; this scans
/// the scale factor over a deterministic grid, keeps the χ² minimum, refines
/// it parabolically and then runs the exact linear fit at the chosen scale.
/// The scaled span must still exceed π.
pub fn fit_fringe_scaled(
    phases: &[f64],
    counts: &[f64],
    sigmas: &[f64],
) -> Result<FringeFit, AnalysisError> {
    validate_fringe_inputs(phases, counts, sigmas)?;
    let raw_span = span(phases);
    if raw_span <= 0.0 {
        return Err(AnalysisError::InsufficientSpan(0.0));
    }
    // scan scales giving the data between ~0.6 and ~3 fringe periods
    let lo = (1.05 * std::f64::consts::PI / raw_span).max(0.05);
    let hi = 6.0 * std::f64::consts::PI / raw_span;
    let steps = 600;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=steps {
        let scale = lo + (hi - lo) * k as f64 / steps as f64;
        if let Ok(fit) = linear_harmonic_fit(phases, counts, sigmas, scale)
            && fit.chi2 < best.0
        {
            best = (fit.chi2, scale);
        }
    }
    // parabolic refinement around the grid minimum
    let h = (hi - lo) / steps as f64;
    let mut scale = best.1;
    for _ in 0..40 {
        let c0 = linear_harmonic_fit(phases, counts, sigmas, scale - h)?.chi2;
        let c1 = linear_harmonic_fit(phases, counts, sigmas, scale)?.chi2;
        let c2 = linear_harmonic_fit(phases, counts, sigmas, scale + h)?.chi2;
        let denom = c0 - 2.0 * c1 + c2;
        if denom.abs() < 1e-18 {
            break;
        }
        let step = 0.5 * h * (c0 - c2) / denom;
        scale = (scale + step.clamp(-h, h)).max(lo);
        if step.abs() < 1e-12 {
            break;
        }
    }
    linear_harmonic_fit(phases, counts, sigmas, scale)
}

/// Visibility with the fitted offset reduced by a constant noise floor:
/// `V_corr = B/(A − floor)`, uncertainty from the fit covariance.
pub fn corrected_visibility(fit: &FringeFit, noise_floor: f64) -> Result<Estimate, AnalysisError> {
    if noise_floor >= fit.offset {
        return Err(AnalysisError::FloorAboveOffset {
            floor: noise_floor,
            offset: fit.offset,
        });
    }
    let a_eff = fit.offset - noise_floor;
    let b = fit.amplitude;
    let value = b / a_eff;
    let c = b * fit.phase0.cos();
    let s = b * fit.phase0.sin();
    let grad = if b > 0.0 {
        [-b / (a_eff * a_eff), c / (a_eff * b), s / (a_eff * b)]
    } else {
        [0.0, 1.0 / a_eff, 1.0 / a_eff]
    };
    let var = quadratic_form(&fit.cov, &grad);
    Ok(Estimate::new(value, var.max(0.0).sqrt()))
}

/// Mean over the twelve per-(state, setting) fidelities with the population
/// spread.
pub fn mean_fidelity(table: &[Estimate]) -> Result<Estimate, AnalysisError> {
    if table.len() != 12 {
        return Err(AnalysisError::IncompleteTable(table.len()));
    }
    Ok(mean_and_population_sigma(
        &table.iter().map(|e| e.value).collect::<Vec<_>>(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{CountRecord, CountRegime};
    use crate::router::ProbeState;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn symmetric_counts_give_half() {
        let p = routing_probability(50, 50).unwrap();
        assert!((p.value - 0.5).abs() < 1e-15);
        // σ = √(c1·c2/N³) = √(2500/10⁶) = 0.05
        assert!((p.sigma - 0.05).abs() < 1e-12);
    }

    #[test]
    fn one_sided_counts_give_unity() {
        let p = routing_probability(0, 250).unwrap();
        assert!((p.value - 1.0).abs() < 1e-15);
        assert_eq!(p.sigma, 0.0);
    }

    #[test]
    fn zero_counts_rejected() {
        assert_eq!(
            routing_probability(0, 0).unwrap_err(),
            AnalysisError::ZeroCounts
        );
    }

    #[test]
    fn reference_scale_routing_row() {
        // counts at the scale behind a P2 = 0.827 ± 0.024 table row
        let n = 248u64;
        let cc2 = (0.827f64 * n as f64).round() as u64;
        let cc1 = n - cc2;
        let p = routing_probability(cc1, cc2).unwrap();
        assert!((p.value - 0.827).abs() < 0.002);
        assert!((p.sigma - 0.024).abs() < 0.002);
    }

    #[test]
    fn doubling_counts_shrinks_sigma_by_sqrt_two() {
        let p1 = routing_probability(300, 700).unwrap();
        let p2 = routing_probability(600, 1400).unwrap();
        let shrink = p1.sigma / p2.sigma;
        assert!((shrink - std::f64::consts::SQRT_2).abs() < 0.01 * std::f64::consts::SQRT_2);
        let f1 = fidelity_from_counts(300, 700).unwrap();
        let f2 = fidelity_from_counts(600, 1400).unwrap();
        let shrink = f1.sigma / f2.sigma;
        assert!((shrink - std::f64::consts::SQRT_2).abs() < 0.01 * std::f64::consts::SQRT_2);
    }

    #[test]
    fn subtraction_without_accidentals_is_identity() {
        let record = CountRecord {
            regime: CountRegime::Interfering,
            duration_s: 120.0,
            cc1: 40,
            cc2: 11,
            accidental_cc1: 0.0,
            accidental_cc2: 0.0,
        };
        let (c1, c2) = subtract_accidentals(&record);
        assert_eq!(c1.value, 40.0);
        assert_eq!(c2.value, 11.0);
        assert!((c1.sigma - 40f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn subtraction_reproduces_corrected_routing_row() {
        // raw P2 = 0.123 → corrected 0.019 given matching accidental inputs
        let n = 300.0f64;
        let cc2 = (0.123 * n).round() as u64; // 37
        let cc1 = n as u64 - cc2; // 263
        // choose accidentals consistent with the corrected row value
        let acc2 = 32.0;
        let corrected_total = (cc1 as f64 - 10.0) + (cc2 as f64 - acc2);
        let p2_corr = (cc2 as f64 - acc2) / corrected_total;
        assert!((p2_corr - 0.019).abs() < 0.003);
        let record = CountRecord {
            regime: CountRegime::Interfering,
            duration_s: 18000.0,
            cc1,
            cc2,
            accidental_cc1: 10.0,
            accidental_cc2: acc2,
        };
        let (c1, c2) = subtract_accidentals(&record);
        let p = routing_probability_corrected(&c1, &c2).unwrap();
        assert!((p.value - p2_corr).abs() < 1e-12);
        // corrected σ exceeds the raw σ
        let raw = routing_probability(cc1, cc2).unwrap();
        assert!(p.sigma > raw.sigma);
    }

    #[test]
    fn negative_corrected_counts_are_not_clamped() {
        let record = CountRecord {
            regime: CountRegime::Interfering,
            duration_s: 120.0,
            cc1: 100,
            cc2: 3,
            accidental_cc1: 1.0,
            accidental_cc2: 5.0,
        };
        let (c1, c2) = subtract_accidentals(&record);
        assert!(c2.value < 0.0);
        let p = routing_probability_corrected(&c1, &c2).unwrap();
        assert!(p.value < 0.0);
    }

    #[test]
    fn fidelity_trivial_cases() {
        let equal = fidelity_from_counts(100, 100).unwrap();
        assert!((equal.value - 0.5).abs() < 1e-15);
        let perfect = fidelity_from_counts(100, 0).unwrap();
        assert!((perfect.value - 1.0).abs() < 1e-15);
        assert_eq!(
            fidelity_from_counts(0, 0).unwrap_err(),
            AnalysisError::ZeroCounts
        );
        // the reference corrected-mean scale: R = 0.907/0.093
        let f = fidelity_from_counts(907, 93).unwrap();
        assert!((f.value - 0.907).abs() < 1e-12);
    }

    #[test]
    fn state_fidelity_trivial_cases() {
        let d = ProbeState::D.qubit();
        let rho = PolarizationDensity::from_pure(&d);
        assert!((fidelity_from_state(&rho, &d) - 1.0).abs() < 1e-12);
        let mixed = PolarizationDensity::maximally_mixed();
        for probe in ProbeState::ALL {
            assert!((fidelity_from_state(&mixed, &probe.qubit()) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn density_validation() {
        assert!(
            PolarizationDensity::new(
                0.5,
                Complex64::new(0.1, 0.2),
                Complex64::new(0.1, -0.2),
                0.5
            )
            .is_ok()
        );
        assert_eq!(
            PolarizationDensity::new(0.7, Complex64::ZERO, Complex64::ZERO, 0.5).unwrap_err(),
            AnalysisError::InvalidDensity("unit trace")
        );
        assert_eq!(
            PolarizationDensity::new(0.5, Complex64::new(0.6, 0.0), Complex64::new(0.6, 0.0), 0.5)
                .unwrap_err(),
            AnalysisError::InvalidDensity("positive semidefinite")
        );
        assert_eq!(
            PolarizationDensity::new(0.5, Complex64::new(0.1, 0.0), Complex64::new(0.2, 0.0), 0.5)
                .unwrap_err(),
            AnalysisError::InvalidDensity("Hermitian")
        );
    }

    #[test]
    fn estimator_consistency_on_exact_probabilities() {
        // fidelity from ideal projection probabilities equals the quadratic
        // form on the pure density
        let targets = [
            ProbeState::D.qubit(),
            ProbeState::R.qubit(),
            ProbeState::H.qubit(),
        ];
        let outputs = [
            ProbeState::D.qubit(),
            ProbeState::L.qubit(),
            ProbeState::D.qubit(),
        ];
        for (target, output) in targets.iter().zip(&outputs) {
            let rho = PolarizationDensity::from_pure(output);
            let f_state = fidelity_from_state(&rho, target);
            let p_par = f_state;
            let p_orth = 1.0 - f_state;
            let f_counts = fidelity_from_counts_corrected(
                &Estimate::new(p_par * 1e9, 0.0),
                &Estimate::new(p_orth * 1e9, 0.0),
            )
            .unwrap();
            assert!((f_counts.value - f_state).abs() < 1e-12);
        }
    }

    fn reference_routing_rows() -> Vec<ContrastRow> {
        // (state, raw P2 OFF/ON, corrected P2 OFF/ON) from the bundled
        // routing table
        let rows = [
            (
                "H",
                (0.123, 0.029),
                (0.827, 0.024),
                (0.019, 0.039),
                (0.939, 0.032),
            ),
            (
                "V",
                (0.145, 0.011),
                (0.840, 0.025),
                (0.012, 0.017),
                (0.940, 0.033),
            ),
            (
                "D",
                (0.131, 0.035),
                (0.854, 0.022),
                (0.035, 0.061),
                (0.909, 0.028),
            ),
            (
                "A",
                (0.174, 0.029),
                (0.855, 0.023),
                (0.039, 0.043),
                (0.914, 0.029),
            ),
            (
                "R",
                (0.170, 0.026),
                (0.892, 0.021),
                (0.039, 0.039),
                (0.961, 0.027),
            ),
            (
                "L",
                (0.141, 0.028),
                (0.825, 0.026),
                (0.019, 0.040),
                (0.935, 0.042),
            ),
        ];
        rows.iter()
            .map(|(s, off, on, _, _)| ContrastRow {
                state: s.to_string(),
                p2_off: Estimate::new(off.0, off.1),
                p2_on: Estimate::new(on.0, on.1),
            })
            .collect()
    }

    fn reference_corrected_rows() -> Vec<ContrastRow> {
        let rows = [
            ("H", (0.019, 0.039), (0.939, 0.032)),
            ("V", (0.012, 0.017), (0.940, 0.033)),
            ("D", (0.035, 0.061), (0.909, 0.028)),
            ("A", (0.039, 0.043), (0.914, 0.029)),
            ("R", (0.039, 0.039), (0.961, 0.027)),
            ("L", (0.019, 0.040), (0.935, 0.042)),
        ];
        rows.iter()
            .map(|(s, off, on)| ContrastRow {
                state: s.to_string(),
                p2_off: Estimate::new(off.0, off.1),
                p2_on: Estimate::new(on.0, on.1),
            })
            .collect()
    }

    #[test]
    fn contrast_summary_matches_reference_tables() {
        let raw = contrast_summary(&reference_routing_rows()).unwrap();
        assert!(
            (raw.port1.value - 5.7).abs() < 0.2,
            "port1 {}",
            raw.port1.value
        );
        assert!(
            (raw.port2.value - 5.8).abs() < 0.2,
            "port2 {}",
            raw.port2.value
        );
        let corrected = contrast_summary(&reference_corrected_rows()).unwrap();
        assert!(
            (corrected.port1.value - 15.7).abs() < 0.5,
            "port1 {}",
            corrected.port1.value
        );
        assert!(
            (corrected.port2.value - 41.8).abs() < 0.5,
            "port2 {}",
            corrected.port2.value
        );
        assert!((corrected.port1.sigma - 4.6).abs() < 0.1);
        assert!((corrected.port2.sigma - 19.7).abs() < 0.1);
        assert!(corrected.unbounded.is_empty());
    }

    #[test]
    fn perfect_routing_is_flagged_unbounded() {
        let rows = vec![ContrastRow {
            state: "H".into(),
            p2_off: Estimate::new(0.0, 0.01),
            p2_on: Estimate::new(1.0, 0.01),
        }];
        let err = contrast_summary(&rows).unwrap_err();
        assert_eq!(err, AnalysisError::ZeroCounts);
        // mixed table: the degenerate state is excluded with a notice
        let mut rows = reference_routing_rows();
        rows.push(ContrastRow {
            state: "X".into(),
            p2_off: Estimate::new(0.0, 0.01),
            p2_on: Estimate::new(1.0, 0.01),
        });
        let summary = contrast_summary(&rows).unwrap();
        assert_eq!(summary.unbounded, vec!["X".to_string()]);
        assert_eq!(summary.per_state_port1.len(), 6);
    }

    #[test]
    fn noiseless_fringe_roundtrip() {
        let a = 50.0;
        let b = 38.0;
        let phi0 = 0.6;
        let phases: Vec<f64> = (0..12).map(|k| k as f64 * 0.55 - 1.0).collect();
        let counts: Vec<f64> = phases.iter().map(|&x| a + b * (x - phi0).cos()).collect();
        let sigmas = vec![1.0; phases.len()];
        let fit = fit_fringe(&phases, &counts, &sigmas).unwrap();
        assert!((fit.offset - a).abs() < 1e-6);
        assert!((fit.amplitude - b).abs() < 1e-6);
        assert!((fit.phase0 - phi0).abs() < 1e-6);
        assert!((fit.visibility.value - 0.76).abs() < 1e-6);
        assert!(fit.chi2 < 1e-12);
    }

    #[test]
    fn constant_data_fits_zero_amplitude() {
        let phases: Vec<f64> = (0..8).map(|k| k as f64 * 0.7).collect();
        let counts = vec![42.0; 8];
        let sigmas = vec![2.0; 8];
        let fit = fit_fringe(&phases, &counts, &sigmas).unwrap();
        assert!(fit.amplitude.abs() < 1e-9);
        assert!(fit.visibility.value.abs() < 1e-10);
    }

    #[test]
    fn fringe_fit_preconditions() {
        let sigmas = vec![1.0; 4];
        let err = fit_fringe(&[0.0, 1.0, 2.0, 3.5], &[1.0, 2.0, 1.0, 2.0], &sigmas).unwrap_err();
        assert!(matches!(err, AnalysisError::TooFewSamples { .. }));
        let phases: Vec<f64> = (0..6).map(|k| k as f64 * 0.3).collect();
        let counts = vec![1.0; 6];
        let sigmas = vec![1.0; 6];
        let err = fit_fringe(&phases, &counts, &sigmas).unwrap_err();
        assert!(matches!(err, AnalysisError::InsufficientSpan(_)));
    }

    #[test]
    fn corrected_visibility_cases() {
        let a = 50.0;
        let b = 38.0;
        let phases: Vec<f64> = (0..12).map(|k| k as f64 * 0.55 - 1.0).collect();
        let counts: Vec<f64> = phases.iter().map(|&x| a + b * (x - 0.3).cos()).collect();
        let sigmas = vec![1.0; phases.len()];
        let fit = fit_fringe(&phases, &counts, &sigmas).unwrap();
        let same = corrected_visibility(&fit, 0.0).unwrap();
        assert!((same.value - fit.visibility.value).abs() < 1e-12);
        let corr = corrected_visibility(&fit, 10.1).unwrap();
        assert!((corr.value - b / (a - 10.1)).abs() < 1e-6);
        assert!(matches!(
            corrected_visibility(&fit, 51.0).unwrap_err(),
            AnalysisError::FloorAboveOffset { .. }
        ));
    }

    #[test]
    fn injected_floor_is_recovered_within_one_sigma() {
        // fringe with a known constant floor on top of genuine modulation
        let genuine_a = 40.0;
        let b = 36.0;
        let floor = 10.0;
        let phi0 = 1.1;
        let phases: Vec<f64> = (0..16).map(|k| k as f64 * 0.45 - 2.0).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1234);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let counts: Vec<f64> = phases
            .iter()
            .map(|&x| genuine_a + floor + b * (x - phi0).cos() + noise.sample(&mut rng))
            .collect();
        let sigmas = vec![2.0; phases.len()];
        let fit = fit_fringe(&phases, &counts, &sigmas).unwrap();
        let corrected = corrected_visibility(&fit, floor).unwrap();
        let genuine_visibility = b / genuine_a;
        assert!(
            (corrected.value - genuine_visibility).abs() < corrected.sigma,
            "corrected {} ± {} vs genuine {}",
            corrected.value,
            corrected.sigma,
            genuine_visibility
        );
    }

    #[test]
    fn scaled_fit_recovers_compressed_abscissa() {
        let a = 51.0;
        let b = 39.0;
        let scale = 2.7;
        let phi0 = 0.4;
        let phases: Vec<f64> = (0..11).map(|k| k as f64 * 0.19 - 0.9).collect();
        let counts: Vec<f64> = phases
            .iter()
            .map(|&x| a + b * (scale * x - phi0).cos())
            .collect();
        let sigmas = vec![1.0; phases.len()];
        let fit = fit_fringe_scaled(&phases, &counts, &sigmas).unwrap();
        assert!(
            (fit.phase_scale - scale).abs() < 0.01,
            "scale {}",
            fit.phase_scale
        );
        assert!((fit.visibility.value - b / a).abs() < 1e-4);
    }

    #[test]
    fn fit_coverage_over_seeded_noise_trials() {
        let a = 100.0;
        let b = 60.0;
        let phi0 = 0.8;
        let sigma = 4.0;
        let phases: Vec<f64> = (0..20).map(|k| k as f64 * 0.36).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut hits = 0;
        let trials = 1000;
        for _ in 0..trials {
            let counts: Vec<f64> = phases
                .iter()
                .map(|&x| a + b * (x - phi0).cos() + noise.sample(&mut rng))
                .collect();
            let sigmas = vec![sigma; phases.len()];
            let fit = fit_fringe(&phases, &counts, &sigmas).unwrap();
            // parameter errors via the delta method
            let c = fit.amplitude * fit.phase0.cos();
            let s = fit.amplitude * fit.phase0.sin();
            let sigma_a = fit.cov[0][0].sqrt();
            let gb = [0.0, c / fit.amplitude, s / fit.amplitude];
            let sigma_b = quadratic_form(&fit.cov, &gb).sqrt();
            let gp = [
                0.0,
                -s / (fit.amplitude * fit.amplitude),
                c / (fit.amplitude * fit.amplitude),
            ];
            let sigma_p = quadratic_form(&fit.cov, &gp).sqrt();
            let ok = (fit.offset - a).abs() <= 3.0 * sigma_a
                && (fit.amplitude - b).abs() <= 3.0 * sigma_b
                && (fit.phase0 - phi0).abs() <= 3.0 * sigma_p;
            if ok {
                hits += 1;
            }
        }
        assert!(hits >= 990, "only {hits}/{trials} trials within 3σ");
    }

    #[test]
    fn mean_fidelity_reproduces_reference_table() {
        let raw = [
            0.940, 0.900, 0.959, 0.972, 0.838, 0.867, 0.871, 0.883, 0.892, 0.872, 0.805, 0.778,
        ];
        let corrected = [
            0.928, 0.899, 0.947, 0.968, 0.905, 0.887, 0.892, 0.951, 0.914, 0.905, 0.849, 0.834,
        ];
        let to_estimates = |v: &[f64]| {
            v.iter()
                .map(|&x| Estimate::new(x, 0.02))
                .collect::<Vec<_>>()
        };
        let m_raw = mean_fidelity(&to_estimates(&raw)).unwrap();
        let m_corr = mean_fidelity(&to_estimates(&corrected)).unwrap();
        assert!((m_raw.value - 0.881).abs() < 0.001);
        assert!((m_raw.sigma - 0.055).abs() < 0.005);
        assert!((m_corr.value - 0.907).abs() < 0.001);
        assert!((m_corr.sigma - 0.038).abs() < 0.005);
    }

    #[test]
    fn mean_fidelity_degenerate_cases() {
        let ones = vec![Estimate::new(1.0, 0.0); 12];
        let m = mean_fidelity(&ones).unwrap();
        assert_eq!(m.value, 1.0);
        assert_eq!(m.sigma, 0.0);
        assert_eq!(
            mean_fidelity(&ones[..7]).unwrap_err(),
            AnalysisError::IncompleteTable(7)
        );
    }
}
