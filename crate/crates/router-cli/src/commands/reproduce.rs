//! Re-derive the bundled reference tables and check every derived value
//! against its expected band. Any failing row exits with code 2.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use router_core::analysis::{
    Estimate, contrast_summary, corrected_visibility, fit_fringe, fit_fringe_scaled, mean_fidelity,
};
use router_core::circuit::{PhaseGateRegime, PolarizationProjection, ppg};
use router_core::fock::{ModeRegistry, PhotonicState};
use router_core::noise::{
    DEFAULT_ACCIDENTAL_CUTOFF, SourceParams, accidental_rate, calibrate_efficiency,
    coherence_scan as noisy_coherence_scan,
};
use router_core::router::{
    ControlSetting, ProbeState, RouterConfig, RouterVariant, RoutingRegime, SignalQubit,
    coherence_scan, router_registry, routing_amplitudes, run_router,
};

use super::CmdContext;
use crate::CliError;
use crate::tables::{
    FIDELITY_TABLE, FRINGE_NOISE_FLOOR, FRINGE_TABLE, ROUTING_TABLE, contrast_rows,
    parse_fidelity_table, parse_fringe_table, parse_routing_table,
};

struct Check {
    name: String,
    expected: String,
    computed: String,
    pass: bool,
}

struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn new() -> Self {
        Report { checks: Vec::new() }
    }

    fn add(&mut self, name: &str, expected: String, computed: String, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            expected,
            computed,
            pass,
        });
    }

    fn add_band(&mut self, name: &str, value: f64, center: f64, half_width: f64) {
        self.add(
            name,
            format!("{center} ± {half_width}"),
            format!("{value:.6}"),
            (value - center).abs() <= half_width,
        );
    }

    fn add_range(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.add(
            name,
            format!("[{lo}, {hi}]"),
            format!("{value:.6}"),
            (lo..=hi).contains(&value),
        );
    }

    fn render(&self) -> String {
        let name_w = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(8)
            .max(5);
        let exp_w = self
            .checks
            .iter()
            .map(|c| c.expected.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let com_w = self
            .checks
            .iter()
            .map(|c| c.computed.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut text = format!(
            "{:<name_w$}  {:<exp_w$}  {:<com_w$}  verdict\n",
            "check", "expected", "computed"
        );
        for c in &self.checks {
            text.push_str(&format!(
                "{:<name_w$}  {:<exp_w$}  {:<com_w$}  {}\n",
                c.name,
                c.expected,
                c.computed,
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        text.push_str(&format!(
            "\n{} checks, {} passed, {} failed\n",
            self.checks.len(),
            self.checks.len() - failed,
            failed
        ));
        text
    }

    fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn load(dir: Option<&Path>, file: &str, bundled: &'static str) -> Result<String, CliError> {
    match dir {
        Some(d) => std::fs::read_to_string(d.join(file))
            .map_err(|e| CliError::validation(format!("cannot read {file}: {e}"))),
        None => Ok(bundled.to_string()),
    }
}

pub fn run(ctx: &CmdContext, data_dir: Option<&Path>) -> Result<(), CliError> {
    let mut report = Report::new();

    ideal_checks(&mut report);
    routing_checks(
        &mut report,
        &load(data_dir, "routing_probabilities.csv", ROUTING_TABLE)?,
    )?;
    fidelity_checks(
        &mut report,
        &load(data_dir, "output_fidelities.csv", FIDELITY_TABLE)?,
    )?;
    fringe_checks(
        &mut report,
        &load(data_dir, "coherence_fringe.csv", FRINGE_TABLE)?,
    )?;
    noise_checks(&mut report)?;

    ctx.emit(&report.render())?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(CliError::CheckFailure("reproduction checks failed".into()))
    }
}

fn ideal_checks(report: &mut Report) {
    let signal = ProbeState::D.qubit();
    for (regime, label, expected) in [
        (RoutingRegime::Basic, "success basic", 1.0 / 16.0),
        (RoutingRegime::SwapAugmented, "success swap", 1.0 / 8.0),
        (RoutingRegime::FeedForward, "success feed-forward", 0.25),
    ] {
        let res = run_router(
            &signal,
            &RouterConfig::full(ControlSetting::BALANCED, regime),
        )
        .expect("ideal run");
        report.add(
            label,
            format!("{expected} (exact)"),
            format!("{:.15}", res.success_probability),
            (res.success_probability - expected).abs() < 1e-12,
        );
    }

    // phase gate alone: 1/4 post-selected, 1/2 with feed-forward
    let r = ModeRegistry::new(["sig", "ctrl"]).unwrap();
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let sig_reg = ModeRegistry::new(["sig"]).unwrap();
    let ctrl_reg = ModeRegistry::new(["ctrl"]).unwrap();
    let input = PhotonicState::single_photon(sig_reg.clone(), sig_reg.path("sig").unwrap(), s, s)
        .unwrap()
        .tensor(
            &PhotonicState::single_photon(
                ctrl_reg.clone(),
                ctrl_reg.path("ctrl").unwrap(),
                s,
                Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, 1.1),
            )
            .unwrap(),
        )
        .unwrap()
        .embed_into(r)
        .unwrap();
    let quarter = ppg(
        &input,
        "sig",
        "ctrl",
        1.1,
        PhaseGateRegime::PostselectQuarter,
    )
    .unwrap();
    let half = ppg(&input, "sig", "ctrl", 1.1, PhaseGateRegime::FeedforwardHalf).unwrap();
    report.add(
        "phase gate success",
        "1/4 and 1/2 (exact)".into(),
        format!("{:.15} and {:.15}", quarter.probability, half.probability),
        (quarter.probability - 0.25).abs() < 1e-12 && (half.probability - 0.5).abs() < 1e-12,
    );

    // routing exclusivity and state preservation over the probe set
    let mut worst_off_p2: f64 = 0.0;
    let mut worst_on_p1: f64 = 0.0;
    let mut worst_fidelity_defect: f64 = 0.0;
    for probe in ProbeState::ALL {
        let q = probe.qubit();
        let off = run_router(
            &q,
            &RouterConfig::full(ControlSetting::OFF, RoutingRegime::Basic),
        )
        .unwrap();
        let on = run_router(
            &q,
            &RouterConfig::full(ControlSetting::ON, RoutingRegime::Basic),
        )
        .unwrap();
        worst_off_p2 = worst_off_p2.max(off.p2);
        worst_on_p1 = worst_on_p1.max(on.p1);
        let f_off =
            (off.out1_qubit.0 * q.alpha.conj() + off.out1_qubit.1 * q.beta.conj()).norm_sqr();
        let f_on = (on.out2_qubit.0 * q.alpha.conj() + on.out2_qubit.1 * q.beta.conj()).norm_sqr();
        worst_fidelity_defect = worst_fidelity_defect
            .max((f_off - 1.0).abs())
            .max((f_on - 1.0).abs());
    }
    report.add(
        "OFF leaks to port 2",
        "0 (< 1e-12)".into(),
        format!("{worst_off_p2:.2e}"),
        worst_off_p2 < 1e-12,
    );
    report.add(
        "ON leaks to port 1",
        "0 (< 1e-12)".into(),
        format!("{worst_on_p1:.2e}"),
        worst_on_p1 < 1e-12,
    );
    report.add(
        "ideal output fidelity",
        "1 (defect < 1e-12)".into(),
        format!("defect {worst_fidelity_defect:.2e}"),
        worst_fidelity_defect < 1e-12,
    );

    // closed-form output reproduction over random signals and phases
    let mut rng = ChaCha12Rng::seed_from_u64(2718);
    let registry = router_registry();
    let mut worst_defect: f64 = 0.0;
    for _ in 0..100 {
        let alpha = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let beta = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let signal = SignalQubit::new(alpha / n, beta / n).unwrap();
        let phi = rng.random::<f64>() * 2.0 * PI;
        let res = run_router(
            &signal,
            &RouterConfig::full(ControlSetting::with_phi(phi), RoutingRegime::Basic),
        )
        .unwrap();
        let (c1, c2) = routing_amplitudes(phi);
        let mut ip = Complex64::ZERO;
        let mut nrm = 0.0;
        for (path, amp) in [("OUT1", c1), ("OUT2", c2)] {
            let pid = registry.path(path).unwrap();
            for (pol, coeff) in [
                (router_core::fock::Polarization::H, signal.alpha),
                (router_core::fock::Polarization::V, signal.beta),
            ] {
                let sim = res.output_state.basis_amplitude(&[(pid, pol, 1)]);
                ip += sim * (amp * coeff).conj();
                nrm += sim.norm_sqr();
            }
        }
        worst_defect = worst_defect.max(1.0 - ip.norm() / nrm.sqrt());
    }
    report.add(
        "closed-form output overlap",
        "1 (defect < 1e-10, 100 random runs)".into(),
        format!("defect {worst_defect:.2e}"),
        worst_defect < 1e-10,
    );

    // ideal and detuned fringe visibility
    let phases: Vec<f64> = (0..16).map(|k| k as f64 * PI / 8.0).collect();
    let coh_config = RouterConfig {
        control: ControlSetting::BALANCED,
        regime: RoutingRegime::Basic,
        variant: RouterVariant::CoherenceTest { bd4_tilt: 0.0 },
    };
    let samples = coherence_scan(
        &ProbeState::H.qubit(),
        &coh_config,
        &phases,
        PolarizationProjection::diagonal(),
    )
    .unwrap();
    let counts: Vec<f64> = samples.iter().map(|s| s.probability).collect();
    let fit = fit_fringe(&phases, &counts, &vec![1.0; counts.len()]).unwrap();
    report.add(
        "ideal scan visibility",
        "1 (defect < 1e-10)".into(),
        format!("{:.12}", fit.visibility.value),
        (fit.visibility.value - 1.0).abs() < 1e-10,
    );
    let detuned = SourceParams {
        distinguishable: true,
        ..SourceParams::default()
    }
    .with_uniform_eta(0.5);
    let samples = noisy_coherence_scan(
        &detuned,
        &ProbeState::H.qubit(),
        &coh_config,
        &phases,
        PolarizationProjection::diagonal(),
    )
    .unwrap();
    let counts: Vec<f64> = samples.iter().map(|s| s.probability).collect();
    let fit = fit_fringe(&phases, &counts, &vec![1.0; counts.len()]).unwrap();
    report.add(
        "detuned scan visibility",
        "< 1e-9".into(),
        format!("{:.2e}", fit.visibility.value.abs()),
        fit.visibility.value.abs() < 1e-9,
    );
}

fn routing_checks(report: &mut Report, table: &str) -> Result<(), CliError> {
    let rows = parse_routing_table(table)?;
    let raw = contrast_summary(&contrast_rows(&rows, false))
        .map_err(|e| CliError::validation(e.to_string()))?;
    let corrected = contrast_summary(&contrast_rows(&rows, true))
        .map_err(|e| CliError::validation(e.to_string()))?;
    report.add_band("raw contrast port 1", raw.port1.value, 5.7, 0.2);
    report.add_band("raw contrast port 2", raw.port2.value, 5.8, 0.2);
    report.add_band(
        "corrected contrast port 1",
        corrected.port1.value,
        15.7,
        0.5,
    );
    report.add_band(
        "corrected contrast port 2",
        corrected.port2.value,
        41.8,
        0.5,
    );
    Ok(())
}

fn fidelity_checks(report: &mut Report, table: &str) -> Result<(), CliError> {
    let rows = parse_fidelity_table(table)?;
    if rows.len() != 12 {
        return Err(CliError::validation(format!(
            "fidelity table has {} rows, expected 12",
            rows.len()
        )));
    }
    for state in ["H", "V", "D", "A", "R", "L"] {
        for control in ["OFF", "ON"] {
            if !rows
                .iter()
                .any(|r| r.signal == state && r.control == control)
            {
                return Err(CliError::validation(format!(
                    "fidelity table is missing the {state}/{control} row"
                )));
            }
        }
    }
    let raw: Vec<Estimate> = rows.iter().map(|r| r.fidelity).collect();
    let corrected: Vec<Estimate> = rows.iter().map(|r| r.fidelity_corrected).collect();
    let m_raw = mean_fidelity(&raw).map_err(|e| CliError::validation(e.to_string()))?;
    let m_corr = mean_fidelity(&corrected).map_err(|e| CliError::validation(e.to_string()))?;
    report.add_band("mean fidelity raw", m_raw.value, 0.881, 0.001);
    report.add_band("fidelity spread raw", m_raw.sigma, 0.055, 0.005);
    report.add_band("mean fidelity corrected", m_corr.value, 0.907, 0.001);
    report.add_band("fidelity spread corrected", m_corr.sigma, 0.038, 0.005);
    Ok(())
}

fn fringe_checks(report: &mut Report, table: &str) -> Result<(), CliError> {
    let (phases, counts, sigmas) = parse_fringe_table(table)?;
    let fit = fit_fringe_scaled(&phases, &counts, &sigmas)
        .map_err(|e| CliError::validation(e.to_string()))?;
    report.add_range("fringe visibility raw", fit.visibility.value, 0.73, 0.79);
    let corrected = corrected_visibility(&fit, FRINGE_NOISE_FLOOR)
        .map_err(|e| CliError::validation(e.to_string()))?;
    report.add_range("fringe visibility corrected", corrected.value, 0.94, 1.00);
    Ok(())
}

fn noise_checks(report: &mut Report) -> Result<(), CliError> {
    let params = SourceParams::default();
    let signal = ProbeState::H.qubit();
    let config = RouterConfig::full(ControlSetting::OFF, RoutingRegime::Basic);
    let eta = calibrate_efficiency(&params, &signal, &config, 0.20)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let rates = accidental_rate(
        &params.with_uniform_eta(eta),
        &signal,
        &config,
        (PolarizationProjection::Any, PolarizationProjection::Any),
        DEFAULT_ACCIDENTAL_CUTOFF,
    )
    .map_err(|e| CliError::validation(e.to_string()))?;
    report.add(
        "accidental fraction calibration",
        "0.20 ± 0.001".into(),
        format!("{:.6} at η = {:.4}", rates.accidental_fraction(), eta),
        (rates.accidental_fraction() - 0.20).abs() < 1e-3,
    );
    Ok(())
}
