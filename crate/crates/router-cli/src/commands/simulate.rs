//! Seeded Monte Carlo coincidence counting.
//!
//! Emits one CSV row per measurement block, alternating the interfering and
//! detuned regimes. In fidelity mode each (signal, control) pair is measured
//! under the parallel and the orthogonal output projection; in routing mode
//! the output detection is polarization-unresolved. Each stream draws from
//! its own deterministic substream (base seed plus stream index), so a fixed
//! scenario and seed reproduce the output byte for byte.

use std::path::Path;

use router_core::circuit::PolarizationProjection;
use router_core::noise::simulate_counts;
use router_core::router::SignalQubit;

use super::{CmdContext, load_scenario};
use crate::CliError;
use crate::format::num;
use crate::scenario::{MeasurementSpec, RunMode};

fn orthogonal(q: &SignalQubit) -> SignalQubit {
    SignalQubit {
        alpha: -q.beta.conj(),
        beta: q.alpha.conj(),
    }
}

fn projection_of(q: &SignalQubit) -> PolarizationProjection {
    PolarizationProjection::State(q.alpha, q.beta)
}

pub fn run(
    ctx: &CmdContext,
    scenario_path: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    let ctx = &ctx.with_scenario_outputs(&scenario);
    if scenario.run.mode != RunMode::MonteCarlo {
        return Err(CliError::validation(
            "simulate-counts requires run.mode = \"monte_carlo\"".into(),
        ));
    }
    let base_seed = seed_override
        .or(scenario.run.seed)
        .ok_or_else(|| CliError::validation("missing seed".into()))?;
    let duration = scenario.run.duration_s.expect("validated");
    let interval = scenario.run.interval_s;
    let params = scenario.source.to_params();

    let mut text = String::from(
        "signal_state,control_setting,regime,projection,duration_s,cc1,cc2,acc1,acc2\n",
    );
    let mut stream_index: u64 = 0;
    for control_spec in scenario.control_specs() {
        let config = scenario
            .config_for(&control_spec)
            .map_err(|e| CliError::validation(e.to_string()))?;
        for signal_spec in &scenario.signals {
            let signal = signal_spec
                .to_qubit()
                .map_err(|e| CliError::validation(e.to_string()))?;
            let projections: Vec<(&str, PolarizationProjection, PolarizationProjection)> =
                match scenario.run.measurement {
                    MeasurementSpec::Routing => vec![(
                        "none",
                        PolarizationProjection::Any,
                        PolarizationProjection::Any,
                    )],
                    MeasurementSpec::Fidelity => {
                        let par = projection_of(&signal);
                        let orth = projection_of(&orthogonal(&signal));
                        vec![("parallel", par, par), ("orthogonal", orth, orth)]
                    }
                };
            for (proj_label, p1, p2) in projections {
                let records = simulate_counts(
                    &params,
                    &signal,
                    &config,
                    (p1, p2),
                    duration,
                    interval,
                    base_seed.wrapping_add(stream_index),
                )
                .map_err(|e| CliError::validation(e.to_string()))?;
                stream_index += 1;
                for r in records {
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        signal_spec.label(),
                        control_spec.label(),
                        r.regime.label(),
                        proj_label,
                        num(r.duration_s, ctx.precision),
                        r.cc1,
                        r.cc2,
                        num(r.accidental_cc1, ctx.precision),
                        num(r.accidental_cc2, ctx.precision),
                    ));
                }
            }
        }
    }
    ctx.emit(&text)
}
