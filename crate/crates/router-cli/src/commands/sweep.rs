//! Routing-probability table over a grid of control phases.

use std::path::Path;

use router_core::router::{ControlSetting, RouterConfig, run_router};

use super::{CmdContext, load_scenario};
use crate::CliError;
use crate::format::num;

pub fn run(
    ctx: &CmdContext,
    scenario_path: &Path,
    points: usize,
    max_phi: f64,
) -> Result<(), CliError> {
    if points == 0 {
        return Err(CliError::validation("phase grid is empty".into()));
    }
    let scenario = load_scenario(scenario_path)?;
    let ctx = &ctx.with_scenario_outputs(&scenario);
    let signal = scenario.signals[0]
        .to_qubit()
        .map_err(|e| CliError::validation(e.to_string()))?;
    let regime = scenario.router.regime.to_regime();
    let mut text = String::from("phi_rad,p1,p2,success_probability\n");
    for k in 0..points {
        let phi = if points == 1 {
            0.0
        } else {
            max_phi * k as f64 / (points - 1) as f64
        };
        let config = RouterConfig::full(ControlSetting::with_phi(phi), regime);
        let result =
            run_router(&signal, &config).map_err(|e| CliError::validation(e.to_string()))?;
        text.push_str(&format!(
            "{},{},{},{}\n",
            num(phi, ctx.precision),
            num(result.p1, ctx.precision),
            num(result.p2, ctx.precision),
            num(result.success_probability, ctx.precision),
        ));
    }
    ctx.emit(&text)
}
