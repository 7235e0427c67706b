//! Turn count tables (and optionally a fringe table) into the derived result
//! tables: routing probabilities, fidelities with a mean row, contrast
//! summaries, and the fringe fit.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use router_core::analysis::{
    ContrastRow, Estimate, contrast_summary, corrected_visibility, fidelity_from_counts,
    fidelity_from_counts_corrected, fit_fringe_scaled, mean_fidelity, routing_probability,
    routing_probability_corrected, subtract_accidentals,
};
use router_core::noise::{CountRecord, CountRegime};

use super::CmdContext;
use crate::CliError;
use crate::format::num;
use crate::tables::parse_fringe_table;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    signal: String,
    control: String,
    projection: String,
}

#[derive(Debug, Default, Clone)]
struct Aggregate {
    cc1: u64,
    cc2: u64,
    acc1: f64,
    acc2: f64,
}

impl Aggregate {
    fn as_record(&self) -> CountRecord {
        CountRecord {
            regime: CountRegime::Interfering,
            duration_s: 0.0,
            cc1: self.cc1,
            cc2: self.cc2,
            accidental_cc1: self.acc1,
            accidental_cc2: self.acc2,
        }
    }
}

fn parse_counts(path: &Path) -> Result<BTreeMap<GroupKey, Aggregate>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read counts {path:?}: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::validation(format!("counts csv: {e}")))?
        .clone();
    let expected = [
        "signal_state",
        "control_setting",
        "regime",
        "projection",
        "duration_s",
        "cc1",
        "cc2",
        "acc1",
        "acc2",
    ];
    let header_fields: Vec<&str> = headers.iter().collect();
    if header_fields != expected {
        return Err(CliError::validation(format!(
            "counts csv header mismatch: expected {expected:?}, got {header_fields:?}"
        )));
    }
    let mut groups: BTreeMap<GroupKey, Aggregate> = BTreeMap::new();
    for result in rdr.records() {
        let record = result.map_err(|e| CliError::validation(format!("counts csv: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str, CliError> {
            record
                .get(idx)
                .ok_or_else(|| CliError::validation(format!("line {line}: missing column {idx}")))
        };
        let parse_u64 = |idx: usize| -> Result<u64, CliError> {
            field(idx)?
                .parse::<u64>()
                .map_err(|e| CliError::validation(format!("line {line}: {e}")))
        };
        let parse_f64 = |idx: usize| -> Result<f64, CliError> {
            field(idx)?
                .parse::<f64>()
                .map_err(|e| CliError::validation(format!("line {line}: {e}")))
        };
        // detuned normalization blocks are not part of the count tables
        if field(2)? != "interfering" {
            continue;
        }
        let key = GroupKey {
            signal: field(0)?.to_string(),
            control: field(1)?.to_string(),
            projection: field(3)?.to_string(),
        };
        let agg = groups.entry(key).or_default();
        agg.cc1 += parse_u64(5)?;
        agg.cc2 += parse_u64(6)?;
        agg.acc1 += parse_f64(7)?;
        agg.acc2 += parse_f64(8)?;
    }
    if groups.is_empty() {
        return Err(CliError::validation(
            "counts csv has no interfering rows".into(),
        ));
    }
    Ok(groups)
}

struct RoutingEntry {
    signal: String,
    control: String,
    p2: Estimate,
    p2_corrected: Estimate,
}

struct FidelityEntry {
    signal: String,
    control: String,
    fidelity: Estimate,
    fidelity_corrected: Estimate,
}

pub fn run(
    ctx: &CmdContext,
    counts_path: &Path,
    fringe_path: Option<&Path>,
    noise_floor: Option<f64>,
) -> Result<(), CliError> {
    let groups = parse_counts(counts_path)?;

    // routing table from polarization-unresolved rows
    let mut routing = Vec::new();
    for (key, agg) in groups.iter().filter(|(k, _)| k.projection == "none") {
        let raw = routing_probability(agg.cc1, agg.cc2)
            .map_err(|e| CliError::validation(format!("{}/{}: {e}", key.signal, key.control)))?;
        let (c1, c2) = subtract_accidentals(&agg.as_record());
        let corrected = routing_probability_corrected(&c1, &c2)
            .map_err(|e| CliError::validation(format!("{}/{}: {e}", key.signal, key.control)))?;
        routing.push(RoutingEntry {
            signal: key.signal.clone(),
            control: key.control.clone(),
            p2: raw,
            p2_corrected: corrected,
        });
    }

    // fidelity table from parallel/orthogonal projection pairs
    let mut fidelity = Vec::new();
    let par_keys: Vec<&GroupKey> = groups
        .keys()
        .filter(|k| k.projection == "parallel")
        .collect();
    for key in par_keys {
        let orth_key = GroupKey {
            projection: "orthogonal".into(),
            ..key.clone()
        };
        let Some(orth) = groups.get(&orth_key) else {
            return Err(CliError::validation(format!(
                "{}/{}: parallel rows without orthogonal rows",
                key.signal, key.control
            )));
        };
        let par = &groups[key];
        // the routed port carries the fidelity signal: port 1 for OFF,
        // port 2 for ON
        let routed = |agg: &Aggregate| -> Result<(u64, f64), CliError> {
            match key.control.as_str() {
                "OFF" => Ok((agg.cc1, agg.acc1)),
                "ON" => Ok((agg.cc2, agg.acc2)),
                other => Err(CliError::validation(format!(
                    "fidelity analysis requires OFF or ON control, got `{other}`"
                ))),
            }
        };
        let (n_par, acc_par) = routed(par)?;
        let (n_orth, acc_orth) = routed(orth)?;
        let raw = fidelity_from_counts(n_par, n_orth)
            .map_err(|e| CliError::validation(format!("{}/{}: {e}", key.signal, key.control)))?;
        let corr_par = Estimate::new(n_par as f64 - acc_par, (n_par as f64 + acc_par).sqrt());
        let corr_orth = Estimate::new(n_orth as f64 - acc_orth, (n_orth as f64 + acc_orth).sqrt());
        let corrected = fidelity_from_counts_corrected(&corr_par, &corr_orth)
            .map_err(|e| CliError::validation(format!("{}/{}: {e}", key.signal, key.control)))?;
        fidelity.push(FidelityEntry {
            signal: key.signal.clone(),
            control: key.control.clone(),
            fidelity: raw,
            fidelity_corrected: corrected,
        });
    }

    // contrast summaries need the six probe states under both settings
    let contrast_input = |corrected: bool| -> Vec<ContrastRow> {
        ["H", "V", "D", "A", "R", "L"]
            .iter()
            .filter_map(|state| {
                let find = |control: &str| {
                    routing
                        .iter()
                        .find(|r| r.signal == *state && r.control == control)
                        .map(|r| if corrected { r.p2_corrected } else { r.p2 })
                };
                Some(ContrastRow {
                    state: state.to_string(),
                    p2_off: find("OFF")?,
                    p2_on: find("ON")?,
                })
            })
            .collect()
    };
    let contrast_raw = contrast_summary(&contrast_input(false)).ok();
    let contrast_corrected = contrast_summary(&contrast_input(true)).ok();

    let fringe_fit = match fringe_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read fringe {path:?}: {e}")))?;
            let (phases, counts, sigmas) = parse_fringe_table(&text)?;
            let fit = fit_fringe_scaled(&phases, &counts, &sigmas)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let corrected = match noise_floor {
                Some(floor) => Some(
                    corrected_visibility(&fit, floor)
                        .map_err(|e| CliError::validation(e.to_string()))?,
                ),
                None => None,
            };
            Some((fit, corrected))
        }
        None => None,
    };

    // means over the twelve (state, setting) fidelities when complete
    let fidelity_mean = {
        let raw: Vec<Estimate> = fidelity.iter().map(|f| f.fidelity).collect();
        let corr: Vec<Estimate> = fidelity.iter().map(|f| f.fidelity_corrected).collect();
        match (mean_fidelity(&raw), mean_fidelity(&corr)) {
            (Ok(r), Ok(c)) => Some((r, c)),
            _ => None,
        }
    };

    let p = ctx.precision;
    let est = |e: &Estimate| json!({ "value": fnum(e.value, ctx), "sigma": fnum(e.sigma, ctx) });
    let report = json!({
        "routing": routing.iter().map(|r| json!({
            "signal": r.signal,
            "control": r.control,
            "p2": est(&r.p2),
            "p2_corrected": est(&r.p2_corrected),
        })).collect::<Vec<_>>(),
        "fidelity": fidelity.iter().map(|f| json!({
            "signal": f.signal,
            "control": f.control,
            "fidelity": est(&f.fidelity),
            "fidelity_corrected": est(&f.fidelity_corrected),
        })).collect::<Vec<_>>(),
        "fidelity_mean": fidelity_mean.map(|(raw, corr)| json!({
            "raw": est(&raw),
            "corrected": est(&corr),
        })),
        "contrast": {
            "raw": contrast_raw.as_ref().map(|s| json!({
                "port1": est(&s.port1),
                "port2": est(&s.port2),
                "unbounded": s.unbounded,
            })),
            "corrected": contrast_corrected.as_ref().map(|s| json!({
                "port1": est(&s.port1),
                "port2": est(&s.port2),
                "unbounded": s.unbounded,
            })),
        },
        "fringe": fringe_fit.as_ref().map(|(fit, corrected)| json!({
            "offset": fnum(fit.offset, ctx),
            "amplitude": fnum(fit.amplitude, ctx),
            "phase0": fnum(fit.phase0, ctx),
            "phase_scale": fnum(fit.phase_scale, ctx),
            "chi2": fnum(fit.chi2, ctx),
            "visibility": est(&fit.visibility),
            "corrected_visibility": corrected.as_ref().map(est),
        })),
    });

    let text = match ctx.format_or("json").as_str() {
        "json" => {
            let mut t = serde_json::to_string_pretty(&report).expect("serializable");
            t.push('\n');
            t
        }
        "csv" => {
            let mut t = String::new();
            if !routing.is_empty() {
                t.push_str(
                    "# routing\nsignal,control,p2,p2_sigma,p2_corrected,p2_corrected_sigma\n",
                );
            }
            for r in &routing {
                t.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.signal,
                    r.control,
                    num(r.p2.value, p),
                    num(r.p2.sigma, p),
                    num(r.p2_corrected.value, p),
                    num(r.p2_corrected.sigma, p)
                ));
            }
            if !fidelity.is_empty() {
                t.push_str(
                    "# fidelity\nsignal,control,fidelity,fidelity_sigma,fidelity_corrected,fidelity_corrected_sigma\n",
                );
                for f in &fidelity {
                    t.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        f.signal,
                        f.control,
                        num(f.fidelity.value, p),
                        num(f.fidelity.sigma, p),
                        num(f.fidelity_corrected.value, p),
                        num(f.fidelity_corrected.sigma, p)
                    ));
                }
                if let Some((raw, corr)) = &fidelity_mean {
                    t.push_str(&format!(
                        "mean,,{},{},{},{}\n",
                        num(raw.value, p),
                        num(raw.sigma, p),
                        num(corr.value, p),
                        num(corr.sigma, p)
                    ));
                }
            }
            if let (Some(raw), Some(corr)) = (&contrast_raw, &contrast_corrected) {
                t.push_str("# contrast\nkind,port1,port1_sigma,port2,port2_sigma\n");
                t.push_str(&format!(
                    "raw,{},{},{},{}\n",
                    num(raw.port1.value, p),
                    num(raw.port1.sigma, p),
                    num(raw.port2.value, p),
                    num(raw.port2.sigma, p)
                ));
                t.push_str(&format!(
                    "corrected,{},{},{},{}\n",
                    num(corr.port1.value, p),
                    num(corr.port1.sigma, p),
                    num(corr.port2.value, p),
                    num(corr.port2.sigma, p)
                ));
            }
            if let Some((fit, corrected)) = &fringe_fit {
                t.push_str("# fringe\noffset,amplitude,phase0,phase_scale,visibility,visibility_sigma,corrected_visibility,corrected_visibility_sigma\n");
                t.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    num(fit.offset, p),
                    num(fit.amplitude, p),
                    num(fit.phase0, p),
                    num(fit.phase_scale, p),
                    num(fit.visibility.value, p),
                    num(fit.visibility.sigma, p),
                    corrected.map(|e| num(e.value, p)).unwrap_or_default(),
                    corrected.map(|e| num(e.sigma, p)).unwrap_or_default(),
                ));
            }
            t
        }
        other => return Err(CliError::validation(format!("unknown format `{other}`"))),
    };
    ctx.emit(&text)
}

fn fnum(x: f64, ctx: &CmdContext) -> serde_json::Value {
    serde_json::Value::from(num(x, ctx.precision).parse::<f64>().unwrap_or(x))
}
