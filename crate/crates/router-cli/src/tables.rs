//! Bundled reference tables (plain CSV in `data/`) and their parsing.

use router_core::analysis::{ContrastRow, Estimate};

use crate::CliError;

pub const ROUTING_TABLE: &str = include_str!("../data/routing_probabilities.csv");
pub const FIDELITY_TABLE: &str = include_str!("../data/output_fidelities.csv");
pub const FRINGE_TABLE: &str = include_str!("../data/coherence_fringe.csv");
/// Accidental-coincidence level of the bundled fringe run, in the same
/// relative units as its counts column.
pub const FRINGE_NOISE_FLOOR: f64 = 10.1;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_field(record: &csv::StringRecord, idx: usize, line: u64) -> Result<f64, CliError> {
    record
        .get(idx)
        .ok_or_else(|| CliError::validation(format!("line {line}: missing column {idx}")))?
        .parse::<f64>()
        .map_err(|e| CliError::validation(format!("line {line}: {e}")))
}

/// One row of the routing-probability table: raw and corrected P2 per
/// (signal, control).
#[derive(Debug, Clone)]
pub struct RoutingRow {
    pub signal: String,
    pub control: String,
    pub p2: Estimate,
    pub p2_corrected: Estimate,
}

pub fn parse_routing_table(text: &str) -> Result<Vec<RoutingRow>, CliError> {
    let mut rows = Vec::new();
    let mut rdr = reader(text);
    for result in rdr.records() {
        let record = result.map_err(|e| CliError::validation(format!("routing table: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 6 {
            return Err(CliError::validation(format!(
                "routing table line {line}: expected 6 columns, got {}",
                record.len()
            )));
        }
        rows.push(RoutingRow {
            signal: record[0].to_string(),
            control: record[1].to_string(),
            p2: Estimate::new(
                parse_field(&record, 2, line)?,
                parse_field(&record, 3, line)?,
            ),
            p2_corrected: Estimate::new(
                parse_field(&record, 4, line)?,
                parse_field(&record, 5, line)?,
            ),
        });
    }
    if rows.is_empty() {
        return Err(CliError::validation("routing table has no rows".into()));
    }
    Ok(rows)
}

pub fn contrast_rows(rows: &[RoutingRow], corrected: bool) -> Vec<ContrastRow> {
    let states = ["H", "V", "D", "A", "R", "L"];
    states
        .iter()
        .filter_map(|state| {
            let find = |control: &str| {
                rows.iter()
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
}

/// One row of the fidelity table: raw and corrected output-state fidelity.
#[derive(Debug, Clone)]
pub struct FidelityRow {
    pub signal: String,
    pub control: String,
    pub fidelity: Estimate,
    pub fidelity_corrected: Estimate,
}

pub fn parse_fidelity_table(text: &str) -> Result<Vec<FidelityRow>, CliError> {
    let mut rows = Vec::new();
    let mut rdr = reader(text);
    for result in rdr.records() {
        let record = result.map_err(|e| CliError::validation(format!("fidelity table: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 6 {
            return Err(CliError::validation(format!(
                "fidelity table line {line}: expected 6 columns, got {}",
                record.len()
            )));
        }
        rows.push(FidelityRow {
            signal: record[0].to_string(),
            control: record[1].to_string(),
            fidelity: Estimate::new(
                parse_field(&record, 2, line)?,
                parse_field(&record, 3, line)?,
            ),
            fidelity_corrected: Estimate::new(
                parse_field(&record, 4, line)?,
                parse_field(&record, 5, line)?,
            ),
        });
    }
    if rows.is_empty() {
        return Err(CliError::validation("fidelity table has no rows".into()));
    }
    Ok(rows)
}

/// Fringe columns: phase readouts, relative counts, count errors.
pub type FringeColumns = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Fringe samples: (phase readout, relative counts, error).
pub fn parse_fringe_table(text: &str) -> Result<FringeColumns, CliError> {
    let mut phases = Vec::new();
    let mut counts = Vec::new();
    let mut sigmas = Vec::new();
    let mut rdr = reader(text);
    for result in rdr.records() {
        let record = result.map_err(|e| CliError::validation(format!("fringe table: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(CliError::validation(format!(
                "fringe table line {line}: expected 3 columns, got {}",
                record.len()
            )));
        }
        phases.push(parse_field(&record, 0, line)?);
        counts.push(parse_field(&record, 1, line)?);
        sigmas.push(parse_field(&record, 2, line)?);
    }
    if phases.is_empty() {
        return Err(CliError::validation("fringe table has no rows".into()));
    }
    Ok((phases, counts, sigmas))
}
