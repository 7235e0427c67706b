//! Deterministic number formatting: six significant digits by default for
//! stable diffs, full shortest-round-trip precision behind a flag.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Six,
    Full,
}

pub fn num(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Full => format!("{x:?}"),
        Precision::Six => sig6(x),
    }
}

fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // trim trailing zeros but keep at least one decimal for floats
    if s.contains('.') {
        let t = s.trim_end_matches('0');
        let t = t.strip_suffix('.').unwrap_or(t);
        t.to_string()
    } else {
        s
    }
}
