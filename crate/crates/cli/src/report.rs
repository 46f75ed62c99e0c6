//! Plain-text summary tables.

use std::collections::BTreeSet;
use std::fmt::Write;

use cellwatch_core::indicators::IndicatorReport;
use cellwatch_core::orchestrator::ScenarioState;
use cellwatch_core::Pair;

/// Prior and posterior (alpha, beta) of every edge, one row pair per tick.
pub fn edge_table(state: &ScenarioState) -> String {
    let pairs: BTreeSet<&Pair> = state.event_log.iter().flat_map(|r| r.edges.iter().map(|e| &e.pair)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "");
    for p in &pairs {
        let _ = write!(out, "{:>16}", p.to_string());
    }
    out.push('\n');
    let _ = write!(out, "{:<10}", "");
    for _ in &pairs {
        let _ = write!(out, "{:>8}{:>8}", "alpha", "beta");
    }
    out.push('\n');
    for r in &state.event_log {
        for (label, post) in [("prior", false), ("post", true)] {
            let _ = write!(out, "{:<10}", format!("t{} {label}", r.tick));
            for p in &pairs {
                match r.edges.iter().find(|e| &e.pair == *p) {
                    // Edges created without a prior have nothing to show before their first data.
                    Some(e) if post || e.prior != (0.0, 0.0) => {
                        let (a, b) = if post { e.posterior } else { e.prior };
                        let _ = write!(out, "{a:>8.2}{b:>8.2}");
                    }
                    _ => {
                        let _ = write!(out, "{:>16}", "");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Measures and indicators of one cell across ticks, starting from `initial`.
pub fn indicator_table(cell: &str, initial: Option<&IndicatorReport>, series: &[&IndicatorReport]) -> String {
    let mut cols: Vec<(String, &IndicatorReport)> = Vec::new();
    if let Some(r) = initial {
        cols.push(("Prior".into(), r));
    }
    cols.extend(series.iter().map(|r| (format!("t{}", r.tick), *r)));
    let mut out = format!("cell {cell}\n{:<10}", "");
    for (label, _) in &cols {
        let _ = write!(out, "{label:>7}");
    }
    out.push('\n');
    for row in 0..10 {
        let label = if row < 5 { format!("m{}", row + 1) } else { format!("phi_C({})", row - 5) };
        let _ = write!(out, "{label:<10}");
        for (_, r) in &cols {
            let v = if row < 5 { r.measures()[row] } else { r.phi[row - 5] };
            let _ = write!(out, "{v:>7.2}");
        }
        out.push('\n');
    }
    out
}

/// Edge table followed by an indicator table per cell.
pub fn summary(state: &ScenarioState) -> String {
    let initial = ScenarioState::new(state.config.clone()).and_then(|s| s.current_indicators()).unwrap_or_default();
    let mut out = format!(
        "scenario {:?} at tick {}, network log likelihood {:.6}\n\nedge parameters\n",
        state.config.name, state.tick, state.log_likelihood
    );
    out.push_str(&edge_table(state));
    let cells: BTreeSet<&str> = state
        .event_log
        .iter()
        .flat_map(|r| r.indicators.iter().map(|i| i.cell.as_str()))
        .chain(initial.iter().map(|i| i.cell.as_str()))
        .collect();
    for cell in cells {
        out.push_str("\nattack indicators, ");
        let start = initial.iter().find(|r| r.cell == cell);
        out.push_str(&indicator_table(cell, start, &state.indicator_series(cell)));
    }
    out
}
