//! Plain-text `key=value` run reports.

use std::fmt::Write as _;

use padesr_core::diff::{simplify, substitute_constants};
use padesr_core::pde::MseBreakdown;
use padesr_core::search::{SearchConfig, SearchResult};

use crate::CaseId;

/// Ordered `key=value` pairs; keys may repeat (`improvement`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// Blocks are separated by a blank line whenever the key prefix changes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut last = "";
        for (k, v) in &self.entries {
            let block = k.split_once('.').map_or("", |(b, _)| b);
            if !out.is_empty() && block != last {
                out.push('\n');
            }
            last = block;
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("report line {line}: expected key=value")]
pub struct ReportParseError {
    pub line: usize,
}

pub fn parse_report(text: &str) -> Result<Report, ReportParseError> {
    let mut r = Report::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ReportParseError { line: i + 1 })?;
        r.push(k, v);
    }
    Ok(r)
}

pub fn push_breakdown(r: &mut Report, b: &MseBreakdown) {
    r.push("mse.interior", b.interior);
    for (i, v) in b.boundary.iter().enumerate() {
        r.push(format!("mse.boundary_{}", i + 1), v);
    }
    r.push("mse.initial", b.initial);
    r.push("mse.total", b.total);
    r.push("mse.gate", if b.gate_rejected { "rejected" } else { "pass" });
    r.push("mse.fault", b.fault);
}

pub fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn search_report(case: CaseId, config: &SearchConfig, result: &SearchResult) -> Report {
    let mut r = Report::default();
    let o = &config.objective;
    r.push("config.case", case.name());
    r.push("config.algo", config.algorithm.name());
    r.push("config.depth", config.depth);
    r.push("config.notation", config.notation.name());
    r.push("config.tokens", config.token_set.name());
    r.push("config.threads", config.threads);
    r.push("config.time", config.time_budget.as_secs_f64());
    r.push("config.seed", config.seed);
    r.push("config.threshold", o.threshold);
    r.push("config.mesh", format!("{},{},{}", o.mesh[0], o.mesh[1], o.mesh[2]));
    r.push("config.ic_derivatives", o.ic_derivatives.name());
    r.push("config.initial_time", o.initial_time.name());
    if let Some(s) = &config.seed_expr {
        r.push("config.seed_expr", s.to_text());
    }
    if let Some(m) = config.max_evals {
        r.push("config.max_evals", m);
    }
    match &result.best {
        Some(best) => {
            let s = &best.scored;
            r.push("best.expr", s.expr.to_text());
            r.push("best.constants", join_f64(&s.consts));
            let fixed = simplify(&substitute_constants(&s.expr, &s.consts));
            r.push("best.simplified", fixed.to_text());
            r.push("best.infix", fixed.render_infix());
            r.push("best.found_at", best.found_at.as_secs_f64());
            r.push("best.worker", best.worker);
            push_breakdown(&mut r, &s.breakdown);
        }
        None => r.push("best.expr", ""),
    }
    r.push("run.elapsed", result.elapsed.as_secs_f64());
    r.push("run.evaluations", result.evaluations);
    for (t, m) in &result.improvements {
        r.push("improvement", format!("{t},{m}"));
    }
    r
}

/// C-style `%.6g`.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (1.391380, "1.39138"),
            (0.00379332, "0.00379332"),
            (12.6641, "12.6641"),
            (1.19209e-7, "1.19209e-07"),
            (123456789.0, "1.23457e+08"),
            (100000.0, "100000"),
            (999999.5, "1e+06"),
            (0.0001, "0.0001"),
            (-2.5, "-2.5"),
            (f64::INFINITY, "inf"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g6(v), want, "{v}");
        }
    }

    #[test]
    fn report_round_trip() {
        let mut r = Report::default();
        r.push("config.case", "case1");
        r.push("mse.total", 0.1 + 0.2);
        r.push("improvement", "0.5,3");
        r.push("improvement", "0.7,2");
        let back = parse_report(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get_f64("mse.total"), Some(0.1 + 0.2));
        assert_eq!(back.get_all("improvement").count(), 2);
        assert!(parse_report("no equals sign").is_err());
    }
}
