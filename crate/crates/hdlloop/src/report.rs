//! Rendering suite reports as a text table, CSV and Markdown.

use hdlloop_core::outcome::{ReportRow, SuiteReport, TerminalClass};

const HEADERS: [&str; 5] = ["Benchmark", "Test Set", "Outcome", "Compliant", "# Messages"];

fn cells(row: &ReportRow) -> [String; 5] {
    match row {
        ReportRow::Completed(o) => [
            o.benchmark_id.clone(),
            o.trial_label.clone(),
            o.terminal.to_string(),
            match o.compliant {
                Some(true) => "Yes".into(),
                Some(false) => "No".into(),
                None => "-".into(),
            },
            o.user_messages.to_string(),
        ],
        ReportRow::SkippedEnv { benchmark_id, trial_label, .. } => {
            [benchmark_id.clone(), trial_label.clone(), "SKIPPED (environment)".into(), "-".into(), "-".into()]
        }
    }
}

fn totals_lines(r: &SuiteReport) -> Vec<String> {
    let t = &r.totals;
    let classes: Vec<String> = TerminalClass::ALL.iter().map(|c| format!("{c}={}", t.by_class.get(c.as_str()).copied().unwrap_or(0))).collect();
    let mut out = vec![
        format!("Outcomes: {}", classes.join(" ")),
        format!(
            "Passed: {}  Compliant: {}  Compliance rate: {}.{}%",
            t.passed,
            t.compliant,
            t.compliance_permille / 10,
            t.compliance_permille % 10
        ),
    ];
    if t.skipped_env > 0 {
        out.push(format!("Skipped for environment reasons: {}", t.skipped_env));
    }
    out
}

pub fn render_text(r: &SuiteReport) -> String {
    let rows: Vec<[String; 5]> = r.rows.iter().map(cells).collect();
    let mut widths = HEADERS.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: &[String]| {
        cols.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = vec![line(&HEADERS.map(String::from)), widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ")];
    out.extend(rows.iter().map(|r| line(r)));
    out.push(String::new());
    out.extend(totals_lines(r));
    out.join("\n") + "\n"
}

pub fn render_csv(r: &SuiteReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADERS)?;
    for row in &r.rows {
        w.write_record(cells(row))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn render_markdown(r: &SuiteReport) -> String {
    let esc = |s: &str| s.replace('|', "\\|");
    let mut out = vec![format!("| {} |", HEADERS.join(" | ")), format!("|{}|", vec!["---"; HEADERS.len()].join("|"))];
    for row in &r.rows {
        out.push(format!("| {} |", cells(row).iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")));
    }
    out.push(String::new());
    out.extend(totals_lines(r));
    out.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdlloop_core::outcome::{Outcome, RunMetadata};

    fn report() -> SuiteReport {
        let o = |c, compliant, n| {
            ReportRow::Completed(Outcome {
                benchmark_id: "shift_register".into(),
                trial_label: "T1".into(),
                terminal: c,
                compliant,
                user_messages: n,
                compliance_evidence: vec![],
            })
        };
        SuiteReport::new(
            RunMetadata::default(),
            vec![
                o(TerminalClass::TF, Some(true), 3),
                o(TerminalClass::FAIL, None, 25),
                ReportRow::SkippedEnv { benchmark_id: "lfsr".into(), trial_label: "T1".into(), message: "no iverilog".into() },
            ],
        )
    }

    #[test]
    fn text_table() {
        let t = render_text(&report());
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Benchmark"));
        assert!(lines[2].contains("TF") && lines[2].contains("Yes") && lines[2].ends_with('3'));
        assert!(lines[3].contains("FAIL") && lines[3].contains(" - "));
        assert!(t.contains("Compliance rate: 100.0%"));
        assert!(t.contains("Skipped for environment reasons: 1"));
    }

    #[test]
    fn csv_and_markdown() {
        let c = render_csv(&report()).unwrap();
        assert_eq!(c.lines().next().unwrap(), "Benchmark,Test Set,Outcome,Compliant,# Messages");
        assert_eq!(c.lines().count(), 4);
        let m = render_markdown(&report());
        assert!(m.contains("| shift_register | T1 | TF | Yes | 3 |"));
    }
}
