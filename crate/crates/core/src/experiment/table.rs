use super::ols::{RegressionResult, INTERACTION_TERM, NON_COLLEGE_TERM, TREATED_TERM};

/// `*` p < 0.05, `**` p < 0.01, `***` p < 0.001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Three significant digits, no exponent: 0.0385, 0.00192, 0.107, 12.3.
pub fn format_coefficient(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = |v: f64| (2 - v.abs().log10().floor() as i32).max(0) as usize;
    let mut d = decimals(x);
    let s = format!("{x:.d$}");
    // rounding can carry into the next power of ten (0.09996 -> 0.1000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && decimals(rounded) < d {
        d = decimals(rounded);
        return format!("{x:.d$}");
    }
    s
}

const ROWS: [(&str, &str); 3] = [
    (TREATED_TERM, "AI Summary"),
    (NON_COLLEGE_TERM, "Non-College"),
    (INTERACTION_TERM, "AI Summary × Non-College"),
];

/// Markdown table with one column per result: coefficient with stars, SE in
/// parentheses on the next row, and an observations row. Missing `labels`
/// fall back to the outcome's label.
pub fn render_table(results: &[RegressionResult], labels: &[&str]) -> String {
    let mut out = String::new();
    let header: Vec<&str> = results
        .iter()
        .enumerate()
        .map(|(i, r)| labels.get(i).copied().unwrap_or(r.outcome.label()))
        .collect();
    out.push_str(&format!("| | {} |\n", header.join(" | ")));
    out.push_str(&format!("|---|{}\n", "---:|".repeat(results.len())));
    for (term, label) in ROWS {
        if !results.iter().any(|r| r.term(term).is_some()) {
            continue;
        }
        let (coefs, ses): (Vec<String>, Vec<String>) = results
            .iter()
            .map(|r| match r.term(term) {
                Some(t) => (
                    format!("{}{}", format_coefficient(t.coef), significance_stars(t.p)),
                    format!("({})", format_coefficient(t.se)),
                ),
                None => (String::new(), String::new()),
            })
            .unzip();
        out.push_str(&format!("| {label} | {} |\n", coefs.join(" | ")));
        out.push_str(&format!("| | {} |\n", ses.join(" | ")));
    }
    let n: Vec<String> = results.iter().map(|r| r.n_obs.to_string()).collect();
    out.push_str(&format!("| Observations | {} |\n", n.join(" | ")));
    out.push_str("\nStandard errors in parentheses, clustered by respondent.\n");
    out.push_str("\\* p < 0.05, \\*\\* p < 0.01, \\*\\*\\* p < 0.001\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Outcome;

    #[test]
    fn three_significant_digits() {
        assert_eq!(format_coefficient(0.0385), "0.0385");
        assert_eq!(format_coefficient(0.00192), "0.00192");
        assert_eq!(format_coefficient(0.107), "0.107");
        assert_eq!(format_coefficient(0.0911), "0.0911");
        assert_eq!(format_coefficient(-0.25), "-0.250");
        assert_eq!(format_coefficient(12.34), "12.3");
        assert_eq!(format_coefficient(0.09996), "0.100");
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(significance_stars(0.2), "");
        assert_eq!(significance_stars(0.05), "");
        assert_eq!(significance_stars(0.049), "*");
        assert_eq!(significance_stars(0.003), "**");
        assert_eq!(significance_stars(0.0009), "***");
    }

    #[test]
    fn table_cells() {
        let rs = [
            RegressionResult::from_published(Outcome::HeardOfCase, 0.0385, 0.0308, 560, 120),
            RegressionResult::from_published(Outcome::DecisionCorrect, 0.107, 0.0354, 560, 120),
            RegressionResult::from_published(Outcome::Clarity, 0.431, 0.0752, 560, 120),
        ];
        let t = render_table(&rs, &[]);
        assert!(t.contains("| AI Summary | 0.0385 | 0.107** | 0.431*** |"), "{t}");
        assert!(t.contains("| | (0.0308) | (0.0354) | (0.0752) |"));
        assert!(t.contains("| Observations | 560 | 560 | 560 |"));
        assert!(t.starts_with("| | Heard of Case | Case Decision Correct | Clarity |"));
        assert!(!t.contains("Non-College"));
    }
}
