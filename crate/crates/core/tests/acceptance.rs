//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use opinion_simplify::chunker::{chunk_text, estimate_tokens, TokenBudget};
use opinion_simplify::corpus::{load_registry, CaseRegistry};
use opinion_simplify::experiment::{
    estimate_interaction, estimate_treatment_effect, render_table, simulate_survey,
    within_transform_estimate, Covariate, Dgp, Outcome, RegressionResult,
    RegressionSpec, SurveyResponse, INTERACTION_TERM, TREATED_TERM,
};
use opinion_simplify::readability::{count_syllables, interpret_score, score_corpus, Band};
use opinion_simplify::summarizer::backend::Recording;
use opinion_simplify::summarizer::cache::ResponseCache;
use opinion_simplify::summarizer::{FixedClock, MockBackend, OutputStyle, Summarizer};

type Outcome_ = Result<String, String>;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn registry() -> CaseRegistry {
    load_registry(data_dir().join("registry.json")).expect("registry loads")
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome_) -> Outcome_ {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    match r {
        Ok(msg) if took <= limit => Ok(format!("{msg}; {:.2}s", took.as_secs_f64())),
        Ok(msg) => Err(format!("{msg}; too slow: {:.2}s > {:.0}s", took.as_secs_f64(), limit.as_secs_f64())),
        Err(e) => Err(e),
    }
}

fn readability_reproduction() -> Outcome_ {
    timed(Duration::from_secs(1), || {
        let mut texts = Vec::new();
        for entry in std::fs::read_dir(data_dir().join("appendix")).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            let id = p.file_stem().unwrap().to_string_lossy().into_owned();
            texts.push((id, std::fs::read_to_string(&p).map_err(|e| e.to_string())?));
        }
        if texts.len() != 14 {
            return Err(format!("expected 14 summaries, found {}", texts.len()));
        }
        let report = score_corpus(&texts).map_err(|e| e.to_string())?;
        let min = report.per_text.iter().map(|t| t.score).fold(f64::INFINITY, f64::min);
        let msg = format!("mean {:.2}, min {:.2}", report.mean_score, min);
        if (55.0..=75.0).contains(&report.mean_score) && min > 45.0 {
            Ok(msg)
        } else {
            Err(msg)
        }
    })
}

fn band_interpretation() -> Outcome_ {
    let cases = [
        (65.0, Band::PlainEnglish, "plain English"),
        (40.0, Band::HardToRead, "hard to read"),
        (15.0, Band::VeryDifficult, "very difficult to read"),
        (30.0, Band::VeryDifficult, "very difficult to read"),
    ];
    let ok = cases
        .iter()
        .filter(|(s, b, label)| interpret_score(*s) == *b && b.label() == *label)
        .count();
    let msg = format!("{ok}/4");
    if ok == 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_dataset(rng: &mut ChaCha8Rng) -> Vec<SurveyResponse> {
    let n_cases = rng.random_range(2..=8);
    let n_resp = rng.random_range(4..=120);
    let case_effect: Vec<f64> = (0..n_cases).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rows = Vec::new();
    for j in 0..n_resp {
        let nc = rng.random_bool(0.5) as u8;
        let shock: f64 = rng.random_range(-0.5..0.5);
        for (k, alpha) in case_effect.iter().enumerate() {
            if rows.len() >= 600 || !rng.random_bool(0.6) {
                continue;
            }
            let t = rng.random_bool(0.5) as u8;
            let y = 3.0 + alpha + 0.4 * t as f64 + 0.2 * (t * nc) as f64 + shock + rng.random_range(-1.0..1.0);
            rows.push(SurveyResponse {
                respondent_id: format!("p{j}"),
                case_id: format!("case-{k:02}"),
                treated: t,
                heard_of_case: 0,
                area_correct: 0,
                decision_correct: 0,
                detail_just_right: 0,
                clarity: y,
                share_with_friend: 0.0,
                non_college: nc,
            });
        }
    }
    rows
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// Independent triple-product CR1 computation. Returns term -> (coef, se).
fn brute_force_cr1(rows: &[SurveyResponse], interaction: bool) -> BTreeMap<String, (f64, f64)> {
    let cases: BTreeSet<&str> = rows.iter().map(|r| r.case_id.as_str()).collect();
    let mut names = vec!["(intercept)".to_string(), "treated".into()];
    if interaction {
        names.push("non_college".into());
        names.push("treated:non_college".into());
    }
    for c in cases.iter().skip(1) {
        names.push(format!("case[{c}]"));
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let t = r.treated as f64;
            let nc = r.non_college as f64;
            let mut v = vec![1.0, t];
            if interaction {
                v.push(nc);
                v.push(t * nc);
            }
            for c in cases.iter().skip(1) {
                v.push((r.case_id == *c) as u8 as f64);
            }
            v
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.clarity).collect();
    let n = rows.len();
    let k = names.len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        for a in 0..k {
            xty[a] += x[i][a] * y[i];
            for b in 0..k {
                xtx[a][b] += x[i][a] * x[i][b];
            }
        }
    }
    let bread = invert(xtx);
    let beta: Vec<f64> = (0..k).map(|a| (0..k).map(|b| bread[a][b] * xty[b]).sum()).collect();
    let u: Vec<f64> = (0..n).map(|i| y[i] - (0..k).map(|a| x[i][a] * beta[a]).sum::<f64>()).collect();
    let mut by_cluster: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let s = by_cluster.entry(rows[i].respondent_id.as_str()).or_insert_with(|| vec![0.0; k]);
        for a in 0..k {
            s[a] += x[i][a] * u[i];
        }
    }
    let mut meat = vec![vec![0.0; k]; k];
    for s in by_cluster.values() {
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let g = by_cluster.len() as f64;
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let mut out = BTreeMap::new();
    for (a, name) in names.iter().enumerate() {
        let mut v = 0.0;
        for p in 0..k {
            for q in 0..k {
                v += bread[a][p] * meat[p][q] * bread[q][a];
            }
        }
        out.insert(name.clone(), (beta[a], (c * v).sqrt()));
    }
    out
}

fn estimator_oracle() -> Outcome_ {
    timed(Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst_fwl: f64 = 0.0;
        let mut worst_se: f64 = 0.0;
        let mut done = 0;
        while done < 50 {
            let rows = random_dataset(&mut rng);
            let interaction = done % 2 == 1;
            let spec = RegressionSpec {
                interaction_with: interaction.then_some(Covariate::NonCollege),
                ..RegressionSpec::main(Outcome::Clarity)
            };
            let full = match estimate_treatment_effect(&rows, &spec) {
                Ok(r) => r,
                // degenerate draw (e.g. a case seen only in one arm); redraw
                Err(_) => continue,
            };
            let within = within_transform_estimate(&rows, &spec).map_err(|e| e.to_string())?;
            for w in &within.terms {
                let f = full.term(&w.term).ok_or("missing term")?;
                worst_fwl = worst_fwl.max((w.coef - f.coef).abs());
            }
            let oracle = brute_force_cr1(&rows, interaction);
            for t in &full.terms {
                let (_, se) = oracle[&t.term];
                worst_se = worst_se.max(((t.se - se) / se).abs());
            }
            done += 1;
        }
        let msg = format!("max |b_within - b_dummies| = {worst_fwl:.1e}, max SE rel. diff = {worst_se:.1e}");
        if worst_fwl <= 1e-8 && worst_se <= 1e-10 {
            Ok(msg)
        } else {
            Err(msg)
        }
    })
}

fn dgp_recovery() -> Outcome_ {
    let reg = registry();
    let mut notes = Vec::new();

    // Noiseless: numeric outcomes reproduce the mean structure exactly.
    let mut flat = Dgp::noiseless();
    for p in flat.outcomes.values_mut() {
        p.interaction = 0.0;
    }
    let data = simulate_survey(&reg, 120, &flat, 42).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for o in [Outcome::Clarity, Outcome::ShareWithFriend] {
        let r = estimate_treatment_effect(&data, &RegressionSpec::main(o)).map_err(|e| e.to_string())?;
        worst = worst.max((r.term(TREATED_TERM).unwrap().coef - flat.outcomes[&o].effect).abs());
    }
    let data = simulate_survey(&reg, 120, &Dgp::noiseless(), 42).map_err(|e| e.to_string())?;
    for o in [Outcome::Clarity, Outcome::ShareWithFriend] {
        let p = Dgp::noiseless().outcomes[&o];
        let r = estimate_interaction(&data, &RegressionSpec::interaction(o)).map_err(|e| e.to_string())?;
        worst = worst.max((r.term(TREATED_TERM).unwrap().coef - p.effect).abs());
        worst = worst.max((r.term(INTERACTION_TERM).unwrap().coef - p.interaction).abs());
    }
    notes.push(format!("noiseless max error {worst:.1e}"));
    let noiseless_ok = worst <= 1e-10;

    // Noisy, seeded, full-scale design.
    let dgp = Dgp::default();
    let data = simulate_survey(&reg, 120, &dgp, 42).map_err(|e| e.to_string())?;
    let mut worst_z: f64 = 0.0;
    for o in Outcome::ALL {
        let p = dgp.outcomes[&o];
        // education share is exactly 0.5, so the average effect is effect + interaction / 2
        let r = estimate_treatment_effect(&data, &RegressionSpec::main(o)).map_err(|e| e.to_string())?;
        let t = r.term(TREATED_TERM).unwrap();
        worst_z = worst_z.max((t.coef - (p.effect + 0.5 * p.interaction)).abs() / t.se);
        let r = estimate_interaction(&data, &RegressionSpec::interaction(o)).map_err(|e| e.to_string())?;
        let t = r.term(TREATED_TERM).unwrap();
        let i = r.term(INTERACTION_TERM).unwrap();
        worst_z = worst_z.max((t.coef - p.effect).abs() / t.se);
        worst_z = worst_z.max((i.coef - p.interaction).abs() / i.se);
    }
    notes.push(format!("noisy max |b - truth| / SE = {worst_z:.2}"));
    let msg = notes.join("; ");
    if noiseless_ok && worst_z <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn table_fidelity() -> Outcome_ {
    let published = [
        (Outcome::HeardOfCase, 0.0385, 0.0308, "0.0385"),
        (Outcome::AreaCorrect, 0.00192, 0.0157, "0.00192"),
        (Outcome::DecisionCorrect, 0.107, 0.0354, "0.107**"),
        (Outcome::DetailJustRight, 0.202, 0.0384, "0.202***"),
        (Outcome::Clarity, 0.431, 0.0752, "0.431***"),
        (Outcome::ShareWithFriend, 0.432, 0.0911, "0.432***"),
    ];
    let results: Vec<RegressionResult> = published
        .iter()
        .map(|(o, b, se, _)| RegressionResult::from_published(*o, *b, *se, 560, 120))
        .collect();
    let table = render_table(&results, &[]);
    let row = table
        .lines()
        .find(|l| l.starts_with("| AI Summary |"))
        .ok_or("no treatment row")?;
    let cells: Vec<&str> = row.trim_matches('|').split('|').map(str::trim).skip(1).collect();
    let ok = published
        .iter()
        .zip(&cells)
        .filter(|((_, _, _, want), got)| want == *got)
        .count();
    let msg = format!("{ok}/6 columns match");
    if ok == 6 {
        Ok(msg)
    } else {
        Err(format!("{msg}: {cells:?}"))
    }
}

fn pipeline_determinism() -> Outcome_ {
    timed(Duration::from_secs(5), || {
        let reg = registry();
        let cases: Vec<_> = reg.cases().iter().collect();
        let styles: BTreeSet<OutputStyle> = OutputStyle::ALL.into_iter().collect();
        let budget = TokenBudget::default();
        let cache_dir = tempfile::tempdir().map_err(|e| e.to_string())?;

        let run = |cache: ResponseCache| {
            let backend = Arc::new(Recording::new(MockBackend::default()));
            let s = Summarizer::new(backend.clone(), "mock")
                .with_clock(Arc::new(FixedClock(0)))
                .with_cache(cache);
            let bundles: Vec<String> = s
                .run_many(&cases, &styles, 4)
                .into_iter()
                .map(|b| b.map(|b| b.to_json()))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            Ok::<_, String>((bundles, backend))
        };

        let (first, b1) = run(ResponseCache::in_dir(cache_dir.path()))?;
        let (second, b2) = run(ResponseCache::in_memory())?;
        if first != second {
            return Err("bundles differ between runs".into());
        }
        let violations = b1
            .requests()
            .iter()
            .chain(b2.requests().iter())
            .filter(|r| !r.fits(budget.context_limit))
            .count();
        if violations > 0 {
            return Err(format!("{violations} requests exceed the token budget"));
        }
        let (warm, b3) = run(ResponseCache::in_dir(cache_dir.path()))?;
        if warm != first {
            return Err("warm-cache bundles differ".into());
        }
        let msg = format!(
            "{} bundles identical, {} requests within budget, warm rerun {} calls",
            first.len(),
            b1.calls() + b2.calls(),
            b3.calls()
        );
        if b3.calls() == 0 {
            Ok(msg)
        } else {
            Err(msg)
        }
    })
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 12] = [
        "court", "the", "held", "statute", "petitioner", "a", "review", "Congress", "U.S.", "v.",
        "unconstitutional", "(1)",
    ];
    let sentences = rng.random_range(0..60);
    let mut out = String::new();
    for _ in 0..sentences {
        let len = if rng.random_bool(0.05) {
            rng.random_range(100..400)
        } else {
            rng.random_range(1..30)
        };
        for w in 0..len {
            if w > 0 {
                out.push(if rng.random_bool(0.05) { '\n' } else { ' ' });
            }
            out.push_str(WORDS[rng.random_range(0..WORDS.len())]);
        }
        out.push_str([". ", "? ", "! ", ".\n\n"][rng.random_range(0..4)]);
    }
    out
}

fn chunker_properties() -> Outcome_ {
    timed(Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..1000 {
            let text = random_text(&mut rng);
            let budget = TokenBudget::new(rng.random_range(200..2000), rng.random_range(50..150), 0)
                .map_err(|e| e.to_string())?;
            let allowance = budget.input_allowance();
            let set = chunk_text(&text, &budget).map_err(|e| e.to_string())?;
            let source: Vec<&str> = text.split_whitespace().collect();
            let rejoined: Vec<&str> = set.chunks.iter().flat_map(|c| c.split_whitespace()).collect();
            if source != rejoined {
                return Err(format!("text {i}: word sequence not preserved"));
            }
            if let Some(c) = set.chunks.iter().find(|c| estimate_tokens(c) > allowance) {
                return Err(format!("text {i}: chunk of {} tokens > {allowance}", estimate_tokens(c)));
            }
            let lower = estimate_tokens(&text).div_ceil(allowance);
            if set.chunks.len() < lower {
                return Err(format!("text {i}: {} chunks < bound {lower}", set.chunks.len()));
            }
        }
        Ok("1000 texts".into())
    })
}

fn syllable_oracle() -> Outcome_ {
    let text = std::fs::read_to_string(data_dir().join("syllable_oracle.tsv")).map_err(|e| e.to_string())?;
    let mut exact = 0;
    let mut total = 0;
    let mut far = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let (word, n) = line.split_once('\t').ok_or("malformed line")?;
        let want: i64 = n.trim().parse().map_err(|_| "bad count")?;
        let got = count_syllables(word).map_err(|e| e.to_string())? as i64;
        total += 1;
        if got == want {
            exact += 1;
        } else if (got - want).abs() > 1 {
            far.push(format!("{word}: {got} vs {want}"));
        }
    }
    let msg = format!("{exact}/{total} exact, {} off by more than 1", far.len());
    if total == 100 && exact >= 85 && far.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg} {far:?}"))
    }
}

type Criterion = (&'static str, fn() -> Outcome_);

fn main() {
    let criteria: [Criterion; 8] = [
        ("readability reproduction", readability_reproduction),
        ("band interpretation", band_interpretation),
        ("estimator oracle equivalence", estimator_oracle),
        ("DGP recovery", dgp_recovery),
        ("table fidelity", table_fidelity),
        ("pipeline determinism and budget safety", pipeline_determinism),
        ("chunker properties", chunker_properties),
        ("syllable oracle", syllable_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {}: PASS {name} ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({msg})", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
