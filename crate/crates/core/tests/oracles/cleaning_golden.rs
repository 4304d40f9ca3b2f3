//! Checked-in raw → clean pairs and a generated-input idempotence check.

use std::path::Path;

use prsum_core::preprocess::{clean_text, CleaningConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Golden {
    pub name: String,
    pub raw: String,
    pub clean: String,
}

pub fn load_goldens(path: &Path) -> Vec<Golden> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Rule families the golden set must exercise, with a raw-text detector.
pub const CATEGORIES: &[(&str, fn(&str) -> bool)] = &[
    ("html", |s| s.contains("</") || s.contains("<!--")),
    ("url", |s| s.contains("http://") || s.contains("https://") || s.contains("www.")),
    ("issue_ref", |s| s.contains("#456")),
    ("signature", |s| {
        let l = s.to_lowercase();
        l.contains("signed-off-by") || l.contains("reviewed-by") || l.contains("co-authored-by")
    }),
    ("mention", |s| s.contains('@')),
    ("headline", |s| s.lines().any(|l| l.trim_start().starts_with("# ") || l.trim_start().starts_with("##"))),
    ("cm_sep", |s| s.contains("<cm-sep>")),
];

#[derive(Debug, Default)]
pub struct GoldenReport {
    pub count: usize,
    pub failures: Vec<String>,
    pub missing_categories: Vec<&'static str>,
}

pub fn check_goldens(path: &Path) -> GoldenReport {
    let cfg = CleaningConfig::default();
    let goldens = load_goldens(path);
    let mut report = GoldenReport {
        count: goldens.len(),
        ..Default::default()
    };
    for g in &goldens {
        let got = clean_text(&g.raw, &cfg);
        if got != g.clean {
            report.failures.push(format!("{}: expected {:?}, got {:?}", g.name, g.clean, got));
        }
        if clean_text(&g.clean, &cfg) != g.clean {
            report.failures.push(format!("{}: expected output is not a fixed point", g.name));
        }
    }
    for (name, detect) in CATEGORIES {
        if !goldens.iter().any(|g| detect(&g.raw)) {
            report.missing_categories.push(name);
        }
    }
    report
}

const PIECES: &[&str] = &[
    "<b>", "</div>", "<a href=\"x\">", "<!--", "-->", "<", ">", "<cm-sep>", "#1", "#42", "#", "## ",
    "###### ", "@", "@dev", "a@b.co", "\n", " ", "\t", ".", "!", "?", "http://", "https://h.io/p",
    "www.", "Signed-off-by:", "reviewed-by", "Co-authored-by ", "fix", "Parser", "é", "Σ", "ß", "İ",
];

/// Random concatenations of rule-triggering fragments.
pub fn random_input(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..30);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                let c: char = rng.gen_range(' '..='~');
                c.to_string()
            } else {
                PIECES[rng.gen_range(0..PIECES.len())].to_string()
            }
        })
        .collect()
}

/// First generated input on which cleaning twice differs from cleaning once.
pub fn idempotence_counterexample(cases: usize, seed: u64) -> Option<String> {
    let cfg = CleaningConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases).map(|_| random_input(&mut rng)).find(|raw| {
        let once = clean_text(raw, &cfg);
        clean_text(&once, &cfg) != once
    })
}
