//! Acceptance suite. Each criterion runs in isolation and prints one
//! `PASS` or `FAIL` line; the process exits non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use physio_core::grounding::attribute_references;
use physio_core::kb_store::{KnowledgeBase, SourceDocument};
use physio_core::linker::{levenshtein, link_condition, LinkMethod};
use physio_core::llm_gateway::{parse_boolean, parse_string_list};
use physio_core::pipeline::{handle_query, PipelineConfig, Stage, DEFAULT_RESPONSE};
use physio_core::text_index::{build_index, rank, Bm25Params};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if let false = $cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bm25_oracle_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB325);
    let mut compared = 0usize;
    for case in 0..100 {
        let corpus = random_corpus(&mut rng, 10, 30);
        let query = random_text(&mut rng, 6);
        let index = build_index(corpus.clone(), Bm25Params::default()).map_err(|e| e.to_string())?;
        let got = rank(&index, &query, usize::MAX);
        let want = bm25_oracle(&corpus, &query);
        ensure!(got.len() == want.len(), "case {case}: {} hits, oracle {}", got.len(), want.len());
        for (g, (id, score)) in got.iter().zip(&want) {
            ensure!(&g.id == id, "case {case}: order differs at {id}");
            ensure!((g.score - score).abs() <= 1e-9, "case {case}: {id} scored {} vs {score}", g.score);
            compared += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("100 corpora, {compared} scores within 1e-9, {elapsed:.2?}"))
}

fn grounding_oracle_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6A0D);
    let mut references = 0usize;
    for case in 0..100 {
        let (docs, plain) = random_documents(&mut rng, 3, 6);
        let n = rng.random_range(1..=4);
        let answer: Vec<String> = (0..n).map(|_| random_sentence(&mut rng, 6)).collect();
        let refs: Vec<&SourceDocument> = docs.iter().collect();
        let out = attribute_references(&answer.join(" "), &refs).map_err(|e| e.to_string())?;
        ensure!(out.len() == n, "case {case}: {} sentences, expected {n}", out.len());

        let got: HashSet<(usize, String, String)> = out
            .iter()
            .enumerate()
            .flat_map(|(g, s)| s.references.iter().map(move |r| (g, r.document_id.clone(), r.source_sentence.clone())))
            .collect();
        let total: usize = out.iter().map(|s| s.references.len()).sum();
        ensure!(total <= n, "case {case}: {total} references for {n} sentences");
        let want: HashSet<(usize, String, String)> = grounding_oracle(&answer, &plain)
            .into_iter()
            .map(|(g, d, i, _)| {
                let sentence = plain.iter().find(|(id, _)| *id == d).unwrap().1[i].clone();
                (g, d, sentence)
            })
            .collect();
        ensure!(got == want, "case {case}: selected {got:?}, oracle {want:?}");
        references += total;
    }
    Ok(format!("100 instances, {references} references, budget held"))
}

fn linker_precedence_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11C);
    let mut stages = HashSet::new();
    for _ in 0..300 {
        let conditions = random_conditions(&mut rng);
        let kb = KnowledgeBase::from_records(conditions, vec![], vec![], vec![]).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let query = random_condition_query(&mut rng);
            let got = link_condition(&kb, &query).method;
            let cs = kb.conditions();
            let expected = if cs.iter().any(|c| c.canonical_name == query) {
                LinkMethod::Exact
            } else if cs.iter().any(|c| c.aliases.contains(&query)) {
                LinkMethod::Alias
            } else if cs.iter().any(|c| {
                std::iter::once(&c.canonical_name)
                    .chain(&c.aliases)
                    .any(|n| n.chars().count() >= 4 && (n.contains(&query) || query.contains(n.as_str())))
            }) {
                LinkMethod::Substring
            } else {
                LinkMethod::None
            };
            ensure!(got == expected, "{query:?}: linked by {got:?}, expected {expected:?}");
            stages.insert(format!("{got:?}"));
        }
    }
    ensure!(stages.len() == 4, "not every stage exercised: {stages:?}");

    for i in 0..1000 {
        let a = random_word(&mut rng, 16);
        let b = random_word(&mut rng, 16);
        let (got, want) = (levenshtein(&a, &b), levenshtein_oracle(&a, &b));
        ensure!(got == want, "pair {i} ({a:?}, {b:?}): {got} vs DP {want}");
    }
    Ok("3000 linkings, all stages hit; 1000 Levenshtein pairs exact".into())
}

fn end_to_end_fixture() -> Outcome {
    let kb = fixture_kb();
    let counts = kb.counts();
    ensure!(
        (counts.conditions, counts.webpages, counts.exercises, counts.medications) == (3, 6, 10, 5),
        "fixture counts {counts:?}"
    );
    let non_otc = kb.medications().iter().filter(|m| !m.otc).count();
    ensure!(non_otc == 1, "{non_otc} prescription-only medications in fixture");

    let (gateway, _) = mock_gateway();
    let started = Instant::now();
    let (answer, trace) =
        handle_query(BACK_PAIN_QUERY, &kb, &gateway, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    ensure!(answer.grounded, "answer not grounded");
    let docs = trace.retrieved_doc_ids.len();
    ensure!((1..=5).contains(&docs), "{docs} documents retrieved");
    ensure!(answer.reference_count() >= 1, "no references");
    ensure!(answer.exercises.len() <= 5, "{} exercises", answer.exercises.len());
    ensure!(answer.medications.iter().all(|m| m.otc), "non-OTC medication returned");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "{docs} docs, {} refs, {} exercises, {} OTC meds, {elapsed:.2?}",
        answer.reference_count(),
        answer.exercises.len(),
        answer.medications.len()
    ))
}

fn fail_closed_paths() -> Outcome {
    let kb = fixture_kb();
    let (gateway, _) = mock_gateway();
    let config = PipelineConfig::default();

    let (answer, trace) = handle_query(OFF_TOPIC_QUERY, &kb, &gateway, &config).map_err(|e| e.to_string())?;
    ensure!(answer.text() == DEFAULT_RESPONSE, "off-topic answer was {:?}", answer.text());
    ensure!(
        answer.reference_count() == 0 && answer.exercises.is_empty() && answer.medications.is_empty(),
        "off-topic answer carries references, exercises or medications"
    );
    ensure!(!trace.reached(Stage::Retrieval), "off-topic query reached retrieval");

    let (answer, trace) = handle_query(UNLINKABLE_QUERY, &kb, &gateway, &config).map_err(|e| e.to_string())?;
    ensure!(trace.link.method == LinkMethod::None, "unlinkable query linked as {:?}", trace.link);
    ensure!(!answer.grounded && answer.reference_count() == 0, "unlinkable answer claims grounding");
    ensure!(answer.text() != DEFAULT_RESPONSE, "unlinkable query got the default response");

    let (answer, _) = handle_query(ANKLE_QUERY, &kb, &gateway, &config).map_err(|e| e.to_string())?;
    ensure!(answer.medications.is_empty(), "malformed medication reply produced {:?}", answer.medications);
    ensure!(answer.grounded && answer.reference_count() >= 1, "answer dropped with medication failure");
    Ok("off-topic, unlinkable and malformed-medication paths".into())
}

fn cache_determinism() -> Outcome {
    let kb = fixture_kb();
    let (gateway, mock) = mock_gateway();
    let config = PipelineConfig::default();
    let (first, trace) = handle_query(BACK_PAIN_QUERY, &kb, &gateway, &config).map_err(|e| e.to_string())?;
    ensure!(!trace.cache_hit, "first query was a cache hit");
    mock.reset_call_count();
    let (second, trace) = handle_query(BACK_PAIN_QUERY, &kb, &gateway, &config).map_err(|e| e.to_string())?;
    ensure!(trace.cache_hit, "repeat was not a cache hit");
    ensure!(first == second, "cached response differs");
    ensure!(mock.call_count() == 0, "{} backend calls on cache hit", mock.call_count());
    Ok("repeat served from cache with 0 backend calls".into())
}

/// Membership in {true, false} closed under case, surrounding whitespace
/// and one trailing ASCII punctuation mark.
fn boolean_closure(text: &str) -> Option<bool> {
    let lower = text.trim_matches(|c: char| c.is_whitespace()).to_lowercase();
    for (word, value) in [("true", true), ("false", false)] {
        if lower == word {
            return Some(value);
        }
        if let Some(rest) = lower.strip_prefix(word) {
            let mut chars = rest.chars();
            if matches!((chars.next(), chars.next()), (Some(c), None) if c.is_ascii_punctuation()) {
                return Some(value);
            }
        }
    }
    None
}

fn parser_fuzz() -> Outcome {
    const WS: &[&str] = &["", " ", "  ", "\n", "\t", " \r\n"];
    const PUNCT: &[&str] = &["", ".", "!", ",", ";", "?", ":"];
    const NOISE: &[&str] = &["", "yes", "no", "maybe", "truth", "falsey", "tru", "not", "is", "true false", "..", "1", "\"", "`"];
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let mut accepted = 0usize;
    for i in 0..10_000 {
        let word: String = ["true", "false"]
            .choose(&mut rng)
            .unwrap()
            .chars()
            .map(|c| if rng.random_bool(0.5) { c.to_ascii_uppercase() } else { c })
            .collect();
        let (lead, trail) = (*WS.choose(&mut rng).unwrap(), *WS.choose(&mut rng).unwrap());
        let punct = *PUNCT.choose(&mut rng).unwrap();
        let noise = if rng.random_bool(0.5) { "" } else { *NOISE.choose(&mut rng).unwrap() };
        let before = rng.random_bool(0.5);
        let extra = if rng.random_bool(0.3) { *PUNCT.choose(&mut rng).unwrap() } else { "" };
        let text = if before {
            format!("{lead}{noise}{word}{punct}{extra}{trail}")
        } else {
            format!("{lead}{word}{noise}{punct}{extra}{trail}")
        };
        let got = parse_boolean(&text);
        if let Some(expected) = boolean_closure(&text) {
            ensure!(got == Ok(expected), "wrapper {i} {text:?} gave {got:?}");
            accepted += 1;
        } else {
            ensure!(got.is_err(), "wrapper {i} {text:?} accepted as {got:?}");
        }
    }

    for i in 0..500 {
        let items: Vec<String> = (0..rng.random_range(0..5)).map(|_| random_word(&mut rng, 10)).collect();
        let json = serde_json::to_string(&items).unwrap();
        let want: Vec<String> = items.iter().map(|s| s.trim().to_lowercase()).collect();
        for text in [json.clone(), format!("```json\n{json}\n```"), format!("```\n{json}\n```\n")] {
            let got = parse_string_list(&text);
            ensure!(got.as_ref() == Ok(&want), "list {i} {text:?} gave {got:?}");
        }
    }
    for text in ["{\"a\": 1}", "\"ibuprofen\"", "42", "ibuprofen, naproxen", "[1, 2]", "```json\n{}\n```", "null"] {
        ensure!(parse_string_list(text).is_err(), "{text:?} accepted");
    }
    ensure!(accepted > 1000 && accepted < 9000, "unbalanced fuzz: {accepted} accepted");
    Ok(format!("10000 boolean wrappers ({accepted} in closure); fenced/unfenced lists round-trip"))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("bm25 oracle", bm25_oracle_suite),
        ("grounding oracle", grounding_oracle_suite),
        ("linker precedence", linker_precedence_suite),
        ("end-to-end fixture", end_to_end_fixture),
        ("fail-closed paths", fail_closed_paths),
        ("cache determinism", cache_determinism),
        ("parser fuzz", parser_fuzz),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<20} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<20} {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
