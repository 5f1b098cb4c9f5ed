//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or overruns its time budget.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;
#[path = "../../core/tests/common/prompt_fixture.rs"]
mod prompt_fixture;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use simpeval_annosvc::{router, Config, ManualClock, Service};
use simpeval_core::corpus::{Dataset, EvalItem, ReferenceSet, SourceItem, Split};
use simpeval_core::erroranalysis::{
    count_erroneous, error_type_counts, load_error_records, parse_error_records, parse_ratings,
    unique_errors_per_erroneous, Deviation, ErrorType,
};
use simpeval_core::metaeval::{
    correlation_report, downsample, downsample_indices, point_biserial, randomization_test, randomization_test_exact,
    BinaryLabelSet, PairedScores, SliceSpec,
};
use simpeval_core::promptlab::{
    build_grid, run_grid, select_best, GenerationCache, PromptSetup, PromptSpec, PromptStyle, RunConfig, Templates,
};
use simpeval_core::textmetrics::{
    fkgl_corpus, sari_corpus, sari_sentence, BleuStat, CorpusStat, FkglStat, SariStat, SentenceMetric, SentenceScore,
};
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn workspace_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("..").join(rel)
}

fn consensus_fixture() -> PathBuf {
    workspace_path("core/tests/fixtures/task1_consensus.jsonl")
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want} ± {tol}"))
    }
}

fn fkgl_floor() -> Outcome {
    let v = fkgl_corpus(&["Go.", "Stop!", "Run? Eat.", "Yes."]).map_err(|e| e.to_string())?;
    close(v, -3.40, 1e-9, "fkgl")?;
    Ok(format!("fkgl = {v:.12}"))
}

fn fkgl_cat_sat() -> Outcome {
    let stat = FkglStat::text("The cat sat.");
    ensure!(
        (stat.words, stat.sentences, stat.syllables) == (3, 1, 3),
        "counts {:?}",
        stat
    );
    let v = fkgl_corpus(&["The cat sat."]).map_err(|e| e.to_string())?;
    let (words, sentences, syllables) = (3.0, 1.0, 3.0);
    let hand = 0.39 * (words / sentences) + 11.8 * (syllables / words) - 15.59;
    close(v, hand, 1e-12, "hand computation")?;
    close(v, -2.62, 0.01, "fkgl")?;
    Ok(format!("fkgl = {v:.4} (3 words, 1 sentence, 3 syllables)"))
}

fn eval_item(id: &str, source: &str, refs: &[&str], output: &str) -> EvalItem {
    EvalItem {
        source: SourceItem { id: id.into(), dataset: Dataset::Custom, split: Split::Test, text: source.into() },
        refs: ReferenceSet { item_id: id.into(), references: refs.iter().map(|r| r.to_string()).collect() },
        outputs: [("sys".to_string(), output.to_string())].into_iter().collect(),
    }
}

fn sari_identity() -> Outcome {
    let cases = ["The cat sat on the mat.", "a", "one two three four five", "x y x y x y"];
    for s in cases {
        let v = sari_sentence(s, s, &[s, s, s]).map_err(|e| e.to_string())?;
        ensure!(v == 100.0, "{s:?}: sentence SARI {v}");
    }
    let items: Vec<_> = cases.iter().enumerate().map(|(i, s)| eval_item(&i.to_string(), s, &[s, s], s)).collect();
    let v = sari_corpus(&items, "sys").map_err(|e| e.to_string())?;
    ensure!(v == 100.0, "corpus SARI {v}");
    Ok(format!("{} sentences and corpus = 100.0", cases.len()))
}

fn random_sentence(rng: &mut ChaCha8Rng) -> String {
    const VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    let len = rng.random_range(1..=8);
    (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

fn sari_bleu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let source = random_sentence(&mut rng);
        let output = random_sentence(&mut rng);
        let nrefs = rng.random_range(1..=3);
        let refs: Vec<String> = (0..nrefs).map(|_| random_sentence(&mut rng)).collect();
        let r: Vec<&str> = refs.iter().map(String::as_str).collect();

        let got = sari_sentence(&source, &output, &r).map_err(|e| e.to_string())?;
        let want = oracle::sari(&source, &output, &r);
        close(got, want, 1e-9, &format!("case {case} sari"))?;
        worst = worst.max((got - want).abs());

        let got = BleuStat::sentence(&output, &r).map_err(|e| e.to_string())?.score();
        let want = oracle::bleu(&[(output.as_str(), r.clone())]);
        close(got, want, 1e-9, &format!("case {case} bleu"))?;
        worst = worst.max((got - want).abs());
    }
    Ok(format!("50 triples, max |diff| = {worst:.1e}"))
}

fn point_biserial_pearson() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(5..200);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let pb = |l: &[u8], s: Vec<f64>| {
            point_biserial(&PairedScores::new(l.to_vec(), s).unwrap()).map_err(|e| format!("case {case}: {e}"))
        };
        let r = pb(&labels, scores.clone())?;
        let x: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let diff = (r - oracle::pearson(&x, &scores)).abs();
        if diff.is_nan() || diff >= 1e-12 {
            return Err(format!("case {case}: |r_pb - r| = {diff:e}"));
        }
        worst = worst.max(diff);

        let scaled = pb(&labels, scores.iter().map(|v| 4.0 * v).collect())?;
        ensure!(scaled == r, "case {case}: scaling by 4 moved r from {r} to {scaled}");
        let shifted = pb(&labels, scores.iter().map(|v| 2.5 * v - 7.0).collect())?;
        close(shifted, r, 1e-12, &format!("case {case} affine"))?;
        let negated = pb(&labels, scores.iter().map(|v| -v).collect())?;
        ensure!(negated == -r, "case {case}: negated scores gave {negated}, want {}", -r);
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let f = pb(&flipped, scores)?;
        ensure!(f == -r, "case {case}: flipped labels gave {f}, want {}", -r);
    }
    Ok(format!("100 vectors, max |r_pb - r| = {worst:.1e}"))
}

fn randomization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a: Vec<f64> = (0..10).map(|_| rng.random_range(20.0..60.0)).collect();
    let b: Vec<f64> = a.iter().map(|x| x - rng.random_range(-4.0..12.0)).collect();
    let stats = |v: &[f64]| v.iter().map(|&x| SariStat { sum: x, count: 1 }).collect::<Vec<_>>();
    let exact = randomization_test_exact(&stats(&a), &stats(&b)).map_err(|e| e.to_string())?;
    close(exact.p_value, oracle::exact_swap_p(&a, &b), 1e-12, "exact vs oracle")?;
    let mc = randomization_test(&stats(&a), &stats(&b), 100_000, 77).map_err(|e| e.to_string())?;
    close(mc.p_value, exact.p_value, 0.01, "monte carlo vs exact")?;
    let same = randomization_test(&stats(&a), &stats(&a), 100_000, 77).map_err(|e| e.to_string())?;
    ensure!(same.p_value == 1.0, "identical systems p = {}", same.p_value);
    let same_exact = randomization_test_exact(&stats(&a), &stats(&a)).map_err(|e| e.to_string())?;
    ensure!(same_exact.p_value == 1.0, "identical systems exact p = {}", same_exact.p_value);
    Ok(format!("p_mc = {:.4}, p_exact = {:.4}, identical p = 1", mc.p_value, exact.p_value))
}

fn error_tables() -> Outcome {
    let records = load_error_records(&consensus_fixture()).map_err(|e| e.to_string())?;
    let t = count_erroneous(&records).map_err(|e| e.to_string())?;
    for (d, g, c) in [("turk", 45, 114), ("asset", 64, 100), ("newsela", 73, 115)] {
        let (gg, cc) = (t.get(d, "gpt4").erroneous, t.get(d, "control-t5").erroneous);
        ensure!((gg, cc) == (g, c), "{d}: {gg}/{cc}, want {g}/{c}");
    }
    let totals = (t.system_total("gpt4").erroneous, t.system_total("control-t5").erroneous);
    ensure!(totals == (182, 329), "erroneous totals {totals:?}");
    let e = error_type_counts(&records).map_err(|e| e.to_string())?;
    let inst = (e.system_total("gpt4"), e.system_total("control-t5"));
    ensure!(inst == (215, 364), "instance totals {inst:?}");
    let lex = (
        e.system_type_total("gpt4", ErrorType::LackSimplicityLexical),
        e.system_type_total("control-t5", ErrorType::LackSimplicityLexical),
    );
    ensure!(lex == (100, 4), "lack_simplicity_lexical {lex:?}");
    Ok("45/114 64/100 73/115 = 182/329; instances 215/364; lexical simplicity 100 vs 4".into())
}

fn unique_errors() -> Outcome {
    let records = load_error_records(&consensus_fixture()).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (sys, mean, sd) in [("gpt4", 1.09, 0.28), ("control-t5", 1.06, 0.25)] {
        let (m, s) = unique_errors_per_erroneous(&records, sys, Deviation::Population).map_err(|e| e.to_string())?;
        close(m, mean, 0.01, &format!("{sys} mean"))?;
        close(s, sd, 0.01, &format!("{sys} sd"))?;
        out.push(format!("{sys} {m:.3} ± {s:.3}"));
    }
    Ok(out.join(", "))
}

fn metaeval_noise() -> Outcome {
    let sigma: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, sigma).map_err(|e| e.to_string())?;
    let labels: Vec<u8> = (0..500).map(|i| u8::from(i % 2 == 1)).collect();
    let scores: Vec<SentenceScore> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| SentenceScore {
            item_id: format!("{i:03}"),
            system_id: "s".into(),
            metric: SentenceMetric::Lens,
            value: f64::from(l) + noise.sample(&mut rng),
        })
        .collect();
    let jsonl: String = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{{\"id\":\"{i:03}\",\"system\":\"s\",\"label\":{l},\"rule\":\"error_presence\"}}\n"))
        .collect();
    let set = BinaryLabelSet::from_jsonl(&jsonl).map_err(|e| e.to_string())?;
    let report = correlation_report(&set, &scores, &[SliceSpec::All], Some(1)).map_err(|e| e.to_string())?;
    let want = (0.25 / (0.25 + sigma * sigma)).sqrt();
    let r = report.rows[0].r.ok_or("no correlation reported")?;
    close(r, want, 0.05, "r")?;

    let skewed: Vec<u8> = (0..300).map(|i| u8::from(i % 5 == 0)).collect();
    let values: Vec<f64> = (0..300).map(f64::from).collect();
    let p = PairedScores::new(skewed.clone(), values).map_err(|e| e.to_string())?;
    let d = downsample(&p, 42).map_err(|e| e.to_string())?;
    ensure!(d.class_counts() == (60, 60), "downsampled classes {:?}", d.class_counts());
    let again = downsample_indices(&skewed, 42).map_err(|e| e.to_string())?;
    ensure!(again == downsample_indices(&skewed, 42).unwrap(), "same seed, different draw");
    ensure!(again != downsample_indices(&skewed, 43).unwrap(), "seed has no effect");
    Ok(format!("r = {r:.4} vs {want:.4}; downsample 240/60 -> 60/60, seed-stable"))
}

fn prompt_grid() -> Outcome {
    let grid = build_grid();
    let distinct: std::collections::BTreeSet<String> = grid.iter().map(PromptSpec::label).collect();
    ensure!(grid.len() == 15 && distinct.len() == 15, "{} specs, {} distinct", grid.len(), distinct.len());

    let (pool, manifest) = prompt_fixture::example_pool();
    let setup = PromptSetup::new(Templates::builtin(), manifest, pool);
    let cases = [
        ("turk", PromptSpec::few_shot(PromptStyle::Turk, 3, 1), 83, 8.3),
        ("asset", PromptSpec::few_shot(PromptStyle::Asset, 3, 1), 45, 4.5),
        ("newsela", PromptSpec::few_shot(PromptStyle::Newsela, 3, 3), 36, 3.6),
    ];
    let mut turk_diff = f64::NAN;
    for (name, best, gap, diff) in cases {
        let items = prompt_fixture::validation_set(name, 1000);
        let mock = prompt_fixture::scripted_client(&items, &prompt_fixture::correct_counts(best, 700, gap));
        let table = run_grid(&mock, &GenerationCache::in_memory(), &setup, &items, &grid, &RunConfig::default())
            .map_err(|e| e.to_string())?;
        let sel = select_best(&table.rows).map_err(|e| e.to_string())?;
        ensure!(sel.best == best, "{name}: best {} want {}", sel.best.label(), best.label());
        close(sel.diff, diff, 1e-9, &format!("{name} diff"))?;
        if name == "turk" {
            turk_diff = sel.diff;
        }
    }
    Ok(format!("15 specs; best turk/3/1 asset/3/1 newsela/3/3; turk diff {turk_diff:.1}"))
}

struct Client {
    router: axum::Router,
}

impl Client {
    async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8_lossy(&bytes).into_owned())
    }

    async fn session(&self, annotator: &str, task: &str) -> Result<String, String> {
        let req = json!({"annotator_id": annotator, "task": task, "credential": format!("cred-{annotator}")});
        let (s, text) = self.call(Method::POST, "/sessions", None, Some(req)).await;
        ensure!(s == StatusCode::OK, "session {annotator}/{task}: {s} {text}");
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        Ok(v["token"].as_str().unwrap_or_default().to_string())
    }

    async fn submit(&self, token: &str, id: &str, system: &str, payload: Value, key: &str) -> (StatusCode, Value) {
        let body = json!({
            "unit": {"id": id, "system": system},
            "payload": payload,
            "client_version": "acceptance/1",
            "idempotency_key": key,
        });
        let (s, text) = self.call(Method::POST, "/submit", Some(token), Some(body)).await;
        (s, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn export(&self, task: &str, admin: &str) -> Result<String, String> {
        let (s, text) = self.call(Method::GET, &format!("/export?task={task}"), Some(admin), None).await;
        ensure!(s == StatusCode::OK, "export {task}: {s} {text}");
        Ok(text)
    }
}

async fn service_flow() -> Outcome {
    let config = Config::load(&workspace_path("annosvc/tests/fixtures/service.toml")).map_err(|e| e.to_string())?;
    let admin = config.admin_token.clone();
    let unit = config.task1.units[0].clone();
    let service = Arc::new(Service::in_memory(config, Box::new(Arc::new(ManualClock::new(1_700_000_000)))));
    let client = Client { router: router(service) };

    let t1 = client.session("a1", "task1").await?;
    let overlapping = json!({"annotations": [
        {"type": "altered_meaning_lexical", "output_spans": [[22, 30]]},
        {"type": "altered_meaning_structural", "output_spans": [[0, 30]], "source_spans": [[0, 41]]}
    ]});
    let (s, ack) = client.submit(&t1, &unit.id, &unit.system, overlapping, "t1").await;
    ensure!(s == StatusCode::CREATED, "task1 submit: {s} {ack}");

    let t2 = client.session("a2", "task2").await?;
    let rating = json!({"fluency": 3, "meaning": 2, "simplicity": 3});
    let (s, ack) = client.submit(&t2, "newsela-test-010", "gpt4", rating, "t2").await;
    ensure!(s == StatusCode::CREATED, "task2 submit: {s} {ack}");

    let first = client.export("task1", &admin).await?;
    ensure!(first == client.export("task1", &admin).await?, "task1 export not byte-identical");
    let records = parse_error_records(&first).map_err(|e| e.to_string())?;
    ensure!(records.len() == 1 && records[0].annotations.len() == 2, "task1 export {first}");
    records[0].validate_spans(&unit.output, &unit.source).map_err(|e| e.to_string())?;

    let second = client.export("task2", &admin).await?;
    ensure!(second == client.export("task2", &admin).await?, "task2 export not byte-identical");
    let ratings = parse_ratings(&second).map_err(|e| e.to_string())?;
    ensure!(ratings.len() == 1 && ratings[0].meaning == 2, "task2 export {second}");

    let len = unit.output.chars().count();
    let oob = json!({"annotations": [
        {"type": "hallucination", "output_spans": [[0, 3]]},
        {"type": "repetition", "output_spans": [[0, 5], [30, len + 1]]}
    ]});
    let (s, v) = client.submit(&t1, &unit.id, &unit.system, oob, "oob").await;
    ensure!(s == StatusCode::UNPROCESSABLE_ENTITY, "out-of-bounds span accepted: {s} {v}");
    let field = v["error"]["field"].as_str().unwrap_or_default();
    ensure!(field == "payload.annotations[1].output_spans[1]", "error field {field:?}");
    ensure!(first == client.export("task1", &admin).await?, "rejected submission changed the export");
    Ok(format!("2 overlapping spans + 1 rating exported stably; rejected at {field}"))
}

fn service_round_trip() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(service_flow())
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { name: "fkgl floor", budget: secs(1), check: fkgl_floor },
        Criterion { name: "fkgl hand computation", budget: secs(1), check: fkgl_cat_sat },
        Criterion { name: "sari identity", budget: secs(1), check: sari_identity },
        Criterion { name: "sari/bleu oracle equivalence", budget: secs(10), check: sari_bleu_oracle },
        Criterion { name: "point-biserial equals pearson", budget: secs(5), check: point_biserial_pearson },
        Criterion { name: "randomization test", budget: secs(30), check: randomization },
        Criterion { name: "error count tables", budget: secs(5), check: error_tables },
        Criterion { name: "unique errors per erroneous output", budget: secs(1), check: unique_errors },
        Criterion { name: "meta-evaluation pipeline", budget: secs(10), check: metaeval_noise },
        Criterion { name: "prompt grid selection", budget: secs(10), check: prompt_grid },
        Criterion { name: "annotation service round trip", budget: secs(10), check: service_round_trip },
    ];

    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.budget => Err(format!("{detail}; over budget of {:?}", c.budget)),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {:<36} {:>9.3}s  {detail}", i + 1, c.name, took.as_secs_f64());
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
