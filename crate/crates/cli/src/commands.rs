use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use simpeval_annosvc::{Config, Service, SystemClock};
use simpeval_core::agreement::{icc, overlap_rate, IccForm, RatingMatrix};
use simpeval_core::corpus::{
    attach_outputs, export_eval_set, load_corpus, load_outputs, sample_items, CorpusFormat, EvalItem,
    SamplingScheme,
};
use simpeval_core::erroranalysis::{
    average_ratings, count_erroneous, error_type_counts, labelwise_distribution, load_error_records, load_ratings,
    render_fig3, render_table6, render_table7, render_table8, unique_errors_per_erroneous, Deviation, Rating,
    RatingDimension,
};
use simpeval_core::jsonl;
use simpeval_core::metaeval::{
    binarize_error_presence, binarize_quality, correlation_report, randomization_test_exact,
    randomization_test_items, significance_marker, BinaryLabelSet, LabelRule, QualityScope, SigTestResult, SliceSpec,
};
use simpeval_core::promptlab::{
    build_grid, run_grid, select_best, EchoClient, ExampleManifest, GenerationCache, GenerationClient, GridTable,
    MockClient, PromptSetup, PromptSpec, ReplayClient, RunConfig, Templates,
};
use simpeval_core::textmetrics::{
    bleu_item_stats, fkgl_item_stats, load_external_scores, run_metrics, sari_item_stats, CorpusMetric,
};

use crate::{AgreeArgs, AnalyzeCmd, Command, CorpusCmd, InputArgs, MetaevalCmd, MetricsCmd, PromptlabCmd, ServeArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Corpus(c) => corpus(c),
        Command::Metrics(c) => metrics(c),
        Command::Agree(a) => agree(a),
        Command::Analyze(c) => analyze(c),
        Command::Metaeval(c) => metaeval(c),
        Command::Promptlab(c) => promptlab(c),
        Command::Serve(a) => serve(a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn format_of(input: &InputArgs) -> Result<CorpusFormat> {
    match &input.format {
        Some(f) => f.parse().map_err(|e: String| anyhow!(e)),
        None => Ok(CorpusFormat::from_path(&input.input)),
    }
}

fn load_items(path: &Path, format: CorpusFormat, outputs: Option<&Path>) -> Result<Vec<EvalItem>> {
    let loaded = load_corpus(path, format).with_context(|| format!("loading {}", path.display()))?;
    for w in &loaded.report.warnings {
        eprintln!("warning: {w}");
    }
    match outputs {
        Some(o) => Ok(attach_outputs(loaded.items, &load_outputs(o)?)?),
        None => Ok(loaded.items),
    }
}

fn corpus(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Validate { input, json } => {
            let loaded = load_corpus(&input.input, format_of(&input)?)?;
            if json {
                print!("{}", pretty(&loaded.report));
            } else {
                println!("{} items", loaded.items.len());
                for (group, n) in &loaded.report.counts {
                    println!("  {group}: {n}");
                }
                for w in &loaded.report.warnings {
                    println!("warning: {w}");
                }
            }
        }
        CorpusCmd::Sample { input, n, seed, scheme, out } => {
            let format = format_of(&input)?;
            let scheme: SamplingScheme = scheme.parse().map_err(|e: String| anyhow!(e))?;
            let items = load_items(&input.input, format, None)?;
            let picked = sample_items(&items, n, seed, scheme)?;
            export_eval_set(&picked, &out, CorpusFormat::from_path(&out))?;
            eprintln!("wrote {} items to {}", picked.len(), out.display());
        }
        CorpusCmd::Join { input, outputs, out } => {
            let items = load_items(&input.input, format_of(&input)?, Some(&outputs))?;
            export_eval_set(&items, &out, CorpusFormat::from_path(&out))?;
            eprintln!("wrote {} items to {}", items.len(), out.display());
        }
    }
    Ok(())
}

fn parse_metric(s: &str) -> Result<CorpusMetric> {
    s.parse().map_err(|e: String| anyhow!(e))
}

fn metrics(cmd: MetricsCmd) -> Result<()> {
    let MetricsCmd::Run { eval_set, outputs, system, metrics, out, scores_out } = cmd;
    let items = load_items(&eval_set, CorpusFormat::from_path(&eval_set), outputs.as_deref())?;
    let metrics: Vec<CorpusMetric> = metrics.iter().map(|m| parse_metric(m)).collect::<Result<_>>()?;
    let report = run_metrics(&items, &system, &metrics)?;
    for (m, v) in &report.corpus_scores {
        println!("{m:<5} {v:8.2}");
    }
    if let Some(path) = out {
        write(&path, &pretty(&report))?;
    }
    if let Some(path) = scores_out {
        write(&path, &jsonl::to_string(&report.sentence_scores))?;
    }
    Ok(())
}

fn dimensions(arg: Option<&str>) -> Result<Vec<RatingDimension>> {
    match arg {
        None | Some("all") => Ok(RatingDimension::ALL.to_vec()),
        Some(d) => Ok(vec![d.parse().map_err(|e: String| anyhow!(e))?]),
    }
}

fn agree(args: AgreeArgs) -> Result<()> {
    let ratings: Vec<Rating> = load_ratings(&args.ratings)?
        .into_iter()
        .filter(|r| args.system.as_ref().is_none_or(|s| &r.system_id == s))
        .filter(|r| args.dataset.as_ref().is_none_or(|d| r.dataset.as_ref() == Some(d)))
        .collect();
    let form: IccForm = args.form.parse().map_err(|e| anyhow!("{e}"))?;
    for dim in dimensions(args.dimension.as_deref())? {
        let m = RatingMatrix::from_ratings(&ratings, dim)?;
        match args.stat.as_str() {
            "overlap" => println!("{dim:<10} overlap {:.4}  ({} units)", overlap_rate(&m)?, m.n_items()),
            "icc" => println!("{dim:<10} {form} {:.4}  ({} units)", icc(&m, form)?, m.n_items()),
            other => bail!("unknown statistic {other:?}; expected overlap or icc"),
        }
    }
    Ok(())
}

fn systems_or_default(given: Vec<String>, found: impl IntoIterator<Item = String>) -> Vec<String> {
    if given.is_empty() {
        found.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        given
    }
}

fn analyze(cmd: AnalyzeCmd) -> Result<()> {
    match cmd {
        AnalyzeCmd::Errors { records, table, systems, sample_sd } => {
            let records = load_error_records(&records)?;
            let systems = systems_or_default(systems, records.iter().map(|r| r.system_id.clone()));
            let sys: Vec<&str> = systems.iter().map(String::as_str).collect();
            match table.as_str() {
                "6" => print!("{}", render_table6(&count_erroneous(&records)?, &sys)),
                "7" => print!("{}", render_table7(&error_type_counts(&records)?, &sys)),
                "fig3" => {
                    for s in &sys {
                        println!("{}", render_fig3(s, &labelwise_distribution(&records, s)));
                    }
                }
                "unique" => {
                    let dev = if sample_sd { Deviation::Sample } else { Deviation::Population };
                    for s in &sys {
                        let (mean, sd) = unique_errors_per_erroneous(&records, s, dev)?;
                        println!("{s:<12} {mean:.2} ± {sd:.2}");
                    }
                }
                other => bail!("unknown error table {other:?}; expected 6, 7, fig3 or unique"),
            }
        }
        AnalyzeCmd::Ratings { records, table, systems } => {
            if table != "8" {
                bail!("unknown rating table {table:?}; expected 8");
            }
            let ratings = load_ratings(&records)?;
            let systems = systems_or_default(systems, ratings.iter().map(|r| r.system_id.clone()));
            let sys: Vec<&str> = systems.iter().map(String::as_str).collect();
            print!("{}", render_table8(&average_ratings(&ratings)?, &sys));
        }
    }
    Ok(())
}

fn render_sigtest(a: &str, b: &str, metric: CorpusMetric, r: &SigTestResult, alpha: f64) -> String {
    let marker = significance_marker(r.p_value, alpha);
    let winner = match r.winner(metric.higher_is_better(), alpha) {
        Some(simpeval_core::metaeval::Side::A) => format!("{a}{marker}"),
        Some(simpeval_core::metaeval::Side::B) => format!("{b}{marker}"),
        None => "none".into(),
    };
    let how = if r.exact {
        format!("exact, {} patterns", r.resamples)
    } else {
        format!("{} resamples, seed {}", r.resamples, r.seed.unwrap_or_default())
    };
    format!(
        "{metric}: {a} {:.2} vs {b} {:.2}  diff {:+.2}  p = {:.4} ({how})\nsignificantly better: {winner}\n",
        r.score_a, r.score_b, r.observed, r.p_value
    )
}

fn metaeval(cmd: MetaevalCmd) -> Result<()> {
    match cmd {
        MetaevalCmd::Labels { records, ratings, rule, out } => {
            let rule: LabelRule = rule.parse()?;
            let set = match (rule, records, ratings) {
                (LabelRule::ErrorPresence, Some(r), _) => binarize_error_presence(&load_error_records(&r)?)?,
                (LabelRule::QualityOverall, _, Some(r)) => binarize_quality(&load_ratings(&r)?, QualityScope::Overall)?,
                (LabelRule::QualityDimension(d), _, Some(r)) => {
                    binarize_quality(&load_ratings(&r)?, QualityScope::Dimension(d))?
                }
                (LabelRule::ErrorPresence, ..) => bail!("error_presence labels need --records"),
                _ => bail!("quality labels need --ratings"),
            };
            eprintln!("{} units, {} positive", set.len(), set.positives());
            match out {
                Some(p) => write(&p, &set.to_jsonl())?,
                None => print!("{}", set.to_jsonl()),
            }
        }
        MetaevalCmd::Corr { labels, scores, slice, downsample, seed, json } => {
            let labels = BinaryLabelSet::load(&labels)?;
            let mut all = Vec::new();
            for p in &scores {
                all.extend(load_external_scores(p).with_context(|| format!("loading {}", p.display()))?);
            }
            let slices: Vec<SliceSpec> = slice.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            let report = correlation_report(&labels, &all, &slices, downsample.then_some(seed))?;
            print!("{}", report.render_text());
            if let Some(p) = json {
                write(&p, &report.to_json())?;
            }
        }
        MetaevalCmd::Sigtest { eval_set, outputs, a, b, metric, resamples, seed, exact, alpha, json } => {
            let items = load_items(&eval_set, CorpusFormat::from_path(&eval_set), outputs.as_deref())?;
            let metric = parse_metric(&metric)?;
            let result = if exact {
                match metric {
                    CorpusMetric::Sari => {
                        randomization_test_exact(&sari_item_stats(&items, &a)?, &sari_item_stats(&items, &b)?)?
                    }
                    CorpusMetric::Bleu => {
                        randomization_test_exact(&bleu_item_stats(&items, &a)?, &bleu_item_stats(&items, &b)?)?
                    }
                    CorpusMetric::Fkgl => {
                        randomization_test_exact(&fkgl_item_stats(&items, &a)?, &fkgl_item_stats(&items, &b)?)?
                    }
                }
            } else {
                randomization_test_items(&items, &a, &b, metric, resamples, seed)?
            };
            if json {
                print!("{}", pretty(&result));
            } else {
                print!("{}", render_sigtest(&a, &b, metric, &result, alpha));
            }
        }
    }
    Ok(())
}

fn make_client(spec: &str) -> Result<Box<dyn GenerationClient>> {
    if spec == "echo" {
        return Ok(Box::new(EchoClient));
    }
    match spec.split_once(':') {
        Some(("replay", path)) => Ok(Box::new(ReplayClient::load(Path::new(path))?)),
        Some(("mock", path)) => Ok(Box::new(MockClient::load(Path::new(path))?)),
        _ => bail!("unknown client {spec:?}; expected echo, replay:FILE or mock:FILE"),
    }
}

fn parse_params(params: &[String]) -> Result<BTreeMap<String, String>> {
    params
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| anyhow!("parameter {p:?} is not key=value"))
        })
        .collect()
}

fn promptlab(cmd: PromptlabCmd) -> Result<()> {
    match cmd {
        PromptlabCmd::Grid { json } => {
            let grid = build_grid();
            if json {
                print!("{}", pretty(&grid));
            } else {
                for s in grid {
                    println!("{:<12} {}", s.label(), s.describe());
                }
            }
        }
        PromptlabCmd::Run {
            client,
            valid,
            manifest,
            pool,
            templates,
            cache,
            specs,
            in_flight,
            max_attempts,
            param,
            out,
            records,
        } => {
            let client = make_client(&client)?;
            let items = load_items(&valid, CorpusFormat::from_path(&valid), None)?;
            let pool = match pool {
                Some(p) => load_items(&p, CorpusFormat::from_path(&p), None)?,
                None => items.clone(),
            };
            let templates = match templates {
                Some(dir) => Templates::from_dir(&dir)?,
                None => Templates::builtin(),
            };
            let setup = PromptSetup::new(templates, ExampleManifest::load(&manifest)?, pool);
            let cache = match cache {
                Some(p) => GenerationCache::open(&p)?,
                None => GenerationCache::in_memory(),
            };
            let grid: Vec<PromptSpec> = if specs.is_empty() {
                build_grid()
            } else {
                specs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
            };
            let config = RunConfig { in_flight, max_attempts, params: parse_params(&param)? };
            let table = run_grid(client.as_ref(), &cache, &setup, &items, &grid, &config)?;
            print!("{}", table.render_text());
            if let Some(p) = out {
                write(&p, &pretty(&GridTable { rows: table.rows.clone(), records: Vec::new() }))?;
            }
            if let Some(p) = records {
                write(&p, &jsonl::to_string(&table.records))?;
            }
        }
        PromptlabCmd::Select { table, json } => {
            let text = fs::read_to_string(&table).with_context(|| format!("reading {}", table.display()))?;
            let table: GridTable = serde_json::from_str(&text).context("parsing grid table")?;
            let sel = select_best(&table.rows)?;
            if json {
                print!("{}", pretty(&sel));
            } else {
                print!("{}", sel.render_text());
            }
        }
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut config = Config::load(&args.config)?;
    if let Some(p) = args.port {
        config.port = p;
    }
    let ip: IpAddr = config.bind.parse().with_context(|| format!("bad bind address {:?}", config.bind))?;
    let addr = SocketAddr::new(ip, config.port);
    let service = Arc::new(Service::open(config, Box::new(SystemClock))?);
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("annotation service listening on http://{addr}");
    rt.block_on(simpeval_annosvc::serve(service, addr))?;
    Ok(())
}
