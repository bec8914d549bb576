//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{fixture, spawn, Reply};
use rand::{Rng, RngCore};
use tabinstruct::config::Config;
use tabinstruct::fidelity::{ks_statistic, shape_score, trend_score, tv_distance};
use tabinstruct::instruct::{self, read_records, sample_instance, BuildPlan, InstructionRecord, Split};
use tabinstruct::llm::{extract_snapshot, generate_batch, Completer, HttpCompleter, MockCompleter, MockMode};
use tabinstruct::parse::{parse_llm_output, ParseStatus};
use tabinstruct::pipeline::run_pipeline;
use tabinstruct::registry::{Registry, Task};
use tabinstruct::report::{render_entries, FidelityEntry, RenderOptions, ReportFormat, ResultEntry, UtilityEntry};
use tabinstruct::seed;
use tabinstruct::table::{load_csv, serialize_rows, Cell, ColumnSchema, DataType, RowFormat, Table};
use tabinstruct::utility::{auc, default_specs, split_real, tstr, Metric, TstrOptions};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn table(name: &str) -> Table {
    load_csv(fixture(name), None).unwrap()
}

fn metric_identity() -> Check {
    let start = Instant::now();
    let names = ["numeric_only.csv", "categorical_only.csv", "mixed.csv", "with_missing.csv", "with_text.csv", "iris_like.csv", "blobs.csv", "linear.csv"];
    let kinds = |t: &Table| t.schema().iter().map(|c| c.dtype).collect::<HashSet<_>>();
    for name in names {
        let t = table(name);
        let s = shape_score(&t, &t).map_err(|e| format!("{name}: {e}"))?.shape;
        ensure(s == 100.0, || format!("{name}: shape {s}"))?;
        let tr = trend_score(&t, &t).map_err(|e| format!("{name}: {e}"))?.trend;
        ensure((tr - 100.0).abs() <= 1e-9, || format!("{name}: trend {tr}"))?;
    }
    ensure(kinds(&table("numeric_only.csv")) == HashSet::from([DataType::Numerical]), || "numeric_only has non-numeric columns".into())?;
    ensure(kinds(&table("categorical_only.csv")) == HashSet::from([DataType::Categorical]), || "categorical_only has other columns".into())?;
    ensure(kinds(&table("with_text.csv")).contains(&DataType::Textual), || "with_text has no textual column".into())?;
    ensure(table("with_missing.csv").rows().iter().flatten().any(Cell::is_missing), || "with_missing has no gaps".into())?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("{} fixtures", names.len()))
}

fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for &v in a.iter().chain(b) {
        let fa = a.iter().filter(|&&x| x <= v).count() as f64 / a.len() as f64;
        let fb = b.iter().filter(|&&x| x <= v).count() as f64 / b.len() as f64;
        best = best.max((fa - fb).abs());
    }
    best
}

fn tv_oracle(a: &[String], b: &[String]) -> f64 {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    a.iter().for_each(|v| counts.entry(v).or_default().0 += 1);
    b.iter().for_each(|v| counts.entry(v).or_default().1 += 1);
    0.5 * counts.values().map(|&(x, y)| (x as f64 / a.len() as f64 - y as f64 / b.len() as f64).abs()).sum::<f64>()
}

fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn metric_oracles() -> Check {
    let start = Instant::now();
    let mut rng = seed::stream(11, &["acceptance-oracles".into()]);
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let n = rng.random_range(1..=8);
        (0..n).map(|_| if rng.random_bool(0.5) { rng.random_range(0..4) as f64 } else { rng.random_range(-2.0..2.0) }).collect()
    };
    for case in 0..1000 {
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let got = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
        let want = ks_oracle(&a, &b);
        ensure((got - want).abs() <= 1e-12, || format!("ks case {case}: {got} vs {want} on {a:?} {b:?}"))?;
    }
    for case in 0..1000 {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<String> {
            (0..rng.random_range(1..40)).map(|_| ["a", "b", "c", "d", "e"][rng.random_range(0..5)].to_string()).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let got = tv_distance(&a, &b).map_err(|e| e.to_string())?;
        ensure(got == tv_oracle(&a, &b), || format!("tv case {case}: {got} vs {}", tv_oracle(&a, &b)))?;
    }
    let mut done = 0;
    while done < 500 {
        let n = rng.random_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { rng.random_range(0..5) as f64 } else { rng.random::<f64>() }).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
        ensure(got == auc_oracle(&scores, &labels), || format!("auc case {done}: {got} vs {}", auc_oracle(&scores, &labels)))?;
        done += 1;
    }
    within(start, Duration::from_secs(30))?;
    Ok("1000 ks, 1000 tv, 500 auc cases".into())
}

fn hand_values() -> Check {
    let cat = |vals: &[&str]| {
        Table::new(vec![ColumnSchema::new("c", DataType::Categorical)], vals.iter().map(|v| vec![Cell::text(*v)]).collect()).unwrap()
    };
    let shape = shape_score(&cat(&["A", "B"]), &cat(&["A", "A", "A", "B"])).map_err(|e| e.to_string())?.shape;
    ensure((shape - 75.0).abs() < 1e-12, || format!("tv shape {shape}"))?;
    let ks = ks_statistic(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    ensure((ks - 0.25).abs() < 1e-12, || format!("ks {ks}"))?;
    let pair = |sign: f64| {
        let schema = vec![ColumnSchema::new("x", DataType::Numerical), ColumnSchema::new("y", DataType::Numerical)];
        Table::new(schema, (0..10).map(|i| vec![Cell::Num(i as f64), Cell::Num(sign * i as f64)]).collect()).unwrap()
    };
    let trend = trend_score(&pair(1.0), &pair(-1.0)).map_err(|e| e.to_string())?.trend;
    ensure(trend.abs() < 1e-12, || format!("trend {trend}"))?;
    Ok("shape 75, ks 0.25, trend 0".into())
}

fn dataset_builder() -> Check {
    let start = Instant::now();
    let registry = Registry::load(fixture("two_table_registry.toml")).map_err(|e| e.to_string())?;
    let plan = BuildPlan { n_rows: 20, train_instances_per_table: 500, eval_instances_per_table: 100, seed: 3, ..BuildPlan::default() };
    let dir = tempfile::tempdir().unwrap();
    instruct::build_dataset(&registry, &plan, dir.path()).map_err(|e| e.to_string())?;
    let lines = |split: Split| std::fs::read_to_string(dir.path().join(split.file_name())).unwrap().lines().count();
    ensure(lines(Split::Train) == 1000 && lines(Split::Eval) == 200 && lines(Split::OodEval) == 0, || {
        format!("train {}, eval {}, ood {}", lines(Split::Train), lines(Split::Eval), lines(Split::OodEval))
    })?;

    let mut records = read_records(&dir.path().join(Split::Train.file_name())).map_err(|e| e.to_string())?;
    records.extend(read_records(&dir.path().join(Split::Eval.file_name())).map_err(|e| e.to_string())?);
    let mut tables = HashMap::new();
    for entry in &registry.datasets {
        let t = registry.load_table(entry).map_err(|e| e.to_string())?;
        let meta = instruct::load_metadata(&registry, entry, &t).map_err(|e| e.to_string())?.0;
        tables.insert(entry.id.clone(), (t, meta));
    }
    for r in &records {
        let (t, meta) = &tables[&r.dataset_id];
        let snapshot = extract_snapshot(&r.prompt).ok_or_else(|| format!("{}: no snapshot", r.key()))?;
        let n_lines = snapshot.lines().count();
        ensure(n_lines == 21, || format!("{}: snapshot has {n_lines} lines", r.key()))?;
        let out = parse_llm_output(&r.completion, t.schema(), 20);
        ensure(out.status == ParseStatus::Clean && out.rows_recovered == 20, || {
            format!("{}: completion {:?} with {} rows", r.key(), out.status, out.rows_recovered)
        })?;
        disjoint(r, t, meta, &plan)?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{} records checked", records.len()))
}

/// Recomputes the draw behind a record and checks it twice: by source
/// index, and by rendered row text (a shared line must come from a
/// duplicated source row).
fn disjoint(r: &InstructionRecord, t: &Table, meta: &tabinstruct::metadata::TableMetadata, plan: &BuildPlan) -> Result<(), String> {
    let inst = sample_instance(&r.dataset_id, t, meta, plan, r.split, r.index).map_err(|e| e.to_string())?;
    ensure(InstructionRecord::from_instance(&inst) == *r, || format!("{}: record does not match its draw", r.key()))?;
    let inputs: HashSet<usize> = inst.input_indices.iter().copied().collect();
    ensure(inst.expected_indices.iter().all(|i| !inputs.contains(i)), || format!("{}: shared source row", r.key()))?;

    let all: Vec<usize> = (0..t.n_rows()).collect();
    let rendered = serialize_rows(t, &all, RowFormat::CsvBlock).unwrap();
    let mut multiplicity: HashMap<&str, usize> = HashMap::new();
    rendered.lines().skip(1).for_each(|l| *multiplicity.entry(l).or_default() += 1);
    let snapshot: HashSet<&str> = extract_snapshot(&r.prompt).unwrap().lines().skip(1).collect();
    for line in r.completion.lines().skip(1) {
        ensure(!snapshot.contains(line) || multiplicity.get(line).copied().unwrap_or(0) > 1, || {
            format!("{}: expected row {line:?} also in the input", r.key())
        })?;
    }
    Ok(())
}

fn response(name: &str) -> String {
    std::fs::read_to_string(fixture("responses").join(name)).unwrap()
}

fn parser_contract() -> Check {
    let mut rng = seed::stream(5, &["acceptance-fuzz".into()]);
    let schema = table("iris_like.csv").schema().to_vec();
    let alphabet: Vec<char> = "abc019,.|-`\n \t\"#:*é✓".chars().collect();
    for case in 0..10_000 {
        let len = rng.random_range(0..200);
        let raw: String = if case % 2 == 0 {
            (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
        } else {
            let mut bytes = vec![0u8; len];
            rng.fill_bytes(&mut bytes);
            String::from_utf8_lossy(&bytes).into_owned()
        };
        let n = rng.random_range(1..30);
        let out = std::panic::catch_unwind(|| parse_llm_output(&raw, &schema, n)).map_err(|_| format!("panic on case {case}: {raw:?}"))?;
        let consistent = match out.status {
            ParseStatus::Clean => out.rows_recovered == n,
            ParseStatus::Salvaged => out.rows_recovered >= 1,
            ParseStatus::Rejected => out.rows_recovered == 0 && out.table.is_none(),
        };
        ensure(consistent, || format!("case {case}: inconsistent {:?} with {} rows", out.status, out.rows_recovered))?;
    }

    for case in 0..100 {
        let t = random_table(&mut rng);
        let idx: Vec<usize> = (0..t.n_rows()).collect();
        let format = if case % 2 == 0 { RowFormat::CsvBlock } else { RowFormat::PipeTable };
        let text = serialize_rows(&t, &idx, format).unwrap();
        let out = parse_llm_output(&text, t.schema(), t.n_rows());
        let back = out.table.as_ref().map(|b| b.rows().to_vec());
        ensure(out.status == ParseStatus::Clean && back.as_deref() == Some(t.rows()), || {
            format!("round trip {case} ({format:?}) gave {:?}:\n{text}", out.status)
        })?;
    }

    for i in 1..=4 {
        let out = parse_llm_output(&response(&format!("garbage_{i}.txt")), &schema, 5);
        ensure(out.status == ParseStatus::Rejected, || format!("garbage_{i}: {:?}", out.status))?;
        let out = parse_llm_output(&response(&format!("salvage_{i}.txt")), &schema, 5);
        ensure(out.status == ParseStatus::Salvaged && out.rows_recovered == 5, || {
            format!("salvage_{i}: {:?} with {} rows", out.status, out.rows_recovered)
        })?;
    }
    Ok("10000 fuzz, 100 round trips, 4 garbage, 4 salvage".into())
}

fn random_table(rng: &mut rand_chacha::ChaCha8Rng) -> Table {
    let words = ["red", "blue", "a b", "x,y", "quote\"d", "pipe|d", "Zürich", "n/a ok"];
    let dtypes: Vec<DataType> =
        (0..rng.random_range(1..6)).map(|_| [DataType::Numerical, DataType::Categorical, DataType::Textual][rng.random_range(0..3)]).collect();
    let rows = (0..rng.random_range(1..25))
        .map(|_| {
            let mut row: Vec<Cell> = dtypes
                .iter()
                .map(|d| match (d, rng.random_range(0..10)) {
                    (_, 0) => Cell::Missing,
                    (DataType::Numerical, k) if k < 4 => Cell::Num(rng.random_range(-100..100) as f64),
                    (DataType::Numerical, _) => Cell::Num(rng.random_range(-1e4..1e4)),
                    _ => Cell::text(words[rng.random_range(0..words.len())]),
                })
                .collect();
            if row.iter().all(Cell::is_missing) {
                row[0] = Cell::Num(0.0);
            }
            if dtypes[0] != DataType::Numerical && row[0] == Cell::Num(0.0) {
                row[0] = Cell::text("red");
            }
            row
        })
        .collect();
    let schema = dtypes.iter().enumerate().map(|(i, &d)| ColumnSchema::new(format!("col_{i}"), d)).collect();
    Table::new(schema, rows).unwrap()
}

fn e2e_config() -> Config {
    let mut config = Config {
        build: BuildPlan { n_rows: 20, train_instances_per_table: 10, eval_instances_per_table: 100, seed: 17, ..BuildPlan::default() },
        ..Config::default()
    };
    config.endpoint.max_in_flight = 8;
    config
}

async fn offline_run(registry: &Registry, mode: MockMode, out: &Path) -> Result<Vec<ResultEntry>, String> {
    let mock = MockCompleter::new(mode, 23);
    let run = run_pipeline(registry, &e2e_config(), &mock, "mock", out, false).await.map_err(|e| e.to_string())?;
    Ok(run.entries.iter().map(|p| ResultEntry::from_json(&std::fs::read_to_string(p).unwrap(), p).unwrap()).collect())
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.ends_with("progress.jsonl") {
                // progress keeps completion order, which varies run to run
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

async fn offline_end_to_end() -> Check {
    let start = Instant::now();
    let registry = Registry::load(fixture("e2e_registry.toml")).map_err(|e| e.to_string())?;
    let (a, b, g) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());

    let entries = offline_run(&registry, MockMode::ResampleRows, a.path()).await?;
    ensure(entries.len() == 3, || format!("{} result entries", entries.len()))?;
    let mut summary = Vec::new();
    for e in &entries {
        let ResultEntry::Fidelity(f) = e else { return Err("unexpected utility entry".into()) };
        let (shape, trend) = (f.shape.unwrap_or(0.0), f.trend.unwrap_or(0.0));
        ensure(shape >= 95.0 && trend >= 85.0, || format!("{}: shape {shape:.2}, trend {trend:.2}", f.dataset_id))?;
        summary.push(format!("{} {shape:.2}/{trend:.2}", f.dataset_id));
    }

    offline_run(&registry, MockMode::ResampleRows, b.path()).await?;
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    ensure(ta.keys().eq(tb.keys()), || "runs wrote different files".into())?;
    for (k, v) in &ta {
        ensure(tb[k] == *v, || format!("{k} differs between runs"))?;
    }

    let entries = offline_run(&registry, MockMode::Garbage, g.path()).await?;
    for p in read_tree(&g.path().join("parsed")).values() {
        let outcome: serde_json::Value = serde_json::from_slice(p).unwrap();
        ensure(outcome["status"] == "rejected", || format!("garbage parsed as {}", outcome["status"]))?;
    }
    ensure(entries.iter().all(|e| matches!(e, ResultEntry::Fidelity(f) if f.shape.is_none() && f.reason.is_some())), || {
        "garbage run produced a score".into()
    })?;
    let md = std::fs::read_to_string(g.path().join("report.md")).unwrap();
    ensure(md.contains("| --[1] |") && md.contains("[1] ") && md.contains("rejected"), || format!("report lacks reasoned gaps:\n{md}"))?;
    within(start, Duration::from_secs(120))?;
    Ok(summary.join(", "))
}

fn tstr_self_consistency() -> Check {
    let start = Instant::now();
    let opts = TstrOptions::default();
    let specs = default_specs(0);
    let mut notes = Vec::new();
    for (name, task, tol) in [("blobs.csv", Task::Classification, 0.02), ("linear.csv", Task::Regression, 0.05)] {
        let real = table(name);
        let target = if task == Task::Classification { "label" } else { "y" };
        let (train, _) = split_real(&real, target, task, opts.test_fraction, opts.split_seed).map_err(|e| e.to_string())?;
        let synth = real.select_rows(&train).unwrap();
        let r = tstr(&real, &synth, target, task, &specs, &opts).map_err(|e| e.to_string())?;
        let (avg, base) = (r.average.ok_or("no average")?, r.baseline_real.ok_or("no baseline")?);
        ensure((avg - base).abs() <= tol, || format!("{name}: average {avg:.4} vs baseline {base:.4}"))?;
        if task == Task::Classification {
            ensure(r.metric == Metric::Auc, || format!("{name}: metric {:?}", r.metric))?;
            for m in &r.per_model {
                let s = m.score.unwrap_or(0.0);
                ensure(s >= 0.95, || format!("{name}: {} AUC {s:.4}", m.family.label()))?;
            }
        }
        notes.push(format!("{name} {avg:.4} vs {base:.4}"));
    }
    within(start, Duration::from_secs(120))?;
    Ok(notes.join(", "))
}

fn report_layout() -> Check {
    let fidelity = ResultEntry::Fidelity(FidelityEntry { shape: Some(92.34), trend: Some(87.96), ..FidelityEntry::failed("adult", "GPT-4o", "") });
    let utility = ResultEntry::Utility(UtilityEntry {
        score: Some(0.8732),
        baseline_real: Some(0.8796),
        reason: None,
        ..UtilityEntry::failed("adult", "GPT-4o", Metric::Auc, "")
    });
    let entries = [fidelity, utility];
    for (format, golden) in [(ReportFormat::Markdown, "adult_report.md"), (ReportFormat::Latex, "adult_report.tex")] {
        let got = render_entries(&entries, &RenderOptions::default(), format).map_err(|e| e.to_string())?;
        let want = std::fs::read_to_string(fixture("golden").join(golden)).unwrap();
        ensure(got == want, || format!("{golden} mismatch:\n{got}"))?;
    }
    Ok("markdown and latex golden files".into())
}

fn records(n: usize) -> Vec<InstructionRecord> {
    (0..n)
        .map(|i| InstructionRecord {
            prompt: format!("p{i}"),
            completion: String::new(),
            dataset_id: "d".into(),
            split: Split::Eval,
            seed: 0,
            index: i,
        })
        .collect()
}

async fn llm_contract() -> Check {
    let server = spawn(|n, _| if n < 2 { Reply::Status(429) } else { Reply::Text("ok".into()) }).await;
    let got = HttpCompleter::new(server.config()).unwrap().complete("x").await.map_err(|e| e.to_string())?.attempts;
    ensure(got == 3, || format!("429x2: {got} attempts"))?;

    let server = spawn(|_, _| Reply::Status(401)).await;
    let got = HttpCompleter::new(server.config()).unwrap().complete("x").await.unwrap_err().attempts();
    ensure(got == 1 && server.hits() == 1, || format!("401: {got} attempts"))?;

    let server = spawn(|_, _| Reply::Hang(Duration::from_secs(2))).await;
    let mut cfg = server.config();
    cfg.timeout = Duration::from_millis(100);
    cfg.max_retries = 3;
    let got = HttpCompleter::new(cfg).unwrap().complete("x").await.unwrap_err().attempts();
    ensure(got == 4, || format!("timeout: {got} attempts, want max_retries+1 = 4"))?;

    let dir = tempfile::tempdir().unwrap();
    let progress = dir.path().join("progress.jsonl");
    let recs = records(60);
    let first = spawn(|_, _| Reply::Text("a".into())).await;
    generate_batch(&HttpCompleter::new(first.config()).unwrap(), &recs[..35], &progress, 4).await.map_err(|e| e.to_string())?;
    let second = spawn(|n, _| Reply::Delayed(Duration::from_millis(3 + (n % 5) as u64 * 4), "b".into())).await;
    let (out, _) = generate_batch(&HttpCompleter::new(second.config()).unwrap(), &recs, &progress, 3).await.map_err(|e| e.to_string())?;
    ensure(second.hits() == 25, || format!("resume issued {} calls, want 25", second.hits()))?;
    ensure(out.iter().all(|g| g.is_ok()), || "resumed batch has failures".into())?;
    ensure(second.peak() <= 3, || format!("peak in flight {} > 3", second.peak()))?;
    Ok(format!("attempts 3/1/4, resume 25 calls, peak {}", second.peak()))
}

fn main() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let checks: Vec<Criterion> = vec![
        ("metric identity", Box::new(metric_identity)),
        ("metric oracles", Box::new(metric_oracles)),
        ("hand-computed values", Box::new(hand_values)),
        ("dataset builder", Box::new(dataset_builder)),
        ("parser totality and round trip", Box::new(parser_contract)),
        ("offline end to end", Box::new(|| rt.block_on(offline_end_to_end()))),
        ("tstr self-consistency", Box::new(tstr_self_consistency)),
        ("report layout", Box::new(report_layout)),
        ("llm client contract", Box::new(|| rt.block_on(llm_contract()))),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("PASS {name} ({detail}) [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
