use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use serde::Serialize;
use tabinstruct::config::Config;
use tabinstruct::fidelity::fidelity_report;
use tabinstruct::instruct::{self, InstructionRecord};
use tabinstruct::llm::{self, Completer, HttpCompleter, MockCompleter, MockMode};
use tabinstruct::manifest::RunManifest;
use tabinstruct::metadata::{self, LargeTablePolicy, TableMetadata};
use tabinstruct::parse::{parse_llm_output_with, ParseOutcome, ParseStatus};
use tabinstruct::pipeline::{self, ParsedGeneration};
use tabinstruct::registry::{DatasetRegistryEntry, Registry, Task};
use tabinstruct::report::{self, FidelityEntry, RenderOptions, ReportFormat, ResultEntry, UtilityEntry};
use tabinstruct::table::{load_csv, Table};
use tabinstruct::utility::{tstr, Metric};

use crate::error::CliError;
use crate::Common;

type Result<T> = std::result::Result<T, CliError>;

struct Ctx {
    config: Config,
    hash: String,
    common: Common,
}

impl Ctx {
    fn load(common: &Common) -> Result<Ctx> {
        let config = match &common.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        Ok(Ctx { hash: config.hash(), config, common: common.clone() })
    }

    /// `--registry`, then the config's registry, then the built-in manifest.
    fn registry(&self) -> Result<Registry> {
        match self.common.registry.as_ref().or(self.config.registry.as_ref()) {
            Some(p) => Ok(Registry::load(p)?),
            None => Ok(Registry::builtin()),
        }
    }

    fn manifest(&self, command: &str, args: Vec<String>, registry: Option<&Registry>) -> RunManifest {
        let mut m = RunManifest::new(command, args, &self.hash);
        if let Some(r) = registry {
            m.registry_version = Some(r.version.clone());
            m.registry_digest = Some(r.digest());
        }
        m
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).expect("values serialize");
    writeln!(out)?;
    Ok(())
}

fn artifact_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::from)
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory for train.jsonl, eval.jsonl and ood_eval.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `build.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn build_dataset(a: BuildArgs, argv: Vec<String>) -> Result<()> {
    let mut ctx = Ctx::load(&a.common)?;
    if let Some(s) = a.seed {
        ctx.config.build.seed = s;
        ctx.hash = ctx.config.hash();
    }
    let registry = ctx.registry()?;
    let summary = instruct::build_dataset(&registry, &ctx.config.build, &a.out)?;
    let mut m = ctx.manifest("build-dataset", argv, Some(&registry)).seed("build", ctx.config.build.seed);
    m.outputs = summary.files.iter().map(|p| p.display().to_string()).collect();
    m.append_to(&a.out)?;
    print_json(&summary)
}

#[derive(Args, Debug)]
pub struct MetadataArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dataset: String,
    /// Where to write the metadata; the CSV's sidecar path by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use a saved model reply instead of calling the endpoint.
    #[arg(long)]
    response_file: Option<PathBuf>,
    /// Print the prompt and stop.
    #[arg(long)]
    prompt_only: bool,
    /// Embed a stratified sample when the table exceeds the token budget.
    #[arg(long)]
    sample_large_tables: bool,
    /// Review each draft before it is saved.
    #[arg(long)]
    interactive: bool,
    /// Replace an existing sidecar.
    #[arg(long)]
    force: bool,
}

pub fn gen_metadata(a: MetadataArgs, argv: Vec<String>) -> Result<()> {
    let ctx = Ctx::load(&a.common)?;
    let registry = ctx.registry()?;
    let entry = registry.get(&a.dataset)?.clone();
    let table = registry.load_table(&entry)?;
    let exemplar = match &ctx.config.metadata.exemplar {
        Some(p) => TableMetadata::load_sidecar(p)?,
        None => TableMetadata::exemplar(),
    };
    let mut opts = ctx.config.metadata.prompt_options();
    if a.sample_large_tables {
        opts.large_table = LargeTablePolicy::Sample { rows: ctx.config.metadata.sample_rows };
    }
    let prompt = metadata::render_metadata_prompt(&table, &exemplar, &opts)?;
    if a.prompt_only {
        println!("{}", prompt.text);
        return Ok(());
    }
    let http = match &a.response_file {
        Some(_) => None,
        None => Some(HttpCompleter::new(ctx.config.endpoint.clone().with_key_from_env())?),
    };
    let rt = runtime()?;
    let draft = loop {
        let raw = match (&a.response_file, &http) {
            (Some(p), _) => std::fs::read_to_string(p)?,
            (None, Some(c)) => rt.block_on(c.complete(&prompt.text))?.text,
            (None, None) => unreachable!(),
        };
        let mut draft = metadata::parse_metadata_response(&raw, table.schema());
        draft.sampled_rows = prompt.sampled_rows;
        if !a.interactive {
            break draft;
        }
        match review(&draft)? {
            Review::Accept => break draft,
            Review::Retry => continue,
            Review::Quit => return Err(CliError::validation("review", "draft rejected during review")),
        }
    };
    print_json(&draft)?;
    let Some(meta) = draft.parsed else {
        let issues: Vec<String> = draft.issues.iter().map(|i| i.to_string()).collect();
        return Err(CliError::validation("metadata_issues", issues.join("; ")));
    };
    let out = a.out.unwrap_or_else(|| TableMetadata::sidecar_path(&registry.resolve(&entry)));
    if out.exists() && !a.force {
        return Err(CliError::validation("exists", format!("{} exists; pass --force to replace it", out.display())));
    }
    meta.save_sidecar(&out)?;
    let mut m = ctx.manifest("gen-metadata", argv, Some(&registry)).seed("metadata", opts.seed);
    if http.is_some() {
        m.endpoint = Some(ctx.config.endpoint.redacted());
    }
    m.outputs = vec![out.display().to_string()];
    m.append_to(&artifact_dir(&out))?;
    Ok(())
}

enum Review {
    Accept,
    Retry,
    Quit,
}

fn review(draft: &metadata::MetadataDraft) -> Result<Review> {
    let mut err = std::io::stderr().lock();
    if let Some(meta) = &draft.parsed {
        writeln!(err, "General description: {}", meta.general_description)?;
        for c in &meta.columns {
            writeln!(err, "- {} ({}): {}", c.name, c.dtype.as_str(), c.description)?;
        }
    }
    for i in &draft.issues {
        writeln!(err, "issue: {i}")?;
    }
    let choices = if draft.parsed.is_some() { "[a]ccept, [r]egenerate, [q]uit" } else { "[r]egenerate, [q]uit" };
    let stdin = std::io::stdin();
    loop {
        write!(err, "{choices}? ")?;
        err.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            return Ok(Review::Quit);
        }
        match line.trim() {
            "a" if draft.parsed.is_some() => return Ok(Review::Accept),
            "r" => return Ok(Review::Retry),
            "q" => return Ok(Review::Quit),
            _ => {}
        }
    }
}

fn parse_mock(s: &str) -> std::result::Result<MockMode, String> {
    s.parse()
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Instruction JSONL files.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Generation records, in input order.
    #[arg(long)]
    out: PathBuf,
    /// Append-only progress log used for resuming; `<out>.progress.jsonl` by default.
    #[arg(long)]
    progress: Option<PathBuf>,
    /// Answer offline: echo-input, resample-rows or garbage.
    #[arg(long, value_parser = parse_mock)]
    mock: Option<MockMode>,
    #[arg(long)]
    mock_seed: Option<u64>,
    #[arg(long)]
    mock_latency_ms: Option<u64>,
    /// Overrides `endpoint.max_in_flight`.
    #[arg(long)]
    max_in_flight: Option<usize>,
}

pub fn generate(a: GenerateArgs, argv: Vec<String>) -> Result<()> {
    let mut ctx = Ctx::load(&a.common)?;
    if let Some(n) = a.max_in_flight {
        ctx.config.endpoint.max_in_flight = n;
    }
    if a.mock.is_some() {
        ctx.config.generate.mock = a.mock;
    }
    if let Some(s) = a.mock_seed {
        ctx.config.generate.seed = s;
    }
    ctx.hash = ctx.config.hash();
    ctx.config.endpoint.validate()?;

    let mut records: Vec<InstructionRecord> = Vec::new();
    for p in &a.input {
        records.extend(instruct::read_records(p)?);
    }
    let completer: Arc<dyn Completer> = match ctx.config.generate.mock {
        Some(mode) => {
            let mut m = MockCompleter::new(mode, ctx.config.generate.seed);
            if let Some(ms) = a.mock_latency_ms {
                m = m.with_latency(Duration::from_millis(ms));
            }
            Arc::new(m)
        }
        None => Arc::new(HttpCompleter::new(ctx.config.endpoint.clone().with_key_from_env())?),
    };
    let progress = a.progress.clone().unwrap_or_else(|| a.out.with_extension("progress.jsonl"));
    let rt = runtime()?;
    let (gens, summary) =
        rt.block_on(llm::generate_batch(completer.as_ref(), &records, &progress, ctx.config.endpoint.max_in_flight))?;
    llm::write_generations(&a.out, &gens)?;

    let mut m = ctx.manifest("generate", argv, None).seed("generate", ctx.config.generate.seed);
    if ctx.config.generate.mock.is_none() {
        m.endpoint = Some(ctx.config.endpoint.redacted());
    }
    m.inputs = a.input.iter().map(|p| p.display().to_string()).collect();
    m.outputs = vec![a.out.display().to_string(), progress.display().to_string()];
    m.append_to(&artifact_dir(&a.out))?;
    print_json(&summary)?;

    let exhausted = gens
        .iter()
        .filter_map(|g| g.error.as_ref())
        .filter(|e| matches!(e.kind.as_str(), "exhausted_retries" | "transport" | "auth"))
        .count();
    if exhausted > 0 {
        return Err(CliError::io(
            "endpoint_exhausted",
            format!("{exhausted} records failed at the endpoint; rerun to resume from {}", progress.display()),
        ));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[command(flatten)]
    common: Common,
    /// Raw model output; stdin when omitted or `-`.
    input: Option<PathBuf>,
    /// Take the schema (and categorical vocabularies) from this CSV.
    #[arg(long)]
    schema_csv: Option<PathBuf>,
    /// Take the schema from a registry dataset.
    #[arg(long)]
    dataset: Option<String>,
    /// Rows requested from the model; `build.n_rows` by default.
    #[arg(long)]
    rows: Option<usize>,
    /// Parse a generation log instead of a single text.
    #[arg(long, requires = "out_dir")]
    generations: Option<PathBuf>,
    /// One ParseOutcome JSON per generation, under `<dataset_id>/`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct ParseSummary {
    total: usize,
    clean: usize,
    salvaged: usize,
    rejected: usize,
    per_dataset: BTreeMap<String, [usize; 3]>,
}

pub fn parse(a: ParseArgs, argv: Vec<String>) -> Result<()> {
    let ctx = Ctx::load(&a.common)?;
    let rows = a.rows.unwrap_or(ctx.config.build.n_rows);
    if rows == 0 {
        return Err(CliError::validation("usage", "--rows must be at least 1"));
    }
    if let Some(gpath) = &a.generations {
        let out_dir = a.out_dir.as_ref().expect("clap requires out_dir");
        let registry = ctx.registry()?;
        let gens = llm::read_generations(gpath)?;
        let parsed = pipeline::parse_generations(&registry, &gens, rows, &ctx.config.parse.options())?;
        pipeline::write_outcomes(out_dir, &parsed)?;
        let mut m = ctx.manifest("parse", argv, Some(&registry));
        m.inputs = vec![gpath.display().to_string()];
        m.append_to(out_dir)?;
        return print_json(&parse_summary(&parsed));
    }

    let reference: Table = match (&a.schema_csv, &a.dataset) {
        (Some(p), _) => load_csv(p, None)?,
        (None, Some(id)) => {
            let reg = ctx.registry()?;
            let entry = reg.get(id)?;
            reg.load_table(entry)?
        }
        (None, None) => return Err(CliError::validation("usage", "pass --schema-csv or --dataset")),
    };
    let raw = match a.input.as_deref() {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let opts = ctx.config.parse.options().with_vocabularies_from(&reference);
    let outcome = parse_llm_output_with(&raw, reference.schema(), rows, &opts);
    print_json(&outcome)
}

fn parse_summary(parsed: &[ParsedGeneration]) -> ParseSummary {
    let mut s = ParseSummary { total: parsed.len(), clean: 0, salvaged: 0, rejected: 0, per_dataset: BTreeMap::new() };
    for p in parsed {
        let slot = match p.outcome.status {
            ParseStatus::Clean => {
                s.clean += 1;
                0
            }
            ParseStatus::Salvaged => {
                s.salvaged += 1;
                1
            }
            ParseStatus::Rejected => {
                s.rejected += 1;
                2
            }
        };
        s.per_dataset.entry(p.dataset_id.clone()).or_default()[slot] += 1;
    }
    s
}

#[derive(Args, Debug)]
pub struct EvalInput {
    /// Real table CSV; the registry source of `--dataset` when omitted.
    #[arg(long)]
    real: Option<PathBuf>,
    /// Registry dataset id (supplies dtypes, target and task).
    #[arg(long)]
    dataset: Option<String>,
    /// Synthetic table CSV.
    #[arg(long, conflicts_with = "synth_dir")]
    synth: Option<PathBuf>,
    /// Directory of ParseOutcome JSON files, pooled into one table.
    #[arg(long)]
    synth_dir: Option<PathBuf>,
    /// Column label in reports.
    #[arg(long, default_value = "synthetic")]
    algorithm: String,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Loaded {
    dataset_id: String,
    entry: Option<DatasetRegistryEntry>,
    real: Table,
    synth: Synth,
}

enum Synth {
    Csv(Table),
    Outcomes(Vec<ParseOutcome>),
}

impl EvalInput {
    fn load(&self, ctx: &Ctx) -> Result<(Loaded, Registry)> {
        let registry = ctx.registry()?;
        let entry = match &self.dataset {
            Some(id) => match registry.get(id) {
                Ok(e) => Some(e.clone()),
                Err(e) if self.real.is_none() => return Err(e.into()),
                Err(_) => None,
            },
            None => None,
        };
        let real = match (&self.real, &entry) {
            (Some(p), Some(e)) => {
                let overrides = e.dtypes.iter().map(|(k, v)| (k.clone(), *v)).collect::<std::collections::HashMap<_, _>>();
                let t = load_csv(p, (!overrides.is_empty()).then_some(&overrides))?;
                e.check_table(&t)?;
                t
            }
            (Some(p), None) => load_csv(p, None)?,
            (None, Some(e)) => registry.load_table(e)?,
            (None, None) => return Err(CliError::validation("usage", "pass --real or --dataset")),
        };
        let dataset_id = match (&self.dataset, &self.real) {
            (Some(d), _) => d.clone(),
            (None, Some(p)) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into()),
            (None, None) => unreachable!(),
        };
        let synth = match (&self.synth, &self.synth_dir) {
            (Some(p), _) => Synth::Csv(load_csv(p, None)?),
            (None, Some(d)) => Synth::Outcomes(pipeline::read_outcome_dir(d)?),
            (None, None) => return Err(CliError::validation("usage", "pass --synth or --synth-dir")),
        };
        Ok((Loaded { dataset_id, entry, real, synth }, registry))
    }

    fn emit(&self, ctx: &Ctx, command: &str, argv: Vec<String>, entry: ResultEntry, seeds: &[(&str, u64)]) -> Result<()> {
        match &self.out {
            Some(out) => {
                if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(out, entry.to_json() + "\n")?;
                let mut m = ctx.manifest(command, argv, None);
                for (k, v) in seeds {
                    m = m.seed(k, *v);
                }
                m.inputs = [&self.real, &self.synth, &self.synth_dir].iter().filter_map(|p| p.as_ref()).map(|p| p.display().to_string()).collect();
                m.outputs = vec![out.display().to_string()];
                m.append_to(&artifact_dir(out))?;
                let table = report::render_entries(std::slice::from_ref(&entry), &ctx.config.report, ReportFormat::Markdown)?;
                print!("{table}");
                Ok(())
            }
            None => {
                println!("{}", entry.to_json());
                Ok(())
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct FidelityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: EvalInput,
    /// Also average over each generation scored alone (with --synth-dir).
    #[arg(long)]
    per_instance: bool,
}

pub fn eval_fidelity(a: FidelityArgs, argv: Vec<String>) -> Result<()> {
    let ctx = Ctx::load(&a.common)?;
    let (l, _) = a.input.load(&ctx)?;
    let algo = &a.input.algorithm;
    let entry = match &l.synth {
        Synth::Csv(t) => match fidelity_report(&l.real, t) {
            Ok(r) => FidelityEntry::from_report(&l.dataset_id, algo, r),
            Err(e) => FidelityEntry::failed(&l.dataset_id, algo, e.to_string()),
        },
        Synth::Outcomes(o) => {
            let refs: Vec<&ParseOutcome> = o.iter().collect();
            let per_instance = a.per_instance || ctx.config.fidelity.per_instance;
            pipeline::evaluate_fidelity(&l.dataset_id, algo, &l.real, &refs, per_instance)
        }
    };
    a.input.emit(&ctx, "eval-fidelity", argv, ResultEntry::Fidelity(entry), &[])
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse()
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse()
}

#[derive(Args, Debug)]
pub struct UtilityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: EvalInput,
    /// Overrides the registry target.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// auc, r2 or mape; AUC for classification and R2 for regression by default.
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Skip the train-on-real reference.
    #[arg(long)]
    no_baseline: bool,
}

pub fn eval_utility(a: UtilityArgs, argv: Vec<String>) -> Result<()> {
    let mut ctx = Ctx::load(&a.common)?;
    if let Some(s) = a.split_seed {
        ctx.config.utility.split_seed = s;
    }
    if a.metric.is_some() {
        ctx.config.utility.metric = a.metric;
    }
    if a.no_baseline {
        ctx.config.utility.baseline = false;
    }
    ctx.hash = ctx.config.hash();
    let (l, _) = a.input.load(&ctx)?;
    let target = a.target.clone().or_else(|| l.entry.as_ref().and_then(|e| e.target_column.clone()));
    let task = a.task.or_else(|| l.entry.as_ref().and_then(|e| e.task));
    let (Some(target), Some(task)) = (target, task) else {
        return Err(CliError::validation("no_target", "dataset declares no target; pass --target and --task"));
    };
    let specs = ctx.config.utility.specs();
    let opts = ctx.config.utility.options();
    let algo = &a.input.algorithm;
    let entry = match &l.synth {
        Synth::Csv(t) => UtilityEntry::from_report(&l.dataset_id, algo, tstr(&l.real, t, &target, task, &specs, &opts)?),
        Synth::Outcomes(o) => {
            let refs: Vec<&ParseOutcome> = o.iter().collect();
            let mut reg_entry = l.entry.clone().unwrap_or_else(|| DatasetRegistryEntry {
                id: l.dataset_id.clone(),
                title: None,
                topic: String::new(),
                source_path: PathBuf::new(),
                is_train: false,
                target_column: None,
                task: None,
                dtypes: Default::default(),
                rows: None,
                columns: None,
            });
            reg_entry.id = l.dataset_id.clone();
            reg_entry.target_column = Some(target);
            reg_entry.task = Some(task);
            pipeline::evaluate_utility(&reg_entry, algo, &l.real, &refs, &specs, &opts).expect("target and task are set")
        }
    };
    let seeds = [("split", ctx.config.utility.split_seed), ("model", ctx.config.utility.model_seed)];
    a.input.emit(&ctx, "eval-utility", argv, ResultEntry::Utility(entry), &seeds)
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse()
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Directory searched recursively for result JSON files.
    #[arg(long = "in")]
    input: PathBuf,
    /// markdown, csv, json or latex.
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    format: ReportFormat,
    /// Comma-separated algorithm column order.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
    /// Written to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn report(a: ReportArgs, argv: Vec<String>) -> Result<()> {
    let ctx = Ctx::load(&a.common)?;
    let entries = report::load_entries(&a.input)?;
    let mut opts: RenderOptions = ctx.config.report.clone();
    if !a.algorithms.is_empty() {
        opts.algorithms = a.algorithms.clone();
    }
    let doc = report::render_entries(&entries, &opts, a.format)?;
    match &a.out {
        Some(out) => {
            std::fs::write(out, &doc)?;
            let mut m = ctx.manifest("report", argv, None);
            m.inputs = vec![a.input.display().to_string()];
            m.outputs = vec![out.display().to_string()];
            m.append_to(&artifact_dir(out))?;
        }
        None => print!("{doc}"),
    }
    Ok(())
}
