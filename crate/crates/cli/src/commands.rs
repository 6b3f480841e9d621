use std::path::{Path, PathBuf};
use std::sync::Arc;

use garment_edit::backends::{MockTransport, SystemClock, Transport};
use garment_edit::document::{parse_answer_document, parse_graph_document, report_to_document, DocumentError};
use garment_edit::pipeline::{
    compute_stats, load_corpus, Manifest, Pipeline, PipelineError, RunConfig, Stage, TRANSCRIPT_FILE,
};
use garment_edit::score::{edit_score, validate_graph, ScoreError, ValidatedGraph, Weights};

use crate::args::{Command, ManifestArgs, RunArgs, ScoreArgs, ValidateArgs, WeightArgs};

const VALIDATION: u8 = 2;
const INPUT: u8 = 3;
const BACKEND: u8 = 4;
const INTERRUPTED: u8 = 130;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl ToString) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_) | PipelineError::EmptyManifest => VALIDATION,
            PipelineError::ConfigParse(_)
            | PipelineError::CorpusEmpty(_)
            | PipelineError::Corpus(_)
            | PipelineError::Template(_)
            | PipelineError::Manifest(_)
            | PipelineError::Io(_) => INPUT,
        };
        Self::new(code, e)
    }
}

impl From<DocumentError> for CliError {
    fn from(e: DocumentError) -> Self {
        let code = match e {
            DocumentError::Parse { .. } => INPUT,
            DocumentError::Schema(_) => VALIDATION,
        };
        Self::new(code, e)
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        Self::new(VALIDATION, e)
    }
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => run_stages(&a, Stage::Scored),
        Command::Synthesize(a) => run_stages(&a, Stage::Synthesized),
        Command::EditImages(a) => run_stages(&a, Stage::ImageEdited),
        Command::BuildGraphs(a) => run_stages(&a, Stage::GraphBuilt),
        Command::Answer(a) => run_stages(&a, Stage::Answered),
        Command::Score(a) => score(&a),
        Command::Filter(a) => filter(&a),
        Command::Stats(a) => stats(&a),
        Command::ValidateGraph(a) => validate(&a),
    }
}

fn apply_weights(cfg: &mut RunConfig, w: &WeightArgs) {
    let section = &mut cfg.weights;
    section.w_icq = w.w_icq.or(section.w_icq);
    section.w_cpq = w.w_cpq.or(section.w_cpq);
    section.t_decay = w.t_decay.or(section.t_decay);
    section.alpha = w.alpha.or(section.alpha);
}

fn load_config(path: &Path, output_dir: Option<&PathBuf>, weights: &WeightArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    apply_weights(&mut cfg, weights);
    if let Some(dir) = output_dir {
        cfg.run.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(INPUT, format!("{}: {e}", path.display())))
}

fn run_stages(args: &RunArgs, until: Stage) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config, args.output_dir.as_ref(), &args.weights)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(k) = args.top_k_keywords {
        cfg.run.top_k_keywords = k;
    }
    let corpus_dir = args
        .corpus
        .clone()
        .or_else(|| cfg.run.corpus_dir.clone())
        .ok_or_else(|| CliError::new(VALIDATION, "no corpus: pass --corpus or set run.corpus_dir"))?;
    let images = load_corpus(&corpus_dir)?;

    let mock = match &args.mock_fixtures {
        Some(dir) => {
            Some(Arc::new(MockTransport::new(cfg.run.seed).with_fixtures(dir).map_err(|e| CliError::new(INPUT, e))?))
        }
        None => {
            cfg.require_live_endpoints()?;
            None
        }
    };
    let transport: Arc<dyn Transport> = match &mock {
        Some(m) => m.clone(),
        None => Arc::new(garment_edit::backends::HttpTransport::new()),
    };
    let top_k = cfg.run.top_k_keywords;
    let pipeline = Pipeline::new(cfg, transport, Arc::new(SystemClock::default()))?;
    let flag = pipeline.cancel_flag();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, std::sync::atomic::Ordering::SeqCst)) {
        log::warn!("cannot install interrupt handler: {e}");
    }

    let (manifest, summary) = pipeline.run(&images, until)?;
    let out = pipeline.output_dir();
    if let Some(m) = &mock {
        m.write_transcript(&out.join(TRANSCRIPT_FILE)).map_err(|e| CliError::new(INPUT, e))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if summary.cancelled {
        return Err(CliError::new(INTERRUPTED, "interrupted; manifest written, rerun to resume"));
    }
    if until == Stage::Scored {
        let stats = compute_stats(&manifest, top_k)?;
        stats.write(out)?;
        eprint!("{}", stats.to_text());
    }
    if manifest.records.iter().all(|r| r.is_parked()) {
        let first = manifest.records.iter().flat_map(|r| &r.failures).next().map(|f| f.error.as_str()).unwrap_or("");
        return Err(CliError::new(BACKEND, format!("every sample failed; first failure: {first}")));
    }
    Ok(())
}

fn score_weights(args: &ScoreArgs) -> Result<Weights, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_weights(&mut cfg, &args.weights);
    Ok(cfg.weights.resolve()?)
}

fn score(args: &ScoreArgs) -> Result<(), CliError> {
    let weights = score_weights(args)?;
    let graph_text = read_file(&args.graph)?;
    let answers_text = read_file(&args.answers)?;
    let graph = validate_graph(parse_graph_document(&graph_text)?)?;
    let answers = parse_answer_document(&answers_text)?;
    if answers.sample_id != graph.graph().sample_id() {
        log::warn!("answer sample_id {} differs from graph sample_id {}", answers.sample_id, graph.graph().sample_id());
    }
    let report = edit_score(&graph, &answers.answers(), &weights)?;
    println!("{}", report_to_document(&report));
    Ok(())
}

fn filter(args: &ManifestArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config, args.output_dir.as_ref(), &args.weights)?;
    let weights = cfg.weights();
    let out = &cfg.run.output_dir;
    let mut manifest = Manifest::read(out)?;
    let changed = manifest.inconsistent_decisions(&weights).len();
    manifest.refilter(&weights);
    manifest.write(out)?;
    log::info!("{changed} decisions changed at alpha {}", weights.alpha());
    println!("{}", serde_json::to_string_pretty(&manifest.counters()).expect("counters serialize"));
    Ok(())
}

fn stats(args: &ManifestArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config, args.output_dir.as_ref(), &args.weights)?;
    let manifest = Manifest::read(&cfg.run.output_dir)?;
    let report = compute_stats(&manifest, args.top_k_keywords.unwrap_or(cfg.run.top_k_keywords))?;
    report.write(&cfg.run.output_dir)?;
    print!("{}", report.to_text());
    Ok(())
}

fn describe(graph: &ValidatedGraph) -> String {
    let mut out = format!("ok: {} questions\n", graph.graph().len());
    for &i in graph.topo_order() {
        let q = &graph.graph().questions()[i];
        let depth = graph.depth(q.id()).map_or("-".to_string(), |d| d.to_string());
        out.push_str(&format!("{}\t{}\tdepth {}\t{}\n", q.id(), q.category().as_str(), depth, q.text()));
    }
    out
}

fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let graph = validate_graph(parse_graph_document(&read_file(&args.graph)?)?)?;
    print!("{}", describe(&graph));
    Ok(())
}
