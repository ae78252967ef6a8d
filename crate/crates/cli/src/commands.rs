use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use polar_rewrite::datagen::{
    generate, read_jsonl, split_of, write_jsonl, CategoryMix, DatagenError, Domain,
    GenerateOptions, Manifest, PQAInstance, Split,
};
use polar_rewrite::decode::{DecodeError, DecodeOptions};
use polar_rewrite::eval::{evaluate as run_eval, EvalError, SystemOutput};
use polar_rewrite::flags::{flags_for_output, FlagError, SatisfactionMode};
use polar_rewrite::model::{
    train as run_train, Checkpoint, ModelConfig, ModelError, ModelParams, TrainingConfig,
};
use polar_rewrite::pipeline::{
    build_vocab, rewrite as run_rewrite, training_examples, PipelineError,
};
use polar_rewrite::similarity::{
    HashedNgramEmbedder, InjectedTable, SimilaritySource, WindowedSimilarity,
};
use polar_rewrite::text::tokenize;
use polar_rewrite::treebank::{
    extract_constraints, parse_bracketed, ConstraintSet, ExtractOptions, TreeError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::args::{
    DatagenArgs, EvaluateArgs, ExtractArgs, InspectArgs, RewriteArgs, TraceFormat, TrainArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or malformed input files.
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<FlagError> for CliError {
    fn from(e: FlagError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::BadConfig(_)
            | ModelError::CheckpointVersion { .. }
            | ModelError::Checkpoint(_)
            | ModelError::Json(_)
            | ModelError::EmptyCorpus => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Model(m) => m.into(),
            DecodeError::ZeroBeam | DecodeError::EmptyConstraint | DecodeError::Flags(_) => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Datagen(d) => d.into(),
            PipelineError::Decode(d) => d.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Datagen(d) => d.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Snapshot<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a T,
}

/// Writes the resolved arguments of a run.
fn snapshot<T: Serialize>(path: &Path, command: &str, args: &T) -> Result<()> {
    let s = Snapshot {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
    };
    fs::write(path, serde_json::to_string_pretty(&s)? + "\n")?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn similarity() -> WindowedSimilarity<HashedNgramEmbedder> {
    WindowedSimilarity::new(HashedNgramEmbedder::default())
}

fn load_split(path: &Path, split: Option<Split>) -> Result<(Vec<PQAInstance>, Vec<PQAInstance>)> {
    let corpus = read_jsonl(path)?;
    let chosen = match split {
        Some(s) => split_of(&corpus, s),
        None => corpus.clone(),
    };
    Ok((corpus, chosen))
}

pub fn datagen(args: &DatagenArgs) -> Result<()> {
    let mix: [f64; 4] = args
        .mix
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Invalid("--mix needs four weights".into()))?;
    let domain = |name: &String| {
        Domain::parse(name).ok_or_else(|| CliError::Invalid(format!("unknown domain {name:?}")))
    };
    let domains = if args.domains.is_empty() {
        Domain::ALL.to_vec()
    } else {
        args.domains.iter().map(domain).collect::<Result<_>>()?
    };
    let split_sizes = match &args.split_sizes {
        Some(v) => Some(
            v.as_slice()
                .try_into()
                .map_err(|_| CliError::Invalid("--split-sizes needs three sizes".into()))?,
        ),
        None => None,
    };
    let opts = GenerateOptions {
        seed: args.seed,
        n: args.n,
        mix: CategoryMix(mix),
        first_person_rate: args.first_person_rate,
        domains,
        holdout: args.holdout.as_ref().map(domain).transpose()?,
        split_sizes,
    };
    let corpus = generate(&opts)?;
    fs::create_dir_all(&args.out)?;
    write_jsonl(&args.out.join("corpus.jsonl"), &corpus)?;
    for split in [Split::Train, Split::Dev, Split::Test] {
        let name = serde_json::to_value(split)?;
        let name = name.as_str().unwrap_or("split");
        write_jsonl(
            &args.out.join(format!("{name}.jsonl")),
            &split_of(&corpus, split),
        )?;
    }
    let manifest = Manifest::new(&opts, &corpus);
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    snapshot(&args.out.join("config.json"), "datagen", args)?;
    info!("wrote {} instances to {}", corpus.len(), args.out.display());
    Ok(())
}

pub fn extract(args: &ExtractArgs) -> Result<()> {
    let opts = ExtractOptions {
        include_toplevel_np: args.include_toplevel_np,
    };
    let mut sets = Vec::new();
    if let Some(tree) = &args.tree {
        let q = parse_bracketed(tree)?;
        let a = args
            .answer_tree
            .as_deref()
            .map(parse_bracketed)
            .transpose()?;
        sets.push(ConstraintSet {
            id: "tree".into(),
            constraints: extract_constraints(&q, a.as_ref(), opts)
                .iter()
                .map(|c| c.to_record())
                .collect(),
        });
    } else if let Some(input) = &args.input {
        for x in read_jsonl(input)? {
            let (q, a) = (x.question_tree()?, x.answer_tree()?);
            sets.push(ConstraintSet {
                id: x.id.clone(),
                constraints: extract_constraints(&q, Some(&a), opts)
                    .iter()
                    .map(|c| c.to_record())
                    .collect(),
            });
        }
    }
    let mut text = String::new();
    for s in &sets {
        text.push_str(&serde_json::to_string(s)?);
        text.push('\n');
    }
    match &args.out {
        Some(path) => {
            fs::write(path, text)?;
            snapshot(&sibling(path, ".config.json"), "extract-constraints", args)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let (corpus, train_set) = load_split(&args.data, Some(args.split.into()))?;
    if train_set.is_empty() {
        return Err(CliError::Invalid(format!(
            "no {:?} instances in {}",
            args.split,
            args.data.display()
        )));
    }
    let vocab = build_vocab(&corpus);
    let satisfier = args.satisfier.config();
    satisfier.validate()?;
    let with_flags = satisfier.mode != SatisfactionMode::Off;
    let sim = similarity();
    let examples = training_examples(
        &train_set,
        &vocab,
        &satisfier,
        &sim,
        with_flags,
        args.max_len,
    )?;

    let mut cfg = ModelConfig::small(vocab.len());
    cfg.dim = args.dim;
    cfg.heads = args.heads;
    cfg.ff_dim = args.ff_dim;
    cfg.encoder_layers = args.layers;
    cfg.decoder_layers = args.layers;
    cfg.max_len = args.max_len;
    cfg.use_flags = with_flags;
    let params = ModelParams::init(cfg, args.seed)?;
    let tc = TrainingConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        label_smoothing: args.label_smoothing,
        ..TrainingConfig::default()
    };
    info!(
        "training on {} examples, vocabulary {}",
        examples.len(),
        vocab.len()
    );
    let (params, report) = run_train(params, &examples, &tc)?;

    fs::create_dir_all(&args.out)?;
    let metadata = serde_json::json!({ "satisfier": satisfier, "training": {
        "learning_rate": tc.learning_rate, "batch_size": tc.batch_size, "epochs": tc.epochs, "seed": tc.seed,
    }});
    Checkpoint::new(&params, &vocab, metadata).save(&args.out.join("model.json"))?;
    fs::write(args.out.join("loss.csv"), report.to_csv())?;
    snapshot(&args.out.join("config.json"), "train", args)?;
    if let Some(last) = report.epoch_losses.last() {
        info!("final epoch loss {last:.4}");
    }
    Ok(())
}

/// One line of the `rewrite` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub id: String,
    pub output: String,
    pub mode: SatisfactionMode,
    pub decoder: polar_rewrite::pipeline::Decoder,
    pub constraints: usize,
    pub satisfied: usize,
    pub constraints_met: bool,
    pub score: f64,
}

pub fn rewrite(args: &RewriteArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.model)?;
    let params = ckpt.params()?;
    let (_, mut instances) = load_split(&args.data, args.split.map(Into::into))?;
    if let Some(n) = args.limit {
        instances.truncate(n);
    }
    let satisfier = args.satisfier.config();
    satisfier.validate()?;
    let opts = DecodeOptions {
        beam: args.beam,
        max_len: args.max_len,
        length_penalty: args.length_penalty,
    };
    let sim = similarity();
    if let Some(dir) = &args.trace {
        fs::create_dir_all(dir)?;
    }
    let mut text = String::new();
    for x in &instances {
        let r = run_rewrite(
            &params,
            &ckpt.vocab,
            x,
            &satisfier,
            &sim,
            args.decoder.into(),
            &opts,
        )?;
        let flags = &r.hypothesis.flags;
        let record = RewriteRecord {
            id: r.id.clone(),
            output: r.text(),
            mode: satisfier.mode,
            decoder: args.decoder.into(),
            constraints: flags.num_constraints(),
            satisfied: flags.satisfied_count(),
            constraints_met: r.constraints_met,
            score: r.hypothesis.score,
        };
        text.push_str(&serde_json::to_string(&record)?);
        text.push('\n');
        if let Some(dir) = &args.trace {
            fs::write(dir.join(format!("{}.tsv", x.id)), flags.trace().to_tsv())?;
        }
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, text)?;
    snapshot(&sibling(&args.out, ".config.json"), "rewrite", args)?;
    info!("decoded {} instances", instances.len());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (_, gold) = load_split(&args.data, Some(args.split.into()))?;
    let raw = fs::read_to_string(&args.outputs)?;
    let outputs = raw
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<SystemOutput>(l).map_err(|e| {
                CliError::Invalid(format!("{} line {}: {e}", args.outputs.display(), i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let satisfier = args.satisfier.config();
    satisfier.validate()?;
    let report = run_eval(&args.system, &outputs, &gold, &similarity(), &satisfier)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), report.to_json() + "\n")?;
    let table = format!(
        "{}\n{}",
        polar_rewrite::eval::render_table(std::slice::from_ref(&report)),
        report.category_table()
    );
    fs::write(args.out.join("report.txt"), &table)?;
    snapshot(&args.out.join("config.json"), "evaluate", args)?;
    print!("{table}");
    Ok(())
}

pub fn inspect_flags(args: &InspectArgs) -> Result<()> {
    let x = tokenize(&args.input);
    let out = tokenize(&args.output);
    let constraints: Vec<Vec<String>> = args.constraints.iter().map(|c| tokenize(c)).collect();
    let mut rows = Vec::new();
    for c in &constraints {
        let start = x
            .windows(c.len().max(1))
            .position(|w| w == c.as_slice())
            .ok_or_else(|| {
                CliError::Invalid(format!(
                    "constraint {:?} does not occur in the input",
                    c.join(" ")
                ))
            })?;
        rows.push((start..start + c.len()).collect::<Vec<usize>>());
    }
    let satisfier = args.satisfier.config();
    satisfier.validate()?;
    let injected = match (&args.sims, &args.sims_file) {
        (Some(v), _) => Some(InjectedTable::from_sequence(0, v)),
        (None, Some(path)) => Some(
            InjectedTable::load(path)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        ),
        (None, None) => None,
    };
    let embedder = similarity();
    let source: &dyn SimilaritySource = match &injected {
        Some(t) => t,
        None => &embedder,
    };
    let m = flags_for_output(&x, &rows, &constraints, &out, &satisfier, source)?;
    let trace = m.trace();
    let text = match args.format {
        TraceFormat::Tsv => trace.to_tsv(),
        TraceFormat::Json => trace.to_json() + "\n",
    };
    match &args.out {
        Some(path) => {
            fs::write(path, text)?;
            snapshot(&sibling(path, ".config.json"), "inspect-flags", args)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
