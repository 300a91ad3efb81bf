use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use entgen::data::jsonl::read_games;
use entgen::data::{build_vocab, load_dataset, load_rotowire_json_as, save_dataset, synth_dataset};
use entgen::data::{Dataset, GameInstance, RecordSchema, SynthConfig};
use entgen::eval::ablation::generate_corpus;
use entgen::eval::{evaluate_corpus, run_ablation, AblationSettings};
use entgen::fixtures::micro_model;
use entgen::model::{beam_search, greedy_decode, Model, ModelConfig, Variant};
use entgen::template::{generate_template, TemplateConfig};
use entgen::training::{check_gradients, EpochMetrics, Example, TrainConfig};
use entgen::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{resolve, write_resolved};

pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const ATTENTION_FILE: &str = "attention.jsonl";
pub const METRICS_JSON: &str = "metrics.json";

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn print_epoch(m: &EpochMetrics) {
    let dev = m.dev_perplexity.map_or("-".into(), |p| format!("{p:.4}"));
    eprintln!(
        "epoch {:>3}  loss {:.4}  train ppl {:.4}  dev ppl {dev}  lr {:.5}",
        m.epoch, m.train_loss, m.train_perplexity, m.learning_rate
    );
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Flat TOML file supplying defaults for these flags.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["rw4", "mlb6"])]
    schema: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    games: Option<usize>,
    /// Entities per game, both teams included.
    #[arg(long)]
    entities: Option<usize>,
    /// Stat types per player.
    #[arg(long)]
    types: Option<usize>,
    /// Games moved to the dev split [default: games / 8].
    #[arg(long)]
    dev: Option<usize>,
    /// Games moved to the test split [default: games / 8].
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthRun {
    schema: RecordSchema,
    seed: u64,
    games: usize,
    entities: usize,
    types: usize,
    dev: Option<usize>,
    test: Option<usize>,
    out: Option<PathBuf>,
}

impl Default for SynthRun {
    fn default() -> Self {
        SynthRun {
            schema: RecordSchema::Rw4,
            seed: 1,
            games: 8,
            entities: 10,
            types: 4,
            dev: None,
            test: None,
            out: None,
        }
    }
}

pub fn synth(args: SynthArgs) -> Result<u8> {
    let mut run: SynthRun = resolve(args.config.as_deref(), &args)?;
    let out = required(&run.out, "out")?.to_path_buf();
    let dev = *run.dev.get_or_insert(run.games / 8);
    let test = *run.test.get_or_insert(run.games / 8);
    let dataset = synth_dataset(&SynthConfig {
        schema: run.schema,
        seed: run.seed,
        n_games: run.games,
        n_entities: run.entities,
        n_types: run.types,
    })?
    .carve_splits(dev, test)?;
    save_dataset(&dataset, &out)?;
    write_resolved(&out, &run)?;
    println!(
        "wrote {} train, {} dev, {} test games to {}",
        dataset.train.len(),
        dataset.dev.len(),
        dataset.test.len(),
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// RotoWire-style JSON file, or a directory of native JSONL splits.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Record layout of a RotoWire-style file.
    #[arg(long, value_parser = ["rw4", "mlb6"])]
    schema: Option<String>,
    /// Words seen fewer times in training summaries map to the unknown token.
    #[arg(long)]
    min_count: Option<u64>,
    /// Shuffles training games before dev/test games are carved out.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dev: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestRun {
    input: Option<PathBuf>,
    schema: Option<RecordSchema>,
    min_count: u64,
    seed: u64,
    dev: usize,
    test: usize,
    out: Option<PathBuf>,
}

impl Default for IngestRun {
    fn default() -> Self {
        IngestRun {
            input: None,
            schema: None,
            min_count: 2,
            seed: 1,
            dev: 0,
            test: 0,
            out: None,
        }
    }
}

pub fn ingest(args: IngestArgs) -> Result<u8> {
    let run: IngestRun = resolve(args.config.as_deref(), &args)?;
    let input = required(&run.input, "input")?;
    let out = required(&run.out, "out")?;
    let mut dataset = if input.is_dir() {
        let d = load_dataset(input)?;
        if run.schema.is_some_and(|s| s != d.schema) {
            return Err(Error::Schema(format!(
                "{} holds {} records",
                input.display(),
                serde_json::to_string(&d.schema)?
            )));
        }
        d
    } else {
        load_rotowire_json_as(input, run.schema.unwrap_or(RecordSchema::Rw4))?
    };
    if run.dev + run.test > 0 {
        dataset
            .train
            .shuffle(&mut ChaCha8Rng::seed_from_u64(run.seed));
        dataset = dataset.carve_splits(run.dev, run.test)?;
    }
    save_dataset(&dataset, out)?;
    let vocabs = build_vocab(&dataset, run.min_count);
    vocabs.words.save(&out.join("vocab.words.tsv"))?;
    for (role, v) in vocabs.features.iter().enumerate() {
        v.save(&out.join(format!("vocab.feature{role}.tsv")))?;
    }
    write_resolved(out, &run)?;
    println!(
        "wrote {} games ({} train) and a {}-word vocabulary to {}",
        dataset.len(),
        dataset.train.len(),
        vocabs.words.len(),
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------- train

/// Optimisation flags shared by `train` and `ablate`.
#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Multiplicative learning-rate decay per epoch.
    #[arg(long)]
    decay: Option<f64>,
    /// Epochs trained at the initial learning rate.
    #[arg(long)]
    decay_after: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Truncated-backpropagation window in tokens.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop once training perplexity falls below this value.
    #[arg(long)]
    stop_below_perplexity: Option<f64>,
}

/// Model-shape flags shared by `train` and `ablate`.
#[derive(Debug, Args, Serialize)]
pub struct ShapeFlags {
    #[arg(long)]
    hidden: Option<usize>,
    /// Entity memory size.
    #[arg(long)]
    memory: Option<usize>,
    /// Decoder LSTM layers.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Dataset directory with train/dev/test.jsonl.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["edcc", "hier", "dyn", "gate"])]
    mode: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    shape: ShapeFlags,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainRun {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    mode: Variant,
    hidden: usize,
    memory: usize,
    layers: usize,
    min_count: u64,
    learning_rate: f64,
    decay: f64,
    decay_after: usize,
    epochs: usize,
    window: usize,
    batch_size: usize,
    dropout: f64,
    seed: u64,
    stop_below_perplexity: Option<f64>,
}

impl Default for TrainRun {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainRun {
            data: None,
            out: None,
            mode: Variant::Gate,
            hidden: 64,
            memory: 64,
            layers: 1,
            min_count: 1,
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_after: t.decay_after,
            epochs: t.epochs,
            window: t.window,
            batch_size: t.batch_size,
            dropout: t.dropout,
            seed: t.seed,
            stop_below_perplexity: t.stop_below_perplexity,
        }
    }
}

impl TrainRun {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            decay: self.decay,
            decay_after: self.decay_after,
            epochs: self.epochs,
            window: self.window,
            batch_size: self.batch_size,
            dropout: self.dropout,
            seed: self.seed,
            stop_below_perplexity: self.stop_below_perplexity,
        }
    }
}

pub fn train(args: TrainArgs) -> Result<u8> {
    let run: TrainRun = resolve(args.config.as_deref(), &args)?;
    let data = required(&run.data, "data")?;
    let out = required(&run.out, "out")?;
    let dataset = load_dataset(data)?;
    let train_config = run.train_config();
    train_config.validate()?;
    let mut config = ModelConfig::for_schema(dataset.schema, run.hidden, run.memory, run.mode);
    config.layers = run.layers;
    config.dropout = run.dropout;
    config.seed = run.seed;
    config.validate()?;
    let mut model = Model::new(config, build_vocab(&dataset, run.min_count))?;
    write_resolved(out, &run)?;
    eprintln!(
        "training {} ({} parameters) on {} games",
        run.mode,
        model.store.num_scalars(),
        dataset.train.len()
    );
    let outcome = entgen::training::train(
        &mut model,
        &dataset.train,
        &dataset.dev,
        &train_config,
        Some(out),
        &mut print_epoch,
    )?;
    write_json(&out.join(METRICS_JSON), &outcome)?;
    println!(
        "best epoch {} (perplexity {:.4}); model in {}",
        outcome.best_epoch,
        outcome.best_perplexity,
        out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// `model` decodes with a trained model, `templ` fills sentence templates.
    #[arg(long, value_parser = ["model", "templ"])]
    system: Option<String>,
    /// Directory written by `train`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Parameter checkpoint to use instead of the model's own.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_parser = ["train", "dev", "test"])]
    split: Option<String>,
    /// Beam width; 1 decodes greedily.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Expected model variant; a mismatch with the loaded model is an error.
    #[arg(long, value_parser = ["edcc", "hier", "dyn", "gate"])]
    mode: Option<String>,
    /// Write per-step attention weights to attention.jsonl.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    dump_attention: bool,
    /// Players described by the basketball template.
    #[arg(long)]
    players: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum System {
    Model,
    Templ,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateRun {
    system: System,
    model: Option<PathBuf>,
    params: Option<PathBuf>,
    data: Option<PathBuf>,
    split: String,
    beam: usize,
    max_len: usize,
    mode: Option<Variant>,
    dump_attention: bool,
    players: usize,
    out: Option<PathBuf>,
}

impl Default for GenerateRun {
    fn default() -> Self {
        GenerateRun {
            system: System::Model,
            model: None,
            params: None,
            data: None,
            split: "test".into(),
            beam: 5,
            max_len: 120,
            mode: None,
            dump_attention: false,
            players: TemplateConfig::default().max_players,
            out: None,
        }
    }
}

/// One line of a generations or gold file.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryLine {
    pub id: String,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct AttentionLine<'a> {
    id: &'a str,
    step: usize,
    token: &'a str,
    record_weights: &'a [f64],
    entity_weights: Option<&'a [f64]>,
}

fn write_lines<T: Serialize>(path: &Path, lines: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn decode_with_attention(
    model: &Model,
    games: &[GameInstance],
    run: &GenerateRun,
    path: &Path,
) -> Result<Vec<Vec<String>>> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let mut outputs = Vec::with_capacity(games.len());
    for game in games {
        let input = model.prepare(game)?;
        let table = model.encode(&input)?;
        let session = model.session(&table);
        let ids = if run.beam == 1 {
            greedy_decode(&session, run.max_len)?
        } else {
            beam_search(&session, run.beam, run.max_len)?.tokens
        };
        let tokens = model.detokenize(&input, &ids);
        for (step, att) in model.attention_trace(&table, &ids)?.iter().enumerate() {
            let line = AttentionLine {
                id: &game.id,
                step,
                token: tokens.get(step).map_or("</s>", String::as_str),
                record_weights: &att.record_weights,
                entity_weights: att.entity_weights.as_deref(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        outputs.push(tokens);
    }
    w.flush()?;
    Ok(outputs)
}

pub fn generate(args: GenerateArgs) -> Result<u8> {
    let run: GenerateRun = resolve(args.config.as_deref(), &args)?;
    let data = required(&run.data, "data")?;
    let out = required(&run.out, "out")?;
    let dataset = load_dataset(data)?;
    let games = dataset.split(&run.split)?;
    if run.beam == 0 {
        return Err(Error::Usage("--beam must be at least 1".into()));
    }
    std::fs::create_dir_all(out)?;
    let outputs = match run.system {
        System::Templ => {
            let config = TemplateConfig {
                max_players: run.players,
            };
            games
                .iter()
                .map(|g| generate_template(g, dataset.schema, &config))
                .collect::<Result<Vec<_>>>()?
        }
        System::Model => {
            let model = Model::load(required(&run.model, "model")?, run.params.as_deref())?;
            if let Some(mode) = run.mode.filter(|m| *m != model.config.variant) {
                return Err(Error::Usage(format!(
                    "--mode {mode} does not match the model's {}",
                    model.config.variant
                )));
            }
            if run.dump_attention {
                decode_with_attention(&model, games, &run, &out.join(ATTENTION_FILE))?
            } else {
                generate_corpus(&model, games, run.beam, run.max_len)?
            }
        }
    };
    write_lines(
        &out.join(GENERATIONS_FILE),
        games.iter().zip(outputs).map(|(g, summary)| SummaryLine {
            id: g.id.clone(),
            summary,
        }),
    )?;
    write_resolved(out, &run)?;
    println!(
        "wrote {} summaries to {}",
        games.len(),
        out.join(GENERATIONS_FILE).display()
    );
    Ok(0)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// JSONL with `id` and `summary` (e.g. a dataset split).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// JSONL with `id` and `summary`, as written by `generate`.
    #[arg(long)]
    candidate: Option<PathBuf>,
    /// Dataset JSONL holding the tables [default: the gold file].
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long, value_parser = ["table", "json"])]
    format: Option<String>,
    /// Also write metrics.json and metrics.txt here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateRun {
    gold: Option<PathBuf>,
    candidate: Option<PathBuf>,
    tables: Option<PathBuf>,
    format: Format,
    out: Option<PathBuf>,
}

impl Default for EvaluateRun {
    fn default() -> Self {
        EvaluateRun {
            gold: None,
            candidate: None,
            tables: None,
            format: Format::Table,
            out: None,
        }
    }
}

fn read_summaries(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (index, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let s: SummaryLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            index,
            message: format!("{}: {e}", path.display()),
        })?;
        if out.insert(s.id.clone(), s.summary).is_some() {
            return Err(Error::Schema(format!(
                "{}: duplicate id {:?}",
                path.display(),
                s.id
            )));
        }
    }
    Ok(out)
}

pub fn evaluate(args: EvaluateArgs) -> Result<u8> {
    let run: EvaluateRun = resolve(args.config.as_deref(), &args)?;
    let gold_path = required(&run.gold, "gold")?;
    let candidate_path = required(&run.candidate, "candidate")?;
    let tables_path = run.tables.as_deref().unwrap_or(gold_path);
    let tables = read_games(std::fs::File::open(tables_path)?)?;
    let mut golds = read_summaries(gold_path)?;
    let mut candidates = read_summaries(candidate_path)?;
    let take = |map: &mut HashMap<String, Vec<String>>, id: &str, path: &Path| {
        map.remove(id)
            .ok_or_else(|| Error::Schema(format!("{} has no summary for {id:?}", path.display())))
    };
    let mut gold_list = Vec::with_capacity(tables.len());
    let mut cand_list = Vec::with_capacity(tables.len());
    for t in &tables {
        gold_list.push(take(&mut golds, &t.id, gold_path)?);
        cand_list.push(take(&mut candidates, &t.id, candidate_path)?);
    }
    if let Some(id) = candidates.keys().min() {
        return Err(Error::Schema(format!("candidate {id:?} has no table")));
    }
    let report = evaluate_corpus(&tables, &gold_list, &cand_list)?;
    if let Some(out) = &run.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join(METRICS_JSON), &report)?;
        std::fs::write(out.join("metrics.txt"), report.to_table())?;
        write_resolved(out, &run)?;
    }
    match run.format {
        Format::Table => print!("{}", report.to_table()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(0)
}

// ---------------------------------------------------------------- ablate

#[derive(Debug, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Split whose tables are decoded and scored.
    #[arg(long, value_parser = ["train", "dev", "test"])]
    eval_split: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    shape: ShapeFlags,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AblateRun {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    beam: usize,
    max_len: usize,
    eval_split: String,
    hidden: usize,
    memory: usize,
    layers: usize,
    min_count: u64,
    learning_rate: f64,
    decay: f64,
    decay_after: usize,
    epochs: usize,
    window: usize,
    batch_size: usize,
    dropout: f64,
    seed: u64,
    stop_below_perplexity: Option<f64>,
}

impl Default for AblateRun {
    fn default() -> Self {
        let s = AblationSettings::default();
        let t = TrainRun::default();
        AblateRun {
            data: None,
            out: None,
            beam: s.beam,
            max_len: s.max_len,
            eval_split: s.eval_split,
            hidden: s.hidden,
            memory: s.memory,
            layers: s.layers,
            min_count: s.min_count,
            learning_rate: t.learning_rate,
            decay: t.decay,
            decay_after: t.decay_after,
            epochs: t.epochs,
            window: t.window,
            batch_size: t.batch_size,
            dropout: t.dropout,
            seed: t.seed,
            stop_below_perplexity: t.stop_below_perplexity,
        }
    }
}

pub fn ablate(args: AblateArgs) -> Result<u8> {
    let run: AblateRun = resolve(args.config.as_deref(), &args)?;
    let data = required(&run.data, "data")?;
    let out = required(&run.out, "out")?;
    let dataset: Dataset = load_dataset(data)?;
    let settings = AblationSettings {
        hidden: run.hidden,
        memory: run.memory,
        layers: run.layers,
        min_count: run.min_count,
        beam: run.beam,
        max_len: run.max_len,
        eval_split: run.eval_split.clone(),
        train: TrainConfig {
            learning_rate: run.learning_rate,
            decay: run.decay,
            decay_after: run.decay_after,
            epochs: run.epochs,
            window: run.window,
            batch_size: run.batch_size,
            dropout: run.dropout,
            seed: run.seed,
            stop_below_perplexity: run.stop_below_perplexity,
        },
    };
    settings.train.validate()?;
    write_resolved(out, &run)?;
    let report = run_ablation(&dataset, &settings, &mut |variant, m| {
        eprint!("{:<6} ", variant.label());
        print_epoch(m);
    })?;
    write_json(&out.join("ablation.json"), &report)?;
    std::fs::write(out.join("ablation.txt"), report.to_table())?;
    print!("{}", report.to_table());
    Ok(0)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["edcc", "hier", "dyn", "gate"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["rw4", "mlb6"])]
    schema: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Finite-difference step.
    #[arg(long)]
    eps: Option<f64>,
    /// Largest accepted relative error.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GradcheckRun {
    mode: Variant,
    schema: RecordSchema,
    seed: u64,
    eps: f64,
    tolerance: f64,
}

impl Default for GradcheckRun {
    fn default() -> Self {
        GradcheckRun {
            mode: Variant::Gate,
            schema: RecordSchema::Rw4,
            seed: 1,
            eps: 1e-5,
            tolerance: 1e-3,
        }
    }
}

pub fn gradcheck(args: GradcheckArgs) -> Result<u8> {
    let run: GradcheckRun = resolve(args.config.as_deref(), &args)?;
    if run.eps.is_nan() || run.eps <= 0.0 {
        return Err(Error::Usage("--eps must be positive".into()));
    }
    let (model, game) = micro_model(run.schema, run.mode, run.seed)?;
    let example = Example::new(&model, &game)?;
    let report = check_gradients(&model, &example, run.eps)?;
    let err = report.max_relative_error();
    let worst = report.worst().map_or("-", |p| p.name.as_str());
    let ok = err < run.tolerance;
    println!(
        "mode {}: max relative error {err:.3e} (worst {worst}) {}",
        run.mode,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { crate::NUMERIC })
}
