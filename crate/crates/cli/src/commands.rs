use std::path::{Path, PathBuf};

use longtail::dataio::{
    build_label_space, build_taxonomy, embeddings_from_csv, generate_holdout, generate_synthetic,
    metadata_from_csv, read_embedding_table, read_metadata, write_embedding_table, write_metadata,
    Dataset, LabelSpace, ObservationRecord, Split, SyntheticSpec,
};
use longtail::eval::{
    default_alpha_grid, emit_submission, parse_alpha_grid, per_class_topk, read_ablation_csv,
    run_ablation, sweep_alpha, topk_accuracy, write_ablation_csv, write_alpha_sweep_csv,
    write_class_freq_csv, write_reference_report, AblationRow, DataBundle, PredictionSet,
    REFERENCE_SCORES,
};
use longtail::model::{read_checkpoint, write_checkpoint};
use longtail::optim::{labeled_predictions, predict, train, Preset, TrainInputs};
use longtail::zeroshot::{
    classify_all, group_observations, write_zeroshot_submission, CompletionClient, EchoClient,
    FixtureClient, RecordingClient,
};
use longtail::Error;
use serde_json::json;

use crate::args::{
    AblateArgs, Cli, Command, DataArgs, EvalArgs, EvalSplit, IngestArgs, ReportArgs, SweepArgs,
    TrainArgs, ZeroshotArgs,
};
use crate::settings::{apply_common, parse_preset, protocol_config, train_config, ConfigFile};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

struct Ctx<'a> {
    cli: &'a Cli,
    file: ConfigFile,
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> Result<PathBuf> {
        let dir = &self.cli.out_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir.join(name))
    }

    fn summary(&self, value: serde_json::Value) {
        if !self.cli.quiet {
            println!("{value}");
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        cli,
        file: ConfigFile::load(cli.config.as_deref())?,
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::SweepAlpha(a) => sweep(&ctx, a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::Zeroshot(a) => zeroshot(&ctx, a),
        Command::Report(a) => report(&ctx, a),
    }
}

fn read_records(path: &Path) -> Result<Vec<ObservationRecord>> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        metadata_from_csv(path)?
    } else {
        read_metadata(path)?
    })
}

fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<()> {
    let (dataset, source) = match &a.synthetic {
        Some(spec_path) => {
            let text = std::fs::read_to_string(spec_path).map_err(|e| Error::Io {
                path: spec_path.clone(),
                source: e,
            })?;
            let mut spec: SyntheticSpec = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidSpec(format!("{}: {e}", spec_path.display())))?;
            if let Some(seed) = ctx.cli.seed {
                spec.seed = seed;
            }
            let (img, recs) = generate_synthetic(&spec)?;
            let mut data = Dataset::new(img, None, recs)?;
            for (split, n, tag) in [
                (Split::Val, a.val_per_class, 1),
                (Split::Test, a.test_per_class, 2),
            ] {
                if n > 0 {
                    let (img, recs) = generate_holdout(&spec, n, split, tag)?;
                    data = data.concat(&Dataset::new(img, None, recs)?)?;
                }
            }
            (data, "synthetic")
        }
        None => {
            let (Some(emb), Some(meta)) = (&a.embeddings, &a.metadata) else {
                return Err(CliError::Usage(
                    "--embeddings and --metadata are required".into(),
                ));
            };
            let image = embeddings_from_csv(emb)?;
            let text = a.text.as_ref().map(embeddings_from_csv).transpose()?;
            (Dataset::new(image, text, read_records(meta)?)?, "csv")
        }
    };
    let images = ctx.out("images.emb1")?;
    let metadata = ctx.out("metadata.jsonl")?;
    write_embedding_table(&dataset.image, &images)?;
    write_metadata(&dataset.records, &metadata)?;
    let text = match &dataset.text {
        Some(t) => {
            let p = ctx.out("text.emb1")?;
            write_embedding_table(t, &p)?;
            Some(p)
        }
        None => None,
    };
    ctx.summary(json!({
        "source": source,
        "rows": dataset.len(),
        "dim": dataset.image.dim(),
        "images": images,
        "metadata": metadata,
        "text": text,
    }));
    Ok(())
}

struct Splits {
    train: Dataset,
    val: Dataset,
    test: Dataset,
    labels: LabelSpace,
}

fn load(ctx: &Ctx, flags: &DataArgs, need_text: bool) -> Result<Splits> {
    let d = ctx.file.data(flags);
    let (Some(images), Some(metadata)) = (&d.images, &d.metadata) else {
        return Err(CliError::Usage(
            "--images and --metadata are required (or a config file data section)".into(),
        ));
    };
    if need_text && d.text.is_none() {
        return Err(CliError::Usage(
            "this configuration needs --text embeddings".into(),
        ));
    }
    let image = read_embedding_table(images)?;
    let text = d.text.as_ref().map(read_embedding_table).transpose()?;
    let all = Dataset::new(image, text, read_records(metadata)?)?;
    let train = all.split(Split::Train)?;
    let labels = build_label_space(&train.records)?;
    Ok(Splits {
        val: all.split(Split::Val)?,
        test: all.split(Split::Test)?,
        train,
        labels,
    })
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let config = train_config(&ctx.file, &a.train, ctx.cli.seed)?;
    let s = load(ctx, &a.data, config.use_text)?;
    let outcome = train(
        &TrainInputs {
            train: &s.train,
            val: &s.val,
            labels: &s.labels,
        },
        &config,
    )?;
    let log = outcome.log.clone();
    let (best_epoch, val_top5) = (outcome.best_epoch, outcome.best_val_top5);
    let checkpoint = outcome.into_checkpoint(&s.labels, &config)?;
    let ckpt = ctx.out("model.ckp")?;
    write_checkpoint(&checkpoint, &ckpt)?;
    log.write_csv(ctx.out("trainlog.csv")?)?;
    log.write_jsonl(ctx.out("trainlog.jsonl")?)?;
    ctx.summary(json!({
        "checkpoint": ckpt,
        "epochs": log.epochs(),
        "best_epoch": best_epoch,
        "val_top5": val_top5,
        "classes": s.labels.len(),
    }));
    Ok(())
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let labels = &ckpt.meta.labels;
    let s = load(ctx, &a.data, ckpt.model.needs_text())?;
    let scored = match a.split {
        EvalSplit::Train => &s.train,
        EvalSplit::Val => &s.val,
        EvalSplit::Test => &s.test,
    };
    let preds = labeled_predictions(&ckpt.model, scored, labels)?;
    let top_k = topk_accuracy(&preds, a.k)?;
    let per_class = per_class_topk(&preds, a.k, labels)?;
    let class_freq = ctx.out("class_freq.csv")?;
    write_class_freq_csv(&per_class, &class_freq)?;

    let target = if s.test.is_empty() { scored } else { &s.test };
    let all = PredictionSet::new(
        predict(&ckpt.model, target)?,
        None,
        target
            .records
            .iter()
            .map(|r| r.observation_id.clone())
            .collect(),
    )?;
    let submission = ctx.out("submission.csv")?;
    emit_submission(&all, labels, a.top_n.min(labels.len()), &submission)?;
    ctx.summary(json!({
        "k": a.k,
        "top_k": top_k,
        "rows": preds.scores.rows(),
        "class_freq": class_freq,
        "submission": submission,
    }));
    Ok(())
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let base = train_config(&ctx.file, &a.train, ctx.cli.seed)?;
    let alphas = match &a.grid {
        Some(g) => parse_alpha_grid(g)?,
        None => default_alpha_grid(),
    };
    let s = load(ctx, &a.data, base.use_text)?;
    let bundle = DataBundle {
        train: &s.train,
        val: &s.val,
        test: None,
        labels: &s.labels,
    };
    let points = sweep_alpha(&alphas, &base, &bundle)?;
    let path = ctx.out("alpha_sweep.csv")?;
    write_alpha_sweep_csv(&points, &path)?;
    let best = points.iter().max_by(|x, y| {
        x.val_top5
            .total_cmp(&y.val_top5)
            .then(y.alpha.total_cmp(&x.alpha))
    });
    ctx.summary(json!({
        "runs": points.len(),
        "alpha_sweep": path,
        "best_alpha": best.map(|p| p.alpha),
        "best_val_top5": best.map(|p| p.val_top5),
    }));
    Ok(())
}

fn ablate(ctx: &Ctx, a: &AblateArgs) -> Result<()> {
    let has_text = ctx.file.data(&a.data).text.is_some();
    let presets: Vec<Preset> = match &a.presets {
        Some(names) => names
            .iter()
            .map(|n| parse_preset(n.trim()))
            .collect::<Result<_>>()?,
        None => Preset::ALL
            .into_iter()
            .filter(|p| has_text || !p.config().use_text)
            .collect(),
    };
    let grid = presets
        .iter()
        .map(|p| {
            let mut c = p.config();
            apply_common(
                &mut c,
                a.epochs,
                a.batch_size,
                a.patience,
                a.lr,
                ctx.cli.seed,
            );
            (p.name().to_string(), c)
        })
        .collect::<Vec<_>>();
    let need_text = grid.iter().any(|(_, c)| c.use_text);
    let s = load(ctx, &a.data, need_text)?;
    let bundle = DataBundle {
        train: &s.train,
        val: &s.val,
        test: (!s.test.is_empty()).then_some(&s.test),
        labels: &s.labels,
    };
    let results = run_ablation(&grid, &bundle)?;
    let rows: Vec<AblationRow> = results.iter().map(AblationRow::from).collect();
    let ablation = ctx.out("ablation.csv")?;
    write_ablation_csv(&rows, &ablation)?;
    let reference = ctx.out("ablation_reference.csv")?;
    write_reference_report(&rows, &reference)?;
    ctx.summary(json!({
        "ablation": ablation,
        "reference": reference,
        "runs": rows.iter().map(|r| json!({"run": r.run, "val_top5": r.val_top5, "test_top5": r.test_top5})).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn client(a: &ZeroshotArgs) -> Result<Box<dyn CompletionClient>> {
    match a.transport.as_str() {
        "mock:echo" => Ok(Box::new(EchoClient::default())),
        "http" => http_client(a.endpoint.as_deref()),
        t => match t.strip_prefix("mock:") {
            Some(fixture) => Ok(Box::new(FixtureClient::from_path(fixture)?)),
            None => Err(CliError::Usage(format!(
                "unknown transport {t:?}; expected mock:echo, mock:<fixture> or http"
            ))),
        },
    }
}

#[cfg(feature = "http")]
fn http_client(endpoint: Option<&str>) -> Result<Box<dyn CompletionClient>> {
    Ok(Box::new(longtail::zeroshot::HttpClient::from_env(
        endpoint,
    )?))
}

#[cfg(not(feature = "http"))]
fn http_client(_: Option<&str>) -> Result<Box<dyn CompletionClient>> {
    Err(CliError::Usage(
        "the http transport needs a build with --features http".into(),
    ))
}

fn zeroshot(ctx: &Ctx, a: &ZeroshotArgs) -> Result<()> {
    let config = protocol_config(&ctx.file, a)?;
    let metadata = a
        .metadata
        .clone()
        .or_else(|| ctx.file.data.metadata.clone())
        .ok_or_else(|| CliError::Usage("--metadata is required".into()))?;
    let records = read_records(&metadata)?;
    let train_records: Vec<ObservationRecord> = records
        .iter()
        .filter(|r| r.split == Split::Train)
        .cloned()
        .collect();
    let labels = build_label_space(&train_records)?;
    let tree = build_taxonomy(&train_records, &labels)?;
    let test: Vec<ObservationRecord> = records
        .into_iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    let mut observations = group_observations(&test);
    if let Some(n) = a.limit {
        observations.truncate(n);
    }
    if observations.is_empty() {
        return Err(Error::EmptyDataset.into());
    }
    let inner = client(a)?;
    let outcome = match &a.record {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            let rec = RecordingClient::new(inner);
            let out = classify_all(&observations, &tree, &rec, &config);
            rec.write_fixture(path)?;
            out?
        }
        None => classify_all(&observations, &tree, &inner, &config)?,
    };
    let submission = ctx.out("zeroshot_submission.csv")?;
    write_zeroshot_submission(
        &outcome.results,
        &tree,
        &labels,
        config.final_count,
        &submission,
    )?;
    let ledger = ctx.out("ledger.csv")?;
    outcome.ledger.write_csv(&ledger)?;
    let transcript = ctx.out("zeroshot.jsonl")?;
    let mut lines = String::new();
    for r in &outcome.results {
        lines.push_str(&serde_json::to_string(r).map_err(Error::from)?);
        lines.push('\n');
    }
    std::fs::write(&transcript, lines).map_err(|e| Error::Io {
        path: transcript.clone(),
        source: e,
    })?;
    let fallbacks = outcome.results.iter().filter(|r| r.fallback).count();
    ctx.summary(json!({
        "observations": outcome.results.len(),
        "fallbacks": fallbacks,
        "submission": submission,
        "ledger": ledger,
        "transcript": transcript,
        "cost": outcome.ledger.models.values().map(|t| t.cost).sum::<f64>(),
    }));
    Ok(())
}

fn report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let rows = match &a.ablation {
        Some(p) => read_ablation_csv(p)?,
        None => Vec::new(),
    };
    let path = ctx.out("reference.csv")?;
    write_reference_report(&rows, &path)?;
    if !ctx.cli.quiet {
        println!("| reference row | preset | public | private |");
        println!("|---|---|---|---|");
        for r in &REFERENCE_SCORES {
            println!(
                "| {} | {} | {:.3} | {:.3} |",
                r.row,
                r.preset.unwrap_or("-"),
                r.public,
                r.private
            );
        }
        if !rows.is_empty() {
            println!();
            println!("| local run | val top-5 | test top-5 |");
            println!("|---|---|---|");
            for r in &rows {
                let test = r.test_top5.map_or("-".to_string(), |t| format!("{t:.4}"));
                println!("| {} | {:.4} | {test} |", r.run, r.val_top5);
            }
        }
    }
    Ok(())
}
