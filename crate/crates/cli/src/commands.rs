use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};

use hyperank::analysis::{pca_project, write_pca_csv};
use hyperank::baselines::{distance_rank, logreg_rank, text_vector, train_logreg, LogRegConfig, TermVector};
use hyperank::corpus::{
    augmentation_report, detect_acronyms, distinct_origins, expand_acronyms, filter_acronyms, gold_labels,
    load_cached_docs, match_dbpedia, merge_external, merge_glossaries, read_pairs_csv, read_records_jsonl,
    read_terms_csv, read_word_list, split_dataset, write_records_jsonl, AcronymEntry, DbpediaClient,
};
use hyperank::embeddings::{hash_embed, load_embeddings, save_embeddings};
use hyperank::eval::{evaluate, full_report, write_per_label_csv};
use hyperank::negsampler::{generate_pairs, load_pairs, save_pairs, subsample_zeros, ZeroKeep};
use hyperank::ranker::{ensemble_mean, load_ranked, rank, rollup_mean, save_ranked, score};
use hyperank::taxonomy::load_taxonomy;
use hyperank::trainer::{train, PairObjective, Schedule};
use hyperank::{
    Embedder, EmbeddingTable, LabelTaxonomy, ProjectionModel, SimilarityMatrix, Source, TermRecord, TrainConfig,
};

use crate::{
    AugmentArgs, BaselineCommand, Command, DistanceArgs, EmbedArgs, EnsembleArgs, EvaluateArgs, FetchArgs, LogregArgs,
    NegsampleArgs, PairObjectiveArg, PcaArgs, RankArgs, ScheduleArg, SplitArgs, TrainArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Augment(a) => augment(a),
        Command::FetchDbpedia(a) => fetch_dbpedia(a),
        Command::Split(a) => split(a),
        Command::Negsample(a) => negsample(a),
        Command::Embed(a) => embed(a),
        Command::Train(a) => train_cmd(a),
        Command::Rank(a) => rank_cmd(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Baseline(BaselineCommand::Distance(a)) => baseline_distance(a),
        Command::Baseline(BaselineCommand::Logreg(a)) => baseline_logreg(a),
        Command::Pca(a) => pca(a),
    }
}

/// Term CSVs by extension, JSON-lines records otherwise.
fn load_records(path: &Path) -> Result<Vec<TermRecord>> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let records = if is_csv {
        read_terms_csv(path)?
    } else {
        read_records_jsonl(path)?
    };
    Ok(records)
}

fn taxonomy(path: &Path) -> Result<LabelTaxonomy> {
    let tax = load_taxonomy(path)?;
    let missing = tax.missing_finsim_labels();
    if !missing.is_empty() && missing.len() < tax.len() {
        warn!("{}: taxonomy lacks {} standard labels", path.display(), missing.len());
    }
    Ok(tax)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let mut records = read_terms_csv(&a.terms)?;
    let n_input = records.len();
    if let Some(p) = &a.external {
        records = merge_external(records, &read_pairs_csv(p)?);
    }

    let mut entries: Vec<AcronymEntry> = Vec::new();
    for doc in &a.acronym_docs {
        let text = std::fs::read_to_string(doc).with_context(|| format!("reading {}", doc.display()))?;
        entries.extend(detect_acronyms(&text));
    }
    if let Some(p) = &a.acronyms {
        entries.extend(
            read_pairs_csv(p)?
                .into_iter()
                .map(|(acr, exp)| AcronymEntry::new(acr, exp)),
        );
    }
    if !entries.is_empty() {
        let english = match &a.english {
            Some(p) => read_word_list(p)?,
            None => {
                warn!("no --english word list; acronyms spelling common words are kept");
                Default::default()
            }
        };
        let n_found = entries.len();
        let kept = filter_acronyms(entries, &english);
        info!("acronyms: {} found, {} kept", n_found, kept.len());
        records = expand_acronyms(records, &kept);
    }

    if let Some(p) = &a.dbpedia_cache {
        records = match_dbpedia(records, &load_cached_docs(p)?);
    }
    if let Some(p) = &a.investopedia {
        records = merge_glossaries(records, &read_pairs_csv(p)?, Source::Investopedia);
    }
    if let Some(p) = &a.fibo {
        records = merge_glossaries(records, &read_pairs_csv(p)?, Source::Fibo);
    }

    write_records_jsonl(&a.out, &records)?;
    let report: BTreeMap<String, usize> = augmentation_report(&records)
        .into_iter()
        .map(|(s, n)| (s.to_string(), n))
        .collect();
    info!("{} input rows, {} records", n_input, records.len());
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    Ok(())
}

fn fetch_dbpedia(a: FetchArgs) -> Result<()> {
    let records = load_records(&a.records)?;
    let terms: Vec<&str> = distinct_origins(&records)
        .into_iter()
        .filter(|r| r.label.is_some())
        .map(|r| r.term.as_str())
        .collect();
    let mut client = DbpediaClient::new(a.endpoint, &a.cache)?;
    let outcomes = client.fetch(terms)?;
    let failed: Vec<&str> = outcomes
        .iter()
        .filter_map(|o| o.error.as_ref().map(|e| (o.term.as_str(), e)))
        .map(|(t, e)| {
            warn!("lookup failed for `{t}`: {e}");
            t
        })
        .collect();
    info!(
        "{} terms, {} network calls, {} failures",
        outcomes.len(),
        client.network_calls(),
        failed.len()
    );
    if let Some(p) = &a.errors {
        let mut w = create(p)?;
        for t in &failed {
            writeln!(w, "{t}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let records = load_records(&a.records)?;
    let (dev, val) = split_dataset(&records, a.dev_fraction, a.seed)?;
    write_records_jsonl(&a.dev_out, &dev)?;
    write_records_jsonl(&a.val_out, &val)?;
    info!("dev {} records, val {} records", dev.len(), val.len());
    Ok(())
}

fn parse_zero_keep(raw: &str) -> Result<ZeroKeep> {
    if let Ok(n) = raw.parse::<usize>() {
        return Ok(ZeroKeep::Count(n));
    }
    match raw.parse::<f64>() {
        Ok(r) if (0.0..=1.0).contains(&r) => Ok(ZeroKeep::Ratio(r)),
        _ => bail!("--zero-keep `{raw}` is neither a count nor a fraction in [0, 1]"),
    }
}

fn negsample(a: NegsampleArgs) -> Result<()> {
    let records = load_records(&a.records)?;
    let tax = taxonomy(&a.taxonomy)?;
    let keep = a.zero_keep.as_deref().map(parse_zero_keep).transpose()?;
    let mut pairs = generate_pairs(&records, &tax, a.k, a.neg_per_term, a.seed)?;
    if let Some(keep) = keep {
        pairs = subsample_zeros(pairs, keep, a.seed);
    }
    save_pairs(&a.out, &pairs)?;
    info!("{} pairs from {} records", pairs.len(), records.len());
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let mut texts: Vec<String> = Vec::new();
    for p in &a.records {
        texts.extend(load_records(p)?.into_iter().map(|r| r.text));
    }
    for p in &a.pairs {
        for pair in load_pairs(p)? {
            texts.push(pair.text_a);
            texts.push(pair.text_b);
        }
    }
    if let Some(p) = &a.taxonomy {
        let tax = taxonomy(p)?;
        for l in tax.labels() {
            texts.push(tax.definition(l)?.to_string());
        }
    }

    let table = match (&a.base, a.hash_dim) {
        (Some(base), None) => {
            let base = load_embeddings(base)?;
            if texts.is_empty() {
                base
            } else {
                let mut out = EmbeddingTable::new(base.dim())?;
                for t in &texts {
                    if out.contains(t) {
                        continue;
                    }
                    let v = base
                        .get(t)
                        .with_context(|| format!("`{t}` has no row in {}", a.base.as_ref().unwrap().display()))?;
                    out.insert(t, v.to_vec())?;
                }
                out
            }
        }
        (None, Some(dim)) => {
            ensure!(
                !texts.is_empty(),
                "no texts to embed; pass --records, --pairs or --taxonomy"
            );
            let mut out = EmbeddingTable::new(dim)?;
            for t in &texts {
                if !out.contains(t) {
                    out.insert(t, hash_embed(t, dim, a.seed))?;
                }
            }
            out
        }
        _ => bail!("pass exactly one of --hash-dim or --base"),
    };
    save_embeddings(&table, &a.out)?;
    info!("{} vectors of dimension {}", table.len(), table.dim());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let pairs = load_pairs(&a.pairs)?;
    let embedder = a.embedder.build()?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        margin: a.margin,
        mnr_scale: a.scale,
        positive_threshold: a.positive_threshold,
        seed: a.seed,
        dim_out: a.dim_out,
        schedule: match a.schedule {
            ScheduleArg::Alternate => Schedule::Alternate,
            ScheduleArg::Sum => Schedule::Sum,
        },
        pair_objective: match a.pair_objective {
            PairObjectiveArg::Contrastive => PairObjective::Contrastive,
            PairObjectiveArg::Regression => PairObjective::Regression,
        },
    };
    let (model, report) = train(&pairs, &embedder, &cfg)?;
    model.save(&a.out)?;
    if let Some(p) = &a.loss_report {
        let mut w = create(p)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(last) = report.epoch_means().last() {
        info!("final epoch mean loss {last:.6}");
    }
    Ok(())
}

fn load_model(path: Option<&Path>, dim: usize) -> Result<ProjectionModel> {
    let model = match path {
        Some(p) => ProjectionModel::load(p)?,
        None => ProjectionModel::identity_padded(dim, dim)?,
    };
    ensure!(
        model.dim_in() == dim,
        "model expects {}-dimensional input but the embedder yields {dim}",
        model.dim_in()
    );
    Ok(model)
}

fn rank_cmd(a: RankArgs) -> Result<()> {
    let records = load_records(&a.records)?;
    let tax = taxonomy(&a.taxonomy)?;
    let embedder = a.embedder.build()?;
    let model = load_model(a.model.as_deref(), embedder.dim())?;
    let matrix = rollup_mean(&score(&model, &embedder, &records, &tax)?);
    matrix.save(&a.out)?;
    if let Some(p) = &a.ranked {
        save_ranked(p, &rank(&matrix))?;
    }
    info!("{} terms ranked against {} labels", matrix.len(), tax.len());
    Ok(())
}

fn ensemble(a: EnsembleArgs) -> Result<()> {
    let matrices = a
        .matrices
        .iter()
        .map(|p| SimilarityMatrix::load(p).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let mean = ensemble_mean(&matrices)?;
    mean.save(&a.out)?;
    if let Some(p) = &a.ranked {
        save_ranked(p, &rank(&mean))?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let ranked = match (&a.ranked, &a.matrix) {
        (Some(p), None) => load_ranked(p)?,
        (None, Some(p)) => rank(&SimilarityMatrix::load(p)?),
        _ => bail!("pass exactly one of --ranked or --matrix"),
    };
    let gold = gold_labels(&load_records(&a.gold)?);
    let report = match &a.taxonomy {
        Some(p) => full_report(&ranked, &gold, &taxonomy(p)?, a.cutoff)?,
        None => {
            ensure!(a.per_label.is_none(), "--per-label needs --taxonomy");
            evaluate(&ranked, &gold, a.cutoff)?
        }
    };
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(p) = &a.per_label {
        let mut w = create(p)?;
        write_per_label_csv(&mut w, &report.per_label)?;
        w.flush()?;
    }
    info!(
        "accuracy {:.4}, mean rank {:.4} over {} terms",
        report.accuracy, report.mean_rank, report.n
    );
    Ok(())
}

fn label_vectors(
    tax: &LabelTaxonomy,
    embedder: &dyn Embedder,
    token_level: bool,
    names: bool,
) -> Result<Vec<(String, Vec<f64>)>> {
    tax.labels()
        .map(|l| {
            let text = if names { l } else { tax.definition(l)? };
            Ok((l.to_string(), text_vector(embedder, text, token_level)?))
        })
        .collect()
}

fn term_vectors<'a>(
    records: &[&'a TermRecord],
    embedder: &dyn Embedder,
    token_level: bool,
) -> Result<Vec<TermVector<'a>>> {
    records
        .iter()
        .map(|r| {
            Ok(TermVector {
                origin_id: &r.origin_id,
                term: &r.term,
                vector: text_vector(embedder, &r.term, token_level)?,
            })
        })
        .collect()
}

fn baseline_distance(a: DistanceArgs) -> Result<()> {
    let records = load_records(&a.records)?;
    let tax = taxonomy(&a.taxonomy)?;
    let embedder = a.embedder.build()?;
    let labels = label_vectors(&tax, &embedder, a.token_level, a.label_names)?;
    let terms = term_vectors(&distinct_origins(&records), &embedder, a.token_level)?;
    save_ranked(&a.out, &distance_rank(&terms, &labels)?)?;
    Ok(())
}

fn baseline_logreg(a: LogregArgs) -> Result<()> {
    let train_records = load_records(&a.train)?;
    let test_records = load_records(&a.test)?;
    let tax = taxonomy(&a.taxonomy)?;
    let embedder = a.embedder.build()?;

    let train_terms: Vec<&TermRecord> = distinct_origins(&train_records)
        .into_iter()
        .filter(|r| r.label.is_some())
        .collect();
    let x: Vec<Vec<f64>> = term_vectors(&train_terms, &embedder, a.token_level)?
        .into_iter()
        .map(|t| t.vector)
        .collect();
    let y: Vec<String> = train_terms.iter().filter_map(|r| r.label.clone()).collect();
    let labels: Vec<String> = tax.labels().map(str::to_string).collect();
    let cfg = LogRegConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        l2: a.l2,
    };
    let (model, history) = train_logreg(&x, &y, &labels, &cfg)?;
    if let Some(last) = history.last() {
        info!("final training loss {last:.6}");
    }
    if let Some(p) = &a.model_out {
        model.save(p)?;
    }
    let ranked = term_vectors(&distinct_origins(&test_records), &embedder, a.token_level)?
        .iter()
        .map(|t| logreg_rank(&model, t.origin_id, t.term, &t.vector))
        .collect::<hyperank::Result<Vec<_>>>()?;
    save_ranked(&a.out, &ranked)?;
    Ok(())
}

fn pca(a: PcaArgs) -> Result<()> {
    let tax = taxonomy(&a.taxonomy)?;
    let embedder = a.embedder.build()?;
    let model = load_model(a.model.as_deref(), embedder.dim())?;
    let labels: Vec<String> = tax.labels().map(str::to_string).collect();
    let vectors = labels
        .iter()
        .map(|l| Ok(model.encode(&embedder.embed(tax.definition(l)?)?)?))
        .collect::<Result<Vec<_>>>()?;
    let result = pca_project(&vectors, 2)?;
    let mut w = create(&a.out)?;
    write_pca_csv(&mut w, &labels, &result)?;
    w.flush()?;
    info!(
        "explained variance {:.4}, {:.4}",
        result.explained_variance_ratio[0], result.explained_variance_ratio[1]
    );
    Ok(())
}
