//! Pipeline stages. Each stage reads documented files from the input
//! directory (falling back to the output directory) and writes its own
//! artifacts to the output directory, so any stage can be rerun alone.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use expertise::eval::{self, DistributionReports};
use expertise::features::{connectivity, connectivity_to_tsv, parse_connectivity, FeatureStore};
use expertise::groundtruth::{self, explode_pairs, labels_to_tsv, load_groundtruth, load_labels};
use expertise::ingest::{corpus_users, filter_window, read_events, write_events};
use expertise::model::{self, ExpertiseModel};
use expertise::normalize::{normalize_store, NormalizedFeatureStore};
use expertise::ontology::{check_dictionary, PhraseDictionary, TopicOntology};
use expertise::rank::{build_index, RankedIndex};
use expertise::{tsv, FeatureId, UserId};

use crate::files;
use crate::synth::{self, SynthConfig};
use crate::StageError;

pub const TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_WINDOW_DAYS: u32 = 90;

#[derive(Debug, Clone)]
pub struct StageArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub window_days: u32,
    pub config: Option<PathBuf>,
}

impl StageArgs {
    pub fn new(dir: impl Into<PathBuf>, seed: u64) -> Self {
        let dir = dir.into();
        StageArgs { input: dir.clone(), output: dir, seed, window_days: DEFAULT_WINDOW_DAYS, config: None }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }

    fn find(&self, name: &str) -> Option<PathBuf> {
        [self.input.join(name), self.output.join(name)].into_iter().find(|p| p.exists())
    }

    fn require(&self, stage: &'static str, name: &str, producer: &'static str) -> Result<PathBuf, StageError> {
        self.find(name).ok_or_else(|| StageError::Missing { stage, producer, path: self.input.join(name) })
    }
}

/// One line per stage for the terminal.
pub type Summary = String;

pub fn synth(args: &StageArgs) -> Result<Summary, StageError> {
    let cfg = match &args.config {
        Some(path) => SynthConfig::load(path)?,
        None => SynthConfig::default(),
    };
    let data = synth::generate(&cfg, args.seed)?;
    data.write(&args.output)?;
    Ok(format!(
        "synth: {} users, {} topics, {} events, {} ground-truth lists",
        cfg.users,
        cfg.topics,
        data.events.len(),
        data.groundtruth.len()
    ))
}

pub fn ingest(args: &StageArgs) -> Result<Summary, StageError> {
    let path = args.require("ingest", files::EVENTS, "synth")?;
    let (events, report) = read_events(&path)?;
    let (kept, dropped, reference) = filter_window(events, args.window_days, None);
    write_events(&args.out(files::INGESTED), &kept)?;
    tsv::write(&args.out(files::REJECTS), &report.rejects_tsv())?;
    let users = corpus_users(&kept);
    let mut body = String::from("# user\n");
    for u in &users {
        body.push_str(u);
        body.push('\n');
    }
    tsv::write(&args.out(files::CORPUS_USERS), &body)?;
    Ok(format!(
        "ingest: {} lines, {} accepted, {} rejected, {} outside the {}-day window ending {}, {} users",
        report.lines,
        report.accepted,
        report.rejects.len(),
        dropped,
        args.window_days,
        model::civil_date(reference),
        users.len()
    ))
}

fn load_ontology(args: &StageArgs, stage: &'static str) -> Result<(TopicOntology, PhraseDictionary), StageError> {
    let ont = TopicOntology::load(&args.require(stage, files::ONTOLOGY, "synth")?)?;
    let dict = PhraseDictionary::load(&args.require(stage, files::DICTIONARY, "synth")?, &ont)?;
    check_dictionary(&dict, &ont)?;
    Ok((ont, dict))
}

pub fn extract(args: &StageArgs) -> Result<Summary, StageError> {
    let (_, dict) = load_ontology(args, "extract")?;
    let (events, report) = read_events(&args.require("extract", files::INGESTED, "ingest")?)?;
    if !report.rejects.is_empty() {
        return Err(expertise::Error::Validation(format!(
            "{}: {} malformed lines; rerun `ingest`",
            files::INGESTED,
            report.rejects.len()
        ))
        .into());
    }
    let ex = expertise::features::extract(&events, &dict);
    tsv::write(&args.out(files::FEATURES_RAW), &ex.store.to_tsv(false))?;
    tsv::write(&args.out(files::CONNECTIVITY_EXTRACTED), &connectivity_to_tsv(&ex.connectivity))?;
    Ok(format!(
        "extract: {} users, {} (user, topic) rows, {} skipped events, {} degenerate industry fields",
        ex.report.users,
        ex.store.len(),
        ex.report.skipped,
        ex.report.degenerate
    ))
}

pub fn normalize(args: &StageArgs) -> Result<Summary, StageError> {
    let (raw, normalized) = FeatureStore::load(&args.require("normalize", files::FEATURES_RAW, "extract")?)?;
    if normalized {
        return Err(expertise::Error::Validation(format!("{} is already normalized", files::FEATURES_RAW)).into());
    }
    let norm = normalize_store(&raw);
    tsv::write(&args.out(files::FEATURES_NORM), &norm.to_tsv())?;
    Ok(format!("normalize: {} rows", norm.store().len()))
}

/// Declared connectivity when present, otherwise the extracted one.
pub fn effective_connectivity(args: &StageArgs) -> Result<BTreeMap<UserId, f64>, StageError> {
    let path = args.find(files::CONNECTIVITY).or_else(|| args.find(files::CONNECTIVITY_EXTRACTED));
    let Some(path) = path else { return Ok(BTreeMap::new()) };
    let vectors = parse_connectivity(&tsv::read_to_string(&path)?)?;
    Ok(vectors.iter().map(|(u, v)| (u.clone(), connectivity(v))).collect())
}

pub fn explode_gt(args: &StageArgs) -> Result<Summary, StageError> {
    let evaluations = load_groundtruth(&args.require("explode-gt", files::GROUNDTRUTH, "synth")?)?;
    let labels: Vec<_> = evaluations.iter().flat_map(explode_pairs).collect();
    tsv::write(&args.out(files::LABELS), &labels_to_tsv(&labels))?;
    let report = groundtruth::consensus(&labels);
    tsv::write(&args.out(files::CONSENSUS_BY_VOTES), &report.by_votes_tsv())?;
    let curve = groundtruth::consensus_by_connectivity_delta(&labels, &effective_connectivity(args)?);
    tsv::write(&args.out(files::CONSENSUS_BY_CONNECTIVITY), &curve.to_tsv())?;
    let majority = groundtruth::dedupe_majority(&labels);
    let (train, test) = groundtruth::split_train_test(&majority, args.seed, TEST_FRACTION);
    tsv::write(&args.out(files::LABELS_TRAIN), &labels_to_tsv(&train))?;
    tsv::write(&args.out(files::LABELS_TEST), &labels_to_tsv(&test))?;
    let two = report.by_votes.get(&2).map_or("n/a".to_string(), |b| format!("{:.4}", b.mean_consensus));
    Ok(format!(
        "explode-gt: {} lists, {} votes, {} majority pairs ({} train, {} test), 2-vote consensus {two}",
        evaluations.len(),
        labels.len(),
        majority.len(),
        train.len(),
        test.len()
    ))
}

fn load_norm(args: &StageArgs, stage: &'static str) -> Result<NormalizedFeatureStore, StageError> {
    Ok(NormalizedFeatureStore::load(&args.require(stage, files::FEATURES_NORM, "normalize")?)?)
}

pub fn train(args: &StageArgs) -> Result<Summary, StageError> {
    let norm = load_norm(args, "train")?;
    let labels = load_labels(&args.require("train", files::LABELS_TRAIN, "explode-gt")?)?;
    let mut m = model::train(&labels, &norm)?;
    m.seed = args.seed;
    tsv::write(&args.out(files::MODEL), &m.to_tsv())?;
    let g: Vec<String> = m.global.weights.iter().map(|(n, g)| format!("{n}={g:.4}")).collect();
    Ok(format!("train: {} labels, global weights {}", labels.len(), g.join(" ")))
}

fn load_model(args: &StageArgs, stage: &'static str) -> Result<ExpertiseModel, StageError> {
    Ok(ExpertiseModel::load(&args.require(stage, files::MODEL, "train")?)?)
}

pub fn score(args: &StageArgs) -> Result<Summary, StageError> {
    let m = load_model(args, "score")?;
    let norm = load_norm(args, "score")?;
    let scores = model::score_all(&m, &norm);
    tsv::write(&args.out(files::SCORES), &model::scores_to_tsv(&scores))?;
    Ok(format!("score: {} positive (user, topic) scores", scores.len()))
}

pub fn index(args: &StageArgs) -> Result<Summary, StageError> {
    let scores = model::load_scores(&args.require("index", files::SCORES, "score")?)?;
    let ont = TopicOntology::load(&args.require("index", files::ONTOLOGY, "synth")?)?;
    let handles = match args.find(files::USERS) {
        Some(p) => synth::parse_handles(&tsv::read_to_string(&p)?)?,
        None => BTreeMap::new(),
    };
    let idx = build_index(&scores, &ont, handles);
    let dir = args.out(files::INDEX);
    let topics_dir = dir.join("topics");
    if topics_dir.is_dir() {
        std::fs::remove_dir_all(&topics_dir).map_err(|e| expertise::Error::io(&topics_dir, e))?;
    }
    idx.save(&dir)?;
    Ok(format!(
        "index: {} topics, {} ranked users in {}",
        idx.topics().filter(|t| !idx.ranking(&t.id).is_empty()).count(),
        idx.user_count(),
        dir.display()
    ))
}

pub fn load_index(args: &StageArgs) -> Result<RankedIndex, StageError> {
    let dir = args.require("serve", files::INDEX, "index")?;
    Ok(RankedIndex::load(&dir)?)
}

pub fn load_corpus_users(args: &StageArgs, stage: &'static str) -> Result<BTreeSet<UserId>, StageError> {
    let text = tsv::read_to_string(&args.require(stage, files::CORPUS_USERS, "ingest")?)?;
    Ok(tsv::data_lines(&text).map(|(_, l)| l.trim().to_string()).collect())
}

pub fn evaluate(args: &StageArgs) -> Result<Summary, StageError> {
    let m = load_model(args, "eval")?;
    let norm = load_norm(args, "eval")?;
    let (raw, _) = FeatureStore::load(&args.require("eval", files::FEATURES_RAW, "extract")?)?;
    let test = load_labels(&args.require("eval", files::LABELS_TEST, "explode-gt")?)?;
    let users = load_corpus_users(args, "eval")?;
    let ont = TopicOntology::load(&args.require("eval", files::ONTOLOGY, "synth")?)?;
    let conn = effective_connectivity(args)?;
    let reports = args.out(files::REPORTS);

    let metrics = eval::metrics_table(&m, &test, &norm, users.len());
    tsv::write(&reports.join("metrics.tsv"), &eval::metrics_to_tsv(&metrics))?;

    let mut heat = String::from("feature\tbucket_u1\tbucket_u2\tcount\tmean_abs_delta\n");
    for f in FeatureId::all() {
        let grid = eval::predictability_heatmap(f, &test, &norm, &conn);
        for line in grid.to_tsv().lines().skip(1) {
            heat.push_str(&format!("{}\t{line}\n", f.name()));
        }
    }
    tsv::write(&reports.join("heatmaps.tsv"), &heat)?;

    let dist: DistributionReports = eval::export_distributions(&raw, &norm, &conn, &test);
    for (name, body) in dist.files() {
        tsv::write(&reports.join(name), body)?;
    }
    let rollups = eval::network_rollups(&m, &norm, &users, &ont);
    tsv::write(&reports.join("supertopic_rollup.tsv"), &eval::rollup_to_tsv(&rollups))?;

    let accuracy = eval::pairwise_accuracy(&m, &test, &norm);
    let model_row = metrics.last().expect("model row");
    let summary = format!(
        "# metric\tvalue\ntest_labels\t{}\npairwise_accuracy\t{accuracy}\nmodel_precision\t{}\nmodel_recall\t{}\nmodel_f1\t{}\nmodel_coverage\t{}\n",
        test.len(),
        model_row.precision,
        model_row.recall,
        model_row.f1,
        model_row.coverage
    );
    tsv::write(&reports.join("summary.tsv"), &summary)?;
    Ok(format!(
        "eval: {} test labels, accuracy {accuracy:.4}, F1 {:.4}, coverage {:.4}",
        test.len(),
        model_row.f1,
        model_row.coverage
    ))
}

type Stage = fn(&StageArgs) -> Result<Summary, StageError>;

/// Every stage from synthesis to evaluation, in order.
pub fn run_all(args: &StageArgs) -> Result<Vec<Summary>, StageError> {
    let stages: [Stage; 9] =
        [synth, ingest, extract, normalize, explode_gt, train, score, index, evaluate];
    stages.iter().map(|s| s(args)).collect()
}

pub fn ensure_dir(path: &Path) -> Result<(), StageError> {
    std::fs::create_dir_all(path).map_err(|e| expertise::Error::io(path, e).into())
}
