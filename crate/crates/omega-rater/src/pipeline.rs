//! End-to-end orchestration: ingest -> sentiment -> geometry -> features
//! -> cluster -> inference, with all file outputs.
//!
//! The full run is literally the composition of the three stage entry
//! points through their files: `run` executes the features stage, then the
//! cluster stage on the features CSV it just wrote, then the inference
//! stage on the clusters CSV. Stage subcommands therefore reproduce the
//! monolithic run byte for byte. CSV floats carry 17 significant digits
//! and JSON floats the shortest exact encoding, so every serialized value
//! round-trips to the identical bits.
//!
//! All randomness flows from the single top-level seed; stage seeds are
//! derived deterministically from it. A stage's fatal error aborts the run
//! with a stage-tagged message and removes the files created so far.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{
    dbscan, evaluate_against_ratings, label_polarity, Assignment, ClusterAssignment,
    DbscanParams, PointRole, Polarity, PolarityConfig, PolarityLabels,
};
use crate::error::{Error, Result};
use crate::features::{self, FeatureConfig, FeatureFlags, FeatureRecord, FlagFrequencies};
use crate::geometry::SideLengths;
use crate::inference::{characterize, posterior_mean, InferenceOptions, RatingCounts, RatingPosterior};
use crate::ingest::{load_dataset, DatasetSpec, LoadSummary, ReviewRecord, RowSkip};
use crate::sentiment::{passthrough, score_text, Lexicon, SentimentTriple};

pub const FEATURES_FILE: &str = "features.csv";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const EVALUATION_FILE: &str = "cluster_evaluation.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOTDATA_DIR: &str = "plotdata";
pub const UNAVAILABLE_FILE: &str = "posterior_unavailable.json";

/// Environment variable capping the parallel map width.
pub const THREADS_ENV: &str = "OMEGA_RATER_THREADS";

const FEATURES_COLUMNS: [&str; 12] = [
    "id", "pos", "neu", "neg", "a", "b", "c", "alpha", "beta", "gamma", "omega", "flags",
];
const CLUSTERS_COLUMNS: [&str; 4] = ["id", "cluster_id", "role", "polarity"];

/// How sentiment triples are produced. With `None` in [`RunConfig`], the
/// provider follows the resolved dataset source: text columns take the
/// lexicon scorer, sentiment columns pass through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentProvider {
    Lexicon,
    Passthrough,
}

impl std::fmt::Display for SentimentProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SentimentProvider::Lexicon => write!(f, "lexicon"),
            SentimentProvider::Passthrough => write!(f, "passthrough"),
        }
    }
}

impl std::str::FromStr for SentimentProvider {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lexicon" => Ok(SentimentProvider::Lexicon),
            "passthrough" => Ok(SentimentProvider::Passthrough),
            other => Err(format!(
                "unknown sentiment provider {other:?} (expected lexicon or passthrough)"
            )),
        }
    }
}

/// Everything one run needs. Echoed verbatim into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub provider: Option<SentimentProvider>,
    pub lexicon_path: Option<PathBuf>,
    pub features: FeatureConfig,
    pub dbscan: DbscanParams,
    pub polarity: PolarityConfig,
    pub inference: InferenceOptions,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Parallel map width; `None` falls back to `OMEGA_RATER_THREADS`,
    /// then to all cores.
    pub threads: Option<usize>,
}

impl RunConfig {
    /// A config with library defaults for everything but the dataset and
    /// output directory.
    pub fn new(dataset: DatasetSpec, output_dir: PathBuf) -> Self {
        RunConfig {
            dataset,
            provider: None,
            lexicon_path: None,
            features: FeatureConfig::default(),
            dbscan: DbscanParams::default(),
            polarity: PolarityConfig::default(),
            inference: InferenceOptions::default(),
            output_dir,
            seed: 42,
            threads: None,
        }
    }
}

/// Row counts and wall-clock for one stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub rows_in: u64,
    pub rows_out: u64,
    pub skipped: u64,
    pub wall_ms: u128,
}

/// Run provenance: config echo, tool version, per-stage row counts, flag
/// frequencies and wall-clock per stage.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub stages: Vec<StageReport>,
    pub flag_frequencies: Option<FlagFrequencies>,
    pub skipped_rows: Vec<RowSkip>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    fn new(cfg: &RunConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            stages: Vec::new(),
            flag_frequencies: None,
            skipped_rows: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// Deterministic per-stage seed derivation (FNV-1a over label and index,
/// mixed with the top-level seed).
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ base;
    for b in label.bytes().chain(index.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(path: &Path, row: u64, field: &str, raw: &str) -> Result<f64> {
    let value: f64 = raw.parse().map_err(|_| {
        Error::data(path, format!("row {row}: cannot parse {field} value {raw:?}"))
    })?;
    if !value.is_finite() {
        return Err(Error::data(
            path,
            format!("row {row}: non-finite {field} value {raw:?}"),
        ));
    }
    Ok(value)
}

/// Files created so far, removed together when a stage fails.
#[derive(Default)]
struct OutputTracker {
    files: Vec<PathBuf>,
}

impl OutputTracker {
    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn cleanup(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
    }
}

fn tag_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("[{stage}] {m}")),
        Error::Data { path, message } => Error::Data {
            path,
            message: format!("[{stage}] {message}"),
        },
        Error::Schema { path, message } => Error::Schema {
            path,
            message: format!("[{stage}] {message}"),
        },
        Error::Internal(m) => Error::Internal(format!("[{stage}] {m}")),
    }
}

fn effective_threads(cfg: &RunConfig) -> Result<Option<usize>> {
    if cfg.threads.is_some() {
        return Ok(cfg.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))
            })?;
            if n == 0 {
                return Err(Error::config(format!("{THREADS_ENV} must be at least 1")));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err(Error::config(format!("{THREADS_ENV} is not valid unicode")))
        }
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::internal(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

enum Provider {
    Lexicon(Lexicon),
    Passthrough,
}

/// Picks and validates the provider against what the dataset resolved to.
fn resolve_provider(cfg: &RunConfig, records: &[ReviewRecord]) -> Result<Provider> {
    let source_is_text = records.first().map(|r| r.text.is_some());
    let wanted = cfg.provider;
    match source_is_text {
        None => Ok(Provider::Passthrough), // empty dataset: provider is moot
        Some(true) => {
            if wanted == Some(SentimentProvider::Passthrough) {
                return Err(Error::config(
                    "provider passthrough requires sentiment columns, but the dataset resolved a text column",
                ));
            }
            let path = cfg.lexicon_path.as_ref().ok_or_else(|| {
                Error::config("scoring text needs --lexicon PATH")
            })?;
            let lexicon = Lexicon::from_path(path)
                .map_err(|e| Error::config(format!("cannot load lexicon: {e}")))?;
            Ok(Provider::Lexicon(lexicon))
        }
        Some(false) => {
            if wanted == Some(SentimentProvider::Lexicon) {
                return Err(Error::config(
                    "provider lexicon requires a text column, but the dataset resolved sentiment columns",
                ));
            }
            Ok(Provider::Passthrough)
        }
    }
}

// ---------------------------------------------------------------------------
// features stage
// ---------------------------------------------------------------------------

struct FeaturesOutcome {
    report: StageReport,
    flag_frequencies: FlagFrequencies,
    load: LoadSummary,
}

fn stage_features(cfg: &RunConfig, outputs: &mut OutputTracker) -> Result<FeaturesOutcome> {
    let start = Instant::now();
    let (records, load) = load_dataset(&cfg.dataset)?;
    let provider = resolve_provider(cfg, &records)?;
    let threads = effective_threads(cfg)?;
    let feature_cfg = cfg.features;

    let feature_records: Vec<FeatureRecord> = with_pool(threads, || {
        records
            .par_iter()
            .map(|rec| {
                let triple = match &provider {
                    Provider::Lexicon(lexicon) => {
                        score_text(rec.text.as_deref().unwrap_or(""), lexicon)
                    }
                    Provider::Passthrough => passthrough(rec)
                        .map_err(|e| Error::internal(format!("record {}: {e}", rec.id)))?,
                };
                features::compute(rec.id.clone(), triple, &feature_cfg)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut flag_frequencies = FlagFrequencies::default();
    for rec in &feature_records {
        flag_frequencies.add(&rec.flags);
    }

    write_features_csv(cfg, &feature_records, outputs)?;
    write_simplex_scatter(cfg, &records, &feature_records, outputs)?;

    Ok(FeaturesOutcome {
        report: StageReport {
            stage: "features".into(),
            rows_in: load.rows,
            rows_out: feature_records.len() as u64,
            skipped: load.skipped_count(),
            wall_ms: start.elapsed().as_millis(),
        },
        flag_frequencies,
        load,
    })
}

fn write_features_csv(
    cfg: &RunConfig,
    records: &[FeatureRecord],
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(FEATURES_FILE));
    let mut file = fs::File::create(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    // stage parameters echoed for reproducibility; readers skip '#' lines
    writeln!(
        file,
        "# epsilon={}\n# angle_mode={}",
        fmt_f64(cfg.features.epsilon),
        cfg.features.angle_mode
    )
    .map_err(|e| Error::data(&path, e.to_string()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(FEATURES_COLUMNS)
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for r in records {
        w.write_record([
            r.id.clone(),
            fmt_f64(r.triple.pos()),
            fmt_f64(r.triple.neu()),
            fmt_f64(r.triple.neg()),
            fmt_f64(r.sides.a),
            fmt_f64(r.sides.b),
            fmt_f64(r.sides.c),
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            fmt_f64(r.gamma),
            fmt_f64(r.omega),
            r.flags.encode(),
        ])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

fn write_simplex_scatter(
    cfg: &RunConfig,
    records: &[ReviewRecord],
    features: &[FeatureRecord],
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(PLOTDATA_DIR).join("simplex_scatter.csv"));
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    w.write_record(["id", "pos", "neg", "rating"])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for (rec, feat) in records.iter().zip(features) {
        w.write_record([
            rec.id.clone(),
            fmt_f64(feat.triple.pos()),
            fmt_f64(feat.triple.neg()),
            rec.rating.map(|r| r.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

/// Parses a features CSV back into records, validating the schema with
/// column-level diagnostics.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRecord>> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::config(format!("features file {} does not exist", path.display()))
        } else {
            Error::data(path, format!("cannot open: {e}"))
        }
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(std::io::BufReader::new(file));
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    validate_columns(path, &headers, &FEATURES_COLUMNS)?;
    let col = |name: &str| headers.iter().position(|h| h == name).expect("validated");
    let idx = FEATURES_COLUMNS.map(col);

    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let record = result.map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let cell = |i: usize| -> Result<&str> {
            record
                .get(idx[i])
                .ok_or_else(|| Error::data(path, format!("row {row}: missing field {:?}", FEATURES_COLUMNS[i])))
        };
        let num = |i: usize| -> Result<f64> { parse_f64(path, row, FEATURES_COLUMNS[i], cell(i)?) };
        let triple = SentimentTriple::new(num(1)?, num(2)?, num(3)?)
            .map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let flags = FeatureFlags::decode(cell(11)?)
            .map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        out.push(FeatureRecord {
            id: cell(0)?.to_string(),
            triple,
            sides: SideLengths {
                a: num(4)?,
                b: num(5)?,
                c: num(6)?,
            },
            alpha: num(7)?,
            beta: num(8)?,
            gamma: num(9)?,
            omega: num(10)?,
            flags,
        });
    }
    Ok(out)
}

fn validate_columns(path: &Path, actual: &[String], expected: &[&str]) -> Result<()> {
    let missing: Vec<&str> = expected
        .iter()
        .filter(|c| !actual.iter().any(|a| a == *c))
        .copied()
        .collect();
    let extra: Vec<&String> = actual
        .iter()
        .filter(|a| !expected.contains(&a.as_str()))
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    let mut parts = Vec::new();
    for m in &missing {
        parts.push(format!("missing column {m:?}"));
    }
    for e in &extra {
        parts.push(format!("unexpected column {e:?}"));
    }
    Err(Error::schema(path, parts.join("; ")))
}

// ---------------------------------------------------------------------------
// cluster stage
// ---------------------------------------------------------------------------

struct ClusterOutcome {
    report: StageReport,
    warning: Option<String>,
}

fn stage_cluster(
    cfg: &RunConfig,
    features_path: &Path,
    outputs: &mut OutputTracker,
) -> Result<ClusterOutcome> {
    let start = Instant::now();
    let features = read_features_csv(features_path)?;
    let vectors: Vec<_> = features.iter().map(FeatureRecord::vector).collect();
    let threads = effective_threads(cfg)?;
    let assignments = with_pool(threads, || dbscan(&vectors, &cfg.dbscan))??;
    let labels = label_polarity(&assignments, &features, &cfg.polarity);

    let rows: Vec<ClusterAssignment> = features
        .iter()
        .zip(&assignments)
        .map(|(f, a)| ClusterAssignment {
            id: f.id.clone(),
            cluster: a.cluster,
            role: a.role,
            polarity: labels.for_assignment(a),
        })
        .collect();

    write_clusters_csv(cfg, &rows, outputs)?;
    write_feature_scatter(cfg, &features, &assignments, outputs)?;
    write_simplex_clusters(cfg, &features, &rows, outputs)?;

    Ok(ClusterOutcome {
        report: StageReport {
            stage: "cluster".into(),
            rows_in: features.len() as u64,
            rows_out: rows.len() as u64,
            skipped: 0,
            wall_ms: start.elapsed().as_millis(),
        },
        warning: labels.warning,
    })
}

fn cluster_id_str(cluster: Option<usize>) -> String {
    match cluster {
        Some(k) => k.to_string(),
        None => "-1".to_string(),
    }
}

fn write_clusters_csv(
    cfg: &RunConfig,
    rows: &[ClusterAssignment],
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(CLUSTERS_FILE));
    let mut file = fs::File::create(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    writeln!(
        file,
        "# eps={}\n# min_pts={}\n# scaling={}\n# polarity_mass_threshold={}",
        fmt_f64(cfg.dbscan.eps),
        cfg.dbscan.min_pts,
        cfg.dbscan.scaling,
        fmt_f64(cfg.polarity.mass_threshold),
    )
    .map_err(|e| Error::data(&path, e.to_string()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CLUSTERS_COLUMNS)
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            cluster_id_str(r.cluster),
            r.role.to_string(),
            r.polarity.to_string(),
        ])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

fn write_feature_scatter(
    cfg: &RunConfig,
    features: &[FeatureRecord],
    assignments: &[Assignment],
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(PLOTDATA_DIR).join("feature_scatter.csv"));
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    w.write_record(["id", "a", "c", "omega", "cluster_id"])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for (f, a) in features.iter().zip(assignments) {
        w.write_record([
            f.id.clone(),
            fmt_f64(f.sides.a),
            fmt_f64(f.sides.c),
            fmt_f64(f.omega),
            cluster_id_str(a.cluster),
        ])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

fn write_simplex_clusters(
    cfg: &RunConfig,
    features: &[FeatureRecord],
    rows: &[ClusterAssignment],
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(PLOTDATA_DIR).join("simplex_clusters.csv"));
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    w.write_record(["id", "pos", "neg", "cluster_id", "polarity"])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for (f, r) in features.iter().zip(rows) {
        w.write_record([
            f.id.clone(),
            fmt_f64(f.triple.pos()),
            fmt_f64(f.triple.neg()),
            cluster_id_str(r.cluster),
            r.polarity.to_string(),
        ])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

/// Parses a clusters CSV back into assignment rows, validating the schema
/// and the role/cluster-id consistency invariant.
pub fn read_clusters_csv(path: &Path) -> Result<Vec<ClusterAssignment>> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::config(format!("clusters file {} does not exist", path.display()))
        } else {
            Error::data(path, format!("cannot open: {e}"))
        }
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(std::io::BufReader::new(file));
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    validate_columns(path, &headers, &CLUSTERS_COLUMNS)?;
    let col = |name: &str| headers.iter().position(|h| h == name).expect("validated");
    let idx = CLUSTERS_COLUMNS.map(col);

    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let record = result.map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let cell = |i: usize| -> Result<&str> {
            record.get(idx[i]).ok_or_else(|| {
                Error::data(path, format!("row {row}: missing field {:?}", CLUSTERS_COLUMNS[i]))
            })
        };
        let cluster = match cell(1)? {
            "-1" => None,
            raw => Some(raw.parse::<usize>().map_err(|_| {
                Error::data(path, format!("row {row}: bad cluster_id {raw:?}"))
            })?),
        };
        let role: PointRole = cell(2)?
            .parse()
            .map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let polarity: Polarity = cell(3)?
            .parse()
            .map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        if (role == PointRole::Noise) != cluster.is_none() {
            return Err(Error::data(
                path,
                format!("row {row}: role {role} inconsistent with cluster_id {}", cluster_id_str(cluster)),
            ));
        }
        out.push(ClusterAssignment {
            id: cell(0)?.to_string(),
            cluster,
            role,
            polarity,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// inference stage
// ---------------------------------------------------------------------------

struct InferOutcome {
    report: StageReport,
    warnings: Vec<String>,
}

/// Posterior document written per cluster.
#[derive(Serialize)]
struct ClusterPosteriorDoc<'a> {
    cluster: usize,
    polarity: Polarity,
    rating_scale: u32,
    posterior_mean: Vec<f64>,
    #[serde(flatten)]
    posterior: &'a RatingPosterior,
}

fn stage_infer(
    cfg: &RunConfig,
    clusters_path: &Path,
    outputs: &mut OutputTracker,
) -> Result<InferOutcome> {
    let start = Instant::now();
    let rows = read_clusters_csv(clusters_path)?;
    let (records, _) = load_dataset(&cfg.dataset)?;
    let ratings_by_id: HashMap<&str, Option<u32>> =
        records.iter().map(|r| (r.id.as_str(), r.rating)).collect();

    let mut ratings = Vec::with_capacity(rows.len());
    for r in &rows {
        let rating = ratings_by_id.get(r.id.as_str()).ok_or_else(|| {
            Error::data(
                clusters_path,
                format!("cluster row id {:?} not present in the dataset", r.id),
            )
        })?;
        ratings.push(*rating);
    }

    let n_clusters = rows.iter().filter_map(|r| r.cluster).max().map_or(0, |m| m + 1);
    let mut per_cluster = vec![Polarity::Unlabeled; n_clusters];
    for r in &rows {
        if let Some(k) = r.cluster {
            per_cluster[k] = r.polarity;
        }
    }
    let assignments: Vec<Assignment> = rows
        .iter()
        .map(|r| Assignment {
            cluster: r.cluster,
            role: r.role,
        })
        .collect();
    let labels = PolarityLabels {
        per_cluster: per_cluster.clone(),
        stats: Vec::new(),
        warning: None,
    };

    let mut warnings = Vec::new();
    let scale = cfg.dataset.rating_scale;
    let ratings_available = ratings.iter().any(Option::is_some);

    if ratings_available {
        let prior = crate::inference::uniform_prior(scale as usize);
        for (k, polarity) in per_cluster.iter().enumerate() {
            let member_ratings = rows
                .iter()
                .zip(&ratings)
                .filter(|(r, _)| r.cluster == Some(k))
                .filter_map(|(_, rating)| *rating);
            let counts = RatingCounts::from_ratings(member_ratings, scale)?;
            let mut opts = cfg.inference;
            opts.mcmc.seed = derive_seed(cfg.seed, "mcmc", k as u64);
            let posterior = characterize(&counts, &prior, &opts)?;
            write_posterior(cfg, k, *polarity, scale, &posterior, outputs)?;
            write_samples_csv(cfg, k, &posterior, outputs)?;
            write_posterior_hist(cfg, k, &posterior, outputs)?;
        }
    } else {
        let path = outputs.track(cfg.output_dir.join(UNAVAILABLE_FILE));
        write_json(
            &path,
            &serde_json::json!({
                "available": false,
                "reason": "no ratings in the dataset",
            }),
        )?;
        warnings.push("no ratings available; posterior inference skipped".into());
    }

    let purity = evaluate_against_ratings(&assignments, &labels, &ratings, scale);
    let eval_path = outputs.track(cfg.output_dir.join(EVALUATION_FILE));
    write_json(&eval_path, &purity)?;

    Ok(InferOutcome {
        report: StageReport {
            stage: "infer".into(),
            rows_in: rows.len() as u64,
            rows_out: rows.len() as u64,
            skipped: 0,
            wall_ms: start.elapsed().as_millis(),
        },
        warnings,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::internal(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::data(path, format!("cannot write: {e}")))
}

fn write_posterior(
    cfg: &RunConfig,
    cluster: usize,
    polarity: Polarity,
    rating_scale: u32,
    posterior: &RatingPosterior,
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(format!("posterior_{cluster}.json")));
    let doc = ClusterPosteriorDoc {
        cluster,
        polarity,
        rating_scale,
        posterior_mean: posterior_mean(&posterior.posterior_params),
        posterior,
    };
    write_json(&path, &doc)
}

fn write_samples_csv(
    cfg: &RunConfig,
    cluster: usize,
    posterior: &RatingPosterior,
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(format!("samples_{cluster}.csv")));
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    let header: Vec<String> = (1..=posterior.counts.len())
        .map(|r| format!("theta_{r}"))
        .collect();
    w.write_record(&header)
        .map_err(|e| Error::data(&path, e.to_string()))?;
    for draw in &posterior.samples {
        let row: Vec<String> = draw.iter().map(|&t| fmt_f64(t)).collect();
        w.write_record(&row)
            .map_err(|e| Error::data(&path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

const HIST_BINS: usize = 50;

fn write_posterior_hist(
    cfg: &RunConfig,
    cluster: usize,
    posterior: &RatingPosterior,
    outputs: &mut OutputTracker,
) -> Result<()> {
    let path = outputs.track(
        cfg.output_dir
            .join(PLOTDATA_DIR)
            .join(format!("posterior_hist_{cluster}.csv")),
    );
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::data(&path, format!("cannot create: {e}")))?;
    w.write_record(["rating", "bin_left", "bin_right", "count"])
        .map_err(|e| Error::data(&path, e.to_string()))?;
    let k = posterior.counts.len();
    for rating in 0..k {
        let mut bins = [0u64; HIST_BINS];
        for draw in &posterior.samples {
            let b = ((draw[rating] * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
            bins[b] += 1;
        }
        for (b, count) in bins.iter().enumerate() {
            w.write_record([
                (rating + 1).to_string(),
                fmt_f64(b as f64 / HIST_BINS as f64),
                fmt_f64((b + 1) as f64 / HIST_BINS as f64),
                count.to_string(),
            ])
            .map_err(|e| Error::data(&path, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::data(&path, e.to_string()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// entry points
// ---------------------------------------------------------------------------

fn prepare_dirs(cfg: &RunConfig, plotdata: bool) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::config(format!("cannot create output dir: {e}")))?;
    if plotdata {
        fs::create_dir_all(cfg.output_dir.join(PLOTDATA_DIR))
            .map_err(|e| Error::config(format!("cannot create plotdata dir: {e}")))?;
    }
    Ok(())
}

fn write_manifest(cfg: &RunConfig, manifest: &RunManifest, outputs: &mut OutputTracker) -> Result<()> {
    let path = outputs.track(cfg.output_dir.join(MANIFEST_FILE));
    write_json(&path, manifest)
}

/// Runs the full pipeline: features, cluster and inference stages composed
/// through their files, plus the manifest. On failure every file created
/// by this run is removed.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    prepare_dirs(cfg, true)?;
    let mut outputs = OutputTracker::default();
    let result = (|| {
        let mut manifest = RunManifest::new(cfg);
        let features = stage_features(cfg, &mut outputs).map_err(|e| tag_stage("features", e))?;
        manifest.stages.push(features.report);
        manifest.flag_frequencies = Some(features.flag_frequencies);
        manifest.skipped_rows = features.load.skipped;

        let cluster = stage_cluster(cfg, &cfg.output_dir.join(FEATURES_FILE), &mut outputs)
            .map_err(|e| tag_stage("cluster", e))?;
        manifest.stages.push(cluster.report);
        manifest.warnings.extend(cluster.warning);

        let infer = stage_infer(cfg, &cfg.output_dir.join(CLUSTERS_FILE), &mut outputs)
            .map_err(|e| tag_stage("infer", e))?;
        manifest.stages.push(infer.report);
        manifest.warnings.extend(infer.warnings);

        write_manifest(cfg, &manifest, &mut outputs)?;
        Ok(manifest)
    })();
    if result.is_err() {
        outputs.cleanup();
    }
    result
}

/// Runs only the features stage (dataset -> features.csv).
pub fn run_features(cfg: &RunConfig) -> Result<RunManifest> {
    prepare_dirs(cfg, true)?;
    let mut outputs = OutputTracker::default();
    let result = (|| {
        let mut manifest = RunManifest::new(cfg);
        let features = stage_features(cfg, &mut outputs).map_err(|e| tag_stage("features", e))?;
        manifest.stages.push(features.report);
        manifest.flag_frequencies = Some(features.flag_frequencies);
        manifest.skipped_rows = features.load.skipped;
        write_manifest(cfg, &manifest, &mut outputs)?;
        Ok(manifest)
    })();
    if result.is_err() {
        outputs.cleanup();
    }
    result
}

/// Runs only the cluster stage on an existing features CSV.
pub fn run_cluster(cfg: &RunConfig, features_path: &Path) -> Result<RunManifest> {
    prepare_dirs(cfg, true)?;
    let mut outputs = OutputTracker::default();
    let result = (|| {
        let mut manifest = RunManifest::new(cfg);
        let cluster = stage_cluster(cfg, features_path, &mut outputs)
            .map_err(|e| tag_stage("cluster", e))?;
        manifest.stages.push(cluster.report);
        manifest.warnings.extend(cluster.warning);
        write_manifest(cfg, &manifest, &mut outputs)?;
        Ok(manifest)
    })();
    if result.is_err() {
        outputs.cleanup();
    }
    result
}

/// Runs only the inference stage on an existing clusters CSV, reading
/// ratings from the dataset.
pub fn run_infer(cfg: &RunConfig, clusters_path: &Path) -> Result<RunManifest> {
    prepare_dirs(cfg, true)?;
    let mut outputs = OutputTracker::default();
    let result = (|| {
        let mut manifest = RunManifest::new(cfg);
        let infer = stage_infer(cfg, clusters_path, &mut outputs)
            .map_err(|e| tag_stage("infer", e))?;
        manifest.stages.push(infer.report);
        manifest.warnings.extend(infer.warnings);
        write_manifest(cfg, &manifest, &mut outputs)?;
        Ok(manifest)
    })();
    if result.is_err() {
        outputs.cleanup();
    }
    result
}
