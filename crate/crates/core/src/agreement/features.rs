//! User-context vectors, time-ordered splits, standardization and the
//! per-instance feature bundles fed to the agreement classifier.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::{SparseVec, TfidfVectorizer};
use crate::corpus::{AgreementInstance, Label};
use crate::error::{Error, Result};
use crate::extraction::{preprocess, ValueLexicon};
use crate::profiles::{normalize, ValueProfile};
use crate::value_model::NUM_VALUES;

pub const NOISE_DIM: usize = 768;
pub const USER_FEATURE_DIM: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Noise,
    Centroid,
    UserFeatures,
    ValueProfile,
}

impl ContextKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextKind::Noise => "noise",
            ContextKind::Centroid => "centroid",
            ContextKind::UserFeatures => "user_features",
            ContextKind::ValueProfile => "value_profile",
        }
    }

    /// Short symbol used in result tables.
    pub fn symbol(self) -> &'static str {
        match self {
            ContextKind::Noise => "eps",
            ContextKind::Centroid => "z",
            ContextKind::UserFeatures => "u",
            ContextKind::ValueProfile => "v",
        }
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "noise" | "eps" | "epsilon" => Ok(ContextKind::Noise),
            "centroid" | "z" => Ok(ContextKind::Centroid),
            "user_features" | "u" => Ok(ContextKind::UserFeatures),
            "value_profile" | "v" => Ok(ContextKind::ValueProfile),
            other => Err(Error::InvalidParameter(format!("unknown context kind {other:?}"))),
        }
    }
}

/// Account-level features of a forum user. Booleans are 0/1 and the creation
/// date is seconds since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserFeatures {
    pub comment_karma: f64,
    pub link_karma: f64,
    pub date_created: f64,
    pub gold_status: f64,
    pub mod_status: f64,
    pub employee_status: f64,
    pub num_gilded: f64,
    pub num_comments: f64,
    pub num_links: f64,
}

impl UserFeatures {
    pub const COLUMNS: [&'static str; USER_FEATURE_DIM] = [
        "comment_karma",
        "link_karma",
        "date_created",
        "gold_status",
        "mod_status",
        "employee_status",
        "num_gilded",
        "num_comments",
        "num_links",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.comment_karma,
            self.link_karma,
            self.date_created,
            self.gold_status,
            self.mod_status,
            self.employee_status,
            self.num_gilded,
            self.num_comments,
            self.num_links,
        ]
    }
}

/// Reads `user,<nine feature columns>`; booleans may be written as
/// `true`/`false` or `0`/`1`.
pub fn read_user_features<R: Read>(reader: R) -> Result<BTreeMap<String, UserFeatures>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidInput(format!("user feature file missing column {name:?}")))
    };
    let user_col = col("user")?;
    let cols: Vec<usize> = UserFeatures::COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = [0.0; USER_FEATURE_DIM];
        for (k, &c) in cols.iter().enumerate() {
            let raw = rec[c].trim();
            vals[k] = match raw.to_ascii_lowercase().as_str() {
                "true" => 1.0,
                "false" => 0.0,
                s => s.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!(
                        "user features line {}: bad {} {raw:?}",
                        i + 2,
                        UserFeatures::COLUMNS[k]
                    ))
                })?,
            };
        }
        let f = UserFeatures {
            comment_karma: vals[0],
            link_karma: vals[1],
            date_created: vals[2],
            gold_status: vals[3],
            mod_status: vals[4],
            employee_status: vals[5],
            num_gilded: vals[6],
            num_comments: vals[7],
            num_links: vals[8],
        };
        out.insert(rec[user_col].to_string(), f);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub vector: Vec<f64>,
    pub posts_used: usize,
    /// No post contained a lexicon term; the vector is zero.
    pub empty: bool,
}

/// Mean TF-IDF vector over a user's posts that contain at least one lexicon term.
pub fn user_centroid<S: AsRef<str>>(posts: &[S], lex: &ValueLexicon, vectorizer: &TfidfVectorizer) -> Centroid {
    let mut acc = vec![0.0; vectorizer.dim()];
    let mut used = 0;
    for post in posts {
        let tokens = preprocess(post.as_ref());
        if !lex.matches_any(&tokens) {
            continue;
        }
        for (i, x) in vectorizer.transform_tokens(&tokens) {
            acc[i] += x;
        }
        used += 1;
    }
    if used > 0 {
        for x in &mut acc {
            *x /= used as f64;
        }
    }
    Centroid { vector: acc, posts_used: used, empty: used == 0 }
}

/// Everything a context kind may need.
#[derive(Default)]
pub struct ContextSources<'a> {
    pub profiles: Option<&'a BTreeMap<String, ValueProfile>>,
    pub user_features: Option<&'a BTreeMap<String, UserFeatures>>,
    pub user_posts: Option<&'a BTreeMap<String, Vec<String>>>,
    pub lexicon: Option<&'a ValueLexicon>,
    pub centroid_vectorizer: Option<&'a TfidfVectorizer>,
}

/// 64-bit FNV-1a, used to derive a stable per-user noise seed.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform `[0, 1)` noise of dimension `dim`, reproducible for a (seed, user) pair.
pub fn noise_vector(seed: u64, user: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(user));
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Raw (unstandardized) context vector for a user; `None` when the inputs for
/// this kind have no entry for the user.
pub fn make_context(
    kind: ContextKind,
    user: &str,
    sources: &ContextSources<'_>,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    let missing = |what: &str| Error::InvalidInput(format!("context {kind} needs {what}"));
    Ok(match kind {
        ContextKind::Noise => Some(noise_vector(seed, user, NOISE_DIM)),
        ContextKind::UserFeatures => {
            sources.user_features.ok_or_else(|| missing("user features"))?.get(user).map(UserFeatures::to_vec)
        }
        ContextKind::ValueProfile => {
            let profiles = sources.profiles.ok_or_else(|| missing("profiles"))?;
            match profiles.get(user) {
                Some(p) if p.counts.is_some() => normalize(p).ok().map(|n| n.scores.to_vec()),
                Some(p) => Some(p.scores.to_vec()),
                None => None,
            }
        }
        ContextKind::Centroid => {
            let posts = sources.user_posts.ok_or_else(|| missing("user posts"))?;
            let lex = sources.lexicon.ok_or_else(|| missing("a lexicon"))?;
            let vec = sources.centroid_vectorizer.ok_or_else(|| missing("a fitted centroid vectorizer"))?;
            posts.get(user).map(|p| user_centroid(p, lex, vec).vector)
        }
    })
}

pub fn context_dim(kind: ContextKind, centroid_dim: usize) -> usize {
    match kind {
        ContextKind::Noise => NOISE_DIM,
        ContextKind::Centroid => centroid_dim,
        ContextKind::UserFeatures => USER_FEATURE_DIM,
        ContextKind::ValueProfile => NUM_VALUES,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Indices into the input, per split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Orders by (timestamp, id) and cuts the oldest 80% for training, then 10%
/// validation and the most recent 10% for testing.
pub fn time_split(instances: &[AgreementInstance]) -> SplitIndices {
    time_split_ratios(instances, 0.8, 0.1)
}

pub fn time_split_ratios(instances: &[AgreementInstance], train: f64, val: f64) -> SplitIndices {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&instances[a], &instances[b]);
        x.timestamp.cmp(&y.timestamp).then_with(|| x.id.cmp(&y.id)).then(a.cmp(&b))
    });
    let n = order.len();
    let n_train = (train * n as f64).round() as usize;
    let n_val = ((val * n as f64).round() as usize).min(n - n_train);
    SplitIndices {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    }
}

/// Per-feature mean and population standard deviation from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidInput("cannot standardize with no training rows".into()));
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Standardizer { mean, std })
    }

    /// Features whose training variance is zero; they map to 0.
    pub fn constant_features(&self) -> Vec<usize> {
        self.std.iter().enumerate().filter(|(_, &s)| s <= 1e-12).map(|(i, _)| i).collect()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 1e-12 { (x - m) / s } else { 0.0 })
            .collect()
    }
}

/// One agreement instance ready for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub id: String,
    pub label: Label,
    pub split: Split,
    pub timestamp: i64,
    #[serde(with = "sparse_map")]
    pub text_parent: SparseVec,
    #[serde(with = "sparse_map")]
    pub text_child: SparseVec,
    pub context_parent: Vec<f64>,
    pub context_child: Vec<f64>,
}

mod sparse_map {
    use super::SparseVec;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(v: &SparseVec, s: S) -> Result<S::Ok, S::Error> {
        // emitted in index order; a string-keyed BTreeMap would put "10" before "2"
        let mut map = s.serialize_map(Some(v.len()))?;
        for &(i, x) in v {
            map.serialize_entry(&i.to_string(), &x)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SparseVec, D::Error> {
        let m: BTreeMap<String, f64> = BTreeMap::deserialize(d)?;
        let mut v: SparseVec = m
            .into_iter()
            .map(|(k, x)| k.parse::<usize>().map(|i| (i, x)).map_err(serde::de::Error::custom))
            .collect::<Result<_, _>>()?;
        v.sort_by_key(|&(i, _)| i);
        Ok(v)
    }
}

/// Metadata describing a bundle file, written as its first JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub kind: Option<ContextKind>,
    pub text_dim: usize,
    pub context_dim: usize,
    pub seed: u64,
    pub constant_context_features: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BundleReport {
    pub input: usize,
    pub dropped_missing_user: usize,
    pub empty_centroids: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone)]
pub struct BundleConfig {
    pub kind: Option<ContextKind>,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig { kind: None, vocab_size: super::tfidf::DEFAULT_VOCAB, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct BundleSet {
    pub header: BundleHeader,
    pub bundles: Vec<FeatureBundle>,
    pub report: BundleReport,
}

/// Builds bundles: drops instances lacking context data for either user,
/// splits by time, fits TF-IDF on training texts, and standardizes context
/// vectors with training statistics (parent and child blocks separately).
pub fn build_bundles(
    instances: &[AgreementInstance],
    sources: &ContextSources<'_>,
    cfg: &BundleConfig,
) -> Result<BundleSet> {
    let mut report = BundleReport { input: instances.len(), ..Default::default() };
    let mut kept: Vec<&AgreementInstance> = Vec::with_capacity(instances.len());
    let mut contexts: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(instances.len());
    let mut cache: HashMap<String, Option<Vec<f64>>> = HashMap::new();
    for inst in instances {
        let (p, c) = match cfg.kind {
            None => (Some(Vec::new()), Some(Vec::new())),
            Some(kind) => {
                let mut ctx = |u: &str| -> Result<Option<Vec<f64>>> {
                    if let Some(hit) = cache.get(u) {
                        return Ok(hit.clone());
                    }
                    let v = make_context(kind, u, sources, cfg.seed)?;
                    cache.insert(u.to_string(), v.clone());
                    Ok(v)
                };
                (ctx(&inst.parent_author)?, ctx(&inst.child_author)?)
            }
        };
        match (p, c) {
            (Some(p), Some(c)) => {
                kept.push(inst);
                contexts.push((p, c));
            }
            _ => report.dropped_missing_user += 1,
        }
    }
    if cfg.kind == Some(ContextKind::Centroid) {
        report.empty_centroids = cache.values().flatten().filter(|v| v.iter().all(|&x| x == 0.0)).count();
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput("no agreement instances left after dropping missing users".into()));
    }

    let owned: Vec<AgreementInstance> = kept.iter().map(|i| (*i).clone()).collect();
    let split = time_split(&owned);
    report.train = split.train.len();
    report.val = split.val.len();
    report.test = split.test.len();
    if split.train.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }

    let train_texts: Vec<&str> =
        split.train.iter().flat_map(|&i| [owned[i].parent_text.as_str(), owned[i].child_text.as_str()]).collect();
    let vectorizer = TfidfVectorizer::fit(&train_texts, cfg.vocab_size)?;

    let parent_rows: Vec<&[f64]> = split.train.iter().map(|&i| contexts[i].0.as_slice()).collect();
    let child_rows: Vec<&[f64]> = split.train.iter().map(|&i| contexts[i].1.as_slice()).collect();
    let std_parent = Standardizer::fit(&parent_rows)?;
    let std_child = Standardizer::fit(&child_rows)?;

    let mut which = vec![Split::Train; owned.len()];
    for &i in &split.val {
        which[i] = Split::Val;
    }
    for &i in &split.test {
        which[i] = Split::Test;
    }
    let mut bundles = Vec::with_capacity(owned.len());
    for &i in split.train.iter().chain(&split.val).chain(&split.test) {
        let inst = &owned[i];
        bundles.push(FeatureBundle {
            id: inst.id.clone(),
            label: inst.label,
            split: which[i],
            timestamp: inst.timestamp,
            text_parent: vectorizer.transform(&inst.parent_text),
            text_child: vectorizer.transform(&inst.child_text),
            context_parent: std_parent.apply(&contexts[i].0),
            context_child: std_child.apply(&contexts[i].1),
        });
    }
    let header = BundleHeader {
        kind: cfg.kind,
        text_dim: vectorizer.dim(),
        context_dim: contexts[0].0.len(),
        seed: cfg.seed,
        constant_context_features: std_parent.constant_features().len() + std_child.constant_features().len(),
    };
    Ok(BundleSet { header, bundles, report })
}

pub fn write_bundles<W: Write>(mut out: W, set: &BundleSet) -> Result<()> {
    let io = |e| Error::io("<bundles>", e);
    serde_json::to_writer(&mut out, &set.header)?;
    out.write_all(b"\n").map_err(io)?;
    for b in &set.bundles {
        serde_json::to_writer(&mut out, b)?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn read_bundles<R: BufRead>(reader: R) -> Result<(BundleHeader, Vec<FeatureBundle>)> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("bundle file is empty".into()))?
        .map_err(|e| Error::io("<bundles>", e))?;
    let header: BundleHeader = serde_json::from_str(&header_line)?;
    let mut bundles = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("<bundles>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        bundles.push(serde_json::from_str(&line)?);
    }
    Ok((header, bundles))
}
