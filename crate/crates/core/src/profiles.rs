//! Per-user value profiles: aggregation of per-comment labels, the mention
//! threshold, normalization, and self-reported survey profiles.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::extraction::{ValueLabels, ValueLexicon};
use crate::value_model::{ValueId, NUM_VALUES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    Vpe,
    Survey,
}

impl ProfileSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileSource::Vpe => "vpe",
            ProfileSource::Survey => "survey",
        }
    }
}

/// A user's value profile. `scores` always holds the numeric vector used by
/// the similarity metrics; for a raw estimated profile it equals the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProfile {
    pub user: String,
    pub source: ProfileSource,
    pub total_mentions: u64,
    pub counts: Option<[u64; NUM_VALUES]>,
    pub scores: [f64; NUM_VALUES],
    /// Survey profile whose centered scores were all zero.
    #[serde(default)]
    pub degenerate: bool,
}

impl ValueProfile {
    pub fn from_counts(user: impl Into<String>, counts: [u64; NUM_VALUES]) -> Self {
        let mut scores = [0.0; NUM_VALUES];
        for (s, &c) in scores.iter_mut().zip(&counts) {
            *s = c as f64;
        }
        ValueProfile {
            user: user.into(),
            source: ProfileSource::Vpe,
            total_mentions: counts.iter().sum(),
            counts: Some(counts),
            scores,
            degenerate: false,
        }
    }

    pub fn from_scores(user: impl Into<String>, source: ProfileSource, scores: [f64; NUM_VALUES]) -> Self {
        ValueProfile { user: user.into(), source, total_mentions: 0, counts: None, scores, degenerate: false }
    }

    pub fn is_raw(&self) -> bool {
        self.counts.is_some() && self.source == ProfileSource::Vpe
    }

    pub fn score(&self, v: ValueId) -> f64 {
        self.scores[v.position()]
    }
}

/// Labels whose comment id has no known author.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AggregateReport {
    pub unknown_comments: Vec<String>,
}

/// Sums per-comment value labels into raw profiles.
///
/// `counts[v]` is the number of the user's comments with `v` relevant and
/// `total_mentions` is the sum of counts. Every author in `authorship`
/// appears in the output, possibly with an all-zero profile.
pub fn aggregate_profiles<'a>(
    labels: impl IntoIterator<Item = &'a ValueLabels>,
    authorship: &HashMap<String, String>,
) -> (BTreeMap<String, ValueProfile>, AggregateReport) {
    let mut counts: BTreeMap<&str, [u64; NUM_VALUES]> = BTreeMap::new();
    for user in authorship.values() {
        counts.entry(user.as_str()).or_insert([0; NUM_VALUES]);
    }
    let mut report = AggregateReport::default();
    for label in labels {
        let Some(user) = authorship.get(&label.comment_id) else {
            report.unknown_comments.push(label.comment_id.clone());
            continue;
        };
        let row = counts.entry(user.as_str()).or_insert([0; NUM_VALUES]);
        for v in label.relevant.iter() {
            row[v.position()] += 1;
        }
    }
    let profiles = counts.into_iter().map(|(user, c)| (user.to_string(), ValueProfile::from_counts(user, c))).collect();
    (profiles, report)
}

/// Keeps users with at least `l` total value mentions.
pub fn threshold_filter(profiles: &BTreeMap<String, ValueProfile>, l: u64) -> BTreeMap<String, ValueProfile> {
    profiles.iter().filter(|(_, p)| p.total_mentions >= l).map(|(k, p)| (k.clone(), p.clone())).collect()
}

/// Relative mention frequencies; fails on an all-zero profile.
pub fn normalize(profile: &ValueProfile) -> Result<ValueProfile> {
    let counts =
        profile.counts.ok_or_else(|| Error::InvalidInput(format!("profile {} has no raw counts", profile.user)))?;
    if profile.total_mentions == 0 {
        return Err(Error::EmptyProfile);
    }
    let total = profile.total_mentions as f64;
    let mut scores = [0.0; NUM_VALUES];
    for (s, &c) in scores.iter_mut().zip(&counts) {
        *s = c as f64 / total;
    }
    Ok(ValueProfile { scores, ..profile.clone() })
}

/// Dictionary-route profile: each count scaled by the value's lexicon weight,
/// then normalized to sum to one.
pub fn weighted_dictionary_profile(profile: &ValueProfile, lex: &ValueLexicon) -> Result<ValueProfile> {
    let counts =
        profile.counts.ok_or_else(|| Error::InvalidInput(format!("profile {} has no raw counts", profile.user)))?;
    let mut z = [0.0; NUM_VALUES];
    for v in ValueId::ALL {
        z[v.position()] = counts[v.position()] as f64 * lex.weight(v);
    }
    let total: f64 = z.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyProfile);
    }
    for x in &mut z {
        *x /= total;
    }
    Ok(ValueProfile { scores: z, ..profile.clone() })
}

pub const PVQ_ITEMS: usize = 21;

/// Item-to-value key for the 21-item questionnaire. Item indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PvqKey {
    items: [ValueId; PVQ_ITEMS],
}

impl PvqKey {
    /// The published key: two items per value, three for universalism.
    pub fn official() -> Self {
        use ValueId::*;
        PvqKey {
            items: [
                SelfDirection, // 1
                Power,         // 2
                Universalism,  // 3
                Achievement,   // 4
                Security,      // 5
                Stimulation,   // 6
                Conformity,    // 7
                Universalism,  // 8
                Tradition,     // 9
                Hedonism,      // 10
                SelfDirection, // 11
                Benevolence,   // 12
                Achievement,   // 13
                Security,      // 14
                Stimulation,   // 15
                Conformity,    // 16
                Power,         // 17
                Benevolence,   // 18
                Universalism,  // 19
                Tradition,     // 20
                Hedonism,      // 21
            ],
        }
    }

    /// Every value must own at least one item.
    pub fn new(items: [ValueId; PVQ_ITEMS]) -> Result<Self> {
        let key = PvqKey { items };
        for v in ValueId::ALL {
            if key.items_for(v).is_empty() {
                return Err(Error::InvalidInput(format!("PVQ key assigns no item to {v}")));
            }
        }
        Ok(key)
    }

    pub fn value_of(&self, item: usize) -> Option<ValueId> {
        item.checked_sub(1).and_then(|i| self.items.get(i)).copied()
    }

    /// 1-based item indices for a value.
    pub fn items_for(&self, v: ValueId) -> Vec<usize> {
        self.items.iter().enumerate().filter(|(_, &x)| x == v).map(|(i, _)| i + 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionCheck {
    pub item_index: u32,
    pub required: u8,
    pub answered: u8,
}

impl AttentionCheck {
    pub fn passed(&self) -> bool {
        self.required == self.answered
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvqResponse {
    pub respondent: String,
    pub items: [u8; PVQ_ITEMS],
    pub attention: [AttentionCheck; 2],
}

impl PvqResponse {
    pub fn validate(&self) -> Result<()> {
        if let Some((i, s)) = self.items.iter().enumerate().find(|(_, &s)| !(1..=6).contains(&s)) {
            return Err(Error::InvalidInput(format!(
                "respondent {}: item {} score {s} outside 1..=6",
                self.respondent,
                i + 1
            )));
        }
        Ok(())
    }

    pub fn passed_attention(&self) -> bool {
        self.attention.iter().all(AttentionCheck::passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PvqOutcome {
    Scored(ValueProfile),
    /// Failed an attention check; the respondent is excluded.
    Rejected {
        respondent: String,
        failed_item: u32,
    },
}

/// Scores one questionnaire response.
///
/// Items are centered on the respondent's mean rating over all 21 items, the
/// centered items are averaged per value, and the ten value scores are divided
/// by their L1 norm. A response whose value scores are all zero is returned
/// unscaled with `degenerate` set.
pub fn score_pvq(resp: &PvqResponse, key: &PvqKey) -> Result<PvqOutcome> {
    resp.validate()?;
    if let Some(check) = resp.attention.iter().find(|c| !c.passed()) {
        return Ok(PvqOutcome::Rejected { respondent: resp.respondent.clone(), failed_item: check.item_index });
    }
    let centered = centered_items(resp);
    let mut scores = [0.0; NUM_VALUES];
    for v in ValueId::ALL {
        let items = key.items_for(v);
        scores[v.position()] = items.iter().map(|&i| centered[i - 1]).sum::<f64>() / items.len() as f64;
    }
    let l1: f64 = scores.iter().map(|s| s.abs()).sum();
    let mut profile = ValueProfile::from_scores(resp.respondent.clone(), ProfileSource::Survey, scores);
    if l1 < 1e-12 {
        profile.scores = [0.0; NUM_VALUES];
        profile.degenerate = true;
    } else {
        for s in &mut profile.scores {
            *s /= l1;
        }
    }
    Ok(PvqOutcome::Scored(profile))
}

/// Item scores minus the respondent's mean rating (MRAT).
pub fn centered_items(resp: &PvqResponse) -> [f64; PVQ_ITEMS] {
    let mrat = resp.items.iter().map(|&s| s as f64).sum::<f64>() / PVQ_ITEMS as f64;
    let mut out = [0.0; PVQ_ITEMS];
    for (o, &s) in out.iter_mut().zip(&resp.items) {
        *o = s as f64 - mrat;
    }
    out
}

pub const PVQ_COLUMNS: usize = 1 + PVQ_ITEMS + 6;

/// Parses `respondent,item_1..item_21,att_idx1,att_req1,att_ans1,att_idx2,att_req2,att_ans2`.
/// Malformed rows are a hard error naming the line.
pub fn read_pvq<R: Read>(reader: R) -> Result<Vec<PvqResponse>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != PVQ_COLUMNS {
            return Err(Error::InvalidInput(format!(
                "pvq line {line}: expected {PVQ_COLUMNS} columns, found {}",
                rec.len()
            )));
        }
        let int = |col: usize| -> Result<u32> {
            rec[col]
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidInput(format!("pvq line {line}: column {} not an integer", col + 1)))
        };
        let small = |col: usize| -> Result<u8> {
            u8::try_from(int(col)?)
                .map_err(|_| Error::InvalidInput(format!("pvq line {line}: column {} out of range", col + 1)))
        };
        let mut items = [0u8; PVQ_ITEMS];
        for (k, item) in items.iter_mut().enumerate() {
            *item = small(1 + k)?;
        }
        let base = 1 + PVQ_ITEMS;
        let attention = [
            AttentionCheck { item_index: int(base)?, required: small(base + 1)?, answered: small(base + 2)? },
            AttentionCheck { item_index: int(base + 3)?, required: small(base + 4)?, answered: small(base + 5)? },
        ];
        let resp = PvqResponse { respondent: rec[0].to_string(), items, attention };
        resp.validate()?;
        out.push(resp);
    }
    Ok(out)
}

/// Reliability of the items measuring one value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CronbachAlpha {
    pub alpha: f64,
    pub ci95: (f64, f64),
    pub n: usize,
    pub k: usize,
}

/// Cronbach's alpha over the respondents that pass their attention checks,
/// with a Feldt F-based 95% interval.
pub fn cronbach_alpha(responses: &[PvqResponse], key: &PvqKey, value: ValueId) -> Result<CronbachAlpha> {
    let items = key.items_for(value);
    let rows: Vec<Vec<f64>> = responses
        .iter()
        .filter(|r| r.passed_attention())
        .map(|r| items.iter().map(|&i| r.items[i - 1] as f64).collect())
        .collect();
    cronbach_alpha_matrix(&rows)
}

/// Cronbach's alpha for an `n x k` score matrix (rows are respondents).
pub fn cronbach_alpha_matrix(rows: &[Vec<f64>]) -> Result<CronbachAlpha> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("cronbach alpha needs at least 3 responses, got {n}")));
    }
    let k = rows[0].len();
    if k < 2 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput("cronbach alpha needs at least 2 items per row".into()));
    }
    let item_var_sum: f64 = (0..k).map(|j| sample_variance(rows.iter().map(|r| r[j]))).sum();
    let total_var = sample_variance(rows.iter().map(|r| r.iter().sum::<f64>()));
    if total_var <= 0.0 {
        return Err(Error::UndefinedMetric { metric: "cronbach alpha", reason: "zero total variance".into() });
    }
    let kf = k as f64;
    let alpha = kf / (kf - 1.0) * (1.0 - item_var_sum / total_var);
    let df1 = (n - 1) as f64;
    let df2 = df1 * (kf - 1.0);
    let f = FisherSnedecor::new(df1, df2).map_err(|e| Error::Numerical(e.to_string()))?;
    let lower = 1.0 - (1.0 - alpha) * f.inverse_cdf(0.975);
    let upper = 1.0 - (1.0 - alpha) * f.inverse_cdf(0.025);
    Ok(CronbachAlpha { alpha, ci95: (lower, upper), n, k })
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// CSV header for profile files.
pub fn profile_header() -> Vec<String> {
    let mut h = vec!["user".to_string(), "source".to_string(), "total_mentions".to_string()];
    h.extend(ValueId::ALL.iter().map(|v| v.name().to_string()));
    h
}

/// Writes `user,source,total_mentions,<ten values>`. Raw estimated profiles
/// are written as integer counts; everything else as scores.
pub fn write_profiles<'a, W: Write>(out: W, profiles: impl IntoIterator<Item = &'a ValueProfile>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(profile_header())?;
    for p in profiles {
        let mut rec = vec![p.user.clone(), p.source.as_str().to_string(), p.total_mentions.to_string()];
        match (p.source, p.counts) {
            (ProfileSource::Vpe, Some(c)) if is_unnormalized(p) => rec.extend(c.iter().map(u64::to_string)),
            _ => rec.extend(p.scores.iter().map(|s| format_score(*s))),
        }
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("<profiles>", e))?;
    Ok(())
}

fn is_unnormalized(p: &ValueProfile) -> bool {
    match p.counts {
        Some(c) => c.iter().zip(&p.scores).all(|(&c, &s)| c as f64 == s),
        None => false,
    }
}

/// Shortest representation that round-trips.
pub fn format_score(x: f64) -> String {
    format!("{x:?}")
}

/// Reads a profile CSV. Integer-valued estimated rows come back as raw
/// counts; other rows as scores.
pub fn read_profiles<R: Read>(reader: R) -> Result<BTreeMap<String, ValueProfile>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = profile_header();
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::InvalidInput(format!("profile header must be {}", expected.join(","))));
    }
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::InvalidInput(format!("profiles line {line}: {what}"));
        let user = rec[0].to_string();
        let source = match rec[1].trim() {
            "vpe" => ProfileSource::Vpe,
            "survey" => ProfileSource::Survey,
            other => return Err(bad(&format!("unknown source {other:?}"))),
        };
        let total: u64 = rec[2].trim().parse().map_err(|_| bad("total_mentions not an integer"))?;
        let fields: Vec<&str> = (3..3 + NUM_VALUES).map(|j| rec[j].trim()).collect();
        let ints: Option<Vec<u64>> = fields.iter().map(|f| f.parse::<u64>().ok()).collect();
        let profile = match (source, ints) {
            (ProfileSource::Vpe, Some(c)) => {
                let counts: [u64; NUM_VALUES] = c.try_into().expect("ten columns");
                if counts.iter().sum::<u64>() != total {
                    return Err(bad("total_mentions does not equal the sum of counts"));
                }
                ValueProfile::from_counts(user.clone(), counts)
            }
            _ => {
                let mut scores = [0.0; NUM_VALUES];
                for (s, f) in scores.iter_mut().zip(&fields) {
                    *s = f.parse::<f64>().map_err(|_| bad("score is not a number"))?;
                    if !s.is_finite() {
                        return Err(bad("score is not finite"));
                    }
                }
                let mut p = ValueProfile::from_scores(user.clone(), source, scores);
                p.total_mentions = total;
                p
            }
        };
        if out.insert(user.clone(), profile).is_some() {
            return Err(bad(&format!("duplicate user {user:?}")));
        }
    }
    Ok(out)
}
