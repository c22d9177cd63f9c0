//! Per-comment value labelling.
//!
//! Two routes produce [`ValueLabels`]: matching a value lexicon against
//! preprocessed tokens, or ingesting predictions made by an external
//! classifier.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::Reject;
use crate::error::{Error, Result};
use crate::value_model::{ValueId, NUM_VALUES};

/// Placeholder emitted in place of URLs.
pub const URL_TOKEN: &str = "[URL]";

/// A subset of the ten values, stored as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ValueSet(u16);

impl ValueSet {
    pub const EMPTY: ValueSet = ValueSet(0);

    pub fn insert(&mut self, v: ValueId) {
        self.0 |= 1 << v.position();
    }

    pub fn contains(self, v: ValueId) -> bool {
        self.0 & (1 << v.position()) != 0
    }

    pub fn union(self, other: ValueSet) -> ValueSet {
        ValueSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: ValueSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = ValueId> {
        ValueId::ALL.into_iter().filter(move |v| self.contains(*v))
    }
}

impl FromIterator<ValueId> for ValueSet {
    fn from_iter<I: IntoIterator<Item = ValueId>>(iter: I) -> Self {
        let mut s = ValueSet::EMPTY;
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl Serialize for ValueSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for v in self.iter() {
            seq.serialize_element(v.name())?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for ValueSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct SetVisitor;
        impl<'de> Visitor<'de> for SetVisitor {
            type Value = ValueSet;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of value names")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<ValueSet, A::Error> {
                let mut set = ValueSet::EMPTY;
                while let Some(name) = seq.next_element::<String>()? {
                    set.insert(name.parse().map_err(de::Error::custom)?);
                }
                Ok(set)
            }
        }
        deserializer.deserialize_seq(SetVisitor)
    }
}

/// Values judged relevant for one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueLabels {
    pub comment_id: String,
    pub relevant: ValueSet,
}

pub trait Lemmatizer: Send + Sync {
    fn lemmatize(&self, token: &str) -> String;
}

/// Leaves tokens untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityLemmatizer;

impl Lemmatizer for IdentityLemmatizer {
    fn lemmatize(&self, token: &str) -> String {
        token.to_string()
    }
}

/// Small English suffix-stripping rule table. The first matching rule is
/// applied once, so `choosing` becomes `choos` and not `choo`.
///
/// | suffix | rewrite | guard                                  |
/// |--------|---------|----------------------------------------|
/// | -ies   | -y      | stem of at least 2 letters             |
/// | -sses  | -ss     |                                        |
/// | -s     | (drop)  | not after s/u/i, stem of at least 3    |
/// | -ied   | -y      | stem of at least 2 letters             |
/// | -ing   | (drop)  | stem of at least 3 with a vowel        |
/// | -ed    | (drop)  | stem of at least 3 with a vowel        |
///
/// After dropping -ing/-ed a doubled final consonant (`bb dd gg mm nn pp rr tt`)
/// is undoubled. Tokens of three characters or fewer, and tokens containing
/// non-alphabetic characters, are left alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixLemmatizer;

impl SuffixLemmatizer {
    fn step(word: &str) -> Option<String> {
        let n = word.chars().count();
        if n <= 3 || !word.chars().all(char::is_alphabetic) {
            return None;
        }
        let has_vowel = |s: &str| s.chars().any(|c| "aeiouy".contains(c));
        if let Some(stem) = word.strip_suffix("ies") {
            if stem.chars().count() >= 2 {
                return Some(format!("{stem}y"));
            }
        }
        if let Some(stem) = word.strip_suffix("sses") {
            return Some(format!("{stem}ss"));
        }
        if let Some(stem) = word.strip_suffix("ied") {
            if stem.chars().count() >= 2 {
                return Some(format!("{stem}y"));
            }
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.chars().count() >= 3 && has_vowel(stem) {
                    return Some(undouble(stem));
                }
            }
        }
        if let Some(stem) = word.strip_suffix('s') {
            if !(stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i')) && stem.chars().count() >= 3 {
                return Some(stem.to_string());
            }
        }
        None
    }
}

fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    if b.len() >= 2 {
        let (x, y) = (b[b.len() - 2], b[b.len() - 1]);
        if x == y && b"bdgmnprt".contains(&y) {
            return stem[..stem.len() - 1].to_string();
        }
    }
    stem.to_string()
}

impl Lemmatizer for SuffixLemmatizer {
    fn lemmatize(&self, token: &str) -> String {
        Self::step(token).unwrap_or_else(|| token.to_string())
    }
}

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bhttps?://\S+|\bwww\.\S+|\[URL\]").expect("valid regex"))
}

/// Tokenizes with the default [`SuffixLemmatizer`].
pub fn preprocess(text: &str) -> Vec<String> {
    preprocess_with(text, &SuffixLemmatizer)
}

/// URL replacement, Unicode word segmentation, lowercasing and lemmatization.
pub fn preprocess_with(text: &str, lemmatizer: &dyn Lemmatizer) -> Vec<String> {
    let mut tokens = Vec::new();
    let push_words = |segment: &str, tokens: &mut Vec<String>| {
        for word in segment.unicode_words() {
            let lower = word.to_lowercase();
            tokens.push(lemmatizer.lemmatize(&lower));
        }
    };
    let mut last = 0;
    for m in url_regex().find_iter(text) {
        push_words(&text[last..m.start()], &mut tokens);
        tokens.push(URL_TOKEN.to_string());
        last = m.end();
    }
    push_words(&text[last..], &mut tokens);
    tokens
}

/// Value dictionary: terms per value and the per-value weight `1/|terms|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueLexicon {
    entries: BTreeMap<ValueId, Vec<String>>,
    weights: [f64; NUM_VALUES],
    exact: HashMap<String, ValueSet>,
    prefixes: Vec<(String, ValueId)>,
}

impl ValueLexicon {
    /// Builds a lexicon; terms are lowercased and deduplicated per value.
    /// Every value needs at least one term.
    pub fn new(entries: impl IntoIterator<Item = (ValueId, Vec<String>)>) -> Result<Self> {
        let mut map: BTreeMap<ValueId, Vec<String>> = BTreeMap::new();
        for (v, terms) in entries {
            let list = map.entry(v).or_default();
            for t in terms {
                let t = t.trim().to_lowercase();
                if t.is_empty() || t == "*" {
                    continue;
                }
                if !list.contains(&t) {
                    list.push(t);
                }
            }
        }
        for v in ValueId::ALL {
            if map.get(&v).is_none_or(|t| t.is_empty()) {
                return Err(Error::InvalidInput(format!("lexicon has no terms for {v}")));
            }
        }
        let mut weights = [0.0; NUM_VALUES];
        let mut exact: HashMap<String, ValueSet> = HashMap::new();
        let mut prefixes = Vec::new();
        for (v, terms) in &map {
            weights[v.position()] = 1.0 / terms.len() as f64;
            for t in terms {
                match t.strip_suffix('*') {
                    Some(prefix) => prefixes.push((prefix.to_string(), *v)),
                    None => exact.entry(t.clone()).or_default().insert(*v),
                }
            }
        }
        Ok(ValueLexicon { entries: map, weights, exact, prefixes })
    }

    /// Loads `{"value": ["term", ...]}` JSON or a `value,term` CSV (header optional),
    /// chosen by file extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(raw.len());
        for (name, terms) in raw {
            entries.push((name.parse::<ValueId>()?, terms));
        }
        Self::new(entries)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(text.as_bytes());
        let mut grouped: BTreeMap<ValueId, Vec<String>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::InvalidInput(format!("lexicon csv row {} needs 2 columns", i + 1)));
            }
            if i == 0 && rec[0].trim().eq_ignore_ascii_case("value") && rec[1].trim().eq_ignore_ascii_case("term") {
                continue;
            }
            grouped.entry(rec[0].parse()?).or_default().push(rec[1].to_string());
        }
        Self::new(grouped)
    }

    pub fn terms(&self, v: ValueId) -> &[String] {
        self.entries.get(&v).map_or(&[], Vec::as_slice)
    }

    pub fn weight(&self, v: ValueId) -> f64 {
        self.weights[v.position()]
    }

    pub fn weights(&self) -> &[f64; NUM_VALUES] {
        &self.weights
    }

    /// Values whose terms match `token`: plain terms match exactly, `abc*`
    /// matches any token starting with `abc`.
    pub fn match_token(&self, token: &str) -> ValueSet {
        let mut set = self.exact.get(token).copied().unwrap_or_default();
        for (prefix, v) in &self.prefixes {
            if token.starts_with(prefix.as_str()) {
                set.insert(*v);
            }
        }
        set
    }

    pub fn matches_any(&self, tokens: &[String]) -> bool {
        tokens.iter().any(|t| !self.match_token(t).is_empty())
    }
}

/// A value is relevant iff at least one token matches one of its terms.
pub fn classify_dictionary(comment_id: &str, tokens: &[String], lex: &ValueLexicon) -> ValueLabels {
    let relevant = tokens.iter().fold(ValueSet::EMPTY, |acc, t| acc.union(lex.match_token(t)));
    ValueLabels { comment_id: comment_id.to_string(), relevant }
}

/// Predictions grouped per comment, in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Predictions {
    pub labels: Vec<ValueLabels>,
    pub rejects: Vec<Reject>,
    pub warnings: Vec<String>,
}

/// Reads classifier output. Rows are either
/// `{"comment_id":..,"value":..,"relevant":0|1}` or `{"comment_id":..,"values":[..]}`.
/// Duplicate or conflicting rows for a comment are OR-ed together with a warning.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Predictions> {
    let mut out = Predictions::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    // (comment, value) -> relevance seen from per-value rows
    let mut per_value_seen: HashMap<(String, ValueId), bool> = HashMap::new();
    let mut list_seen: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<predictions>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_prediction_row(&line);
        let (id, set, per_value) = match parsed {
            Ok(p) => p,
            Err(reason) => {
                out.rejects.push(Reject { line_no, reason });
                continue;
            }
        };
        match per_value {
            Some((v, rel)) => match per_value_seen.insert((id.clone(), v), rel) {
                Some(prev) if prev != rel => {
                    out.warnings.push(format!("line {line_no}: conflicting relevance for {id:?}/{v}; using logical OR"))
                }
                Some(_) => out.warnings.push(format!("line {line_no}: duplicate row for {id:?}/{v}")),
                None => {}
            },
            None => {
                let n = list_seen.entry(id.clone()).or_default();
                *n += 1;
                if *n > 1 {
                    out.warnings.push(format!("line {line_no}: duplicate value list for {id:?}; using logical OR"));
                }
            }
        }
        match index.get(&id) {
            Some(&k) => {
                let entry = &mut out.labels[k];
                entry.relevant = entry.relevant.union(set);
            }
            None => {
                index.insert(id.clone(), out.labels.len());
                out.labels.push(ValueLabels { comment_id: id, relevant: set });
            }
        }
    }
    Ok(out)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Predictions> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(std::io::BufReader::new(file))
}

type PredictionRow = (String, ValueSet, Option<(ValueId, bool)>);

fn parse_prediction_row(line: &str) -> std::result::Result<PredictionRow, String> {
    let obj: Json = serde_json::from_str(line).map_err(|e| format!("invalid json: {e}"))?;
    let id =
        obj.get("comment_id").and_then(Json::as_str).filter(|s| !s.is_empty()).ok_or("missing comment_id")?.to_string();
    if let Some(values) = obj.get("values") {
        let arr = values.as_array().ok_or("values is not a list")?;
        let mut set = ValueSet::EMPTY;
        for v in arr {
            let name = v.as_str().ok_or("values entries must be strings")?;
            set.insert(name.parse::<ValueId>().map_err(|e| e.to_string())?);
        }
        return Ok((id, set, None));
    }
    let name = obj.get("value").and_then(Json::as_str).ok_or("row needs `values` or `value`")?;
    let v: ValueId = name.parse().map_err(|e: Error| e.to_string())?;
    let rel = match obj.get("relevant") {
        Some(Json::Number(n)) if n.as_u64() == Some(0) => false,
        Some(Json::Number(n)) if n.as_u64() == Some(1) => true,
        Some(Json::Bool(b)) => *b,
        _ => return Err("relevant must be 0 or 1".into()),
    };
    let set = if rel { [v].into_iter().collect() } else { ValueSet::EMPTY };
    Ok((id, set, Some((v, rel))))
}
