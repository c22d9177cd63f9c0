//! Comment and agreement-pair ingestion, plus corpus filtering.
//!
//! Readers never drop malformed rows silently: every row that fails
//! validation is returned as a [`Reject`] carrying its 1-based line number.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};

/// One user post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub author: String,
    pub forum: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// A row that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_no: usize,
    pub reason: String,
}

impl Reject {
    fn new(line_no: usize, reason: impl Into<String>) -> Self {
        Reject { line_no, reason: reason.into() }
    }
}

/// Writes rejects as JSONL `{"line_no":..,"reason":..}`.
pub fn write_rejects<W: Write>(mut out: W, rejects: &[Reject]) -> Result<()> {
    for r in rejects {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<rejects>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CommentLoadOptions {
    pub allow_empty_text: bool,
}

/// Result of loading a file: accepted rows in file order plus rejects.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub items: Vec<T>,
    pub rejects: Vec<Reject>,
}

impl<T> Default for Loaded<T> {
    fn default() -> Self {
        Loaded { items: Vec::new(), rejects: Vec::new() }
    }
}

/// Streaming JSONL comment reader. Yields `Ok(Comment)` for valid rows and
/// `Err(Reject)` for schema violations; blank lines are skipped.
pub struct CommentReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen_ids: HashSet<String>,
    opts: CommentLoadOptions,
}

impl<R: BufRead> CommentReader<R> {
    pub fn new(reader: R, opts: CommentLoadOptions) -> Self {
        CommentReader { lines: reader.lines(), line_no: 0, seen_ids: HashSet::new(), opts }
    }

    fn parse_line(&mut self, line: &str) -> std::result::Result<Comment, String> {
        let obj: Json = serde_json::from_str(line).map_err(|e| format!("invalid json: {e}"))?;
        let obj = obj.as_object().ok_or("row is not a json object")?;
        let string_field = |name: &str| -> std::result::Result<String, String> {
            match obj.get(name) {
                Some(Json::String(s)) => Ok(s.clone()),
                Some(_) => Err(format!("field {name:?} is not a string")),
                None => Err(format!("missing field {name:?}")),
            }
        };
        let id = string_field("id")?;
        if id.is_empty() {
            return Err("empty id".into());
        }
        let author = string_field("author")?;
        if author.is_empty() {
            return Err("empty author".into());
        }
        let forum = string_field("forum")?;
        let text = string_field("text")?;
        if text.is_empty() && !self.opts.allow_empty_text {
            return Err("empty text".into());
        }
        let timestamp = match obj.get("timestamp") {
            Some(Json::Number(n)) => n.as_i64().ok_or("timestamp is not an integer")?,
            Some(_) => return Err("timestamp is not an integer".into()),
            None => return Err("missing field \"timestamp\"".into()),
        };
        let lang = match obj.get("lang") {
            None | Some(Json::Null) => None,
            Some(Json::String(s)) => Some(s.to_ascii_lowercase()),
            Some(_) => return Err("field \"lang\" is not a string".into()),
        };
        if !self.seen_ids.insert(id.clone()) {
            return Err(format!("duplicate id {id:?}"));
        }
        Ok(Comment { id, author, forum, timestamp, text, lang })
    }
}

impl<R: BufRead> Iterator for CommentReader<R> {
    type Item = std::result::Result<Comment, Reject>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Reject::new(self.line_no, format!("unreadable line: {e}")))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let no = self.line_no;
            return Some(self.parse_line(&line).map_err(|r| Reject::new(no, r)));
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Reads a JSONL comment file.
pub fn load_comments(path: impl AsRef<Path>, opts: CommentLoadOptions) -> Result<Loaded<Comment>> {
    let reader = open(path.as_ref())?;
    Ok(collect_loaded(CommentReader::new(reader, opts)))
}

pub fn read_comments<R: BufRead>(reader: R, opts: CommentLoadOptions) -> Loaded<Comment> {
    collect_loaded(CommentReader::new(reader, opts))
}

fn collect_loaded<T>(iter: impl Iterator<Item = std::result::Result<T, Reject>>) -> Loaded<T> {
    let mut out = Loaded { items: Vec::new(), rejects: Vec::new() };
    for row in iter {
        match row {
            Ok(item) => out.items.push(item),
            Err(r) => out.rejects.push(r),
        }
    }
    out
}

pub fn write_comments<W: Write>(mut out: W, comments: &[Comment]) -> Result<()> {
    for c in comments {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n").map_err(|e| Error::io("<comments>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub exclusion_list: BTreeSet<String>,
    pub min_forum_posts: usize,
    pub english_only: bool,
    pub drop_user_forums_prefix: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            exclusion_list: BTreeSet::new(),
            min_forum_posts: 50,
            english_only: false,
            drop_user_forums_prefix: "u_".to_string(),
        }
    }
}

impl FilterConfig {
    /// Reads an exclusion list: one forum per line, `#` starts a comment.
    pub fn read_exclusion_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
        let reader = open(path.as_ref())?;
        let mut set = BTreeSet::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io(path.as_ref(), e))?;
            let name = line.split('#').next().unwrap_or("").trim();
            if !name.is_empty() {
                set.insert(name.to_string());
            }
        }
        Ok(set)
    }
}

/// Per-rule removal counts. Reports from disjoint partitions of a corpus merge
/// by summation; `low_frequency_forums` merge by union.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub rejected: usize,
    pub excluded_list: usize,
    pub user_forum_prefix: usize,
    pub non_english: usize,
    pub low_frequency: usize,
    /// Comments without a language tag that were kept under `english_only`.
    pub untagged_kept: usize,
    pub low_frequency_forums: BTreeSet<String>,
}

impl FilterReport {
    pub fn merge(&mut self, other: &FilterReport) {
        self.input += other.input;
        self.kept += other.kept;
        self.rejected += other.rejected;
        self.excluded_list += other.excluded_list;
        self.user_forum_prefix += other.user_forum_prefix;
        self.non_english += other.non_english;
        self.low_frequency += other.low_frequency;
        self.untagged_kept += other.untagged_kept;
        self.low_frequency_forums.extend(other.low_frequency_forums.iter().cloned());
    }

    pub fn removed(&self) -> usize {
        self.excluded_list + self.user_forum_prefix + self.non_english + self.low_frequency
    }
}

/// Applies the corpus filters in this order: exclusion list, user-forum
/// prefix, language, then the per-forum minimum count over the survivors.
/// The minimum-count rule runs last so the filter is idempotent.
pub fn apply_filters(comments: Vec<Comment>, cfg: &FilterConfig) -> (Vec<Comment>, FilterReport) {
    let mut report = FilterReport { input: comments.len(), ..Default::default() };
    let prefix = cfg.drop_user_forums_prefix.as_str();

    let mut survivors = Vec::with_capacity(comments.len());
    for c in comments {
        if cfg.exclusion_list.contains(&c.forum) {
            report.excluded_list += 1;
        } else if !prefix.is_empty() && c.forum.starts_with(prefix) {
            report.user_forum_prefix += 1;
        } else if cfg.english_only && c.lang.as_deref().is_some_and(|l| l != "en") {
            report.non_english += 1;
        } else {
            if cfg.english_only && c.lang.is_none() {
                report.untagged_kept += 1;
            }
            survivors.push(c);
        }
    }

    let mut per_forum: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &survivors {
        *per_forum.entry(c.forum.as_str()).or_default() += 1;
    }
    let low: BTreeSet<String> =
        per_forum.iter().filter(|(_, &n)| n < cfg.min_forum_posts).map(|(f, _)| f.to_string()).collect();

    let mut kept = Vec::with_capacity(survivors.len());
    for c in survivors {
        if low.contains(&c.forum) {
            report.low_frequency += 1;
            if cfg.english_only && c.lang.is_none() {
                report.untagged_kept -= 1;
            }
        } else {
            kept.push(c);
        }
    }
    report.kept = kept.len();
    report.low_frequency_forums = low;
    (kept, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Agree,
    Neutral,
    Disagree,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Agree, Label::Neutral, Label::Disagree];

    pub fn index(self) -> usize {
        match self {
            Label::Agree => 0,
            Label::Neutral => 1,
            Label::Disagree => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Agree => "agree",
            Label::Neutral => "neutral",
            Label::Disagree => "disagree",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agree" => Ok(Label::Agree),
            "neutral" => Ok(Label::Neutral),
            "disagree" => Ok(Label::Disagree),
            _ => Err(Error::InvalidInput(format!("unknown label {s:?}"))),
        }
    }
}

/// A labeled parent/child reply pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementInstance {
    pub id: String,
    pub forum: String,
    pub parent_author: String,
    pub child_author: String,
    pub parent_text: String,
    pub child_text: String,
    pub label: Label,
    pub timestamp: i64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub self_reply: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementFormat {
    Csv,
    Jsonl,
}

impl AgreementFormat {
    pub fn from_path(path: &Path) -> AgreementFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("json") => {
                AgreementFormat::Jsonl
            }
            _ => AgreementFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AgreementLoadOptions {
    /// Accept rows whose parent and child author coincide; they are marked
    /// `self_reply` instead of rejected.
    pub allow_self_reply: bool,
}

pub const AGREEMENT_COLUMNS: [&str; 8] =
    ["id", "forum", "parent_author", "child_author", "parent_text", "child_text", "label", "timestamp"];

#[derive(Deserialize)]
struct RawAgreement {
    id: String,
    forum: String,
    parent_author: String,
    child_author: String,
    parent_text: String,
    child_text: String,
    label: String,
    timestamp: i64,
}

fn validate_agreement(raw: RawAgreement, opts: AgreementLoadOptions) -> std::result::Result<AgreementInstance, String> {
    let label: Label = raw.label.parse().map_err(|_| format!("unknown label {:?}", raw.label))?;
    if raw.id.is_empty() {
        return Err("empty id".into());
    }
    let self_reply = raw.parent_author == raw.child_author;
    if self_reply && !opts.allow_self_reply {
        return Err(format!("self reply by {:?}", raw.parent_author));
    }
    Ok(AgreementInstance {
        id: raw.id,
        forum: raw.forum,
        parent_author: raw.parent_author,
        child_author: raw.child_author,
        parent_text: raw.parent_text,
        child_text: raw.child_text,
        label,
        timestamp: raw.timestamp,
        self_reply,
    })
}

pub fn load_agreement(
    path: impl AsRef<Path>,
    format: AgreementFormat,
    opts: AgreementLoadOptions,
) -> Result<Loaded<AgreementInstance>> {
    let reader = open(path.as_ref())?;
    read_agreement(reader, format, opts)
}

pub fn read_agreement<R: BufRead>(
    reader: R,
    format: AgreementFormat,
    opts: AgreementLoadOptions,
) -> Result<Loaded<AgreementInstance>> {
    let mut out = Loaded::default();
    match format {
        AgreementFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
            let headers = rdr.headers()?.clone();
            for col in AGREEMENT_COLUMNS {
                if !headers.iter().any(|h| h == col) {
                    return Err(Error::InvalidInput(format!("agreement csv missing column {col:?}")));
                }
            }
            for (i, rec) in rdr.records().enumerate() {
                // header is line 1
                let line_no = rec.as_ref().ok().and_then(|r| r.position()).map_or(i + 2, |p| p.line() as usize);
                let parsed = rec
                    .map_err(|e| e.to_string())
                    .and_then(|r| r.deserialize::<RawAgreement>(Some(&headers)).map_err(|e| e.to_string()))
                    .and_then(|raw| validate_agreement(raw, opts));
                match parsed {
                    Ok(inst) => out.items.push(inst),
                    Err(reason) => out.rejects.push(Reject::new(line_no, reason)),
                }
            }
        }
        AgreementFormat::Jsonl => {
            for (i, line) in reader.lines().enumerate() {
                let line_no = i + 1;
                let line = line.map_err(|e| Error::io("<agreement>", e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<RawAgreement>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(|raw| validate_agreement(raw, opts));
                match parsed {
                    Ok(inst) => out.items.push(inst),
                    Err(reason) => out.rejects.push(Reject::new(line_no, reason)),
                }
            }
        }
    }
    Ok(out)
}

pub fn write_agreement_csv<W: Write>(out: W, instances: &[AgreementInstance]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGREEMENT_COLUMNS)?;
    for a in instances {
        w.write_record([
            a.id.as_str(),
            &a.forum,
            &a.parent_author,
            &a.child_author,
            &a.parent_text,
            &a.child_text,
            a.label.as_str(),
            &a.timestamp.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<agreement>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comment(id: usize, forum: &str, lang: Option<&str>) -> Comment {
        Comment {
            id: format!("c{id}"),
            author: format!("u{}", id % 7),
            forum: forum.to_string(),
            timestamp: id as i64,
            text: "text".into(),
            lang: lang.map(str::to_string),
        }
    }

    #[test]
    fn minimal_row_loads() {
        let data = r#"{"id":"a","author":"u1","forum":"climate","timestamp":0,"text":"hi"}"#;
        let loaded = read_comments(data.as_bytes(), CommentLoadOptions::default());
        assert_eq!(loaded.items.len(), 1);
        assert!(loaded.rejects.is_empty());
        assert_eq!(loaded.items[0].forum, "climate");
        assert_eq!(loaded.items[0].lang, None);
    }

    #[test]
    fn missing_author_is_rejected_and_stream_continues() {
        let data = concat!(
            r#"{"id":"a","forum":"climate","timestamp":0,"text":"hi"}"#,
            "\n",
            r#"{"id":"b","author":"u1","forum":"climate","timestamp":1,"text":"ok"}"#,
            "\n"
        );
        let loaded = read_comments(data.as_bytes(), CommentLoadOptions::default());
        assert_eq!(loaded.items.len(), 1);
        assert_eq!(loaded.rejects.len(), 1);
        assert_eq!(loaded.rejects[0].line_no, 1);
        assert!(loaded.rejects[0].reason.contains("author"));
    }

    #[test]
    fn empty_input() {
        let loaded = read_comments(&b""[..], CommentLoadOptions::default());
        assert!(loaded.items.is_empty());
        assert!(loaded.rejects.is_empty());
    }

    #[test]
    fn duplicate_ids_and_empty_text() {
        let data = concat!(
            r#"{"id":"a","author":"u1","forum":"f","timestamp":0,"text":"x"}"#,
            "\n",
            r#"{"id":"a","author":"u2","forum":"f","timestamp":1,"text":"y"}"#,
            "\n",
            r#"{"id":"b","author":"u2","forum":"f","timestamp":1,"text":""}"#,
            "\n",
            r#"{"id":"c","author":"u2","forum":"f","timestamp":1.5,"text":"z"}"#,
        );
        let loaded = read_comments(data.as_bytes(), CommentLoadOptions::default());
        assert_eq!(loaded.items.len(), 1);
        let lines: Vec<usize> = loaded.rejects.iter().map(|r| r.line_no).collect();
        assert_eq!(lines, vec![2, 3, 4]);

        let loaded = read_comments(data.as_bytes(), CommentLoadOptions { allow_empty_text: true });
        assert_eq!(loaded.items.len(), 2);
    }

    #[test]
    fn low_frequency_threshold() {
        let mut comments: Vec<Comment> = (0..60).map(|i| comment(i, "F", None)).collect();
        comments.extend((60..100).map(|i| comment(i, "G", None)));
        let cfg = FilterConfig::default();
        let (kept, report) = apply_filters(comments, &cfg);
        assert_eq!(kept.len(), 60);
        assert!(kept.iter().all(|c| c.forum == "F"));
        assert_eq!(report.low_frequency, 40);
        assert_eq!(report.removed(), 40);
        assert_eq!(report.low_frequency_forums.iter().collect::<Vec<_>>(), vec!["G"]);
    }

    #[test]
    fn boundary_is_inclusive() {
        let comments: Vec<Comment> = (0..50).map(|i| comment(i, "F", None)).collect();
        let (kept, _) = apply_filters(comments, &FilterConfig::default());
        assert_eq!(kept.len(), 50);
    }

    #[test]
    fn user_forum_prefix_and_exclusions() {
        let cfg = FilterConfig {
            min_forum_posts: 0,
            exclusion_list: ["gaming".to_string()].into_iter().collect(),
            ..Default::default()
        };
        let comments = vec![comment(0, "u_alice", None), comment(1, "gaming", None), comment(2, "brexit", None)];
        let (kept, report) = apply_filters(comments, &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(report.user_forum_prefix, 1);
        assert_eq!(report.excluded_list, 1);
    }

    #[test]
    fn language_rule() {
        let cfg = FilterConfig { min_forum_posts: 0, english_only: true, ..Default::default() };
        let comments = vec![comment(0, "f", Some("de")), comment(1, "f", None), comment(2, "f", Some("en"))];
        let (kept, report) = apply_filters(comments, &cfg);
        let ids: Vec<&str> = kept.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, vec!["c1", "c2"]);
        assert_eq!(report.non_english, 1);
        assert_eq!(report.untagged_kept, 1);
    }

    #[test]
    fn report_merge_sums() {
        let cfg = FilterConfig { min_forum_posts: 3, ..Default::default() };
        let a: Vec<Comment> = (0..5).map(|i| comment(i, "F", None)).collect();
        let b: Vec<Comment> = (5..7).map(|i| comment(i, "G", None)).chain([comment(7, "u_x", None)]).collect();
        let (_, ra) = apply_filters(a, &cfg);
        let (_, rb) = apply_filters(b, &cfg);
        let mut merged = ra.clone();
        merged.merge(&rb);
        assert_eq!(merged.input, 8);
        assert_eq!(merged.kept, 5);
        assert_eq!(merged.input, merged.kept + merged.removed());
    }

    #[test]
    fn agreement_label_normalization() {
        let data = "id,forum,parent_author,child_author,parent_text,child_text,label,timestamp\n\
                    1,Brexit,a,b,p,c,DISAGREE,10\n\
                    2,Brexit,a,b,p,c,maybe,11\n\
                    3,Brexit,a,b,p,c,Agree,12\n\
                    4,Brexit,a,a,p,c,neutral,13\n";
        let loaded = read_agreement(data.as_bytes(), AgreementFormat::Csv, AgreementLoadOptions::default()).unwrap();
        assert_eq!(loaded.items.len(), 2);
        assert_eq!(loaded.items[0].label, Label::Disagree);
        assert_eq!(loaded.items[1].label, Label::Agree);
        assert_eq!(loaded.rejects.iter().map(|r| r.line_no).collect::<Vec<_>>(), vec![3, 5]);

        let loaded =
            read_agreement(data.as_bytes(), AgreementFormat::Csv, AgreementLoadOptions { allow_self_reply: true })
                .unwrap();
        assert_eq!(loaded.items.len(), 3);
        assert!(loaded.items[2].self_reply);
    }

    #[test]
    fn agreement_jsonl_and_order() {
        let rows: Vec<String> = (0..3)
            .map(|i| {
                format!(
                    r#"{{"id":"{i}","forum":"f","parent_author":"p{i}","child_author":"c{i}","parent_text":"x","child_text":"y","label":"neutral","timestamp":{}}}"#,
                    10 - i
                )
            })
            .collect();
        let data = rows.join("\n");
        let loaded = read_agreement(data.as_bytes(), AgreementFormat::Jsonl, AgreementLoadOptions::default()).unwrap();
        let ids: Vec<&str> = loaded.items.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, vec!["0", "1", "2"]);
    }

    #[test]
    fn agreement_missing_column_is_fatal() {
        let data = "id,forum,label\n1,f,agree\n";
        assert!(read_agreement(data.as_bytes(), AgreementFormat::Csv, AgreementLoadOptions::default()).is_err());
    }
}
