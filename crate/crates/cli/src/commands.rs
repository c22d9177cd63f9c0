use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use valconf_core::agreement::logreg::{bundle_row, row_dim};
use valconf_core::agreement::{
    build_bundles, evaluate, majority_label, read_bundles, read_user_features, write_bundles, write_results_csv,
    BundleConfig, ContextKind, ContextSources, DeltaSymbol, LogReg, LogRegConfig, ResultRow, Split, TfidfVectorizer,
};
use valconf_core::corpus::{
    apply_filters, load_agreement, load_comments, write_comments, write_rejects, AgreementFormat, AgreementInstance,
    AgreementLoadOptions, Comment, CommentLoadOptions, FilterConfig, Label,
};
use valconf_core::extraction::{classify_dictionary, load_predictions, preprocess, ValueLexicon, ValueSet};
use valconf_core::inference::grid::{domain_summaries, write_grid_csv, write_ranked_csv};
use valconf_core::inference::mds::matrix10_rows;
use valconf_core::inference::{classical_mds, prepare_profiles, run_grid, value_covariance, GridConfig, TailPolicy};
use valconf_core::profiles::{
    aggregate_profiles, cronbach_alpha, format_score, read_profiles, read_pvq, score_pvq, weighted_dictionary_profile,
    write_profiles, PvqKey, PvqOutcome, ValueProfile,
};
use valconf_core::similarity::SimilarityConfig;
use valconf_core::{CircumplexKernel, ValueId};

use crate::args::*;
use crate::{plot, CliError, Run};

pub fn dispatch(cmd: &Command) -> Result<Run, CliError> {
    match cmd {
        Command::Kernel(a) => kernel(a),
        Command::Filter(a) => filter(a),
        Command::Extract(a) => extract(a),
        Command::Profile(a) => profile(a),
        Command::Pvq(a) => pvq(a),
        Command::Similarity(a) => similarity(a),
        Command::Bftest(a) => bftest(a),
        Command::Mds(a) => mds(a),
        Command::AgreeFeatures(a) => agree_features(a),
        Command::AgreeTrain(a) => agree_train(a),
        Command::Report(a) => report(a),
    }
}

fn snapshot<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

/// `<path>` with `suffix` appended to the file name.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn load_corpus(path: &Path) -> Result<Vec<Comment>, CliError> {
    let loaded = load_comments(path, CommentLoadOptions::default())?;
    if !loaded.rejects.is_empty() {
        log::warn!("{}: {} malformed comment lines skipped", path.display(), loaded.rejects.len());
    }
    Ok(loaded.items)
}

fn load_pairs(path: &Path, allow_self_reply: bool) -> Result<Vec<AgreementInstance>, CliError> {
    let loaded = load_agreement(path, AgreementFormat::from_path(path), AgreementLoadOptions { allow_self_reply })?;
    if !loaded.rejects.is_empty() {
        log::warn!("{}: {} agreement rows rejected", path.display(), loaded.rejects.len());
        for r in loaded.rejects.iter().take(5) {
            log::warn!("  line {}: {}", r.line_no, r.reason);
        }
    }
    if loaded.items.is_empty() {
        return Err(CliError::Invalid(format!("{}: no valid agreement rows", path.display())));
    }
    Ok(loaded.items)
}

fn load_profiles(path: &Path) -> Result<BTreeMap<String, ValueProfile>, CliError> {
    Ok(read_profiles(open(path)?)?)
}

fn kernel(a: &KernelArgs) -> Result<Run, CliError> {
    let k = CircumplexKernel::new(a.sigma)?;
    let csv = k.to_csv();
    let mut run = Run { config: snapshot(a), ..Default::default() };
    match &a.out {
        Some(p) => run.outputs.push((p.clone(), csv.into_bytes())),
        None => run.stdout = Some(csv),
    }
    Ok(run)
}

fn filter(a: &FilterArgs) -> Result<Run, CliError> {
    let loaded = load_comments(&a.input, CommentLoadOptions { allow_empty_text: a.allow_empty_text })?;
    let mut inputs = vec![a.input.clone()];
    let exclusion_list = match &a.exclude {
        Some(p) => {
            inputs.push(p.clone());
            FilterConfig::read_exclusion_list(p)?
        }
        None => Default::default(),
    };
    let cfg = FilterConfig {
        exclusion_list,
        min_forum_posts: a.min_forum_posts,
        english_only: a.english_only,
        drop_user_forums_prefix: a.user_forum_prefix.clone(),
    };
    let (kept, mut report) = apply_filters(loaded.items, &cfg);
    report.rejected = loaded.rejects.len();
    report.input += loaded.rejects.len();

    let mut out = Vec::new();
    write_comments(&mut out, &kept)?;
    let mut rejects = Vec::new();
    write_rejects(&mut rejects, &loaded.rejects)?;
    Ok(Run {
        inputs,
        outputs: vec![
            (a.out.clone(), out),
            (a.report.clone().unwrap_or_else(|| sibling(&a.out, ".report.json")), json_bytes(&report)?),
            (a.rejects.clone().unwrap_or_else(|| sibling(&a.out, ".rejects.jsonl")), rejects),
        ],
        config: snapshot(a),
        ..Default::default()
    })
}

#[derive(Serialize)]
struct LabelRow<'a> {
    comment_id: &'a str,
    values: ValueSet,
}

fn labels_jsonl<'a>(rows: impl IntoIterator<Item = (&'a str, ValueSet)>) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for (comment_id, values) in rows {
        serde_json::to_writer(&mut out, &LabelRow { comment_id, values })?;
        out.push(b'\n');
    }
    Ok(out)
}

fn extract(a: &ExtractArgs) -> Result<Run, CliError> {
    let (inputs, bytes) = match (&a.lexicon, &a.predictions) {
        (Some(lex_path), None) => {
            let input = a.input.as_ref().ok_or_else(|| CliError::Usage("--in is required with --lexicon".into()))?;
            let lex = ValueLexicon::load(lex_path)?;
            let comments = load_corpus(input)?;
            let labels: Vec<_> =
                comments.par_iter().map(|c| classify_dictionary(&c.id, &preprocess(&c.text), &lex)).collect();
            (
                vec![lex_path.clone(), input.clone()],
                labels_jsonl(labels.iter().map(|l| (l.comment_id.as_str(), l.relevant)))?,
            )
        }
        (None, Some(pred_path)) => {
            let preds = load_predictions(pred_path)?;
            for w in &preds.warnings {
                log::warn!("{}: {w}", pred_path.display());
            }
            if !preds.rejects.is_empty() {
                return Err(CliError::Invalid(format!(
                    "{}: {} prediction rows rejected (first: line {}: {})",
                    pred_path.display(),
                    preds.rejects.len(),
                    preds.rejects[0].line_no,
                    preds.rejects[0].reason
                )));
            }
            (vec![pred_path.clone()], labels_jsonl(preds.labels.iter().map(|l| (l.comment_id.as_str(), l.relevant)))?)
        }
        _ => return Err(CliError::Usage("give exactly one of --lexicon or --predictions".into())),
    };
    Ok(Run { inputs, outputs: vec![(a.out.clone(), bytes)], config: snapshot(a), ..Default::default() })
}

fn profile(a: &ProfileArgs) -> Result<Run, CliError> {
    let preds = load_predictions(&a.labels)?;
    if !preds.rejects.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: {} label rows rejected (first: line {}: {})",
            a.labels.display(),
            preds.rejects.len(),
            preds.rejects[0].line_no,
            preds.rejects[0].reason
        )));
    }
    let comments = load_corpus(&a.comments)?;
    let authorship: HashMap<String, String> = comments.iter().map(|c| (c.id.clone(), c.author.clone())).collect();
    let (mut profiles, report) = aggregate_profiles(&preds.labels, &authorship);
    if !report.unknown_comments.is_empty() {
        log::warn!("{} labeled comments have no known author and were skipped", report.unknown_comments.len());
    }
    let mut inputs = vec![a.labels.clone(), a.comments.clone()];
    if a.weighted {
        let lex_path = a.lexicon.as_ref().ok_or_else(|| CliError::Usage("--weighted needs --lexicon".into()))?;
        inputs.push(lex_path.clone());
        let lex = ValueLexicon::load(lex_path)?;
        for p in profiles.values_mut() {
            if p.total_mentions > 0 {
                *p = weighted_dictionary_profile(p, &lex)?;
            }
        }
    }
    let mut out = Vec::new();
    write_profiles(&mut out, profiles.values())?;
    Ok(Run { inputs, outputs: vec![(a.out.clone(), out)], config: snapshot(a), ..Default::default() })
}

fn pvq(a: &PvqArgs) -> Result<Run, CliError> {
    let responses = read_pvq(open(&a.input)?)?;
    let key = PvqKey::official();
    let mut scored = Vec::new();
    let mut rejected = Vec::new();
    for r in &responses {
        match score_pvq(r, &key)? {
            PvqOutcome::Scored(p) => {
                if p.degenerate {
                    log::warn!("respondent {}: all answers equal, zero profile", p.user);
                }
                scored.push(p);
            }
            PvqOutcome::Rejected { respondent, failed_item } => {
                rejected.push(vec![respondent, failed_item.to_string()]);
            }
        }
    }
    let mut out = Vec::new();
    write_profiles(&mut out, &scored)?;
    let mut outputs = vec![
        (a.out.clone(), out),
        (sibling(&a.out, ".rejected.csv"), csv_bytes(&["respondent", "failed_attention_item"], rejected)?),
    ];
    if let Some(path) = &a.alpha {
        let rows = ValueId::ALL.iter().map(|&v| match cronbach_alpha(&responses, &key, v) {
            Ok(c) => vec![
                v.name().to_string(),
                format!("{:.3}", c.alpha),
                format!("{:.3}", c.ci95.0),
                format!("{:.3}", c.ci95.1),
                c.n.to_string(),
                c.k.to_string(),
                String::new(),
            ],
            Err(e) => {
                vec![
                    v.name().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]
            }
        });
        outputs.push((path.clone(), csv_bytes(&["value", "alpha", "ci_low", "ci_high", "n", "k", "note"], rows)?));
    }
    Ok(Run { inputs: vec![a.input.clone()], outputs, config: snapshot(a), ..Default::default() })
}

fn similarity(a: &SimilarityArgs) -> Result<Run, CliError> {
    let profiles = load_profiles(&a.profiles)?;
    let prepared = prepare_profiles(&profiles, a.threshold);
    let cfg = SimilarityConfig { kernel: CircumplexKernel::new(a.sigma)?, tau_variant: a.tau_variant };
    let mut rdr = csv::Reader::from_reader(open(&a.pairs)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Invalid(format!("{}: missing column {name:?}", a.pairs.display())))
    };
    let (ca, cb) = (col("user_a")?, col("user_b")?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (ua, ub) = (rec[ca].to_string(), rec[cb].to_string());
        let (score, note) = match (prepared.get(&ua), prepared.get(&ub)) {
            (Some(v), Some(w)) => match cfg.compute(a.metric, v, w) {
                Ok(r) if r.constant_profile => (format_score(r.score), "constant profile".to_string()),
                Ok(r) => (format_score(r.score), String::new()),
                Err(e) => (String::new(), e.to_string()),
            },
            _ => (String::new(), "missing profile".to_string()),
        };
        rows.push(vec![ua, ub, a.metric.to_string(), score, note]);
    }
    Ok(Run {
        inputs: vec![a.profiles.clone(), a.pairs.clone()],
        outputs: vec![(a.out.clone(), csv_bytes(&["user_a", "user_b", "metric", "score", "note"], rows)?)],
        config: snapshot(a),
        ..Default::default()
    })
}

fn bftest(a: &BftestArgs) -> Result<Run, CliError> {
    if a.metrics.is_empty() || a.thresholds.is_empty() {
        return Err(CliError::Usage("--metrics and --thresholds must not be empty".into()));
    }
    let instances = load_pairs(&a.agreement, a.allow_self_reply)?;
    let profiles = load_profiles(&a.profiles)?;
    let similarity = SimilarityConfig { kernel: CircumplexKernel::new(a.sigma)?, tau_variant: a.tau_variant };
    let cfg = GridConfig {
        forums: a.forums.clone(),
        metrics: a.metrics.clone(),
        thresholds: a.thresholds.clone(),
        tail_policy: a.tail.fixed().map_or(TailPolicy::Auto, TailPolicy::Fixed),
        prior_scale: a.prior_scale,
        similarity: similarity.clone(),
    };
    if !(a.prior_scale > 0.0 && a.prior_scale.is_finite()) {
        return Err(CliError::Usage(format!("--prior-scale must be positive, got {}", a.prior_scale)));
    }
    let cells = run_grid(&instances, &profiles, &cfg);
    let mut grid = Vec::new();
    write_grid_csv(&mut grid, &cells)?;
    let mut outputs = vec![(a.out.clone(), grid)];
    if let Some(p) = &a.ranked {
        let mut buf = Vec::new();
        write_ranked_csv(&mut buf, &cells)?;
        outputs.push((p.clone(), buf));
    }
    if let Some(p) = &a.summary {
        let l = *a.thresholds.iter().min().expect("non-empty thresholds");
        let rows = domain_summaries(&instances, &profiles, l, &similarity).into_iter().map(|s| {
            let top: Vec<&str> = s.top_values.iter().map(|v| v.name()).collect();
            vec![s.forum, s.users.to_string(), top.join(";"), s.mean_tau.map(|t| format!("{t:.3}")).unwrap_or_default()]
        });
        outputs.push((p.clone(), csv_bytes(&["forum", "users", "top_values", "mean_tau"], rows)?));
    }
    if let Some(p) = &a.plot {
        let bfs: Vec<f64> = cells.iter().filter_map(|c| c.bf10()).collect();
        outputs.push((p.clone(), plot::bf_hist(&bfs, "BF10 across the test grid")?.into_bytes()));
    }
    Ok(Run {
        inputs: vec![a.agreement.clone(), a.profiles.clone()],
        outputs,
        config: snapshot(a),
        ..Default::default()
    })
}

fn mds(a: &MdsArgs) -> Result<Run, CliError> {
    let profiles = load_profiles(&a.profiles)?;
    let prepared = prepare_profiles(&profiles, a.threshold);
    let cov = value_covariance(prepared.values())?;
    let emb = classical_mds(&matrix10_rows(&cov), 2)?;
    if emb.degenerate {
        log::warn!("all profiles identical; every value sits at the origin");
    }
    let points: Vec<(String, f64, f64)> =
        ValueId::ALL.iter().zip(&emb.coords).map(|(v, c)| (v.name().to_string(), c[0], c[1])).collect();
    let rows = points.iter().map(|(v, x, y)| vec![v.clone(), format_score(*x), format_score(*y)]);
    let mut outputs = vec![(a.out.clone(), csv_bytes(&["value", "x", "y"], rows)?)];
    if let Some(p) = &a.covariance {
        let mut header = vec!["value"];
        header.extend(ValueId::ALL.iter().map(|v| v.name()));
        let rows = ValueId::ALL.iter().zip(cov.iter()).map(|(v, r)| {
            let mut row = vec![v.name().to_string()];
            row.extend(r.iter().map(|x| format_score(*x)));
            row
        });
        outputs.push((p.clone(), csv_bytes(&header, rows)?));
    }
    if let Some(p) = &a.plot {
        outputs.push((p.clone(), plot::mds_scatter(&points, "Value covariance, classical MDS")?.into_bytes()));
    }
    Ok(Run { inputs: vec![a.profiles.clone()], outputs, config: snapshot(a), ..Default::default() })
}

fn agree_features(a: &AgreeFeaturesArgs) -> Result<Run, CliError> {
    let instances = load_pairs(&a.agreement, a.allow_self_reply)?;
    let mut inputs = vec![a.agreement.clone()];
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| {
            CliError::Usage(format!("--kind {} needs {flag}", a.kind.context().map_or("none", ContextKind::as_str)))
        })
    };
    let mut profiles = None;
    let mut user_features = None;
    let mut user_posts = None;
    let mut lexicon = None;
    let mut vectorizer = None;
    match a.kind.context() {
        Some(ContextKind::ValueProfile) => {
            let p = need(&a.profiles, "--profiles")?;
            profiles = Some(load_profiles(&p)?);
            inputs.push(p);
        }
        Some(ContextKind::UserFeatures) => {
            let p = need(&a.user_features, "--user-features")?;
            user_features = Some(read_user_features(open(&p)?)?);
            inputs.push(p);
        }
        Some(ContextKind::Centroid) => {
            let c = need(&a.comments, "--comments")?;
            let l = need(&a.lexicon, "--lexicon")?;
            let comments = load_corpus(&c)?;
            let texts: Vec<&str> = comments.iter().map(|c| c.text.as_str()).collect();
            vectorizer = Some(TfidfVectorizer::fit(&texts, a.vocab)?);
            let mut posts: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for c in &comments {
                posts.entry(c.author.clone()).or_default().push(c.text.clone());
            }
            user_posts = Some(posts);
            lexicon = Some(ValueLexicon::load(&l)?);
            inputs.extend([c, l]);
        }
        Some(ContextKind::Noise) | None => {}
    }
    let sources = ContextSources {
        profiles: profiles.as_ref(),
        user_features: user_features.as_ref(),
        user_posts: user_posts.as_ref(),
        lexicon: lexicon.as_ref(),
        centroid_vectorizer: vectorizer.as_ref(),
    };
    let cfg = BundleConfig { kind: a.kind.context(), vocab_size: a.vocab, seed: a.seed };
    let set = build_bundles(&instances, &sources, &cfg)?;
    if set.report.dropped_missing_user > 0 {
        log::info!(
            "{} of {} instances dropped for missing user context",
            set.report.dropped_missing_user,
            set.report.input
        );
    }
    let mut out = Vec::new();
    write_bundles(&mut out, &set)?;
    Ok(Run {
        inputs,
        outputs: vec![(a.out.clone(), out), (sibling(&a.out, ".report.json"), json_bytes(&set.report)?)],
        config: snapshot(a),
        ..Default::default()
    })
}

fn model_name(kind: Option<ContextKind>) -> String {
    match kind {
        None => "tfidf".to_string(),
        Some(k) => format!("tfidf+{}", k.symbol()),
    }
}

fn agree_train(a: &AgreeTrainArgs) -> Result<Run, CliError> {
    let want = match a.eval_split {
        EvalSplit::Val => Split::Val,
        EvalSplit::Test => Split::Test,
    };
    let cfg = LogRegConfig { l2: a.l2, lr: a.lr, epochs: a.epochs, seed: a.seed };
    let mut loaded = Vec::new();
    for path in &a.bundles {
        let (header, bundles) = read_bundles(open(path)?)?;
        loaded.push((path, header, bundles));
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut text_f1 = None;
    for (i, (path, header, bundles)) in loaded.iter().enumerate() {
        let train: Vec<_> = bundles.iter().filter(|b| b.split == Split::Train).collect();
        let eval: Vec<_> = bundles.iter().filter(|b| b.split == want).collect();
        if train.is_empty() || eval.is_empty() {
            return Err(CliError::Invalid(format!("{}: empty train or evaluation split", path.display())));
        }
        let truth: Vec<Label> = eval.iter().map(|b| b.label).collect();
        if i == 0 {
            let train_labels: Vec<Label> = train.iter().map(|b| b.label).collect();
            let maj = majority_label(&train_labels)?;
            let scores = evaluate(&truth, &vec![maj; truth.len()])?;
            rows.push(ResultRow { model: "majority".into(), scores, delta_f1: None });
        }
        let x: Vec<_> = train.iter().map(|b| bundle_row(b, header.text_dim)).collect();
        let y: Vec<Label> = train.iter().map(|b| b.label).collect();
        let model = LogReg::fit(&x, &y, row_dim(header.text_dim, header.context_dim), &cfg)?;
        let pred: Vec<Label> = eval.iter().map(|b| model.predict(&bundle_row(b, header.text_dim))).collect();
        let scores = evaluate(&truth, &pred)?;
        if header.kind.is_none() && text_f1.is_none() {
            text_f1 = Some(scores.f1);
        }
        rows.push(ResultRow { model: model_name(header.kind), scores, delta_f1: None });
    }
    if let Some(reference) = text_f1 {
        for r in rows.iter_mut().filter(|r| r.model.starts_with("tfidf+")) {
            r.delta_f1 = Some(r.scores.f1 - reference);
        }
    }
    let mut out = Vec::new();
    write_results_csv(&mut out, &rows)?;
    let mut outputs = vec![(a.out.clone(), out)];
    if let Some(p) = &a.plot {
        let bars: Vec<_> = rows
            .iter()
            .map(|r| (r.model.clone(), r.scores.f1, r.delta_f1.map(|d| DeltaSymbol::classify(d).as_str().to_string())))
            .collect();
        outputs.push((p.clone(), plot::f1_bars(&bars, "Agreement classification F1")?.into_bytes()));
    }
    Ok(Run { inputs: a.bundles.clone(), outputs, config: snapshot(a), ..Default::default() })
}

fn report(a: &ReportArgs) -> Result<Run, CliError> {
    let mut rdr = csv::Reader::from_reader(open(&a.input)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Invalid(format!("{}: missing column {name:?}", a.input.display())))
    };
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    let num =
        |s: &str| s.parse::<f64>().map_err(|_| CliError::Invalid(format!("{}: bad number {s:?}", a.input.display())));
    let svg = match a.kind {
        PlotKind::BfHist => {
            let c = col("bf10")?;
            let bfs = records.iter().filter(|r| !r[c].is_empty()).map(|r| num(&r[c])).collect::<Result<Vec<_>, _>>()?;
            plot::bf_hist(&bfs, "BF10 across the test grid")?
        }
        PlotKind::MdsScatter => {
            let (cv, cx, cy) = (col("value")?, col("x")?, col("y")?);
            let pts = records
                .iter()
                .map(|r| Ok((r[cv].to_string(), num(&r[cx])?, num(&r[cy])?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            plot::mds_scatter(&pts, "Value covariance, classical MDS")?
        }
        PlotKind::F1Bars => {
            let (cm, cf, cs) = (col("model")?, col("F1")?, col("symbol")?);
            let bars = records
                .iter()
                .map(|r| Ok((r[cm].to_string(), num(&r[cf])?, Some(r[cs].to_string()).filter(|s| !s.is_empty()))))
                .collect::<Result<Vec<_>, CliError>>()?;
            plot::f1_bars(&bars, "Agreement classification F1")?
        }
    };
    Ok(Run {
        inputs: vec![a.input.clone()],
        outputs: vec![(a.out.clone(), svg.into_bytes())],
        config: snapshot(a),
        ..Default::default()
    })
}
