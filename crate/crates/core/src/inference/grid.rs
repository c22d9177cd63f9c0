//! Value conflict vs. disagreement: group construction, group means, and the
//! forum x metric x threshold grid of Bayes factor tests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::bayes::{jzs_bf10, BayesFactorResult, EvidenceBin, Tail, DEFAULT_PRIOR_SCALE};
use crate::corpus::{AgreementInstance, Label};
use crate::error::{Error, Result};
use crate::profiles::{normalize, ProfileSource, ValueProfile};
use crate::similarity::{kendall_tau, Metric, SimilarityConfig};
use crate::value_model::{ValueId, NUM_VALUES};

/// Default profile thresholds.
pub const DEFAULT_THRESHOLDS: [u64; 5] = [1, 10, 50, 200, 500];

/// (parent author, child author)
pub type UserPair = (String, String);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Groups {
    /// Disagreeing pairs.
    pub minus: Vec<UserPair>,
    /// Agreeing pairs.
    pub plus: Vec<UserPair>,
}

/// Drops neutral pairs and splits the rest by label. Duplicates are kept.
pub fn split_groups<'a>(instances: impl IntoIterator<Item = &'a AgreementInstance>) -> Groups {
    let mut g = Groups::default();
    for inst in instances {
        let pair = (inst.parent_author.clone(), inst.child_author.clone());
        match inst.label {
            Label::Agree => g.plus.push(pair),
            Label::Disagree => g.minus.push(pair),
            Label::Neutral => {}
        }
    }
    g
}

/// Profiles prepared for one threshold: survey profiles pass through, raw
/// estimated profiles must have at least `l` mentions and are normalized.
pub fn prepare_profiles(profiles: &BTreeMap<String, ValueProfile>, l: u64) -> BTreeMap<String, [f64; NUM_VALUES]> {
    let mut out = BTreeMap::new();
    for (user, p) in profiles {
        match p.source {
            ProfileSource::Survey => {
                out.insert(user.clone(), p.scores);
            }
            ProfileSource::Vpe if p.counts.is_some() => {
                if p.total_mentions >= l {
                    if let Ok(n) = normalize(p) {
                        out.insert(user.clone(), n.scores);
                    }
                }
            }
            ProfileSource::Vpe => {
                // already-normalized estimated profile; threshold on its stored total
                if p.total_mentions >= l {
                    out.insert(user.clone(), p.scores);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupScores {
    pub theta: f64,
    pub scores: Vec<f64>,
    /// Pairs with a profile missing after thresholding.
    pub skipped_missing: usize,
    /// Pairs for which the metric is undefined (e.g. zero-norm cosine).
    pub skipped_undefined: usize,
}

impl GroupScores {
    pub fn used(&self) -> usize {
        self.scores.len()
    }
}

/// Mean similarity over the pairs whose users both have a prepared profile.
pub fn group_scores(
    group: &[UserPair],
    prepared: &BTreeMap<String, [f64; NUM_VALUES]>,
    metric: Metric,
    cfg: &SimilarityConfig,
) -> Result<GroupScores> {
    let mut scores = Vec::with_capacity(group.len());
    let (mut missing, mut undefined) = (0, 0);
    for (a, b) in group {
        let (Some(v), Some(w)) = (prepared.get(a), prepared.get(b)) else {
            missing += 1;
            continue;
        };
        match cfg.compute(metric, v, w) {
            Ok(r) => scores.push(r.score),
            Err(_) => undefined += 1,
        }
    }
    if scores.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let theta = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(GroupScores { theta, scores, skipped_missing: missing, skipped_undefined: undefined })
}

/// Convenience wrapper returning `(theta, used)`.
pub fn group_mean(
    group: &[UserPair],
    profiles: &BTreeMap<String, ValueProfile>,
    metric: Metric,
    l: u64,
    cfg: &SimilarityConfig,
) -> Result<(f64, usize)> {
    let prepared = prepare_profiles(profiles, l);
    let g = group_scores(group, &prepared, metric, cfg)?;
    Ok((g.theta, g.used()))
}

/// How the alternative's direction is chosen per metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Disagreeing pairs are less similar: `higher` for Manhattan distance,
    /// `lower` for every other metric.
    #[default]
    Auto,
    Fixed(Tail),
}

impl TailPolicy {
    pub fn tail_for(self, metric: Metric) -> Tail {
        match self {
            TailPolicy::Auto if metric.higher_means_conflict() => Tail::Higher,
            TailPolicy::Auto => Tail::Lower,
            TailPolicy::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Empty means every forum present in the instances.
    pub forums: Vec<String>,
    pub metrics: Vec<Metric>,
    pub thresholds: Vec<u64>,
    pub tail_policy: TailPolicy,
    pub prior_scale: f64,
    pub similarity: SimilarityConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            forums: Vec::new(),
            metrics: Metric::GRID.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            tail_policy: TailPolicy::Auto,
            prior_scale: DEFAULT_PRIOR_SCALE,
            similarity: SimilarityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Tested(BayesFactorResult),
    Skipped { reason: String, n_minus: usize, n_plus: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub forum: String,
    pub metric: Metric,
    pub threshold: u64,
    pub outcome: CellOutcome,
}

impl GridCell {
    pub fn bf10(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Tested(r) => Some(r.bf10),
            CellOutcome::Skipped { .. } => None,
        }
    }
}

/// One cell per (forum, metric, threshold), sorted by forum, then metric,
/// then threshold. Cells that cannot be tested carry the reason.
pub fn run_grid(
    instances: &[AgreementInstance],
    profiles: &BTreeMap<String, ValueProfile>,
    cfg: &GridConfig,
) -> Vec<GridCell> {
    let forums: BTreeSet<String> = if cfg.forums.is_empty() {
        instances.iter().map(|i| i.forum.clone()).collect()
    } else {
        cfg.forums.iter().cloned().collect()
    };
    let metrics: BTreeSet<Metric> = cfg.metrics.iter().copied().collect();
    let thresholds: BTreeSet<u64> = cfg.thresholds.iter().copied().collect();
    let prepared: BTreeMap<u64, _> = thresholds.iter().map(|&l| (l, prepare_profiles(profiles, l))).collect();

    let mut jobs: Vec<(&String, &Groups, Metric, u64)> = Vec::new();
    let groups: Vec<Groups> = forums.iter().map(|f| split_groups(instances.iter().filter(|i| &i.forum == f))).collect();
    for (forum, g) in forums.iter().zip(&groups) {
        for &metric in &metrics {
            for &l in &thresholds {
                jobs.push((forum, g, metric, l));
            }
        }
    }
    // cells are independent; indexed collection keeps the output order fixed
    jobs.into_par_iter()
        .map(|(forum, groups, metric, l)| {
            let outcome = run_cell(groups, &prepared[&l], metric, cfg);
            GridCell { forum: forum.clone(), metric, threshold: l, outcome }
        })
        .collect()
}

fn run_cell(
    groups: &Groups,
    prepared: &BTreeMap<String, [f64; NUM_VALUES]>,
    metric: Metric,
    cfg: &GridConfig,
) -> CellOutcome {
    let minus = group_scores(&groups.minus, prepared, metric, &cfg.similarity);
    let plus = group_scores(&groups.plus, prepared, metric, &cfg.similarity);
    let (minus, plus) = match (minus, plus) {
        (Ok(m), Ok(p)) => (m, p),
        (m, p) => {
            let side = match (&m, &p) {
                (Err(_), Err(_)) => "both groups",
                (Err(_), _) => "disagree group",
                _ => "agree group",
            };
            return CellOutcome::Skipped {
                reason: format!("{side} empty after filtering"),
                n_minus: m.map_or(0, |g| g.used()),
                n_plus: p.map_or(0, |g| g.used()),
            };
        }
    };
    match jzs_bf10(&minus.scores, &plus.scores, cfg.tail_policy.tail_for(metric), cfg.prior_scale) {
        Ok(r) => CellOutcome::Tested(r),
        Err(e) => CellOutcome::Skipped { reason: e.to_string(), n_minus: minus.used(), n_plus: plus.used() },
    }
}

pub const GRID_COLUMNS: [&str; 11] =
    ["forum", "metric", "threshold", "n_minus", "n_plus", "theta_minus", "theta_plus", "t", "bf10", "bin", "note"];

/// Writes the grid as CSV. Skipped cells leave the statistics empty and give
/// the reason in `note`.
pub fn write_grid_csv<W: Write>(out: W, cells: &[GridCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_COLUMNS)?;
    for c in cells {
        let head = [c.forum.clone(), c.metric.to_string(), c.threshold.to_string()];
        let rest: [String; 8] = match &c.outcome {
            CellOutcome::Tested(r) => [
                r.n_minus.to_string(),
                r.n_plus.to_string(),
                format!("{:.10}", r.theta_minus),
                format!("{:.10}", r.theta_plus),
                format!("{:.10}", r.t_stat),
                format!("{:.10}", r.bf10),
                r.bin.as_str().to_string(),
                if r.bf10.is_infinite() {
                    format!("bf10 overflows f64; ln bf10 = {:.6}", r.log_bf10)
                } else {
                    String::new()
                },
            ],
            CellOutcome::Skipped { reason, n_minus, n_plus } => [
                n_minus.to_string(),
                n_plus.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "skipped".to_string(),
                reason.clone(),
            ],
        };
        w.write_record(head.iter().chain(rest.iter()))?;
    }
    w.flush().map_err(|e| Error::io("<grid>", e))?;
    Ok(())
}

/// Tested cells ranked by BF10, highest first, as `(bf10, forum, metric, threshold)`.
/// Ordering uses the log Bayes factor so overflowed cells still rank.
pub fn ranked(cells: &[GridCell]) -> Vec<(f64, &str, Metric, u64)> {
    let mut rows: Vec<_> = cells
        .iter()
        .filter_map(|c| match &c.outcome {
            CellOutcome::Tested(r) => Some((r.log_bf10, r.bf10, c.forum.as_str(), c.metric, c.threshold)),
            CellOutcome::Skipped { .. } => None,
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| (a.2, a.3, a.4).cmp(&(b.2, b.3, b.4))));
    rows.into_iter().map(|(_, bf, f, m, l)| (bf, f, m, l)).collect()
}

pub fn write_ranked_csv<W: Write>(out: W, cells: &[GridCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bf10", "forum", "metric", "threshold"])?;
    for (bf, forum, metric, l) in ranked(cells) {
        w.write_record([format!("{bf:.3}"), forum.to_string(), metric.to_string(), l.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<ranked>", e))?;
    Ok(())
}

/// Histogram bin edges on the BF10 axis; the outer bins are open-ended.
pub const BF_BIN_EDGES: [f64; 9] = [1.0 / 100.0, 1.0 / 30.0, 1.0 / 10.0, 1.0 / 3.0, 1.0, 3.0, 10.0, 30.0, 100.0];

/// Counts per bin: bin `i` holds values in `[edge[i-1], edge[i])`, bin 0 is
/// everything below the first edge and the last bin everything from the last edge.
pub fn bf_histogram(values: impl IntoIterator<Item = f64>) -> [usize; BF_BIN_EDGES.len() + 1] {
    let mut counts = [0; BF_BIN_EDGES.len() + 1];
    for v in values {
        let idx = BF_BIN_EDGES.iter().take_while(|&&e| v >= e).count();
        counts[idx] += 1;
    }
    counts
}

pub fn bin_counts(cells: &[GridCell]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for bin in [EvidenceBin::FavorsH0, EvidenceBin::Inconclusive, EvidenceBin::FavorsHa] {
        m.insert(bin.as_str(), 0);
    }
    let mut skipped = 0;
    for c in cells {
        match &c.outcome {
            CellOutcome::Tested(r) => *m.get_mut(r.bin.as_str()).expect("all bins present") += 1,
            CellOutcome::Skipped { .. } => skipped += 1,
        }
    }
    m.insert("skipped", skipped);
    m
}

/// Per-forum profile summary: the two most frequent values and the mean
/// pairwise Kendall tau among the participating users' profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSummary {
    pub forum: String,
    pub users: usize,
    pub top_values: Vec<ValueId>,
    pub mean_tau: Option<f64>,
}

pub fn domain_summaries(
    instances: &[AgreementInstance],
    profiles: &BTreeMap<String, ValueProfile>,
    l: u64,
    cfg: &SimilarityConfig,
) -> Vec<DomainSummary> {
    let prepared = prepare_profiles(profiles, l);
    let mut users_by_forum: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for inst in instances {
        let set = users_by_forum.entry(inst.forum.as_str()).or_default();
        for u in [&inst.parent_author, &inst.child_author] {
            if prepared.contains_key(u.as_str()) {
                set.insert(u.as_str());
            }
        }
    }
    users_by_forum
        .into_iter()
        .map(|(forum, users)| {
            let vecs: Vec<&[f64; NUM_VALUES]> = users.iter().map(|u| &prepared[*u]).collect();
            let mut totals = [0.0; NUM_VALUES];
            for v in &vecs {
                for (t, x) in totals.iter_mut().zip(v.iter()) {
                    *t += x;
                }
            }
            let mut order: Vec<ValueId> = ValueId::ALL.to_vec();
            order.sort_by(|a, b| totals[b.position()].total_cmp(&totals[a.position()]).then(a.cmp(b)));
            let top_values = if vecs.is_empty() { Vec::new() } else { order[..2].to_vec() };
            let mut sum = 0.0;
            let mut n = 0usize;
            for i in 0..vecs.len() {
                for j in i + 1..vecs.len() {
                    if let Ok(r) = kendall_tau(vecs[i], vecs[j], cfg.tau_variant) {
                        sum += r.score;
                        n += 1;
                    }
                }
            }
            DomainSummary {
                forum: forum.to_string(),
                users: vecs.len(),
                top_values,
                mean_tau: (n > 0).then(|| sum / n as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inst(id: &str, forum: &str, p: &str, c: &str, label: Label) -> AgreementInstance {
        AgreementInstance {
            id: id.into(),
            forum: forum.into(),
            parent_author: p.into(),
            child_author: c.into(),
            parent_text: String::new(),
            child_text: String::new(),
            label,
            timestamp: 0,
            self_reply: false,
        }
    }

    fn raw(user: &str, counts: [u64; NUM_VALUES]) -> (String, ValueProfile) {
        (user.to_string(), ValueProfile::from_counts(user, counts))
    }

    #[test]
    fn split_examples() {
        let xs = vec![
            inst("a", "f", "p", "c", Label::Agree),
            inst("b", "f", "p", "c", Label::Neutral),
            inst("c", "f", "q", "d", Label::Disagree),
            inst("d", "f", "q", "d", Label::Disagree),
        ];
        let g = split_groups(&xs);
        assert_eq!(g.plus, vec![("p".to_string(), "c".to_string())]);
        assert_eq!(g.minus.len(), 2);
        let neutral = vec![inst("b", "f", "p", "c", Label::Neutral)];
        assert_eq!(split_groups(&neutral), Groups::default());
    }

    #[test]
    fn group_mean_examples() {
        let cfg = SimilarityConfig::default();
        let mut a = [0; NUM_VALUES];
        a[0] = 10;
        let mut b = [0; NUM_VALUES];
        b[0] = 5;
        b[1] = 5;
        let mut low = [0; NUM_VALUES];
        low[0] = 1;
        let profiles: BTreeMap<_, _> = [raw("a", a), raw("b", b), raw("low", low)].into_iter().collect();
        // md between (1,0,..) and (.5,.5,..) is 1.0
        let g = vec![("a".to_string(), "b".to_string())];
        let (theta, used) = group_mean(&g, &profiles, Metric::Md, 5, &cfg).unwrap();
        assert_abs_diff_eq!(theta, 1.0, epsilon = 1e-15);
        assert_eq!(used, 1);

        let g = vec![("a".to_string(), "b".to_string()), ("a".to_string(), "low".to_string())];
        let (_, used) = group_mean(&g, &profiles, Metric::Md, 5, &cfg).unwrap();
        assert_eq!(used, 1);
        let (theta, used) = group_mean(&g, &profiles, Metric::Md, 1, &cfg).unwrap();
        assert_eq!(used, 2);
        assert_abs_diff_eq!(theta, 0.5, epsilon = 1e-15);

        let g = vec![("a".to_string(), "low".to_string())];
        assert!(matches!(group_mean(&g, &profiles, Metric::Md, 5, &cfg), Err(Error::EmptyGroup)));
    }

    #[test]
    fn tail_policy() {
        assert_eq!(TailPolicy::Auto.tail_for(Metric::Md), Tail::Higher);
        for m in [Metric::Tau, Metric::Co, Metric::Wc, Metric::Rho] {
            assert_eq!(TailPolicy::Auto.tail_for(m), Tail::Lower);
        }
        assert_eq!(TailPolicy::Fixed(Tail::TwoSided).tail_for(Metric::Md), Tail::TwoSided);
    }

    #[test]
    fn single_forum_grid_has_twenty_cells() {
        let xs = vec![inst("a", "climate", "p", "c", Label::Agree)];
        let cells = run_grid(&xs, &BTreeMap::new(), &GridConfig::default());
        assert_eq!(cells.len(), 20);
        assert!(cells.iter().all(|c| matches!(c.outcome, CellOutcome::Skipped { .. })));
        let mut sorted = cells.clone();
        sorted.sort_by_key(|c| (c.metric, c.threshold));
        assert_eq!(sorted, cells);
    }

    #[test]
    fn histogram_edges() {
        let h = bf_histogram([0.001, 0.2, 1.0 / 3.0, 1.0, 2.9, 3.0, 500.0]);
        assert_eq!(h[0], 1);
        assert_eq!(h[3], 1); // 0.2 in [1/10, 1/3)
        assert_eq!(h[4], 1); // 1/3 in [1/3, 1)
        assert_eq!(h[5], 2); // 1.0, 2.9
        assert_eq!(h[6], 1); // 3.0
        assert_eq!(h[9], 1);
        assert_eq!(h.iter().sum::<usize>(), 7);
    }

    #[test]
    fn survey_profiles_skip_threshold() {
        let mut profiles = BTreeMap::new();
        profiles.insert(
            "s".to_string(),
            ValueProfile::from_scores("s", ProfileSource::Survey, [0.1, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        );
        assert!(prepare_profiles(&profiles, 500).contains_key("s"));
    }
}
