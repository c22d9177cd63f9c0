//! Profile similarity metrics.
//!
//! All metrics take two ten-dimensional score vectors. Low scores indicate
//! value conflict for every metric except Manhattan distance, where high
//! scores do.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value_model::{CircumplexKernel, NUM_VALUES};

/// Number of unordered value pairs, C(10, 2).
pub const NUM_PAIRS: usize = NUM_VALUES * (NUM_VALUES - 1) / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tau,
    Md,
    Co,
    Wc,
    Rho,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Tau, Metric::Md, Metric::Co, Metric::Wc, Metric::Rho];
    /// The four metrics of the main hypothesis grid.
    pub const GRID: [Metric; 4] = [Metric::Tau, Metric::Md, Metric::Co, Metric::Wc];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Tau => "tau",
            Metric::Md => "md",
            Metric::Co => "co",
            Metric::Wc => "wc",
            Metric::Rho => "rho",
        }
    }

    pub fn higher_means_conflict(self) -> bool {
        self == Metric::Md
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tau" => Ok(Metric::Tau),
            "md" => Ok(Metric::Md),
            "co" => Ok(Metric::Co),
            "wc" => Ok(Metric::Wc),
            "rho" => Ok(Metric::Rho),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityResult {
    pub metric: Metric,
    pub score: f64,
    pub higher_means_conflict: bool,
    /// Set when a profile is constant, so the rank metric carries no ordering information.
    pub constant_profile: bool,
}

impl SimilarityResult {
    fn new(metric: Metric, score: f64) -> Self {
        SimilarityResult {
            metric,
            score,
            higher_means_conflict: metric.higher_means_conflict(),
            constant_profile: false,
        }
    }
}

/// Denominator convention for Kendall tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauVariant {
    /// `1 - 2 * discordant / 45`; ties count as neither concordant nor discordant.
    #[default]
    Discordant,
    /// Tie-corrected tau-b.
    B,
}

impl FromStr for TauVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "discordant" | "a" | "default" => Ok(TauVariant::Discordant),
            "b" => Ok(TauVariant::B),
            other => Err(Error::InvalidParameter(format!("unknown tau variant {other:?}"))),
        }
    }
}

/// 1-based ranks by score descending; tied scores share their mean rank.
pub fn descending_ranks(x: &[f64; NUM_VALUES]) -> [f64; NUM_VALUES] {
    let mut order: [usize; NUM_VALUES] = std::array::from_fn(|i| i);
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut ranks = [0.0; NUM_VALUES];
    let mut start = 0;
    while start < NUM_VALUES {
        let mut end = start + 1;
        while end < NUM_VALUES && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

fn is_constant(x: &[f64; NUM_VALUES]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Pair counts over all 45 value pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: usize,
    pub discordant: usize,
    pub tied_v: usize,
    pub tied_w: usize,
}

pub fn pair_counts(v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES]) -> PairCounts {
    let rv = descending_ranks(v);
    let rw = descending_ranks(w);
    let mut c = PairCounts::default();
    for i in 0..NUM_VALUES {
        for j in i + 1..NUM_VALUES {
            let a = rv[i].total_cmp(&rv[j]);
            let b = rw[i].total_cmp(&rw[j]);
            use std::cmp::Ordering::Equal;
            match (a, b) {
                (Equal, Equal) => {
                    c.tied_v += 1;
                    c.tied_w += 1;
                }
                (Equal, _) => c.tied_v += 1,
                (_, Equal) => c.tied_w += 1,
                (a, b) if a == b => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

pub fn kendall_tau(v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES], variant: TauVariant) -> Result<SimilarityResult> {
    let c = pair_counts(v, w);
    let constant = is_constant(v) || is_constant(w);
    let score = match variant {
        TauVariant::Discordant => 1.0 - 2.0 * c.discordant as f64 / NUM_PAIRS as f64,
        TauVariant::B => {
            let n0 = NUM_PAIRS as f64;
            let denom = ((n0 - c.tied_v as f64) * (n0 - c.tied_w as f64)).sqrt();
            if denom == 0.0 {
                return Err(Error::UndefinedMetric { metric: "tau-b", reason: "constant profile".into() });
            }
            (c.concordant as f64 - c.discordant as f64) / denom
        }
    };
    Ok(SimilarityResult { constant_profile: constant, ..SimilarityResult::new(Metric::Tau, score) })
}

pub fn manhattan(v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES]) -> SimilarityResult {
    let d = v.iter().zip(w).map(|(a, b)| (a - b).abs()).sum();
    SimilarityResult::new(Metric::Md, d)
}

pub fn cosine(v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES]) -> Result<SimilarityResult> {
    let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nv == 0.0 || nw == 0.0 {
        return Err(Error::UndefinedMetric { metric: "cosine", reason: "zero-norm profile".into() });
    }
    Ok(SimilarityResult::new(Metric::Co, (dot / (nv * nw)).clamp(-1.0, 1.0)))
}

/// Cosine under the bilinear form induced by the circumplex kernel.
pub fn weighted_cosine(
    v: &[f64; NUM_VALUES],
    w: &[f64; NUM_VALUES],
    kernel: &CircumplexKernel,
) -> Result<SimilarityResult> {
    let vv = kernel.bilinear(v, v);
    let ww = kernel.bilinear(w, w);
    if !(vv > 0.0 && ww > 0.0) {
        return Err(Error::UndefinedMetric { metric: "weighted cosine", reason: "non-positive kernel norm".into() });
    }
    let vw = kernel.bilinear(v, w);
    Ok(SimilarityResult::new(Metric::Wc, (vw / (vv.sqrt() * ww.sqrt())).clamp(-1.0, 1.0)))
}

pub fn spearman_rho(v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES]) -> Result<SimilarityResult> {
    if is_constant(v) || is_constant(w) {
        return Err(Error::UndefinedMetric { metric: "spearman rho", reason: "constant profile".into() });
    }
    let rv = descending_ranks(v);
    let rw = descending_ranks(w);
    Ok(SimilarityResult::new(Metric::Rho, pearson(&rv, &rw).clamp(-1.0, 1.0)))
}

fn pearson(x: &[f64; NUM_VALUES], y: &[f64; NUM_VALUES]) -> f64 {
    let n = NUM_VALUES as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Metric settings shared by every pair evaluated in one analysis.
#[derive(Debug, Clone)]
pub struct SimilarityConfig {
    pub kernel: CircumplexKernel,
    pub tau_variant: TauVariant,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            kernel: CircumplexKernel::new(1.0).expect("sigma 1 is valid"),
            tau_variant: TauVariant::default(),
        }
    }
}

impl SimilarityConfig {
    pub fn compute(&self, metric: Metric, v: &[f64; NUM_VALUES], w: &[f64; NUM_VALUES]) -> Result<SimilarityResult> {
        match metric {
            Metric::Tau => kendall_tau(v, w, self.tau_variant),
            Metric::Md => Ok(manhattan(v, w)),
            Metric::Co => cosine(v, w),
            Metric::Wc => weighted_cosine(v, w, &self.kernel),
            Metric::Rho => spearman_rho(v, w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value_model::{circular_distance, ValueId};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spike(i: usize) -> [f64; NUM_VALUES] {
        let mut x = [0.0; NUM_VALUES];
        x[i] = 1.0;
        x
    }

    const STRICT: [f64; NUM_VALUES] = [0.3, 0.2, 0.15, 0.1, 0.08, 0.06, 0.05, 0.03, 0.02, 0.01];

    #[test]
    fn ranks_with_ties() {
        let r = descending_ranks(&[3.0, 1.0, 3.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(r[0], 1.5);
        assert_eq!(r[2], 1.5);
        assert_eq!(r[3], 3.0);
        assert_eq!(r[1], 4.0);
        assert_eq!(r[4], 7.5);
    }

    #[test]
    fn tau_endpoints() {
        let v = STRICT;
        let mut rev = STRICT;
        rev.reverse();
        let d = TauVariant::Discordant;
        assert_eq!(kendall_tau(&v, &v, d).unwrap().score, 1.0);
        assert_eq!(kendall_tau(&v, &rev, d).unwrap().score, -1.0);
        assert_eq!(kendall_tau(&v, &rev, TauVariant::B).unwrap().score, -1.0);
    }

    #[test]
    fn tau_constant_profile() {
        let c = [0.1; NUM_VALUES];
        let r = kendall_tau(&c, &STRICT, TauVariant::Discordant).unwrap();
        assert_eq!(r.score, 1.0);
        assert!(r.constant_profile);
        assert!(kendall_tau(&c, &STRICT, TauVariant::B).is_err());
    }

    #[test]
    fn tau_ties_contribute_nothing() {
        // v ties positions 0 and 1; w orders them oppositely to nothing
        let mut v = STRICT;
        v[1] = v[0];
        let mut w = STRICT;
        w.swap(0, 1);
        assert_eq!(kendall_tau(&v, &w, TauVariant::Discordant).unwrap().score, 1.0);
        // swapping two strict neighbours gives one discordant pair
        assert_abs_diff_eq!(kendall_tau(&STRICT, &w, TauVariant::Discordant).unwrap().score, 1.0 - 2.0 / 45.0);
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(&STRICT, &STRICT).score, 0.0);
        assert_eq!(manhattan(&spike(1), &spike(7)).score, 2.0);
        assert!(manhattan(&spike(1), &spike(7)).higher_means_conflict);
    }

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine(&STRICT, &STRICT).unwrap().score, 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&spike(0), &spike(3)).unwrap().score, 0.0);
        let double = STRICT.map(|x| 2.0 * x);
        assert_abs_diff_eq!(cosine(&STRICT, &double).unwrap().score, 1.0, epsilon = 1e-15);
        assert!(cosine(&[0.0; NUM_VALUES], &STRICT).is_err());
    }

    #[test]
    fn weighted_cosine_examples() {
        let k = CircumplexKernel::new(1.0).unwrap();
        assert_abs_diff_eq!(weighted_cosine(&STRICT, &STRICT, &k).unwrap().score, 1.0, epsilon = 1e-15);
        let adj = weighted_cosine(&spike(3), &spike(4), &k).unwrap().score;
        assert_abs_diff_eq!(adj, (-0.5f64).exp(), epsilon = 1e-12);
        let opp = weighted_cosine(&spike(0), &spike(5), &k).unwrap().score;
        assert_abs_diff_eq!(opp, (-12.5f64).exp(), epsilon = 1e-15);
        assert!(opp < adj);
        assert!(weighted_cosine(&[0.0; NUM_VALUES], &STRICT, &k).is_err());
    }

    #[test]
    fn weighted_cosine_decreases_with_distance() {
        let k = CircumplexKernel::new(1.0).unwrap();
        for a in 0..NUM_VALUES {
            let mut by_d = [f64::NAN; 6];
            for b in 0..NUM_VALUES {
                let d = circular_distance(ValueId::ALL[a], ValueId::ALL[b]);
                by_d[d] = weighted_cosine(&spike(a), &spike(b), &k).unwrap().score;
            }
            for d in 1..6 {
                assert!(by_d[d] < by_d[d - 1]);
            }
        }
    }

    #[test]
    fn spearman_examples() {
        let mut rev = STRICT;
        rev.reverse();
        assert_abs_diff_eq!(spearman_rho(&STRICT, &STRICT).unwrap().score, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman_rho(&STRICT, &rev).unwrap().score, -1.0, epsilon = 1e-15);
        assert!(spearman_rho(&[0.2; NUM_VALUES], &STRICT).is_err());
    }

    #[test]
    fn metric_parse() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("kl".parse::<Metric>().is_err());
    }

    fn profile() -> impl Strategy<Value = [f64; NUM_VALUES]> {
        prop_oneof![
            prop::array::uniform10(0u32..6).prop_map(|c| c.map(|x| x as f64 + 0.5)),
            prop::array::uniform10(-1.0f64..1.0),
        ]
    }

    proptest! {
        #[test]
        fn metrics_symmetric(v in profile(), w in profile()) {
            let cfg = SimilarityConfig::default();
            for m in Metric::ALL {
                let a = cfg.compute(m, &v, &w);
                let b = cfg.compute(m, &w, &v);
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert!((a.score - b.score).abs() <= 1e-12, "{m}"),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "asymmetric failure for {m}"),
                }
            }
        }

        #[test]
        fn scale_invariance(v in profile(), w in profile(), alpha in 0.01f64..100.0) {
            let cfg = SimilarityConfig::default();
            let scaled = v.map(|x| x * alpha);
            for m in [Metric::Tau, Metric::Rho] {
                if let (Ok(a), Ok(b)) = (cfg.compute(m, &v, &w), cfg.compute(m, &scaled, &w)) {
                    prop_assert_eq!(a.score, b.score);
                }
            }
            for m in [Metric::Co, Metric::Wc] {
                if let (Ok(a), Ok(b)) = (cfg.compute(m, &v, &w), cfg.compute(m, &scaled, &w)) {
                    prop_assert!((a.score - b.score).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn identity_kernel_reduces_to_cosine(v in profile(), w in profile()) {
            let id = CircumplexKernel::identity();
            if let (Ok(a), Ok(b)) = (cosine(&v, &w), weighted_cosine(&v, &w, &id)) {
                prop_assert!((a.score - b.score).abs() <= 1e-12);
            }
        }

        #[test]
        fn manhattan_triangle(u in profile(), v in profile(), w in profile()) {
            prop_assert!(manhattan(&u, &w).score <= manhattan(&u, &v).score + manhattan(&v, &w).score + 1e-12);
        }

        #[test]
        fn ranges(v in profile(), w in profile()) {
            let cfg = SimilarityConfig::default();
            for m in Metric::ALL {
                if let Ok(r) = cfg.compute(m, &v, &w) {
                    if m == Metric::Md {
                        prop_assert!(r.score >= 0.0);
                    } else {
                        prop_assert!((-1.0..=1.0).contains(&r.score));
                    }
                }
            }
        }

        #[test]
        fn nonnegative_normalized_ranges(c in prop::array::uniform10(0u32..20), d in prop::array::uniform10(0u32..20)) {
            let norm = |c: [u32; 10]| {
                let t: u32 = c.iter().sum();
                c.map(|x| x as f64 / t.max(1) as f64)
            };
            prop_assume!(c.iter().any(|&x| x > 0) && d.iter().any(|&x| x > 0));
            let (v, w) = (norm(c), norm(d));
            let cfg = SimilarityConfig::default();
            prop_assert!(manhattan(&v, &w).score <= 2.0 + 1e-12);
            for m in [Metric::Co, Metric::Wc] {
                let s = cfg.compute(m, &v, &w).unwrap().score;
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
