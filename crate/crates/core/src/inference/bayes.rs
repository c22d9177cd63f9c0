//! Default (JZS) Bayes factor for a two-sample t test.
//!
//! The effect size `delta` has a Cauchy(0, r) prior, written as a scale
//! mixture `delta | g ~ N(0, g r^2)` with `g ~ InvGamma(1/2, 1/2)`. Given the
//! pooled two-sample t statistic with `nu = n_x + n_y - 2` degrees of freedom
//! and effective sample size `N = n_x n_y / (n_x + n_y)`, the marginal
//! likelihood ratio for fixed `g` has closed form and BF10 is a single
//! integral over `g`. It is evaluated on `z = g / (1 + g)` in `(0, 1)`.
//!
//! Directional tests truncate the prior to one sign of `delta`. For fixed `g`
//! the posterior of the raw mean difference is Student t with `nu + 1` degrees
//! of freedom, which gives the posterior sign probability in closed form:
//!
//! `P(delta < 0 | g, data) = T_{nu+1}(-t sqrt(N k (nu+1)) / sqrt(nu (1 + N k) + t^2))`, `k = g r^2`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::quadrature::{integrate, QuadratureConfig};
use crate::error::{Error, Result};

/// Default prior scale, sqrt(2)/2.
pub const DEFAULT_PRIOR_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Direction of the alternative hypothesis on `mean(x) - mean(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `mean(x) < mean(y)`
    Lower,
    /// `mean(x) > mean(y)`
    Higher,
    TwoSided,
}

impl Tail {
    pub fn as_str(self) -> &'static str {
        match self {
            Tail::Lower => "lower",
            Tail::Higher => "higher",
            Tail::TwoSided => "two_sided",
        }
    }
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lower" | "less" => Ok(Tail::Lower),
            "higher" | "greater" => Ok(Tail::Higher),
            "two_sided" | "two" => Ok(Tail::TwoSided),
            other => Err(Error::InvalidParameter(format!("unknown tail {other:?}"))),
        }
    }
}

/// Evidence category for a Bayes factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceBin {
    FavorsH0,
    Inconclusive,
    FavorsHa,
}

impl EvidenceBin {
    /// `> 3` favors the alternative, `< 1/3` the null; the boundaries
    /// themselves are inconclusive.
    pub fn classify(bf10: f64) -> EvidenceBin {
        if bf10 > 3.0 {
            EvidenceBin::FavorsHa
        } else if bf10 < 1.0 / 3.0 {
            EvidenceBin::FavorsH0
        } else {
            EvidenceBin::Inconclusive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceBin::FavorsH0 => "favors_H0",
            EvidenceBin::Inconclusive => "inconclusive",
            EvidenceBin::FavorsHa => "favors_Ha",
        }
    }
}

/// Pooled-variance two-sample t statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSampleT {
    pub t: f64,
    pub df: f64,
    pub effective_n: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub mean_x: f64,
    pub mean_y: f64,
}

pub fn two_sample_t(x: &[f64], y: &[f64]) -> Result<TwoSampleT> {
    let (nx, ny) = (x.len(), y.len());
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidInput(format!("each sample needs at least 2 values, got {nx} and {ny}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples contain non-finite values".into()));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let ss = |s: &[f64], m: f64| s.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let df = (nx + ny - 2) as f64;
    let pooled = (ss(x, mx) + ss(y, my)) / df;
    let scale = mx.abs().max(my.abs()).max(1.0);
    if !(pooled > (scale * 1e-15).powi(2)) {
        return Err(Error::DegenerateVariance(format!("pooled variance {pooled} of samples with n = {nx}, {ny}")));
    }
    let se = (pooled * (1.0 / nx as f64 + 1.0 / ny as f64)).sqrt();
    Ok(TwoSampleT {
        t: (mx - my) / se,
        df,
        effective_n: (nx * ny) as f64 / (nx + ny) as f64,
        n_x: nx,
        n_y: ny,
        mean_x: mx,
        mean_y: my,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesFactorResult {
    /// Infinite when the evidence overflows `f64`; `log_bf10` stays exact.
    pub bf10: f64,
    pub log_bf10: f64,
    pub t_stat: f64,
    pub df: f64,
    /// Size and mean of the first sample (the disagree group in hypothesis tests).
    pub n_minus: usize,
    pub theta_minus: f64,
    /// Size and mean of the second sample (the agree group).
    pub n_plus: usize,
    pub theta_plus: f64,
    pub tail: Tail,
    pub prior_scale: f64,
    pub bin: EvidenceBin,
}

/// Log of the two-sided integrand relative to the null likelihood, at `g`.
#[inline]
fn log_integrand(g: f64, t2: f64, nu: f64, n_eff: f64, r2: f64) -> f64 {
    let a = 1.0 + n_eff * g * r2;
    let half_nu1 = 0.5 * (nu + 1.0);
    -0.5 * a.ln() - half_nu1 * (1.0 + t2 / (a * nu)).ln() + half_nu1 * (1.0 + t2 / nu).ln()
        - 0.5 * (2.0 * PI).ln()
        - 1.5 * g.ln()
        - 0.5 / g
}

/// Two-sided integrand over `g` (prior density times likelihood ratio), exposed
/// for independent checks.
pub fn jzs_integrand(g: f64, t: f64, nu: f64, effective_n: f64, r: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    log_integrand(g, t * t, nu, effective_n, r * r).exp()
}

/// Posterior probability of the effect sign selected by `tail`, conditional on `g`.
pub fn sign_probability(g: f64, t: f64, nu: f64, effective_n: f64, r: f64, tail: Tail, dist: &StudentsT) -> f64 {
    let k = g * r * r;
    let s = t * (effective_n * k * (nu + 1.0)).sqrt() / (nu * (1.0 + effective_n * k) + t * t).sqrt();
    match tail {
        Tail::Lower => dist.cdf(-s),
        Tail::Higher => dist.cdf(s),
        Tail::TwoSided => 1.0,
    }
}

/// BF10 from a t statistic.
pub fn jzs_bf10_from_t(t: f64, nu: f64, effective_n: f64, r: f64, tail: Tail) -> Result<f64> {
    Ok(jzs_log_bf10_from_t(t, nu, effective_n, r, tail)?.exp())
}

/// Natural log of BF10. Stays finite when BF10 itself overflows, which
/// happens once |t| reaches the low hundreds.
pub fn jzs_log_bf10_from_t(t: f64, nu: f64, effective_n: f64, r: f64, tail: Tail) -> Result<f64> {
    if !(t.is_finite() && nu > 0.0 && effective_n > 0.0 && r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad Bayes factor inputs t={t}, nu={nu}, N={effective_n}, r={r}")));
    }
    let t2 = t * t;
    let r2 = r * r;
    let student = StudentsT::new(0.0, 1.0, nu + 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    // log of the two-sided integrand in z = g / (1 + g), Jacobian included
    let log_h = |z: f64| {
        let g = z / (1.0 - z);
        if g <= 0.0 || !g.is_finite() {
            return f64::NEG_INFINITY;
        }
        log_integrand(g, t2, nu, effective_n, r2) - 2.0 * (1.0 - z).ln()
    };

    // Scale by the largest value on a grid and split the range there, so a
    // sharp peak at large |t| neither overflows nor slips between nodes.
    const SCAN: usize = 256;
    let (mut peak_i, mut peak) = (1, f64::NEG_INFINITY);
    for i in 1..SCAN {
        let v = log_h(i as f64 / SCAN as f64);
        if v > peak {
            peak = v;
            peak_i = i;
        }
    }
    if !peak.is_finite() {
        return Err(Error::Numerical(format!("JZS integrand (t={t}, nu={nu}, N={effective_n}) has no finite values")));
    }
    let integrand = |z: f64| {
        let base = (log_h(z) - peak).exp();
        if base == 0.0 || tail == Tail::TwoSided {
            base
        } else {
            let g = z / (1.0 - z);
            2.0 * base * sign_probability(g, t, nu, effective_n, r, tail, &student)
        }
    };
    let cuts =
        [0.0, (peak_i - 1) as f64 / SCAN as f64, peak_i as f64 / SCAN as f64, (peak_i + 1) as f64 / SCAN as f64, 1.0];
    let mut total = 0.0;
    for w in cuts.windows(2).filter(|w| w[1] > w[0]) {
        let res = integrate(integrand, w[0], w[1], QuadratureConfig::default()).map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("JZS integral (t={t}, nu={nu}, N={effective_n}): {msg}")),
            other => other,
        })?;
        total += res.value;
    }
    if !(total.is_finite() && total >= 0.0) {
        return Err(Error::Numerical(format!("JZS integral (t={t}, nu={nu}, N={effective_n}) evaluated to {total}")));
    }
    // zero only when the sign probability underflows: t is far on the wrong side
    Ok(peak + total.ln())
}

/// JZS Bayes factor comparing `mean(x)` against `mean(y)`.
pub fn jzs_bf10(x: &[f64], y: &[f64], tail: Tail, r: f64) -> Result<BayesFactorResult> {
    let stats = two_sample_t(x, y)?;
    let log_bf10 = jzs_log_bf10_from_t(stats.t, stats.df, stats.effective_n, r, tail)?;
    let bf10 = log_bf10.exp();
    Ok(BayesFactorResult {
        bf10,
        log_bf10,
        t_stat: stats.t,
        df: stats.df,
        n_minus: stats.n_x,
        theta_minus: stats.mean_x,
        n_plus: stats.n_y,
        theta_plus: stats.mean_y,
        tail,
        prior_scale: r,
        bin: EvidenceBin::classify(bf10),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn n_eff(a: usize, b: usize) -> f64 {
        (a * b) as f64 / (a + b) as f64
    }

    #[test]
    fn bins() {
        assert_eq!(EvidenceBin::classify(0.2), EvidenceBin::FavorsH0);
        assert_eq!(EvidenceBin::classify(1.0), EvidenceBin::Inconclusive);
        assert_eq!(EvidenceBin::classify(5.0), EvidenceBin::FavorsHa);
        assert_eq!(EvidenceBin::classify(3.0), EvidenceBin::Inconclusive);
        assert_eq!(EvidenceBin::classify(1.0 / 3.0), EvidenceBin::Inconclusive);
    }

    #[test]
    fn t_statistic_hand_computed() {
        // x = 1,2,3 (mean 2, ss 2); y = 4,6 (mean 5, ss 2); pooled = 4/3
        let s = two_sample_t(&[1.0, 2.0, 3.0], &[4.0, 6.0]).unwrap();
        let se = (4.0f64 / 3.0 * (1.0 / 3.0 + 0.5)).sqrt();
        assert_relative_eq!(s.t, -3.0 / se, max_relative = 1e-14);
        assert_eq!(s.df, 3.0);
        assert_relative_eq!(s.effective_n, 1.2);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(two_sample_t(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::DegenerateVariance(_))));
        assert!(two_sample_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(jzs_bf10(&[1.0, 2.0], &[1.0, f64::NAN], Tail::TwoSided, 0.7).is_err());
    }

    #[test]
    fn null_t_favors_h0() {
        let bf = jzs_bf10_from_t(0.0, 98.0, 25.0, DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
        assert!(bf < 1.0);
    }

    #[test]
    fn reference_values() {
        // Two-sided values from the same integral evaluated with
        // scipy.integrate.quad over g in (0, inf) at epsrel 1e-12.
        let cases = [
            (0.0, 98.0, 25.0, 0.2108063640611436),
            (2.0, 98.0, 25.0, 1.2251333237911073),
            (3.0, 58.0, 15.0, 9.883941730258693),
        ];
        for (t, nu, n, expected) in cases {
            let bf = jzs_bf10_from_t(t, nu, n, DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
            assert_relative_eq!(bf, expected, max_relative = 1e-7);
        }
    }

    #[test]
    fn monotone_in_abs_t() {
        for (a, b) in [(10, 10), (50, 50), (30, 100)] {
            let mut prev = 0.0;
            for t in [0.0, 1.0, 2.0, 3.0, 4.0] {
                let bf =
                    jzs_bf10_from_t(t, (a + b - 2) as f64, n_eff(a, b), DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
                assert!(bf > prev);
                prev = bf;
            }
        }
    }

    #[test]
    fn one_sided_tails_average_to_two_sided() {
        for t in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            let (nu, n) = (78.0, 19.5);
            let two = jzs_bf10_from_t(t, nu, n, DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
            let lo = jzs_bf10_from_t(t, nu, n, DEFAULT_PRIOR_SCALE, Tail::Lower).unwrap();
            let hi = jzs_bf10_from_t(t, nu, n, DEFAULT_PRIOR_SCALE, Tail::Higher).unwrap();
            assert_relative_eq!(lo + hi, 2.0 * two, max_relative = 1e-7);
            if t < 0.0 {
                assert!(lo >= two && hi <= two);
            } else if t > 0.0 {
                assert!(hi >= two && lo <= two);
            } else {
                assert_relative_eq!(lo, two, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn tail_parse() {
        assert_eq!("two-sided".parse::<Tail>().unwrap(), Tail::TwoSided);
        assert_eq!("less".parse::<Tail>().unwrap(), Tail::Lower);
        assert!("up".parse::<Tail>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn affine_invariance(
            x in prop::collection::vec(-5.0f64..5.0, 3..20),
            y in prop::collection::vec(-5.0f64..5.0, 3..20),
            a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            b in -100.0f64..100.0,
        ) {
            let base = jzs_bf10(&x, &y, Tail::TwoSided, DEFAULT_PRIOR_SCALE);
            prop_assume!(base.is_ok());
            let base = base.unwrap();
            let tx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let moved = jzs_bf10(&tx, &ty, Tail::TwoSided, DEFAULT_PRIOR_SCALE).unwrap();
            prop_assert!((moved.bf10 - base.bf10).abs() <= 1e-9 * base.bf10.max(1.0));
            prop_assert!(moved.bf10 > 0.0);
        }
    }

    #[test]
    fn log_bf_survives_overflow() {
        // mpmath quad at 50 digits
        let cases = [
            (30.0, 230.71336549997932),
            (78.37101811874057, 551.45111221966802),
            (143.09194551512135, 781.77843072660732),
            (568.4906757042992, 1325.8459583573759),
        ];
        for (t, want) in cases {
            let got = jzs_log_bf10_from_t(t, 398.0, 100.0, DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "t {t}: {got} vs {want}");
            let lower = jzs_log_bf10_from_t(-t, 398.0, 100.0, DEFAULT_PRIOR_SCALE, Tail::Lower).unwrap();
            assert!((lower - want - std::f64::consts::LN_2).abs() < 1e-9 * want);
        }
        assert!(jzs_bf10_from_t(568.4906757042992, 398.0, 100.0, DEFAULT_PRIOR_SCALE, Tail::TwoSided)
            .unwrap()
            .is_infinite());
        let small = jzs_log_bf10_from_t(3.0, 18.0, 5.0, DEFAULT_PRIOR_SCALE, Tail::TwoSided).unwrap();
        assert!((small - 1.8386363136793351).abs() < 1e-9);
    }

    #[test]
    fn wrong_sign_extreme_t_is_zero_not_error() {
        let bf = jzs_bf10_from_t(300.0, 398.0, 100.0, DEFAULT_PRIOR_SCALE, Tail::Lower).unwrap();
        assert!((0.0..1e-100).contains(&bf));
    }
}
