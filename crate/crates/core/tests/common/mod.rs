//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the library under test.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const N: usize = 10;

pub fn circ(i: usize, j: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(N - d)
}

pub fn kernel(sigma: f64) -> Vec<Vec<f64>> {
    (0..N)
        .map(|i| (0..N).map(|j| (-((circ(i, j) * circ(i, j)) as f64) / (2.0 * sigma * sigma)).exp()).collect())
        .collect()
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes; returns
/// eigenvalues ascending.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Kendall tau from raw values: a pair is discordant when the two profiles
/// order it strictly oppositely.
pub fn tau(v: &[f64; N], w: &[f64; N]) -> f64 {
    let mut disc = 0;
    for i in 0..N {
        for j in i + 1..N {
            if (v[i] - v[j]) * (w[i] - w[j]) < 0.0 {
                disc += 1;
            }
        }
    }
    1.0 - 2.0 * disc as f64 / 45.0
}

/// Descending average ranks by counting.
pub fn ranks(x: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| {
        let above = x.iter().filter(|&&y| y > x[i]).count() as f64;
        let ties = x.iter().filter(|&&y| y == x[i]).count() as f64;
        above + (ties + 1.0) / 2.0
    })
}

pub fn pearson(x: &[f64; N], y: &[f64; N]) -> f64 {
    let mx = x.iter().sum::<f64>() / N as f64;
    let my = y.iter().sum::<f64>() / N as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..N {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn rho(v: &[f64; N], w: &[f64; N]) -> f64 {
    pearson(&ranks(v), &ranks(w))
}

pub fn md(v: &[f64; N], w: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        s += (v[i] - w[i]).abs();
    }
    s
}

pub fn co(v: &[f64; N], w: &[f64; N]) -> f64 {
    let (mut d, mut a, mut b) = (0.0, 0.0, 0.0);
    for i in 0..N {
        d += v[i] * w[i];
        a += v[i] * v[i];
        b += w[i] * w[i];
    }
    d / (a.sqrt() * b.sqrt())
}

pub fn wc(v: &[f64; N], w: &[f64; N], sigma: f64) -> f64 {
    let b = kernel(sigma);
    let form = |x: &[f64; N], y: &[f64; N]| {
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                s += x[i] * b[i][j] * y[j];
            }
        }
        s
    };
    form(v, w) / (form(v, v).sqrt() * form(w, w).sqrt())
}

/// Non-negative profile summing to one, with a few exact zeros.
pub fn random_profile(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut x: [f64; N] = std::array::from_fn(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() });
    if x.iter().all(|&v| v == 0.0) {
        x[rng.random_range(0..N)] = 1.0;
    }
    let s: f64 = x.iter().sum();
    x.map(|v| v / s)
}

/// Signed, roughly centred profile like a scored survey.
pub fn random_signed(rng: &mut ChaCha8Rng) -> [f64; N] {
    let x: [f64; N] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let s: f64 = x.iter().map(|v: &f64| v.abs()).sum();
    x.map(|v| v / s)
}

/// Likelihood ratio of the t statistic at `g` over the null, the quantity the
/// JZS Bayes factor averages under the prior on `g`.
pub fn jzs_ratio(g: f64, t: f64, nu: f64, n_eff: f64, r: f64) -> f64 {
    let a = 1.0 + n_eff * g * r * r;
    let h = (nu + 1.0) / 2.0;
    a.powf(-0.5) * ((1.0 + t * t / (a * nu)).powf(-h) / (1.0 + t * t / nu).powf(-h))
}

/// Monte Carlo average of the ratio with `g = 1/Z^2`, i.e. `g ~ IG(1/2, 1/2)`.
pub fn mc_bf10(t: f64, nu: f64, n_eff: f64, r: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        acc += jzs_ratio(1.0 / (z * z), t, nu, n_eff, r);
    }
    acc / samples as f64
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Bayes factor in effect-size space: the noncentral-t likelihood of `t`
/// (as a mixture over the chi scale) integrated against a Cauchy(0, r) prior
/// on delta, over delta < 0 (`sign = -1`), delta > 0 (`+1`) or both (`0`).
/// One-sided versions use the prior truncated to that half-line.
pub fn delta_space_bf10(t: f64, nu: f64, n_eff: f64, r: f64, sign: i32) -> f64 {
    // t = (Z + lambda) / S with S = sqrt(chi2_nu / nu), density of S up to a constant
    let s_max = 1.0 + 20.0 / nu.sqrt();
    let ns = 3000;
    let hs = s_max / ns as f64;
    let nodes: Vec<(f64, f64)> = (0..=ns)
        .map(|k| {
            let s = k as f64 * hs;
            let simpson_w = if k == 0 || k == ns {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let logw = if s > 0.0 { nu * s.ln() - nu * s * s / 2.0 + nu / 2.0 } else { f64::NEG_INFINITY };
            (s, simpson_w * logw.exp())
        })
        .collect();
    let lik = |lambda: f64| nodes.iter().map(|&(s, w)| w * (-(t * s - lambda).powi(2) / 2.0).exp()).sum::<f64>();
    let null = lik(0.0);
    let half = std::f64::consts::FRAC_PI_2;
    let (a, b, scale) = match sign {
        -1 => (-half, 0.0, 2.0),
        1 => (0.0, half, 2.0),
        _ => (-half, half, 1.0),
    };
    // delta = r tan(theta) turns the Cauchy prior into d(theta) / pi
    let f = |theta: f64| {
        if theta.abs() >= half {
            return 0.0;
        }
        lik(r * theta.tan() * n_eff.sqrt()) / null
    };
    scale * simpson(f, a, b, 3000) / std::f64::consts::PI
}

/// Smallest Frobenius residual of `y R - x` over 2x2 rotations and reflections.
pub fn procrustes_residual_2d(y: &[[f64; 2]], x: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for flip in [1.0, -1.0] {
        let yy: Vec<[f64; 2]> = y.iter().map(|p| [p[0], flip * p[1]]).collect();
        let mut m = [[0.0; 2]; 2];
        for (p, q) in yy.iter().zip(x) {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += p[i] * q[j];
                }
            }
        }
        let ang = (m[1][0] - m[0][1]).atan2(m[0][0] + m[1][1]);
        let (c, s) = (ang.cos(), ang.sin());
        let res: f64 = yy
            .iter()
            .zip(x)
            .map(|(p, q)| {
                let r0 = p[0] * c + p[1] * s;
                let r1 = -p[0] * s + p[1] * c;
                (r0 - q[0]).powi(2) + (r1 - q[1]).powi(2)
            })
            .sum();
        best = best.min(res.sqrt());
    }
    best
}

/// Lower Cholesky factor of a positive-definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}
