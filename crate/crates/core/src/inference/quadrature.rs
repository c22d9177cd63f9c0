//! Globally adaptive Gauss-Kronrod (7/15) integration on a finite interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1] (non-negative half, descending), with weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { rel_tol: 1e-8, abs_tol: 0.0, max_intervals: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(Error::Numerical(format!("integrand not finite at {centre}: {fc}")));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &wk)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(centre - dx), f(centre + dx));
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Numerical(format!("integrand not finite near {}: ({f1}, {f2})", centre - dx)));
        }
        kronrod += wk * (f1 + f2);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest error
/// estimate until the total error is within tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: QuadratureConfig) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidParameter(format!("bad integration interval [{a}, {b}]")));
    }
    let (v, e) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut evaluations = 15;
    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: value {total}, error {total_err} after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(&mut f, worst.a, mid)?;
        let (rv, re) = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, abs_error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Integral { value, abs_error, evaluations, intervals: heap.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x * x + 1.0, -1.0, 2.0, QuadratureConfig::default()).unwrap();
        // x^6/6 - 2x^3/3 + x from -1 to 2
        let exact = (64.0 / 6.0 - 16.0 / 3.0 + 2.0) - (1.0 / 6.0 + 2.0 / 3.0 - 1.0);
        assert_relative_eq!(r.value, exact, max_relative = 1e-14);
    }

    #[test]
    fn smooth_transcendental() {
        let r = integrate(f64::exp, 0.0, 1.0, QuadratureConfig::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::E - 1.0, max_relative = 1e-12);
        let r = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1000.0, QuadratureConfig::default()).unwrap();
        assert_relative_eq!(r.value, 1000f64.atan(), max_relative = 1e-9);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, QuadratureConfig { max_intervals: 2000, ..Default::default() })
            .unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-7);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, QuadratureConfig::default());
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn bad_interval() {
        assert!(integrate(|x| x, 1.0, 0.0, QuadratureConfig::default()).is_err());
    }
}
