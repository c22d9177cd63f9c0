//! The ten Schwartz basic values and their circumplex geometry.
//!
//! Values are laid out on a 10-cycle in canonical order. The circular step
//! distance between two values drives the Gaussian kernel used by the
//! weighted-cosine metric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of values in the model.
pub const NUM_VALUES: usize = 10;

/// One of the ten Schwartz basic values. The discriminant is the value's
/// position on the circumplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueId {
    SelfDirection = 0,
    Stimulation = 1,
    Hedonism = 2,
    Achievement = 3,
    Power = 4,
    Security = 5,
    Conformity = 6,
    Tradition = 7,
    Benevolence = 8,
    Universalism = 9,
}

/// The four higher-order value classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueClass {
    OpennessToChange,
    SelfEnhancement,
    Conservation,
    SelfTranscendence,
}

impl ValueId {
    /// All values in canonical circumplex order.
    pub const ALL: [ValueId; NUM_VALUES] = [
        ValueId::SelfDirection,
        ValueId::Stimulation,
        ValueId::Hedonism,
        ValueId::Achievement,
        ValueId::Power,
        ValueId::Security,
        ValueId::Conformity,
        ValueId::Tradition,
        ValueId::Benevolence,
        ValueId::Universalism,
    ];

    #[inline]
    pub fn position(self) -> usize {
        self as usize
    }

    pub fn from_position(pos: usize) -> Option<ValueId> {
        Self::ALL.get(pos).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ValueId::SelfDirection => "self-direction",
            ValueId::Stimulation => "stimulation",
            ValueId::Hedonism => "hedonism",
            ValueId::Achievement => "achievement",
            ValueId::Power => "power",
            ValueId::Security => "security",
            ValueId::Conformity => "conformity",
            ValueId::Tradition => "tradition",
            ValueId::Benevolence => "benevolence",
            ValueId::Universalism => "universalism",
        }
    }

    /// Hedonism sits between openness-to-change and self-enhancement; it is
    /// reported under openness-to-change.
    pub fn class(self) -> ValueClass {
        use ValueId::*;
        match self {
            SelfDirection | Stimulation | Hedonism => ValueClass::OpennessToChange,
            Achievement | Power => ValueClass::SelfEnhancement,
            Security | Conformity | Tradition => ValueClass::Conservation,
            Benevolence | Universalism => ValueClass::SelfTranscendence,
        }
    }
}

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValueId {
    type Err = Error;

    /// Accepts canonical names case-insensitively, with `_`, `-` or a space as
    /// the separator in "self-direction".
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '_' | ' ' => '-',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        let norm = if norm == "selfdirection" { "self-direction".to_string() } else { norm };
        ValueId::ALL.iter().copied().find(|v| v.name() == norm).ok_or_else(|| Error::UnknownValue(s.to_string()))
    }
}

/// Shortest arc between two values on the 10-cycle, in `0..=5`.
pub fn circular_distance(a: ValueId, b: ValueId) -> usize {
    let diff = a.position().abs_diff(b.position());
    diff.min(NUM_VALUES - diff)
}

/// Symmetric 10x10 circumplex similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CircumplexKernel {
    sigma: f64,
    matrix: [[f64; NUM_VALUES]; NUM_VALUES],
}

impl CircumplexKernel {
    /// `B[i][j] = exp(-d(i,j)^2 / (2 sigma^2))` with `d` the circular step distance.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel sigma must be positive, got {sigma}")));
        }
        let mut matrix = [[0.0; NUM_VALUES]; NUM_VALUES];
        for a in ValueId::ALL {
            for b in ValueId::ALL {
                let d = circular_distance(a, b) as f64;
                matrix[a.position()][b.position()] = (-(d * d) / (2.0 * sigma * sigma)).exp();
            }
        }
        let kernel = CircumplexKernel { sigma, matrix };
        if !kernel.is_psd() {
            log::warn!("circumplex kernel with sigma {sigma} is not positive semi-definite; weighted cosine may be undefined for some profiles");
        }
        Ok(kernel)
    }

    /// Identity weights; weighted cosine then reduces to plain cosine.
    pub fn identity() -> Self {
        let mut matrix = [[0.0; NUM_VALUES]; NUM_VALUES];
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        CircumplexKernel { sigma: 0.0, matrix }
    }

    /// Arbitrary symmetric weight matrix. Symmetry is checked exactly.
    pub fn from_matrix(matrix: [[f64; NUM_VALUES]; NUM_VALUES]) -> Result<Self> {
        for i in 0..NUM_VALUES {
            for j in 0..NUM_VALUES {
                if matrix[i][j] != matrix[j][i] || !matrix[i][j].is_finite() {
                    return Err(Error::InvalidParameter(format!("kernel matrix not symmetric/finite at ({i},{j})")));
                }
            }
        }
        Ok(CircumplexKernel { sigma: f64::NAN, matrix })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn matrix(&self) -> &[[f64; NUM_VALUES]; NUM_VALUES] {
        &self.matrix
    }

    #[inline]
    pub fn weight(&self, a: ValueId, b: ValueId) -> f64 {
        self.matrix[a.position()][b.position()]
    }

    /// Bilinear form `x^T B y`.
    pub fn bilinear(&self, x: &[f64; NUM_VALUES], y: &[f64; NUM_VALUES]) -> f64 {
        let mut acc = 0.0;
        for (i, row) in self.matrix.iter().enumerate() {
            let mut inner = 0.0;
            for (j, b) in row.iter().enumerate() {
                inner += b * y[j];
            }
            acc += x[i] * inner;
        }
        acc
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = nalgebra::SMatrix::<f64, NUM_VALUES, NUM_VALUES>::from_fn(|i, j| self.matrix[i][j]);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue at least `-1e-9`. The Gaussian of the step distance
    /// on the 10-cycle loses this property once sigma exceeds about 1.4.
    pub fn is_psd(&self) -> bool {
        self.eigenvalues()[0] >= -1e-9
    }

    /// Comma-separated dump with a header row of value names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value");
        for v in ValueId::ALL {
            out.push(',');
            out.push_str(v.name());
        }
        out.push('\n');
        for a in ValueId::ALL {
            out.push_str(a.name());
            for b in ValueId::ALL {
                out.push_str(&format!(",{:.12e}", self.weight(a, b)));
            }
            out.push('\n');
        }
        out
    }
}
