//! Axis-aligned box constraints describing which inputs reach a tree node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::splitmix64;
use crate::space::check_dim;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `x_i <= bound` (left branch of a split)
    #[serde(rename = "<=")]
    Le,
    /// `x_i > bound` (right branch of a split)
    #[serde(rename = ">")]
    Gt,
}

/// One branch condition `x_feature (<= | >) bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub feature: usize,
    pub direction: Direction,
    pub bound: f64,
}

impl Atom {
    pub fn le(feature: usize, bound: f64) -> Self {
        Atom {
            feature,
            direction: Direction::Le,
            bound,
        }
    }

    pub fn gt(feature: usize, bound: f64) -> Self {
        Atom {
            feature,
            direction: Direction::Gt,
            bound,
        }
    }
}

/// A per-dimension interval. The upper bound is always closed; the lower bound
/// is open when it came from a `>` split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lower_open: false,
    };

    pub fn closed(lower: f64, upper: f64) -> Self {
        Interval {
            lower,
            upper,
            lower_open: false,
        }
    }

    /// `(lower, +inf)`
    pub fn above(lower: f64) -> Self {
        Interval {
            lower,
            upper: f64::INFINITY,
            lower_open: true,
        }
    }

    /// `(-inf, upper]`
    pub fn at_most(upper: f64) -> Self {
        Interval {
            lower: f64::NEG_INFINITY,
            upper,
            lower_open: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lower > self.upper || (self.lower == self.upper && self.lower_open)
    }

    pub fn is_full(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_open {
            x > self.lower
        } else {
            x >= self.lower
        };
        above && x <= self.upper
    }

    fn tighten(&mut self, direction: Direction, bound: f64) {
        match direction {
            Direction::Le => {
                if bound < self.upper {
                    self.upper = bound;
                }
            }
            Direction::Gt => {
                if bound > self.lower {
                    self.lower = bound;
                    self.lower_open = true;
                } else if bound == self.lower {
                    self.lower_open = true;
                }
            }
        }
    }

    fn intersect(&self, other: &Interval) -> Interval {
        let (lower, lower_open) = if other.lower > self.lower {
            (other.lower, other.lower_open)
        } else if other.lower < self.lower {
            (self.lower, self.lower_open)
        } else {
            (self.lower, self.lower_open || other.lower_open)
        };
        Interval {
            lower,
            upper: self.upper.min(other.upper),
            lower_open,
        }
    }
}

/// Conjunction of per-dimension intervals, or the canonical empty box.
#[derive(Clone, Debug, PartialEq)]
pub enum BoxConstraint {
    Empty { dim: usize },
    Region(Vec<Interval>),
}

impl BoxConstraint {
    pub fn full(dim: usize) -> Self {
        BoxConstraint::Region(vec![Interval::FULL; dim])
    }

    pub fn empty(dim: usize) -> Self {
        BoxConstraint::Empty { dim }
    }

    /// Builds a box from explicit intervals, canonicalising inverted ones to EMPTY.
    pub fn from_intervals(intervals: Vec<Interval>) -> Result<Self> {
        if intervals
            .iter()
            .any(|iv| iv.lower.is_nan() || iv.upper.is_nan())
        {
            return Err(Error::domain("interval bounds must not be NaN"));
        }
        if intervals.iter().any(Interval::is_empty) {
            Ok(BoxConstraint::Empty {
                dim: intervals.len(),
            })
        } else {
            Ok(BoxConstraint::Region(intervals))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BoxConstraint::Empty { dim } => *dim,
            BoxConstraint::Region(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, BoxConstraint::Empty { .. })
    }

    pub fn intervals(&self) -> Option<&[Interval]> {
        match self {
            BoxConstraint::Empty { .. } => None,
            BoxConstraint::Region(v) => Some(v),
        }
    }

    /// Adds one atom, keeping the tightest bound in that dimension.
    pub fn with_atom(&self, atom: Atom) -> Result<Self> {
        let dim = self.dim();
        if atom.feature >= dim {
            return Err(Error::domain(format!(
                "feature index {} out of range for dimension {dim}",
                atom.feature
            )));
        }
        if atom.bound.is_nan() {
            return Err(Error::domain("constraint bound must not be NaN"));
        }
        let mut intervals = match self {
            BoxConstraint::Empty { .. } => return Ok(self.clone()),
            BoxConstraint::Region(v) => v.clone(),
        };
        intervals[atom.feature].tighten(atom.direction, atom.bound);
        if intervals[atom.feature].is_empty() {
            Ok(BoxConstraint::Empty { dim })
        } else {
            Ok(BoxConstraint::Region(intervals))
        }
    }

    /// Replaces the interval of one dimension by its intersection with `interval`.
    pub fn with_interval(&self, feature: usize, interval: Interval) -> Result<Self> {
        let dim = self.dim();
        if feature >= dim {
            return Err(Error::domain(format!(
                "feature index {feature} out of range for dimension {dim}"
            )));
        }
        match self {
            BoxConstraint::Empty { .. } => Ok(self.clone()),
            BoxConstraint::Region(v) => {
                let mut v = v.clone();
                v[feature] = v[feature].intersect(&interval);
                BoxConstraint::from_intervals(v)
            }
        }
    }

    pub fn intersect(&self, other: &BoxConstraint) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        match (self, other) {
            (BoxConstraint::Region(a), BoxConstraint::Region(b)) => {
                BoxConstraint::from_intervals(a.iter().zip(b).map(|(x, y)| x.intersect(y)).collect())
            }
            _ => Ok(BoxConstraint::Empty { dim: self.dim() }),
        }
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            BoxConstraint::Empty { .. } => false,
            BoxConstraint::Region(v) => v.iter().zip(x).all(|(iv, &xi)| iv.contains(xi)),
        })
    }

    /// Stable 64-bit digest of the bounds, used to key random streams by region.
    pub fn fingerprint(&self) -> u64 {
        match self {
            BoxConstraint::Empty { dim } => splitmix64(!(*dim as u64)),
            BoxConstraint::Region(v) => v.iter().fold(splitmix64(v.len() as u64), |h, iv| {
                let h = splitmix64(h ^ iv.lower.to_bits());
                let h = splitmix64(h ^ iv.upper.to_bits());
                splitmix64(h ^ u64::from(iv.lower_open))
            }),
        }
    }
}

/// Reduces a conjunction of atoms to one interval per dimension.
pub fn simplify_constraint(dim: usize, atoms: &[Atom]) -> Result<BoxConstraint> {
    atoms
        .iter()
        .try_fold(BoxConstraint::full(dim), |b, &a| b.with_atom(a))
}
