//! Variable spaces and their point encodings.
//!
//! Points are flat `f64` vectors regardless of kind: a `Binary` point is a
//! vector of 0/1 entries, a `Real` point is an arbitrary finite vector, and
//! a `Categorical` point is a length-1 vector holding the state index. This
//! lets chained models pass a previous model's hidden draw straight into the
//! next model's visible slot.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Binary,
    Real,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Binary { dim: usize },
    Real { dim: usize },
    Categorical { cardinality: usize },
}

impl Space {
    pub fn binary(dim: usize) -> Self {
        assert!(dim >= 1, "Binary space needs dim >= 1");
        Space::Binary { dim }
    }

    pub fn real(dim: usize) -> Self {
        assert!(dim >= 1, "Real space needs dim >= 1");
        Space::Real { dim }
    }

    /// Categorical spaces declared in data files must have at least two
    /// states; single-state categorical spaces only arise internally (the
    /// hidden side of a one-component mixture).
    pub fn categorical(cardinality: usize) -> Self {
        assert!(cardinality >= 1, "Categorical space needs cardinality >= 1");
        Space::Categorical { cardinality }
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            Space::Binary { .. } => SpaceKind::Binary,
            Space::Real { .. } => SpaceKind::Real,
            Space::Categorical { .. } => SpaceKind::Categorical,
        }
    }

    /// Length of a point vector in this space.
    pub fn point_dim(&self) -> usize {
        match self {
            Space::Binary { dim } | Space::Real { dim } => *dim,
            Space::Categorical { .. } => 1,
        }
    }

    /// Number of discrete states, if the space is discrete.
    pub fn state_count(&self) -> Option<u128> {
        match self {
            Space::Binary { dim } => {
                if *dim >= 128 {
                    None
                } else {
                    Some(1u128 << dim)
                }
            }
            Space::Real { .. } => None,
            Space::Categorical { cardinality } => Some(*cardinality as u128),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Space::Real { .. })
    }

    /// Check a point's length against this space.
    pub fn check_dim(&self, p: ArrayView1<f64>) -> Result<()> {
        if p.len() != self.point_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.point_dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Check length and membership (0/1 entries, integer category in range,
    /// finite reals).
    pub fn check_point(&self, p: ArrayView1<f64>) -> Result<()> {
        self.check_dim(p)?;
        match self {
            Space::Binary { .. } => {
                if p.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::BadParams("value outside Binary space".into()));
                }
            }
            Space::Real { .. } => {
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("point in Real space".into()));
                }
            }
            Space::Categorical { cardinality } => {
                let v = p[0];
                if v.fract() != 0.0 || v < 0.0 || v >= *cardinality as f64 {
                    return Err(Error::BadParams("value outside Categorical space".into()));
                }
            }
        }
        Ok(())
    }

    /// Map a discrete point to its state index. Binary points use the
    /// little-endian convention: coordinate `i` is bit `i` of the index.
    pub fn state_index(&self, p: ArrayView1<f64>) -> Result<usize> {
        self.check_dim(p)?;
        match self {
            Space::Binary { dim } => {
                let mut idx = 0usize;
                for i in 0..*dim {
                    if p[i] != 0.0 {
                        idx |= 1 << i;
                    }
                }
                Ok(idx)
            }
            Space::Categorical { .. } => Ok(p[0] as usize),
            Space::Real { .. } => Err(Error::Unsupported(
                "state_index on a continuous space".into(),
            )),
        }
    }

    /// Inverse of [`Space::state_index`].
    pub fn state_point(&self, idx: usize) -> Array1<f64> {
        match self {
            Space::Binary { dim } => {
                Array1::from_iter((0..*dim).map(|i| ((idx >> i) & 1) as f64))
            }
            Space::Categorical { .. } => Array1::from_elem(1, idx as f64),
            Space::Real { .. } => panic!("state_point on a continuous space"),
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::Binary { dim } => write!(f, "binary:{dim}"),
            Space::Real { dim } => write!(f, "real:{dim}"),
            Space::Categorical { cardinality } => write!(f, "categorical:{cardinality}"),
        }
    }
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| Error::BadParams(format!("bad space spec '{s}'")))?;
        let n: usize = size
            .parse()
            .map_err(|_| Error::BadParams(format!("bad space size '{size}'")))?;
        match kind {
            "binary" if n >= 1 => Ok(Space::binary(n)),
            "real" if n >= 1 => Ok(Space::real(n)),
            "categorical" if n >= 2 => Ok(Space::categorical(n)),
            _ => Err(Error::BadParams(format!("bad space spec '{s}'"))),
        }
    }
}
