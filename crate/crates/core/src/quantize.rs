//! Nested dyadic partitions of the real line.
//!
//! Level `k` splits the line into half-open cells `[i 2^-k, (i+1) 2^-k)`. Each
//! level refines the previous one, so the level-`k+1` cell of a point always
//! sits inside its level-`k` cell. Cells are labelled by their integer index
//! `i = floor(x 2^k)`, computed exactly for every finite sample.

use std::fmt;

use crate::dyadic::{Dyadic, DyadicValue};
use crate::error::{Error, Result};

/// Integer label of a cell, `floor(x 2^k)`.
///
/// Stored as an integer-valued [`Dyadic`] so that indices of large exact values
/// (say `2^1024` at level 3) need no big-integer arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex(Dyadic);

impl CellIndex {
    pub fn from_i64(i: i64) -> Self {
        CellIndex(Dyadic::integer(i))
    }

    pub fn as_dyadic(self) -> Dyadic {
        self.0
    }

    pub fn to_i64(self) -> Option<i64> {
        self.0.to_i64()
    }

    /// Index of the enclosing cell one level up: `floor(i / 2)`.
    pub fn parent(self) -> Self {
        CellIndex(self.0.floor_scaled(-1))
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_i64() {
            Some(i) => write!(f, "{i}"),
            None => write!(f, "{}*2^{}", self.0.mantissa(), self.0.exponent()),
        }
    }
}

/// One element of the level-`k` partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub level: u64,
    pub index: CellIndex,
}

impl Cell {
    pub fn new(level: u64, index: i64) -> Self {
        Cell {
            level,
            index: CellIndex::from_i64(index),
        }
    }

    /// The cell of `x` at level `k`.
    pub fn of(x: &DyadicValue, level: u64) -> Self {
        Cell {
            level,
            index: cell_index(x, level),
        }
    }

    pub fn width(&self) -> Dyadic {
        Dyadic::pow2(-level_shift(self.level))
    }

    pub fn contains(&self, x: &DyadicValue) -> bool {
        cell_index(x, self.level) == self.index
    }

    pub fn parent(&self) -> Option<Cell> {
        (self.level > 0).then(|| Cell {
            level: self.level - 1,
            index: self.index.parent(),
        })
    }

    /// Left endpoint, exact.
    pub fn left(&self) -> Dyadic {
        self.index
            .0
            .scale(-level_shift(self.level))
            .expect("cell endpoint exponent overflow")
    }
}

fn level_shift(level: u64) -> i64 {
    i64::try_from(level).expect("quantization level exceeds i64")
}

/// `floor(x 2^k)`: the index of the unique level-`k` cell containing `x`.
/// Boundary points belong to the cell on their right.
pub fn cell_index(x: &DyadicValue, level: u64) -> CellIndex {
    CellIndex(x.as_dyadic().floor_scaled(level_shift(level)))
}

/// The point chosen to stand for a cell: its left endpoint.
pub fn representative(cell: &Cell) -> DyadicValue {
    DyadicValue::Exact(cell.left())
}

/// A block of samples quantized at a single level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantizedBlock {
    pub level: u64,
    pub indices: Vec<CellIndex>,
}

impl QuantizedBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The same block seen through the next coarser partition.
    pub fn coarsen(&self) -> Option<QuantizedBlock> {
        (self.level > 0).then(|| QuantizedBlock {
            level: self.level - 1,
            indices: self.indices.iter().map(|i| i.parent()).collect(),
        })
    }
}

pub fn quantize_block(xs: &[DyadicValue], level: u64) -> QuantizedBlock {
    QuantizedBlock {
        level,
        indices: xs.iter().map(|x| cell_index(x, level)).collect(),
    }
}

/// A finite stretch of a one-sided past, most recent value first.
///
/// `values[i]` is the coordinate at offset `-i`; the truncation depth is
/// `values.len() - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PastVector {
    values: Vec<DyadicValue>,
}

impl PastVector {
    pub fn new(values: Vec<DyadicValue>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyPast);
        }
        Ok(PastVector { values })
    }

    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[DyadicValue] {
        &self.values
    }

    /// Coordinate at offset `-i`.
    pub fn at(&self, i: usize) -> Option<&DyadicValue> {
        self.values.get(i)
    }
}

/// Truncated distance between two pasts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PastDistance {
    pub value: f64,
    /// Upper bound on what the omitted coordinates could add: `2^-(K+1)`.
    pub truncation_bound: f64,
}

/// `sum_{i=0}^{K} 2^-(i+1) |a_i - b_i| / (1 + |a_i - b_i|)`.
pub fn dstar(a: &PastVector, b: &PastVector) -> Result<PastDistance> {
    if a.depth() != b.depth() {
        return Err(Error::DepthMismatch {
            left: a.depth(),
            right: b.depth(),
        });
    }
    let mut weight = 0.5;
    let mut value = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        if x != y {
            let diff = (x.to_f64() - y.to_f64()).abs();
            value += weight * diff / (1.0 + diff);
        }
        weight *= 0.5;
    }
    Ok(PastDistance {
        value,
        truncation_bound: weight * 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> DyadicValue {
        DyadicValue::real(x)
    }

    #[test]
    fn cell_index_examples() {
        assert_eq!(cell_index(&v(0.3), 2).to_i64(), Some(1));
        assert_eq!(cell_index(&v(-0.25), 2).to_i64(), Some(-1));
        let h2 = DyadicValue::exact(1, -5);
        assert_eq!(cell_index(&h2, 4), cell_index(&DyadicValue::ZERO, 4));
        assert_eq!(cell_index(&h2, 5).to_i64(), Some(1));
    }

    #[test]
    fn boundary_goes_right() {
        let c = Cell::of(&v(0.5), 1);
        assert_eq!(c.index.to_i64(), Some(1));
        assert!(c.contains(&v(0.5)));
        assert!(!c.contains(&v(0.4999999)));
    }

    #[test]
    fn representative_examples() {
        assert_eq!(representative(&Cell::new(2, 1)).to_f64(), 0.25);
        assert_eq!(representative(&Cell::new(0, 1)).to_f64(), 1.0);
        assert_eq!(representative(&Cell::new(3, -2)).to_f64(), -0.25);
        assert!(Cell::new(3, -2).contains(&representative(&Cell::new(3, -2))));
    }

    #[test]
    fn block_examples() {
        let xs: Vec<_> = [0.0, 1.0, 0.0].into_iter().map(v).collect();
        let idx: Vec<_> = quantize_block(&xs, 2)
            .indices
            .iter()
            .map(|i| i.to_i64().unwrap())
            .collect();
        assert_eq!(idx, vec![0, 4, 0]);
        assert!(quantize_block(&[], 7).is_empty());
        let idx: Vec<_> = quantize_block(&[v(0.3), v(0.6)], 1)
            .indices
            .iter()
            .map(|i| i.to_i64().unwrap())
            .collect();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn huge_exact_values_keep_exact_indices() {
        let big = DyadicValue::exact(3, 1024);
        let idx = cell_index(&big, 5);
        assert_eq!(idx.as_dyadic(), Dyadic::new(3, 1029));
        assert_eq!(idx.to_i64(), None);
        assert_eq!(idx.to_string(), "3*2^1029");
        assert_eq!(representative(&Cell::of(&big, 5)), big);
    }

    #[test]
    fn dstar_examples() {
        let past = |xs: &[f64]| PastVector::new(xs.iter().copied().map(v).collect()).unwrap();
        let a = past(&[0.3, -2.0, 7.0]);
        assert_eq!(dstar(&a, &a).unwrap().value, 0.0);
        assert_eq!(dstar(&past(&[1.0]), &past(&[0.0])).unwrap().value, 0.25);
        assert_eq!(
            dstar(&past(&[1.0, 0.0, 0.0]), &past(&[0.0, 0.0, 0.0]))
                .unwrap()
                .value,
            0.25
        );
        let d = dstar(&past(&[1.0, 1.0]), &past(&[0.0, 0.0])).unwrap();
        assert_eq!(d.value, 0.375);
        assert_eq!(d.truncation_bound, 0.25);
        assert!(matches!(
            dstar(&past(&[1.0]), &past(&[1.0, 2.0])),
            Err(Error::DepthMismatch { left: 0, right: 1 })
        ));
        assert!(matches!(PastVector::new(vec![]), Err(Error::EmptyPast)));
    }
}
