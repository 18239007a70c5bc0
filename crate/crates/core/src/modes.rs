//! Truncated index sets of half-integer wavenumbers `m` sharing the parity of `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    pub n: i32,
    pub m_max: i32,
}

impl ModeSet {
    /// Modes `m = -M, -M+2, ..., M`; `M` must share the parity of `n` and exceed `n`.
    pub fn new(n: i32, m_max: i32) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(format!("n must be a positive integer, got {n}")));
        }
        if (m_max - n).rem_euclid(2) != 0 {
            return Err(Error::invalid(format!("truncation M = {m_max} must have the parity of n = {n}")));
        }
        if m_max < n + 2 {
            return Err(Error::invalid(format!(
                "truncation M = {m_max} too small to contain +-n and a neighbour (need M >= {})",
                n + 2
            )));
        }
        Ok(ModeSet { n, m_max })
    }

    pub fn len(&self) -> usize {
        self.m_max as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn m(&self, idx: usize) -> i32 {
        -self.m_max + 2 * idx as i32
    }

    pub fn index(&self, m: i32) -> Option<usize> {
        if m.abs() > self.m_max || (m - self.m_max).rem_euclid(2) != 0 {
            None
        } else {
            Some(((m + self.m_max) / 2) as usize)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> + '_ {
        (0..self.len()).map(move |i| self.m(i))
    }

    pub fn ms(&self) -> Vec<i32> {
        self.iter().collect()
    }
}

/// Largest integer of the parity of `n` that does not exceed `x`.
pub fn floor_parity(x: f64, n: i32) -> i32 {
    let f = x.floor() as i64;
    let f = if (f - n as i64).rem_euclid(2) != 0 { f - 1 } else { f };
    f as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let s = ModeSet::new(1, 21).unwrap();
        assert_eq!(s.len(), 22);
        for (i, m) in s.iter().enumerate() {
            assert_eq!(s.index(m), Some(i));
            assert!(m % 2 != 0);
        }
        assert_eq!(s.index(0), None);
        assert_eq!(s.index(23), None);
    }

    #[test]
    fn parity_rules() {
        assert!(ModeSet::new(1, 20).is_err());
        assert!(ModeSet::new(2, 2).is_err());
        assert!(ModeSet::new(2, 4).is_ok());
        assert_eq!(floor_parity(1.25, 1), 1);
        assert_eq!(floor_parity(2.9, 1), 1);
        assert_eq!(floor_parity(3.0, 1), 3);
        assert_eq!(floor_parity(-0.5, 1), -1);
        assert_eq!(floor_parity(2.5, 2), 2);
        assert_eq!(floor_parity(1.99, 2), 0);
    }
}
