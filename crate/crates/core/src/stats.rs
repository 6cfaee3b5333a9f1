//! Small descriptive statistics used by the experiment harness.

use serde::Serialize;

/// Quartiles by linear interpolation between closest ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Percentile of a sorted, non-empty slice (linear interpolation).
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn quartiles(sorted: &[f64]) -> Quartiles {
    Quartiles {
        q1: percentile(sorted, 25.0),
        median: percentile(sorted, 50.0),
        q3: percentile(sorted, 75.0),
    }
}

pub fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_ordered() {
        let mut v = vec![9.0, 1.0, 5.0, 3.0, 7.0, 2.0, 8.0];
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = quartiles(&v);
        assert!(v[0] <= q.q1 && q.q1 <= q.median);
        assert!(q.median <= q.q3 && q.q3 <= v[v.len() - 1]);
        assert_eq!(q.median, 5.0);
    }

    #[test]
    fn percentile_interpolates() {
        let v = vec![0.0, 10.0];
        assert_eq!(percentile(&v, 50.0), 5.0);
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 100.0), 10.0);
        assert_eq!(percentile(&[4.0], 75.0), 4.0);
    }
}
