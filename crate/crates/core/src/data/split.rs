use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Fractions over `(train, [validation], test)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: Vec<f64>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.fractions.len() < 2 {
            return Err(DataError::InvalidSplit("need at least two partitions".into()));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(DataError::InvalidSplit("each fraction must lie in (0, 1)".into()));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!("fractions sum to {total}")));
        }
        Ok(())
    }
}

/// Seeded shuffle of `0..n`, then contiguous cuts at rounded cumulative
/// fractions.
pub fn split(n: usize, spec: &SplitSpec) -> Result<Vec<Vec<usize>>, DataError> {
    spec.validate()?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut parts = Vec::with_capacity(spec.fractions.len());
    let mut cum = 0.0;
    let mut start = 0;
    for (k, f) in spec.fractions.iter().enumerate() {
        cum += f;
        let end = if k + 1 == spec.fractions.len() {
            n
        } else {
            ((n as f64 * cum).round() as usize).min(n)
        };
        if end <= start {
            return Err(DataError::EmptyPartition(k));
        }
        parts.push(idx[start..end].to_vec());
        start = end;
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: &[f64], seed: u64) -> SplitSpec {
        SplitSpec {
            fractions: f.to_vec(),
            seed,
        }
    }

    #[test]
    fn ten_rows_eighty_twenty() {
        let p = split(10, &spec(&[0.8, 0.2], 1)).unwrap();
        assert_eq!((p[0].len(), p[1].len()), (8, 2));
    }

    #[test]
    fn same_seed_same_partition() {
        assert_eq!(split(50, &spec(&[0.6, 0.2, 0.2], 4)), split(50, &spec(&[0.6, 0.2, 0.2], 4)));
        assert_ne!(split(50, &spec(&[0.6, 0.2, 0.2], 4)), split(50, &spec(&[0.6, 0.2, 0.2], 5)));
    }

    #[test]
    fn partitions_cover_all_indices() {
        let p = split(37, &spec(&[0.6, 0.2, 0.2], 9)).unwrap();
        let mut all: Vec<usize> = p.concat();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn empty_partition_and_bad_fractions() {
        assert_eq!(split(1, &spec(&[0.5, 0.5], 0)), Err(DataError::EmptyPartition(1)));
        assert!(split(10, &spec(&[0.7, 0.2], 0)).is_err());
        assert!(split(10, &spec(&[1.0], 0)).is_err());
    }
}
