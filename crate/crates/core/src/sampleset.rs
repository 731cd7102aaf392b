//! Readout sample sets: a multiset of bitstrings with energies and
//! counts from one schedule execution.

use crate::error::{Error, Result};
use crate::model::{Assignment, Domain};

/// One distinct readout with its energy and multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub assignment: Assignment,
    pub energy: f64,
    pub count: u64,
}

/// Aggregated readouts from `reads` anneals. Records are sorted by
/// (energy, bitstring) so the lowest-energy, lexicographically smallest
/// readout always comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    records: Vec<SampleRecord>,
    reads: u64,
    seed: u64,
}

impl SampleSet {
    /// Aggregates raw per-read results into a sorted sample set.
    pub fn from_reads(reads: Vec<(Assignment, f64)>, seed: u64) -> Self {
        let mut merged: std::collections::BTreeMap<Assignment, (f64, u64)> =
            std::collections::BTreeMap::new();
        let total = reads.len() as u64;
        for (assignment, energy) in reads {
            merged
                .entry(assignment)
                .and_modify(|e| e.1 += 1)
                .or_insert((energy, 1));
        }
        let records = merged
            .into_iter()
            .map(|(assignment, (energy, count))| SampleRecord {
                assignment,
                energy,
                count,
            })
            .collect();
        let mut set = SampleSet {
            records,
            reads: total,
            seed,
        };
        set.sort();
        set
    }

    /// Builds from pre-aggregated records (e.g. parsed CSV).
    pub fn from_records(records: Vec<SampleRecord>, seed: u64) -> Self {
        let reads = records.iter().map(|r| r.count).sum();
        let mut set = SampleSet {
            records,
            reads,
            seed,
        };
        set.sort();
        set
    }

    fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| a.assignment.cmp(&b.assignment))
        });
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_empty(&self) -> bool {
        self.reads == 0
    }

    /// Mean energy over all reads.
    pub fn mean_energy(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let total: f64 = self
            .records
            .iter()
            .map(|r| r.energy * r.count as f64)
            .sum();
        Ok(total / self.reads as f64)
    }

    /// Mean of the `ceil(fraction * reads)` lowest-energy reads, counting
    /// multiplicity.
    pub fn best_fraction_mean(&self, fraction: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::BadFraction { fraction });
        }
        let want = ((fraction * self.reads as f64).ceil() as u64).max(1);
        let mut taken = 0u64;
        let mut sum = 0.0;
        for record in &self.records {
            let take = record.count.min(want - taken);
            sum += record.energy * take as f64;
            taken += take;
            if taken == want {
                break;
            }
        }
        Ok(sum / taken as f64)
    }

    /// The `ceil(fraction * reads)` lowest-energy readouts, with
    /// multiplicity, lowest first.
    pub fn best_assignments(&self, fraction: f64) -> Result<Vec<Assignment>> {
        if self.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::BadFraction { fraction });
        }
        let want = ((fraction * self.reads as f64).ceil() as u64).max(1);
        let mut out = Vec::with_capacity(want as usize);
        let mut taken = 0u64;
        for record in &self.records {
            let take = record.count.min(want - taken);
            for _ in 0..take {
                out.push(record.assignment.clone());
            }
            taken += take;
            if taken == want {
                break;
            }
        }
        Ok(out)
    }

    /// Lowest-energy readout; ties already resolved lexicographically by
    /// the sort order.
    pub fn best(&self) -> Option<&SampleRecord> {
        self.records.first()
    }

    /// CSV with header `energy,count,bitstring` (spins mapped -1 -> 0).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,count,bitstring\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{}\n",
                r.energy,
                r.count,
                r.assignment.to_bit_string()
            ));
        }
        out
    }

    pub fn from_csv(domain: Domain, text: &str, seed: u64) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("energy,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected `energy,count,bitstring`".into(),
                });
            }
            let energy = fields[0].parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let count = fields[1].parse::<u64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let assignment = Assignment::from_bit_string(domain, fields[2])?;
            records.push(SampleRecord {
                assignment,
                energy,
                count,
            });
        }
        Ok(Self::from_records(records, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_read_each(energies: &[f64]) -> SampleSet {
        // distinct bitstrings so nothing merges
        let n = 16;
        let reads = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let values: Vec<i8> = (0..n).map(|b| ((i >> b) & 1) as i8).collect();
                (Assignment::new(Domain::Binary, values).unwrap(), e)
            })
            .collect();
        SampleSet::from_reads(reads, 0)
    }

    #[test]
    fn best_fraction_mean_takes_lowest_tail() {
        let energies: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let set = one_read_each(&energies);
        assert_eq!(set.best_fraction_mean(0.01).unwrap(), 5.5);
        let full = set.best_fraction_mean(1.0).unwrap();
        assert!((full - 500.5).abs() < 1e-9);
    }

    #[test]
    fn best_fraction_mean_constant_energies() {
        let set = one_read_each(&[3.25; 40]);
        assert_eq!(set.best_fraction_mean(0.5).unwrap(), 3.25);
    }

    #[test]
    fn best_fraction_mean_rejects_bad_input() {
        let set = one_read_each(&[1.0]);
        assert!(matches!(
            set.best_fraction_mean(0.0),
            Err(Error::BadFraction { .. })
        ));
        let empty = SampleSet::from_reads(vec![], 0);
        assert!(matches!(
            empty.best_fraction_mean(0.5),
            Err(Error::EmptySampleSet)
        ));
    }

    #[test]
    fn aggregation_counts_duplicates() {
        let a = Assignment::new(Domain::Spin, vec![1, -1]).unwrap();
        let b = Assignment::new(Domain::Spin, vec![-1, 1]).unwrap();
        let set = SampleSet::from_reads(
            vec![(a.clone(), -1.0), (b.clone(), -1.0), (a.clone(), -1.0)],
            7,
        );
        assert_eq!(set.reads(), 3);
        assert_eq!(set.records().len(), 2);
        // equal energies: lexicographically smaller bitstring first
        assert_eq!(set.best().unwrap().assignment, b);
        assert_eq!(set.records()[1].count, 2);
    }

    #[test]
    fn csv_round_trip() {
        let set = one_read_each(&[2.0, -1.5, 0.25]);
        let csv = set.to_csv();
        let parsed = SampleSet::from_csv(Domain::Binary, &csv, set.seed()).unwrap();
        assert_eq!(parsed.records(), set.records());
        assert_eq!(parsed.reads(), set.reads());
    }
}
