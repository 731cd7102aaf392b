//! Slicing experiments: run a family of quenched schedules with
//! increasing quench times against one model and stitch the per-slice
//! statistics into a trace of the anneal's dynamics.

use crate::clique::{chain_break_fraction, Embedding};
use crate::error::{Error, Result};
use crate::model::Assignment;
use crate::model::ProblemModel;
use crate::rng::derive_seed;
use crate::sampler::{run_backend, SamplerConfig};
use crate::schedule::{AnnealSchedule, EnergyCurves};

/// Which base schedule the slices are cut from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Plain,
    Paused {
        pause_start_us: f64,
        pause_len_us: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceParams {
    /// Active anneal time T in microseconds (excludes any pause).
    pub active_us: f64,
    pub n_slices: usize,
    pub reads: u64,
    pub kind: ScheduleKind,
    /// Fraction defining the "best" tail of each slice's reads.
    pub best_fraction: f64,
}

impl SliceParams {
    pub fn new(active_us: f64, n_slices: usize, reads: u64) -> Self {
        SliceParams {
            active_us,
            n_slices,
            reads,
            kind: ScheduleKind::Plain,
            best_fraction: 0.01,
        }
    }

    pub fn paused(mut self, pause_start_us: f64, pause_len_us: f64) -> Self {
        self.kind = ScheduleKind::Paused {
            pause_start_us,
            pause_len_us,
        };
        self
    }

    /// Total traced duration including any pause.
    pub fn duration_us(&self) -> f64 {
        match self.kind {
            ScheduleKind::Plain => self.active_us,
            ScheduleKind::Paused { pause_len_us, .. } => self.active_us + pause_len_us,
        }
    }
}

/// Per-slice statistics of one slicing experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceTrace {
    pub slice_times: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub best_mean: Vec<f64>,
    /// Best-fraction readouts per slice, with multiplicity.
    pub best_sets: Vec<Vec<Assignment>>,
    /// Single lowest-energy readout per slice (lexicographic tie-break).
    pub best_bitstring: Vec<Assignment>,
    /// Mean cross-pair Hamming distance between adjacent slices' best
    /// sets; one entry fewer than slices.
    pub hamming: Vec<f64>,
    /// Proportion of unbroken chains per slice, when an embedding was
    /// supplied.
    pub chain_unbroken: Option<Vec<f64>>,
}

impl SliceTrace {
    pub fn n_slices(&self) -> usize {
        self.slice_times.len()
    }

    /// CSV with header
    /// `slice,t_us,mean_energy,best1pct_mean,hamming_prev,chain_unbroken`;
    /// missing values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice,t_us,mean_energy,best1pct_mean,hamming_prev,chain_unbroken\n");
        for i in 0..self.n_slices() {
            let hamming = if i == 0 {
                String::new()
            } else {
                self.hamming[i - 1].to_string()
            };
            let chain = match &self.chain_unbroken {
                Some(values) => values[i].to_string(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                self.slice_times[i],
                self.mean_energy[i],
                self.best_mean[i],
                hamming,
                chain
            ));
        }
        out
    }

    /// Per-slice best readouts as CSV (`slice,bitstring`), the input for
    /// per-qubit freezeout analysis.
    pub fn best_bitstrings_csv(&self) -> String {
        let mut out = String::from("slice,bitstring\n");
        for (i, a) in self.best_bitstring.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, a.to_bit_string()));
        }
        out
    }
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slice: usize,
    pub t_us: f64,
    pub mean_energy: f64,
    pub best_mean: f64,
    pub hamming_prev: Option<f64>,
    pub chain_unbroken: Option<f64>,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("slice,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let req = |field: &str, name: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad {name}: {field:?}"),
            })
        };
        let opt = |field: &str, name: &str| -> Result<Option<f64>> {
            let t = field.trim();
            if t.is_empty() {
                Ok(None)
            } else {
                req(t, name).map(Some)
            }
        };
        rows.push(TraceRow {
            slice: fields[0].trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad slice index {:?}", fields[0]),
            })?,
            t_us: req(fields[1], "t_us")?,
            mean_energy: req(fields[2], "mean_energy")?,
            best_mean: req(fields[3], "best1pct_mean")?,
            hamming_prev: opt(fields[4], "hamming_prev")?,
            chain_unbroken: opt(fields[5], "chain_unbroken")?,
        });
    }
    Ok(rows)
}

/// Parses the `slice,bitstring` companion file into per-slice best
/// readouts (as 0/1 strings).
pub fn parse_best_bitstrings_csv(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("slice,") {
            continue;
        }
        let (_, bits) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: "expected `slice,bitstring`".into(),
        })?;
        out.push(bits.trim().to_string());
    }
    Ok(out)
}

/// Mean Hamming distance over all cross pairs (u in a, v in b).
pub fn adjacent_hamming(a: &[Assignment], b: &[Assignment]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let len = a[0].len();
    let mut total = 0u64;
    for u in a {
        if u.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: u.len(),
            });
        }
        for v in b {
            if v.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    found: v.len(),
                });
            }
            total += u
                .values()
                .iter()
                .zip(v.values())
                .filter(|(x, y)| x != y)
                .count() as u64;
        }
    }
    Ok(total as f64 / (a.len() * b.len()) as f64)
}

/// Runs the slicing experiment: for each slice time builds the quenched
/// schedule (the final slice runs unquenched), samples it, and records
/// statistics. Per-slice seeds derive from (base seed, slice index), so
/// the trace is independent of execution order.
pub fn run_slicing(
    model: &ProblemModel,
    params: &SliceParams,
    cfg: &SamplerConfig,
    curves: &EnergyCurves,
    embedding: Option<&Embedding>,
) -> Result<SliceTrace> {
    if params.n_slices < 2 {
        return Err(Error::InvalidParameter {
            name: "n_slices",
            message: format!("{} must be >= 2", params.n_slices),
        });
    }
    let full = match params.kind {
        ScheduleKind::Plain => AnnealSchedule::standard(params.active_us)?,
        ScheduleKind::Paused {
            pause_start_us,
            pause_len_us,
        } => AnnealSchedule::with_pause(pause_start_us, pause_len_us, params.active_us)?,
    };
    let duration = params.duration_us();
    let n = params.n_slices;

    // build every schedule first so infeasible slices fail fast
    let mut slices = Vec::with_capacity(n);
    for i in 1..=n {
        let t_i = i as f64 * duration / n as f64;
        let schedule = if i == n {
            full.clone()
        } else {
            full.quench_at(t_i, crate::schedule::DEFAULT_QUENCH_WIDTH_US)?
        };
        slices.push((t_i, schedule));
    }

    let mut slice_times = Vec::with_capacity(n);
    let mut mean_energy = Vec::with_capacity(n);
    let mut best_mean = Vec::with_capacity(n);
    let mut best_sets = Vec::with_capacity(n);
    let mut best_bitstring = Vec::with_capacity(n);
    let mut chain_unbroken = embedding.map(|_| Vec::with_capacity(n));

    for (index, (t_i, schedule)) in slices.iter().enumerate() {
        let slice_cfg = cfg.with_seed(derive_seed(cfg.seed, index as u64));
        let set = run_backend(model, schedule, curves, params.reads, &slice_cfg)?;
        slice_times.push(*t_i);
        mean_energy.push(set.mean_energy()?);
        best_mean.push(set.best_fraction_mean(params.best_fraction)?);
        best_sets.push(set.best_assignments(params.best_fraction)?);
        best_bitstring.push(set.best().expect("non-empty").assignment.clone());
        if let (Some(values), Some(emb)) = (&mut chain_unbroken, embedding) {
            values.push(chain_break_fraction(&set, emb)?.unbroken);
        }
    }

    let mut hamming = Vec::with_capacity(n - 1);
    for pair in best_sets.windows(2) {
        hamming.push(adjacent_hamming(&pair[0], &pair[1])?);
    }

    Ok(SliceTrace {
        slice_times,
        mean_energy,
        best_mean,
        best_sets,
        best_bitstring,
        hamming,
        chain_unbroken,
    })
}

/// Per-qubit quasi-freezeout points: for each qubit, the smallest
/// (1-based) slice index from which its best-readout value never changes
/// through the final slice.
pub fn per_qubit_qfp(trace: &SliceTrace) -> Vec<usize> {
    per_qubit_qfp_bits(&trace.best_bitstring)
}

/// [`per_qubit_qfp`] over a bare per-slice best-readout sequence.
pub fn per_qubit_qfp_bits(best: &[Assignment]) -> Vec<usize> {
    let n_slices = best.len();
    if n_slices == 0 {
        return Vec::new();
    }
    let n_qubits = best[0].len();
    let mut qfp = vec![n_slices; n_qubits];
    let last = best[n_slices - 1].values();
    for qubit in 0..n_qubits {
        let target = last[qubit];
        let mut first = n_slices; // slice index (1-based) where the run starts
        for slice in (0..n_slices).rev() {
            if best[slice].values()[qubit] == target {
                first = slice + 1;
            } else {
                break;
            }
        }
        qfp[qubit] = first;
    }
    qfp
}

/// Histogram of freezeout slices: bin counts over [1, n_slices] summing
/// to the number of qubits.
pub fn qfp_histogram(qfps: &[usize], n_slices: usize, n_bins: usize) -> Result<Vec<u64>> {
    if n_bins == 0 || n_slices == 0 {
        return Err(Error::InvalidParameter {
            name: "qfp_histogram",
            message: "n_slices and n_bins must be >= 1".into(),
        });
    }
    let mut bins = vec![0u64; n_bins];
    for &q in qfps {
        let clamped = q.clamp(1, n_slices) - 1;
        let bin = (clamped * n_bins) / n_slices;
        bins[bin.min(n_bins - 1)] += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChimeraTopology, Domain, ProblemModel};
    use crate::sampler::Backend;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn assignments(domain: Domain, bits: &[&str]) -> Vec<Assignment> {
        bits.iter()
            .map(|b| Assignment::from_bit_string(domain, b).unwrap())
            .collect()
    }

    #[test]
    fn hamming_examples() {
        let a = assignments(Domain::Binary, &["0101"]);
        assert_eq!(adjacent_hamming(&a, &a).unwrap(), 0.0);

        let b = assignments(Domain::Binary, &["0111"]);
        assert_eq!(adjacent_hamming(&a, &b).unwrap(), 1.0);

        let c = assignments(Domain::Binary, &["00", "11"]);
        let d = assignments(Domain::Binary, &["01"]);
        assert_eq!(adjacent_hamming(&c, &d).unwrap(), 1.0);
    }

    #[test]
    fn hamming_rejects_mismatched_lengths() {
        let a = assignments(Domain::Binary, &["01"]);
        let b = assignments(Domain::Binary, &["011"]);
        assert!(adjacent_hamming(&a, &b).is_err());
        assert!(adjacent_hamming(&a, &[]).is_err());
    }

    fn trace_from_bits(columns: &[&str]) -> SliceTrace {
        // columns[i] holds the per-slice values of qubit i as 0/1 chars
        let n_slices = columns[0].len();
        let best_bitstring = (0..n_slices)
            .map(|s| {
                let bits: String = columns.iter().map(|c| c.as_bytes()[s] as char).collect();
                Assignment::from_bit_string(Domain::Spin, &bits).unwrap()
            })
            .collect();
        SliceTrace {
            slice_times: (1..=n_slices).map(|i| i as f64).collect(),
            mean_energy: vec![0.0; n_slices],
            best_mean: vec![0.0; n_slices],
            best_sets: vec![Vec::new(); n_slices],
            best_bitstring,
            hamming: vec![0.0; n_slices - 1],
            chain_unbroken: None,
        }
    }

    #[test]
    fn per_qubit_qfp_scan() {
        // qubit 0 constant, qubit 1 flips at the final slice,
        // qubit 2 follows +,-,+,+
        let trace = trace_from_bits(&["1111", "0001", "1011"]);
        assert_eq!(per_qubit_qfp(&trace), vec![1, 4, 3]);
    }

    #[test]
    fn qfp_histogram_counts_sum() {
        let qfps = vec![1, 1, 2, 5, 9, 10];
        let bins = qfp_histogram(&qfps, 10, 5).unwrap();
        assert_eq!(bins.iter().sum::<u64>(), 6);
        assert_eq!(bins[0], 3); // slices 1..2
        assert_eq!(bins[4], 2); // slices 9..10
    }

    fn tiny_model() -> ProblemModel {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 2, BTreeSet::new()).unwrap());
        ProblemModel::random(topo, Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 40).unwrap()
    }

    fn fast_cfg() -> SamplerConfig {
        SamplerConfig {
            backend: Backend::Svmc,
            sweeps_per_us: 2,
            temperature_k: 0.015,
            seed: 7,
        }
    }

    #[test]
    fn two_slice_trace_shape() {
        let model = tiny_model();
        let params = SliceParams::new(10.0, 2, 50);
        let trace = run_slicing(
            &model,
            &params,
            &fast_cfg(),
            &EnergyCurves::builtin_default(),
            None,
        )
        .unwrap();
        assert_eq!(trace.n_slices(), 2);
        assert_eq!(trace.hamming.len(), 1);
        assert_eq!(trace.slice_times, vec![5.0, 10.0]);
        for i in 0..2 {
            assert!(trace.best_mean[i] <= trace.mean_energy[i] + 1e-12);
        }
    }

    #[test]
    fn paused_trace_covers_full_duration() {
        let model = tiny_model();
        let params = SliceParams::new(10.0, 4, 30).paused(5.0, 10.0);
        assert_eq!(params.duration_us(), 20.0);
        let trace = run_slicing(
            &model,
            &params,
            &fast_cfg(),
            &EnergyCurves::builtin_default(),
            None,
        )
        .unwrap();
        assert_eq!(trace.slice_times, vec![5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn constant_model_trace_is_flat_zero() {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 2, BTreeSet::new()).unwrap());
        let model = ProblemModel::over_topology(Domain::Spin, topo);
        let params = SliceParams::new(5.0, 3, 20);
        let trace = run_slicing(
            &model,
            &params,
            &fast_cfg(),
            &EnergyCurves::builtin_default(),
            None,
        )
        .unwrap();
        assert!(trace.best_mean.iter().all(|&e| e == 0.0));
        assert!(trace.mean_energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn slicing_is_deterministic() {
        let model = tiny_model();
        let params = SliceParams::new(8.0, 4, 25);
        let curves = EnergyCurves::builtin_default();
        let a = run_slicing(&model, &params, &fast_cfg(), &curves, None).unwrap();
        let b = run_slicing(&model, &params, &fast_cfg(), &curves, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_round_trip() {
        let model = tiny_model();
        let params = SliceParams::new(6.0, 3, 20);
        let trace = run_slicing(
            &model,
            &params,
            &fast_cfg(),
            &EnergyCurves::builtin_default(),
            None,
        )
        .unwrap();
        let rows = parse_trace_csv(&trace.to_csv()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].hamming_prev, None);
        assert_eq!(rows[1].hamming_prev, Some(trace.hamming[0]));
        assert_eq!(rows[2].best_mean, trace.best_mean[2]);
        assert!(rows.iter().all(|r| r.chain_unbroken.is_none()));

        let bits = parse_best_bitstrings_csv(&trace.best_bitstrings_csv()).unwrap();
        assert_eq!(bits.len(), 3);
        assert_eq!(bits[0].len(), model.n());
    }
}
