//! Schedule-aware samplers.
//!
//! The spin-vector Monte Carlo backend is the hardware stand-in: each
//! qubit carries an angle theta, initialized transverse (pi/2), and
//! evolves by Metropolis sweeps on the effective energy
//!
//! ```text
//! E(theta; s) = -A(s)/2 sum_i sin(theta_i)
//!             + B(s)/2 (sum_i a_i cos(theta_i)
//!                     + sum_{i<j} a_ij cos(theta_i) cos(theta_j))
//! ```
//!
//! with `s` taken from the schedule at each sweep's time point, so
//! quenches and pauses shape the dynamics exactly as submitted. Readout
//! is sign(cos theta), zero broken toward +1. A classical thermal backend
//! and an exact Boltzmann enumerator serve as cross-checks.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Assignment, Domain, ProblemModel};
use crate::rng::stream_rng;
use crate::sampleset::SampleSet;
use crate::schedule::{AnnealSchedule, EnergyCurves};
use crate::{BOLTZMANN_GHZ_PER_K, OPERATING_TEMPERATURE_K};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Svmc,
    Thermal,
    BoltzmannExact,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svmc" => Ok(Backend::Svmc),
            "thermal" => Ok(Backend::Thermal),
            "boltzmann" | "boltzmann-exact" => Ok(Backend::BoltzmannExact),
            other => Err(Error::InvalidParameter {
                name: "backend",
                message: format!("unknown backend {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub backend: Backend,
    pub sweeps_per_us: u32,
    pub temperature_k: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            backend: Backend::Svmc,
            sweeps_per_us: 10,
            temperature_k: OPERATING_TEMPERATURE_K,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps_per_us < 1 {
            return Err(Error::InvalidParameter {
                name: "sweeps_per_us",
                message: "must be >= 1".into(),
            });
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature_k",
                message: format!("{} must be > 0", self.temperature_k),
            });
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SamplerConfig { seed, ..self }
    }

    /// Physical inverse temperature in 1/GHz.
    pub fn beta_physical(&self) -> f64 {
        1.0 / (BOLTZMANN_GHZ_PER_K * self.temperature_k)
    }
}

/// Dense coupling arrays extracted from a sparse spin model; the inner
/// loops index vectors instead of maps.
struct Couplings {
    n: usize,
    linear: Vec<f64>,
    neighbors: Vec<Vec<(u32, f64)>>,
}

impl Couplings {
    fn from_model(model: &ProblemModel) -> Self {
        let n = model.n();
        let mut linear = vec![0.0; n];
        for (&i, &w) in model.linear() {
            linear[i] = w;
        }
        let mut neighbors = vec![Vec::new(); n];
        for (&(i, j), &w) in model.quadratic() {
            neighbors[i].push((j as u32, w));
            neighbors[j].push((i as u32, w));
        }
        Couplings {
            n,
            linear,
            neighbors,
        }
    }

    fn local_field(&self, i: usize, cos_theta: &[f64]) -> f64 {
        let mut h = self.linear[i];
        for &(j, w) in &self.neighbors[i] {
            h += w * cos_theta[j as usize];
        }
        h
    }
}

/// Per-sweep energy scales (A(s)/2, B(s)/2) along a schedule, sampled at
/// sweep midpoints.
fn sweep_scales(
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    sweeps_per_us: u32,
) -> Result<Vec<(f64, f64)>> {
    let total = schedule.total_time();
    let n_sweeps = ((total * sweeps_per_us as f64).round() as usize).max(1);
    let dt = total / n_sweeps as f64;
    (0..n_sweeps)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt;
            let s = schedule.s_of_t(t.min(total))?;
            Ok((curves.a_at(s) / 2.0, curves.b_at(s) / 2.0))
        })
        .collect()
}

fn check_request(schedule: &AnnealSchedule, reads: u64, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if reads == 0 {
        return Err(Error::ZeroReads);
    }
    let violations = schedule.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidSchedule(violations));
    }
    Ok(())
}

/// The SVMC effective energy at fixed energy scales; readouts snapped to
/// the poles (theta in {0, pi}) reduce it to B/2 times the Ising energy.
pub fn svmc_effective_energy(model: &ProblemModel, thetas: &[f64], a_ghz: f64, b_ghz: f64) -> f64 {
    let mut transverse = 0.0;
    for &t in thetas {
        transverse += t.sin();
    }
    let mut problem = 0.0;
    for (&i, &w) in model.linear() {
        problem += w * thetas[i].cos();
    }
    for (&(i, j), &w) in model.quadratic() {
        problem += w * thetas[i].cos() * thetas[j].cos();
    }
    -a_ghz / 2.0 * transverse + b_ghz / 2.0 * problem
}

fn svmc_read(coup: &Couplings, scales: &[(f64, f64)], beta: f64, seed: u64, read: u64) -> Vec<i8> {
    let mut rng = stream_rng(seed, read);
    let mut cos_t = vec![0.0f64; coup.n]; // theta = pi/2
    let mut sin_t = vec![1.0f64; coup.n];
    for &(a_half, b_half) in scales {
        for i in 0..coup.n {
            let theta_new = rng.gen_range(0.0..PI);
            let (sin_new, cos_new) = theta_new.sin_cos();
            let h = coup.local_field(i, &cos_t);
            let delta =
                -a_half * (sin_new - sin_t[i]) + b_half * h * (cos_new - cos_t[i]);
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                cos_t[i] = cos_new;
                sin_t[i] = sin_new;
            }
        }
    }
    cos_t
        .iter()
        .map(|&c| if c >= 0.0 { 1i8 } else { -1i8 })
        .collect()
}

fn thermal_read(coup: &Couplings, betas: &[f64], seed: u64, read: u64) -> Vec<i8> {
    let mut rng = stream_rng(seed, read);
    let mut spins: Vec<f64> = (0..coup.n)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    for &beta in betas {
        for i in 0..coup.n {
            let mut h = coup.linear[i];
            for &(j, w) in &coup.neighbors[i] {
                h += w * spins[j as usize];
            }
            let delta = -2.0 * spins[i] * h;
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                spins[i] = -spins[i];
            }
        }
    }
    spins.iter().map(|&s| if s > 0.0 { 1i8 } else { -1i8 }).collect()
}

/// Runs reads in parallel over a spin model and re-maps results to the
/// caller's original (possibly binary) model, recomputing energies there.
fn finish_reads(
    original: &ProblemModel,
    spin_values: Vec<Vec<i8>>,
    seed: u64,
) -> Result<SampleSet> {
    let reads = spin_values
        .into_iter()
        .map(|values| {
            let spin = Assignment::new(Domain::Spin, values)?;
            let assignment = match original.domain() {
                Domain::Spin => spin,
                Domain::Binary => spin.to_binary(),
            };
            let energy = original.energy(&assignment)?;
            Ok((assignment, energy))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet::from_reads(reads, seed))
}

/// SVMC execution of `schedule` against `model`.
///
/// Binary models are converted to spin form for the dynamics; readouts
/// and energies are reported in the model's own domain.
pub fn sample(
    model: &ProblemModel,
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    reads: u64,
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    check_request(schedule, reads, cfg)?;
    let spin_model = match model.domain() {
        Domain::Spin => model.clone(),
        Domain::Binary => model.to_ising()?.0,
    };
    let coup = Couplings::from_model(&spin_model);
    let scales = sweep_scales(schedule, curves, cfg.sweeps_per_us)?;
    let beta = cfg.beta_physical();
    let spin_values: Vec<Vec<i8>> = (0..reads)
        .into_par_iter()
        .map(|read| svmc_read(&coup, &scales, beta, cfg.seed, read))
        .collect();
    finish_reads(model, spin_values, cfg.seed)
}

/// Classical single-spin-flip annealer whose inverse temperature tracks
/// B(s) along the schedule; cross-check backend with the same contract
/// as [`sample`].
pub fn thermal_sample(
    model: &ProblemModel,
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    reads: u64,
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    check_request(schedule, reads, cfg)?;
    let spin_model = match model.domain() {
        Domain::Spin => model.clone(),
        Domain::Binary => model.to_ising()?.0,
    };
    let coup = Couplings::from_model(&spin_model);
    let beta_phys = cfg.beta_physical();
    let betas: Vec<f64> = sweep_scales(schedule, curves, cfg.sweeps_per_us)?
        .into_iter()
        .map(|(_, b_half)| b_half * beta_phys)
        .collect();
    let spin_values: Vec<Vec<i8>> = (0..reads)
        .into_par_iter()
        .map(|read| thermal_read(&coup, &betas, cfg.seed, read))
        .collect();
    finish_reads(model, spin_values, cfg.seed)
}

/// Exact i.i.d. Boltzmann samples P(state) ~ exp(-beta * energy) by
/// exhaustive enumeration; limited to n <= 20.
pub fn boltzmann_exact_sample(
    model: &ProblemModel,
    beta: f64,
    reads: u64,
    seed: u64,
) -> Result<SampleSet> {
    const MAX_N: usize = 20;
    if model.n() > MAX_N {
        return Err(Error::TooManyVariables {
            op: "boltzmann_exact_sample",
            n: model.n(),
            max: MAX_N,
        });
    }
    if reads == 0 {
        return Err(Error::ZeroReads);
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            message: format!("{beta} must be finite and >= 0"),
        });
    }
    let n = model.n();
    let low: i8 = match model.domain() {
        Domain::Spin => -1,
        Domain::Binary => 0,
    };
    let states = 1usize << n;
    let assignment_of = |mask: usize| -> Assignment {
        let values: Vec<i8> = (0..n)
            .map(|i| if (mask >> i) & 1 == 1 { 1 } else { low })
            .collect();
        Assignment::new(model.domain(), values).expect("valid domain values")
    };
    let mut energies = Vec::with_capacity(states);
    let mut min_energy = f64::INFINITY;
    for mask in 0..states {
        let e = model.energy(&assignment_of(mask))?;
        min_energy = min_energy.min(e);
        energies.push(e);
    }
    // cumulative unnormalized weights, shifted for stability
    let mut cumulative = Vec::with_capacity(states);
    let mut total = 0.0;
    for &e in &energies {
        total += (-beta * (e - min_energy)).exp();
        cumulative.push(total);
    }
    let samples: Vec<(Assignment, f64)> = (0..reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = stream_rng(seed, read);
            let u: f64 = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(states - 1);
            (assignment_of(idx), energies[idx])
        })
        .collect();
    Ok(SampleSet::from_reads(samples, seed))
}

/// Backend dispatch used by the pipeline stages and the CLI. The exact
/// Boltzmann backend ignores the schedule and samples the classical
/// energies at the physical inverse temperature.
pub fn run_backend(
    model: &ProblemModel,
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    reads: u64,
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    match cfg.backend {
        Backend::Svmc => sample(model, schedule, curves, reads, cfg),
        Backend::Thermal => thermal_sample(model, schedule, curves, reads, cfg),
        Backend::BoltzmannExact => {
            boltzmann_exact_sample(model, cfg.beta_physical(), reads, cfg.seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChimeraTopology;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn single_spin_model(weight: f64) -> ProblemModel {
        let mut m = ProblemModel::new(Domain::Spin, 1);
        m.set_linear(0, weight).unwrap();
        m
    }

    #[test]
    fn svmc_finds_single_spin_ground_state() {
        let model = single_spin_model(-1.0);
        let (ground, _) = model.brute_force_ground().unwrap();
        assert_eq!(ground.values(), &[1]);

        let schedule = AnnealSchedule::standard(100.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig::default();
        let set = sample(&model, &schedule, &curves, 1000, &cfg).unwrap();
        let up: u64 = set
            .records()
            .iter()
            .filter(|r| r.assignment.values()[0] == 1)
            .map(|r| r.count)
            .sum();
        assert!(up >= 950, "only {up}/1000 reads in the ground state");
    }

    #[test]
    fn svmc_at_transverse_start_reads_out_uniformly() {
        // held at s = 0 the problem term vanishes and readout signs are
        // symmetric coin flips
        let model = single_spin_model(-1.0);
        let coup = Couplings::from_model(&model);
        let curves = EnergyCurves::builtin_default();
        let scales = vec![(curves.a_at(0.0) / 2.0, curves.b_at(0.0) / 2.0); 20];
        let beta = SamplerConfig::default().beta_physical();
        let reads = 4000;
        let mut up = 0u64;
        for read in 0..reads {
            let values = svmc_read(&coup, &scales, beta, 99, read);
            if values[0] == 1 {
                up += 1;
            }
        }
        // binomial(4000, 0.5): five sigma is ~158
        let deviation = (up as f64 - 2000.0).abs();
        assert!(deviation < 160.0, "up={up} is not uniform");
    }

    #[test]
    fn svmc_is_deterministic_per_seed() {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 4, BTreeSet::new()).unwrap());
        let model =
            ProblemModel::random(topo, Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 3).unwrap();
        let schedule = AnnealSchedule::sliced(100.0, 40.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig {
            sweeps_per_us: 5,
            ..Default::default()
        };
        let a = sample(&model, &schedule, &curves, 64, &cfg).unwrap();
        let b = sample(&model, &schedule, &curves, 64, &cfg).unwrap();
        assert_eq!(a, b);
        let c = sample(&model, &schedule, &curves, 64, &cfg.with_seed(1)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stored_energies_are_recomputable() {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 4, BTreeSet::new()).unwrap());
        let spin_model =
            ProblemModel::random(topo.clone(), Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 5).unwrap();
        let (qubo, _) = spin_model.to_qubo().unwrap();
        let schedule = AnnealSchedule::standard(20.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig {
            sweeps_per_us: 2,
            ..Default::default()
        };
        for model in [&spin_model, &qubo] {
            let set = sample(model, &schedule, &curves, 50, &cfg).unwrap();
            for record in set.records() {
                assert_eq!(record.assignment.domain(), model.domain());
                let recomputed = model.energy(&record.assignment).unwrap();
                assert_eq!(recomputed, record.energy);
            }
        }
    }

    #[test]
    fn svmc_effective_energy_at_poles_matches_ising() {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 4, BTreeSet::new()).unwrap());
        let model =
            ProblemModel::random(topo, Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 17).unwrap();
        let curves = EnergyCurves::builtin_default();
        let b_end = curves.b_at(1.0);
        let mut rng = stream_rng(17, 5);
        for _ in 0..20 {
            let thetas: Vec<f64> = (0..model.n())
                .map(|_| if rng.gen_bool(0.5) { 0.0 } else { PI })
                .collect();
            let readout: Vec<i8> = thetas
                .iter()
                .map(|&t| if t.cos() >= 0.0 { 1 } else { -1 })
                .collect();
            let a = Assignment::new(Domain::Spin, readout).unwrap();
            let ising = model.energy(&a).unwrap();
            let effective = svmc_effective_energy(&model, &thetas, 0.0, b_end);
            assert!((effective - b_end / 2.0 * ising).abs() < 1e-9 * ising.abs().max(1.0));
        }
    }

    #[test]
    fn longer_anneals_do_not_hurt_best_fraction() {
        let topo = Arc::new(ChimeraTopology::new(4, 4, 4, BTreeSet::new()).unwrap());
        let model =
            ProblemModel::random(topo, Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 77).unwrap();
        let curves = EnergyCurves::builtin_default();
        let mut gaps = Vec::new();
        for seed in 0..5u64 {
            let cfg = SamplerConfig {
                sweeps_per_us: 1,
                seed,
                ..Default::default()
            };
            let short = sample(
                &model,
                &AnnealSchedule::standard(1.0).unwrap(),
                &curves,
                100,
                &cfg,
            )
            .unwrap();
            let long = sample(
                &model,
                &AnnealSchedule::standard(1000.0).unwrap(),
                &curves,
                100,
                &cfg,
            )
            .unwrap();
            gaps.push(
                short.best_fraction_mean(0.01).unwrap() - long.best_fraction_mean(0.01).unwrap(),
            );
        }
        gaps.sort_by(f64::total_cmp);
        let median = gaps[2];
        assert!(
            median >= 0.0,
            "long anneal best-1% exceeded short anneal: median gap {median}"
        );
    }

    #[test]
    fn boltzmann_uniform_at_beta_zero() {
        let model = ProblemModel::new(Domain::Spin, 4);
        let reads = 100_000u64;
        let set = boltzmann_exact_sample(&model, 0.0, reads, 11).unwrap();
        assert_eq!(set.reads(), reads);
        // chi-square over the 16 states, 15 dof; 37.7 is the 0.1% tail
        let expected = reads as f64 / 16.0;
        let mut chi2 = 0.0;
        let mut cells = 0;
        for record in set.records() {
            let d = record.count as f64 - expected;
            chi2 += d * d / expected;
            cells += 1;
        }
        assert_eq!(cells, 16);
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn boltzmann_concentrates_at_large_beta() {
        let mut model = ProblemModel::new(Domain::Spin, 2);
        model.set_quadratic(0, 1, 1.0).unwrap();
        let set = boltzmann_exact_sample(&model, 50.0, 2000, 4).unwrap();
        let ground: u64 = set
            .records()
            .iter()
            .filter(|r| r.energy == -1.0)
            .map(|r| r.count)
            .sum();
        assert!(ground >= 1990, "ground mass {ground}/2000");
    }

    #[test]
    fn boltzmann_mean_energy_matches_partition_function() {
        let topo = Arc::new(ChimeraTopology::new(1, 1, 4, BTreeSet::new()).unwrap());
        let model =
            ProblemModel::random(topo, Domain::Spin, (-2.0, 2.0), (-1.0, 1.0), 23).unwrap();
        let beta = 1.0;
        // exact mean and variance from the partition function
        let n = model.n();
        let mut z = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        for mask in 0u64..(1 << n) {
            let values: Vec<i8> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { 1 } else { -1 })
                .collect();
            let e = model
                .energy(&Assignment::new(Domain::Spin, values).unwrap())
                .unwrap();
            let w = (-beta * e).exp();
            z += w;
            mean += e * w;
            second += e * e * w;
        }
        mean /= z;
        second /= z;
        let variance = second - mean * mean;

        let reads = 20_000u64;
        let set = boltzmann_exact_sample(&model, beta, reads, 31).unwrap();
        let sample_mean = set.mean_energy().unwrap();
        let standard_error = (variance / reads as f64).sqrt();
        assert!(
            (sample_mean - mean).abs() < 3.0 * standard_error,
            "sample mean {sample_mean} vs exact {mean} (se {standard_error})"
        );
    }

    #[test]
    fn boltzmann_matches_state_probabilities() {
        let mut model = ProblemModel::new(Domain::Spin, 3);
        model.set_linear(0, 0.5).unwrap();
        model.set_quadratic(0, 1, -0.7).unwrap();
        model.set_quadratic(1, 2, 0.3).unwrap();
        let beta = 0.8;
        let reads = 50_000u64;
        let set = boltzmann_exact_sample(&model, beta, reads, 13).unwrap();
        let mut z = 0.0;
        let mut probs = std::collections::BTreeMap::new();
        for mask in 0u64..8 {
            let values: Vec<i8> = (0..3)
                .map(|i| if (mask >> i) & 1 == 1 { 1 } else { -1 })
                .collect();
            let a = Assignment::new(Domain::Spin, values).unwrap();
            let w = (-beta * model.energy(&a).unwrap()).exp();
            z += w;
            probs.insert(a, w);
        }
        for record in set.records() {
            let p = probs[&record.assignment] / z;
            let expect = p * reads as f64;
            let sigma = (reads as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (record.count as f64 - expect).abs() < 5.0 * sigma,
                "state {} count {} expected {expect}",
                record.assignment.to_bit_string(),
                record.count
            );
        }
    }

    #[test]
    fn rejects_invalid_requests() {
        let model = single_spin_model(1.0);
        let curves = EnergyCurves::builtin_default();
        let schedule = AnnealSchedule::standard(10.0).unwrap();
        let cfg = SamplerConfig::default();
        assert!(matches!(
            sample(&model, &schedule, &curves, 0, &cfg),
            Err(Error::ZeroReads)
        ));
        let bad_cfg = SamplerConfig {
            sweeps_per_us: 0,
            ..Default::default()
        };
        assert!(sample(&model, &schedule, &curves, 10, &bad_cfg).is_err());
        let big = ProblemModel::new(Domain::Spin, 21);
        assert!(matches!(
            boltzmann_exact_sample(&big, 1.0, 10, 0),
            Err(Error::TooManyVariables { .. })
        ));
    }
}
