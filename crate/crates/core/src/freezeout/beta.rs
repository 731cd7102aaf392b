//! Effective inverse temperature from paired energy histograms.
//!
//! Rescaling all coefficients by x < 1 turns samples at machine
//! temperature into samples at inverse temperature x * beta_eff on the
//! original energy scale. For bins E1, E2 occupied in both histograms,
//!
//! ```text
//! delta_l = log[ P(E1) P'(E2) / (P(E2) P'(E1)) ] = (x - 1) beta_eff (E1 - E2)
//! ```
//!
//! and the unknown degeneracies cancel, so a least-squares line through
//! the origin over (delta_E, delta_l) pairs yields beta_eff.

use crate::error::{Error, Result};
use crate::model::ProblemModel;
use crate::rng::derive_seed;
use crate::sampler::{run_backend, SamplerConfig};
use crate::sampleset::{SampleRecord, SampleSet};
use crate::schedule::{AnnealSchedule, EnergyCurves};
use crate::{BOLTZMANN_GHZ_PER_K, OPERATING_TEMPERATURE_K};

/// Minimum r-squared for a fit to count as valid.
pub const DEFAULT_R2_MIN: f64 = 0.5;

/// Recommended bin count K = ceil(sqrt(2R)) for R reads.
pub fn recommended_bins(reads: u64) -> usize {
    (2.0 * reads as f64).sqrt().ceil() as usize
}

/// Default rescale grid: 8 evenly spaced factors in [0.6, 0.95].
pub fn default_x_grid() -> Vec<f64> {
    (0..8).map(|i| 0.6 + i as f64 * (0.35 / 7.0)).collect()
}

/// Result of one effective-temperature fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    /// Rescale factor the fit used.
    pub x: f64,
    /// Estimated effective inverse temperature (slope / (x - 1)).
    pub beta_eff: f64,
    /// Fitted slope of the (delta_E, delta_l) line through the origin.
    pub slope: f64,
    /// Goodness of fit.
    pub r2: f64,
    /// Number of usable bin pairs behind the fit.
    pub n_pairs: usize,
    pub valid: bool,
}

impl BetaFit {
    fn invalid(x: f64, n_pairs: usize) -> Self {
        BetaFit {
            x,
            beta_eff: f64::NAN,
            slope: f64::NAN,
            r2: f64::NAN,
            n_pairs,
            valid: false,
        }
    }

    pub fn csv_header() -> &'static str {
        "x,beta_eff,slope,r2,n_pairs,valid"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.x, self.beta_eff, self.slope, self.r2, self.n_pairs, self.valid
        )
    }
}

/// Fits beta_eff from samples of the original model and samples of the
/// x-rescaled model, both expressed on the *original* energy scale.
///
/// Energies are binned as given (the estimate is invariant under a common
/// shift); bins empty in either histogram are skipped rather than
/// smoothed. Fewer than 3 usable pairs, a non-positive estimate, or
/// r2 below the threshold all produce an invalid fit value, signalling
/// that no freezeout point could be measured.
pub fn estimate_beta_eff(orig: &SampleSet, scaled: &SampleSet, x: f64) -> Result<BetaFit> {
    estimate_beta_eff_with(orig, scaled, x, None, DEFAULT_R2_MIN)
}

pub fn estimate_beta_eff_with(
    orig: &SampleSet,
    scaled: &SampleSet,
    x: f64,
    n_bins: Option<usize>,
    r2_min: f64,
) -> Result<BetaFit> {
    if orig.is_empty() || scaled.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if orig.reads() != scaled.reads() {
        return Err(Error::ReadCountMismatch {
            a: orig.reads(),
            b: scaled.reads(),
        });
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "x",
            message: format!("{x} outside (0, 1]"),
        });
    }
    let bins = n_bins.unwrap_or_else(|| recommended_bins(orig.reads()));
    if bins < 2 {
        return Err(Error::InvalidParameter {
            name: "n_bins",
            message: format!("{bins} must be >= 2"),
        });
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for set in [orig, scaled] {
        for record in set.records() {
            lo = lo.min(record.energy);
            hi = hi.max(record.energy);
        }
    }
    if !(hi > lo) {
        return Ok(BetaFit::invalid(x, 0));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts_orig = vec![0u64; bins];
    let mut counts_scaled = vec![0u64; bins];
    for (set, counts) in [(orig, &mut counts_orig), (scaled, &mut counts_scaled)] {
        for record in set.records() {
            let idx = (((record.energy - lo) / width) as usize).min(bins - 1);
            counts[idx] += record.count;
        }
    }

    // bins usable for Eq-style pairing: occupied in both histograms
    let usable: Vec<usize> = (0..bins)
        .filter(|&k| counts_orig[k] > 0 && counts_scaled[k] > 0)
        .collect();
    let center = |k: usize| lo + (k as f64 + 0.5) * width;

    let mut pairs = Vec::new();
    for (a, &k1) in usable.iter().enumerate() {
        for &k2 in usable.iter().skip(a + 1) {
            let delta_e = center(k1) - center(k2);
            let delta_l = ((counts_orig[k1] as f64 * counts_scaled[k2] as f64)
                / (counts_orig[k2] as f64 * counts_scaled[k1] as f64))
                .ln();
            pairs.push((delta_e, delta_l));
        }
    }
    let n_pairs = pairs.len();
    if n_pairs < 3 {
        return Ok(BetaFit::invalid(x, n_pairs));
    }

    let sum_ee: f64 = pairs.iter().map(|(e, _)| e * e).sum();
    let sum_el: f64 = pairs.iter().map(|(e, l)| e * l).sum();
    let sum_ll: f64 = pairs.iter().map(|(_, l)| l * l).sum();
    if sum_ee == 0.0 {
        return Ok(BetaFit::invalid(x, n_pairs));
    }
    let slope = sum_el / sum_ee;
    let ss_res: f64 = pairs
        .iter()
        .map(|(e, l)| {
            let r = l - slope * e;
            r * r
        })
        .sum();
    let r2 = if sum_ll > 0.0 {
        1.0 - ss_res / sum_ll
    } else {
        1.0
    };

    if x == 1.0 {
        // degenerate rescale: the slope carries no temperature signal
        return Ok(BetaFit {
            x,
            beta_eff: f64::NAN,
            slope,
            r2,
            n_pairs,
            valid: false,
        });
    }
    let beta_eff = slope / (x - 1.0);
    let valid = beta_eff.is_finite() && beta_eff > 0.0 && r2 >= r2_min;
    Ok(BetaFit {
        x,
        beta_eff,
        slope,
        r2,
        n_pairs,
        valid,
    })
}

/// Converts an effective inverse temperature into the anneal fraction s*
/// with B(s*) = beta_eff * k_B * T at the 15 mK operating point.
pub fn freezeout_point(beta_eff: f64, curves: &EnergyCurves) -> Result<f64> {
    if !(beta_eff > 0.0) || !beta_eff.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta_eff",
            message: format!("{beta_eff} must be finite and > 0"),
        });
    }
    let target = beta_eff * BOLTZMANN_GHZ_PER_K * OPERATING_TEMPERATURE_K;
    curves.invert_b(target)
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    /// One fit per grid point, in grid order.
    pub fits: Vec<BetaFit>,
    /// The valid fit with the largest x, if any fit was valid.
    pub chosen: Option<BetaFit>,
}

/// Runs the estimator across a grid of rescale factors with fresh samples
/// per factor; reports the valid fit with the largest x < 1.
///
/// The rescaled run's energies are re-evaluated against the original
/// model before fitting, putting both histograms on the common energy
/// scale the degeneracy cancellation requires.
pub fn scan_x(
    model: &ProblemModel,
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    reads: u64,
    sampler_cfg: &SamplerConfig,
    grid: &[f64],
) -> Result<ScanOutcome> {
    scan_x_with(
        model,
        schedule,
        curves,
        reads,
        sampler_cfg,
        grid,
        None,
        DEFAULT_R2_MIN,
    )
}

/// [`scan_x`] with an explicit bin count and validity threshold.
#[allow(clippy::too_many_arguments)]
pub fn scan_x_with(
    model: &ProblemModel,
    schedule: &AnnealSchedule,
    curves: &EnergyCurves,
    reads: u64,
    sampler_cfg: &SamplerConfig,
    grid: &[f64],
    n_bins: Option<usize>,
    r2_min: f64,
) -> Result<ScanOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            message: "rescale grid is empty".into(),
        });
    }
    for &x in grid {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidParameter {
                name: "grid",
                message: format!("rescale factor {x} outside (0, 1)"),
            });
        }
    }
    let mut fits = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let cfg_orig = sampler_cfg.with_seed(derive_seed(sampler_cfg.seed, 2 * i as u64));
        let cfg_scaled = sampler_cfg.with_seed(derive_seed(sampler_cfg.seed, 2 * i as u64 + 1));
        let orig = run_backend(model, schedule, curves, reads, &cfg_orig)?;
        let scaled_raw = run_backend(&model.rescale(x), schedule, curves, reads, &cfg_scaled)?;
        let rescored: Vec<SampleRecord> = scaled_raw
            .records()
            .iter()
            .map(|r| {
                Ok(SampleRecord {
                    assignment: r.assignment.clone(),
                    energy: model.energy(&r.assignment)?,
                    count: r.count,
                })
            })
            .collect::<Result<_>>()?;
        let scaled = SampleSet::from_records(rescored, scaled_raw.seed());
        fits.push(estimate_beta_eff_with(&orig, &scaled, x, n_bins, r2_min)?);
    }
    let chosen = fits
        .iter()
        .filter(|f| f.valid)
        .max_by(|a, b| a.x.total_cmp(&b.x))
        .cloned();
    Ok(ScanOutcome { fits, chosen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, Domain, ProblemModel};
    use crate::rng::{open_uniform, stream_rng};
    use crate::sampler::{boltzmann_exact_sample, Backend};
    use rand::Rng;

    fn random_spin_model(n: usize, seed: u64) -> ProblemModel {
        let mut rng = stream_rng(seed, 3);
        let mut m = ProblemModel::new(Domain::Spin, n);
        for i in 0..n {
            m.set_linear(i, open_uniform(&mut rng, -2.0, 2.0)).unwrap();
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    m.set_quadratic(i, j, open_uniform(&mut rng, -1.0, 1.0))
                        .unwrap();
                }
            }
        }
        m
    }

    /// Gauge ensemble of the critical mean-field ferromagnet,
    /// a_ij = -eps_i eps_j / n: at beta = 1 the magnetization
    /// degeneracies cancel the Boltzmann factor level by level, so every
    /// occupied histogram bin is an isolated, heavily populated point
    /// mass and the pair statistics are clean.
    fn critical_mattis_model(n: usize, seed: u64) -> ProblemModel {
        let mut rng = stream_rng(seed, 4);
        let gauge: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let mut m = ProblemModel::new(Domain::Spin, n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set_quadratic(i, j, -(1.0 / n as f64) * gauge[i] * gauge[j])
                    .unwrap();
            }
        }
        m
    }

    /// Samples of the x-rescaled model re-expressed on the original scale
    /// (how scan_x feeds the estimator).
    fn rescaled_samples(model: &ProblemModel, x: f64, reads: u64, seed: u64) -> SampleSet {
        let raw = boltzmann_exact_sample(&model.rescale(x), 1.0, reads, seed).unwrap();
        let records = raw
            .records()
            .iter()
            .map(|r| SampleRecord {
                assignment: r.assignment.clone(),
                energy: model.energy(&r.assignment).unwrap(),
                count: r.count,
            })
            .collect();
        SampleSet::from_records(records, seed)
    }

    #[test]
    fn bin_rule_matches_recommendation() {
        assert_eq!(recommended_bins(1000), 45);
        assert_eq!(recommended_bins(10_000), 142);
    }

    #[test]
    fn default_grid_spans_documented_interval() {
        let grid = default_x_grid();
        assert_eq!(grid.len(), 8);
        assert!((grid[0] - 0.6).abs() < 1e-12);
        assert!((grid[7] - 0.95).abs() < 1e-12);
        for w in grid.windows(2) {
            assert!((w[1] - w[0] - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_known_beta_from_exact_sampler() {
        let model = critical_mattis_model(12, 5);
        let reads = 10_000;
        let orig = boltzmann_exact_sample(&model, 1.0, reads, 100).unwrap();
        let scaled = rescaled_samples(&model, 0.8, reads, 101);
        let fit = estimate_beta_eff(&orig, &scaled, 0.8).unwrap();
        assert!(fit.valid, "fit invalid: {fit:?}");
        assert!(
            (fit.beta_eff - 1.0).abs() < 0.1,
            "beta_eff = {}",
            fit.beta_eff
        );
        assert!(fit.r2 > 0.9);
    }

    #[test]
    fn degenerate_rescale_is_invalid() {
        let model = random_spin_model(6, 8);
        let orig = boltzmann_exact_sample(&model, 1.0, 2000, 1).unwrap();
        let again = boltzmann_exact_sample(&model, 1.0, 2000, 2).unwrap();
        let fit = estimate_beta_eff(&orig, &again, 1.0).unwrap();
        assert!(!fit.valid);
        assert!(fit.beta_eff.is_nan());
    }

    #[test]
    fn constant_energies_yield_invalid_fit() {
        let a = Assignment::new(Domain::Spin, vec![1, 1]).unwrap();
        let one = SampleSet::from_reads(vec![(a.clone(), 0.0); 50], 0);
        let two = SampleSet::from_reads(vec![(a, 0.0); 50], 1);
        let fit = estimate_beta_eff(&one, &two, 0.8).unwrap();
        assert!(!fit.valid);
        assert_eq!(fit.n_pairs, 0);
    }

    #[test]
    fn estimate_is_shift_invariant() {
        let model = random_spin_model(8, 2);
        let reads = 4000;
        let orig = boltzmann_exact_sample(&model, 1.0, reads, 7).unwrap();
        let scaled = rescaled_samples(&model, 0.7, reads, 8);
        let shift = 17.25;
        let shifted = |set: &SampleSet| {
            let records = set
                .records()
                .iter()
                .map(|r| SampleRecord {
                    assignment: r.assignment.clone(),
                    energy: r.energy + shift,
                    count: r.count,
                })
                .collect();
            SampleSet::from_records(records, set.seed())
        };
        let base = estimate_beta_eff(&orig, &scaled, 0.7).unwrap();
        let moved = estimate_beta_eff(&shifted(&orig), &shifted(&scaled), 0.7).unwrap();
        assert_eq!(base.n_pairs, moved.n_pairs);
        assert!((base.slope - moved.slope).abs() < 1e-9);
        assert!((base.beta_eff - moved.beta_eff).abs() < 1e-9);
    }

    #[test]
    fn estimate_error_halves_as_reads_quadruple() {
        let model = critical_mattis_model(12, 4);
        let err_at = |reads: u64, seed: u64| -> f64 {
            let orig = boltzmann_exact_sample(&model, 1.0, reads, seed).unwrap();
            let scaled = rescaled_samples(&model, 0.8, reads, seed + 1000);
            let fit = estimate_beta_eff(&orig, &scaled, 0.8).unwrap();
            (fit.beta_eff - 1.0).abs()
        };
        // averaged over a few seeds to tame noise
        let coarse: f64 = (0..4).map(|s| err_at(2_500, 10 + s)).sum::<f64>() / 4.0;
        let fine: f64 = (0..4).map(|s| err_at(10_000, 50 + s)).sum::<f64>() / 4.0;
        assert!(
            fine < coarse * 0.9,
            "error did not shrink: coarse {coarse}, fine {fine}"
        );
    }

    #[test]
    fn freezeout_point_conversion() {
        let kbt = BOLTZMANN_GHZ_PER_K * OPERATING_TEMPERATURE_K;
        assert!((kbt - 0.31254915).abs() < 1e-9);
        let curves = crate::schedule::EnergyCurves::from_table(
            "linear",
            vec![(0.0, 1.0, 0.0), (1.0, 0.0, 16.0)],
        )
        .unwrap();
        let s = freezeout_point(2.0, &curves).unwrap();
        assert!((s - 2.0 * kbt / 16.0).abs() < 1e-12);
        // a huge beta pushes the target past B(1)
        assert!(matches!(
            freezeout_point(1e6, &curves),
            Err(Error::CurveTargetOutOfRange { .. })
        ));
    }

    #[test]
    fn scan_selects_largest_valid_x() {
        let model = random_spin_model(8, 12);
        let schedule = AnnealSchedule::standard(10.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig {
            backend: Backend::BoltzmannExact,
            temperature_k: 1.0 / BOLTZMANN_GHZ_PER_K, // beta = 1
            seed: 3,
            ..Default::default()
        };
        let grid = [0.7, 0.8, 0.9];
        let outcome = scan_x(&model, &schedule, &curves, 6000, &cfg, &grid).unwrap();
        assert_eq!(outcome.fits.len(), 3);
        let chosen = outcome.chosen.expect("exact sampler should fit");
        let largest_valid = outcome
            .fits
            .iter()
            .filter(|f| f.valid)
            .map(|f| f.x)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(chosen.x, largest_valid);
        assert!((chosen.beta_eff - 1.0).abs() < 0.15, "{chosen:?}");
    }

    #[test]
    fn scan_reports_overall_invalid() {
        // a zero model has a single energy level; every fit degenerates
        let model = ProblemModel::new(Domain::Spin, 4);
        let schedule = AnnealSchedule::standard(10.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig {
            backend: Backend::BoltzmannExact,
            seed: 5,
            ..Default::default()
        };
        let outcome = scan_x(&model, &schedule, &curves, 500, &cfg, &[0.7, 0.9]).unwrap();
        assert!(outcome.chosen.is_none());
        assert!(outcome.fits.iter().all(|f| !f.valid));
    }

    #[test]
    fn scan_rejects_bad_grid() {
        let model = random_spin_model(4, 1);
        let schedule = AnnealSchedule::standard(10.0).unwrap();
        let curves = EnergyCurves::builtin_default();
        let cfg = SamplerConfig::default();
        assert!(scan_x(&model, &schedule, &curves, 10, &cfg, &[]).is_err());
        assert!(scan_x(&model, &schedule, &curves, 10, &cfg, &[1.0]).is_err());
    }
}
