//! Continuous piecewise-linear (polyline) fits of slicing traces.
//!
//! Energy traces follow a three-phase pattern: an initial plateau, a
//! steep decline, and a final near-flat stretch. The fit identifies
//! three main segments (plus up to two short connectors), reports their
//! slopes in degrees on axes normalized to [0,1] x [0,1], and declares a
//! quasi-freezeout point where the third phase begins if that phase is
//! flat enough.

use crate::error::{Error, Result};

/// A system counts as frozen when the final phase is flatter than this.
pub const DEFAULT_SLOPE_THRESHOLD_DEG: f64 = 10.0;

/// Segments shorter than this fraction of the x-range are connectors and
/// take no part in phase labeling.
const CONNECTOR_EXTENT: f64 = 0.05;

/// Grid resolution of the breakpoint search.
const GRID_POINTS: usize = 50;
const REFINEMENT_ROUNDS: usize = 3;
const MIN_SEPARATION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PolylineFit {
    /// Breakpoint positions on the normalized x-axis, strictly increasing
    /// within (0, 1). Empty for a degenerate (constant) input.
    pub breakpoints: Vec<f64>,
    /// Phase 1/2/3 slopes in degrees on the normalized axes.
    pub slopes_deg: [f64; 3],
    /// Residual sum of squares on the normalized axes.
    pub sse: f64,
    /// Quasi-freezeout point in input x units (set when frozen at the
    /// default threshold).
    pub qfp: Option<f64>,
    /// Frozen at the default threshold.
    pub frozen: bool,
    /// Normalized x where the third phase begins.
    pub phase3_start: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Vertices of the fitted polyline on the normalized axes (at x = 0,
    /// each breakpoint, and x = 1).
    pub vertices: Vec<(f64, f64)>,
}

impl PolylineFit {
    /// Fit value with given phase slopes and boundary; for feeding
    /// [`classify_frozen`] with externally obtained slopes.
    pub fn from_slopes(slopes_deg: [f64; 3], phase3_start: f64, x_min: f64, x_max: f64) -> Self {
        PolylineFit {
            breakpoints: Vec::new(),
            slopes_deg,
            sse: 0.0,
            qfp: None,
            frozen: false,
            phase3_start,
            x_min,
            x_max,
            y_min: 0.0,
            y_max: 1.0,
            vertices: Vec::new(),
        }
    }

    /// Fitted polyline vertices in input units.
    pub fn vertices_denormalized(&self) -> Vec<(f64, f64)> {
        self.vertices
            .iter()
            .map(|&(x, y)| {
                (
                    self.x_min + x * (self.x_max - self.x_min),
                    self.y_min + y * (self.y_max - self.y_min),
                )
            })
            .collect()
    }

    pub fn csv_header() -> &'static str {
        "x_min,x_max,breakpoints,phase1_deg,phase2_deg,phase3_deg,sse,frozen,qfp"
    }

    pub fn to_csv_row(&self) -> String {
        let breakpoints = self
            .breakpoints
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let qfp = self.qfp.map(|q| q.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.x_min,
            self.x_max,
            breakpoints,
            self.slopes_deg[0],
            self.slopes_deg[1],
            self.slopes_deg[2],
            self.sse,
            self.frozen,
            qfp
        )
    }

    fn denormalize(&self, x_norm: f64) -> f64 {
        self.x_min + x_norm * (self.x_max - self.x_min)
    }
}

/// Applies a slope threshold (degrees): frozen iff |Phase-3 slope| is
/// below it, in which case the quasi-freezeout point is the start of the
/// third phase in input x units.
pub fn classify_frozen(fit: &PolylineFit, threshold_deg: f64) -> (bool, Option<f64>) {
    let frozen = fit.slopes_deg[2].abs() < threshold_deg;
    let qfp = frozen.then(|| fit.denormalize(fit.phase3_start));
    (frozen, qfp)
}

/// Least-squares continuous piecewise-linear fit with fixed breakpoints
/// using the hinge basis [1, x, max(0, x-b_1), ..]; returns the
/// coefficients and the residual, or None when the normal equations are
/// singular.
#[allow(clippy::needless_range_loop)]
fn fit_with_breakpoints(xs: &[f64], ys: &[f64], bps: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = bps.len() + 2;
    let mut ata = vec![vec![0.0f64; p]; p];
    let mut aty = vec![0.0f64; p];
    let mut phi = vec![0.0f64; p];
    for (&x, &y) in xs.iter().zip(ys) {
        phi[0] = 1.0;
        phi[1] = x;
        for (k, &b) in bps.iter().enumerate() {
            phi[k + 2] = (x - b).max(0.0);
        }
        for r in 0..p {
            for c in r..p {
                ata[r][c] += phi[r] * phi[c];
            }
            aty[r] += phi[r] * y;
        }
    }
    for r in 1..p {
        for c in 0..r {
            ata[r][c] = ata[c][r];
        }
    }
    let coeffs = solve(&mut ata, &mut aty)?;
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let mut pred = coeffs[0] + coeffs[1] * x;
        for (k, &b) in bps.iter().enumerate() {
            pred += coeffs[k + 2] * (x - b).max(0.0);
        }
        let r = y - pred;
        sse += r * r;
    }
    Some((coeffs, sse))
}

/// Gaussian elimination with partial pivoting; None when singular.
#[allow(clippy::needless_range_loop)]
fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for c in (row + 1)..n {
            sum -= a[row][c] * x[c];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// A candidate is admissible only in the documented shape: exactly three
/// main segments, everything else a short connector.
fn feasible(bps: &[f64]) -> bool {
    let mut boundaries = Vec::with_capacity(bps.len() + 2);
    boundaries.push(0.0);
    boundaries.extend_from_slice(bps);
    boundaries.push(1.0);
    let mains = boundaries
        .windows(2)
        .filter(|w| w[1] - w[0] >= CONNECTOR_EXTENT)
        .count();
    mains == 3
}

#[derive(Debug, Clone)]
struct Candidate {
    breakpoints: Vec<f64>,
    coeffs: Vec<f64>,
    sse: f64,
}

fn evaluate(xs: &[f64], ys: &[f64], bps: &[f64]) -> Option<Candidate> {
    if !feasible(bps) {
        return None;
    }
    for w in bps.windows(2) {
        if w[1] - w[0] < MIN_SEPARATION {
            return None;
        }
    }
    fit_with_breakpoints(xs, ys, bps).map(|(coeffs, sse)| Candidate {
        breakpoints: bps.to_vec(),
        coeffs,
        sse,
    })
}

/// Deterministic multi-start coordinate descent: a 50-point coarse grid
/// per breakpoint followed by three shrinking refinement rounds.
fn search_breakpoints(xs: &[f64], ys: &[f64], nb: usize) -> Option<Candidate> {
    let starts: Vec<Vec<f64>> = (0..5)
        .map(|s| {
            let shift = (s as f64 - 2.0) * 0.08;
            (1..=nb)
                .map(|j| {
                    (j as f64 / (nb + 1) as f64 + shift).clamp(MIN_SEPARATION, 1.0 - MIN_SEPARATION)
                })
                .collect()
        })
        .collect();

    let mut best: Option<Candidate> = None;
    for start in starts {
        let mut bps = start;
        let mut current = evaluate(xs, ys, &bps);
        let mut halfwidth = 1.0; // full span on the coarse round
        for _round in 0..=REFINEMENT_ROUNDS {
            for j in 0..nb {
                let lo_neighbor = if j == 0 { 0.0 } else { bps[j - 1] + MIN_SEPARATION };
                let hi_neighbor = if j == nb - 1 {
                    1.0
                } else {
                    bps[j + 1] - MIN_SEPARATION
                };
                let lo = (bps[j] - halfwidth).max(lo_neighbor).max(MIN_SEPARATION);
                let hi = (bps[j] + halfwidth)
                    .min(hi_neighbor)
                    .min(1.0 - MIN_SEPARATION);
                if !(hi > lo) {
                    continue;
                }
                let mut best_pos = bps[j];
                for g in 0..GRID_POINTS {
                    let pos = lo + (hi - lo) * g as f64 / (GRID_POINTS - 1) as f64;
                    let mut trial = bps.clone();
                    trial[j] = pos;
                    trial.sort_by(f64::total_cmp);
                    if let Some(cand) = evaluate(xs, ys, &trial) {
                        if current.as_ref().is_none_or(|c| cand.sse < c.sse) {
                            best_pos = pos;
                            current = Some(cand);
                        }
                    }
                }
                bps[j] = best_pos;
                bps.sort_by(f64::total_cmp);
            }
            // shrink around the incumbent for the refinement rounds
            halfwidth = (halfwidth / 8.0).max(2.0 * MIN_SEPARATION / GRID_POINTS as f64);
            if let Some(c) = &current {
                bps = c.breakpoints.clone();
            }
        }
        if let Some(cand) = current {
            if best.as_ref().is_none_or(|b| cand.sse < b.sse) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Fits a three-phase polyline to `(xs, ys)` with up to `max_segments`
/// total segments (three mains plus short connectors). Needs at least 10
/// points and strictly increasing xs. The returned fit carries
/// frozen/qfp at the default 10-degree threshold; use
/// [`classify_frozen`] for other thresholds.
pub fn fit_polyline(xs: &[f64], ys: &[f64]) -> Result<PolylineFit> {
    fit_polyline_with(xs, ys, 5)
}

pub fn fit_polyline_with(xs: &[f64], ys: &[f64], max_segments: usize) -> Result<PolylineFit> {
    if xs.len() < 10 {
        return Err(Error::TooFewPoints {
            needed: 10,
            got: xs.len(),
        });
    }
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if max_segments < 3 {
        return Err(Error::InvalidParameter {
            name: "max_segments",
            message: format!("{max_segments} must be >= 3"),
        });
    }
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::DegenerateData("xs must be strictly increasing"));
        }
    }
    let x_min = xs[0];
    let x_max = xs[xs.len() - 1];
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !y_min.is_finite() || !y_max.is_finite() {
        return Err(Error::DegenerateData("ys must be finite"));
    }

    if y_max == y_min {
        // constant trace: flat everywhere, frozen from the first point
        return Ok(PolylineFit {
            breakpoints: Vec::new(),
            slopes_deg: [0.0; 3],
            sse: 0.0,
            qfp: Some(x_min),
            frozen: true,
            phase3_start: 0.0,
            x_min,
            x_max,
            y_min,
            y_max,
            vertices: vec![(0.0, 0.0), (1.0, 0.0)],
        });
    }

    let xn: Vec<f64> = xs.iter().map(|&x| (x - x_min) / (x_max - x_min)).collect();
    let yn: Vec<f64> = ys.iter().map(|&y| (y - y_min) / (y_max - y_min)).collect();

    let mut best: Option<Candidate> = None;
    for segments in 3..=max_segments {
        if let Some(cand) = search_breakpoints(&xn, &yn, segments - 1) {
            if best.as_ref().is_none_or(|b| cand.sse < b.sse) {
                best = Some(cand);
            }
        }
    }
    let cand = best.ok_or(Error::DegenerateData("no feasible polyline fit"))?;

    // segment slopes accumulate the hinge coefficients left to right
    let nb = cand.breakpoints.len();
    let mut slopes = Vec::with_capacity(nb + 1);
    let mut slope = cand.coeffs[1];
    slopes.push(slope);
    for k in 0..nb {
        slope += cand.coeffs[k + 2];
        slopes.push(slope);
    }
    let mut boundaries = Vec::with_capacity(nb + 2);
    boundaries.push(0.0);
    boundaries.extend_from_slice(&cand.breakpoints);
    boundaries.push(1.0);

    // phases: the three longest non-connector segments, in x order
    let mut mains: Vec<(usize, f64)> = (0..=nb)
        .map(|k| (k, boundaries[k + 1] - boundaries[k]))
        .filter(|&(_, extent)| extent >= CONNECTOR_EXTENT)
        .collect();
    mains.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut phases: Vec<usize> = mains.iter().take(3).map(|&(k, _)| k).collect();
    phases.sort_unstable();
    debug_assert_eq!(phases.len(), 3);

    let slopes_deg = [
        slopes[phases[0]].atan().to_degrees(),
        slopes[phases[1]].atan().to_degrees(),
        slopes[phases[2]].atan().to_degrees(),
    ];
    let phase3_start = boundaries[phases[2]];
    let predict = |x: f64| -> f64 {
        let mut v = cand.coeffs[0] + cand.coeffs[1] * x;
        for (k, &b) in cand.breakpoints.iter().enumerate() {
            v += cand.coeffs[k + 2] * (x - b).max(0.0);
        }
        v
    };
    let vertices: Vec<(f64, f64)> = boundaries.iter().map(|&b| (b, predict(b))).collect();
    let mut fit = PolylineFit {
        breakpoints: cand.breakpoints,
        slopes_deg,
        sse: cand.sse,
        qfp: None,
        frozen: false,
        phase3_start,
        x_min,
        x_max,
        y_min,
        y_max,
        vertices,
    };
    let (frozen, qfp) = classify_frozen(&fit, DEFAULT_SLOPE_THRESHOLD_DEG);
    fit.frozen = frozen;
    fit.qfp = qfp;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    /// Standard normal via Box-Muller.
    fn gaussian(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Three-phase truth: flat at 1 on [0, 0.3], linear down to 0 on
    /// [0.3, 0.5], flat at 0 on [0.5, 1].
    fn three_phase(n: usize, noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream_rng(seed, 0);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys = xs
            .iter()
            .map(|&x| {
                let base = if x < 0.3 {
                    1.0
                } else if x < 0.5 {
                    1.0 - (x - 0.3) / 0.2
                } else {
                    0.0
                };
                base + noise * gaussian(&mut rng)
            })
            .collect();
        (xs, ys)
    }

    #[test]
    fn recovers_three_phase_breakpoints() {
        let (xs, ys) = three_phase(200, 0.01, 3);
        let fit = fit_polyline(&xs, &ys).unwrap();
        // second main boundary at 0.5 within 5% of range
        assert!(
            (fit.phase3_start - 0.5).abs() <= 0.05,
            "phase3 start {}",
            fit.phase3_start
        );
        assert!(fit.frozen);
        let qfp = fit.qfp.unwrap();
        assert!((qfp - 0.5).abs() <= 0.05);
        // phase 1 and 3 flat, phase 2 steep downhill
        assert!(fit.slopes_deg[0].abs() < 10.0);
        assert!(fit.slopes_deg[2].abs() < 10.0);
        assert!(fit.slopes_deg[1] < -45.0);
    }

    #[test]
    fn constant_trace_is_frozen_from_start() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys = vec![2.5; 50];
        let fit = fit_polyline(&xs, &ys).unwrap();
        assert!(fit.frozen);
        assert_eq!(fit.qfp, Some(0.0));
        assert_eq!(fit.slopes_deg, [0.0; 3]);
        assert!(fit.breakpoints.is_empty());
    }

    #[test]
    fn collinear_trace_has_equal_slopes() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 - 0.5 * x).collect();
        let fit = fit_polyline(&xs, &ys).unwrap();
        // normalized collinear data: every phase slope is -45 degrees
        for s in fit.slopes_deg {
            assert!((s - (-45.0)).abs() < 1.0, "slope {s}");
        }
        assert!(fit.sse < 1e-9);
    }

    #[test]
    fn residual_not_increasing_in_max_segments() {
        let (xs, ys) = three_phase(150, 0.02, 9);
        let sse3 = fit_polyline_with(&xs, &ys, 3).unwrap().sse;
        let sse4 = fit_polyline_with(&xs, &ys, 4).unwrap().sse;
        let sse5 = fit_polyline_with(&xs, &ys, 5).unwrap().sse;
        assert!(sse4 <= sse3 + 1e-12);
        assert!(sse5 <= sse4 + 1e-12);
    }

    #[test]
    fn refit_of_fitted_points_recovers_breakpoints() {
        let (xs, ys) = three_phase(200, 0.01, 4);
        let fit = fit_polyline(&xs, &ys).unwrap();
        // sample the fitted polyline exactly and refit
        let nb = fit.breakpoints.len();
        let xn: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        // rebuild fitted values from segment geometry: piecewise linear
        // through the breakpoints using the already-normalized data fit
        let coeffs_fit = fit_with_breakpoints(
            &xs.iter()
                .map(|&x| (x - fit.x_min) / (fit.x_max - fit.x_min))
                .collect::<Vec<_>>(),
            &{
                let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
                let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ys.iter()
                    .map(|&y| (y - y_min) / (y_max - y_min))
                    .collect::<Vec<_>>()
            },
            &fit.breakpoints,
        )
        .unwrap()
        .0;
        let yn: Vec<f64> = xn
            .iter()
            .map(|&x| {
                let mut v = coeffs_fit[0] + coeffs_fit[1] * x;
                for (k, &b) in fit.breakpoints.iter().enumerate() {
                    v += coeffs_fit[k + 2] * (x - b).max(0.0);
                }
                v
            })
            .collect();
        let refit = fit_polyline(&xn, &yn).unwrap();
        assert_eq!(refit.breakpoints.len(), nb);
        for (a, b) in refit.breakpoints.iter().zip(&fit.breakpoints) {
            assert!((a - b).abs() < 0.03, "breakpoint drift {a} vs {b}");
        }
    }

    #[test]
    fn classification_thresholds() {
        let mut fit = PolylineFit::from_slopes([3.45, -84.21, -7.07], 0.5, 0.0, 1000.0);
        let (frozen, qfp) = classify_frozen(&fit, 10.0);
        assert!(frozen);
        assert_eq!(qfp, Some(500.0));

        fit.slopes_deg[2] = -15.0;
        let (frozen, qfp) = classify_frozen(&fit, 10.0);
        assert!(!frozen && qfp.is_none());
        // monotone in the threshold
        assert!(classify_frozen(&fit, 20.0).0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let xs: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let ys = vec![0.0; 5];
        assert!(matches!(
            fit_polyline(&xs, &ys),
            Err(Error::TooFewPoints { .. })
        ));

        let xs = vec![0.0; 20];
        let ys = vec![0.0; 20];
        assert!(matches!(
            fit_polyline(&xs, &ys),
            Err(Error::DegenerateData(_))
        ));
    }
}
