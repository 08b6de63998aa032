//! Gaussian dip/peak fits of delay scans.
//!
//! Model: `C(d) = A * (1 - V * exp(-(d - d0)^2 / (2 w^2)))`. A dip has V > 0
//! and V is directly the baseline-normalized visibility; a peak has V < 0 and
//! its zero-delay-normalized visibility is V / (1 - V).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distinguishability::DelayScan;
use crate::error::{Error, Result};
use crate::random::{poisson, substream};

pub const MIN_SAMPLES: usize = 5;
const N_PARAMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Dip,
    Peak,
    #[default]
    Auto,
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dip" => Ok(FitMode::Dip),
            "peak" => Ok(FitMode::Peak),
            "auto" => Ok(FitMode::Auto),
            other => Err(Error::Parameter(format!(
                "unknown fit mode '{other}' (dip|peak|auto)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weights 1 / max(y, 1).
    Poisson,
}

/// Which normalization a reported visibility uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityConvention {
    /// (C(inf) - C(0)) / C(inf), the two-photon dip convention.
    #[default]
    BaselineNormalized,
    /// (C(inf) - C(0)) / C(0), the three-photon convention.
    ZeroDelayNormalized,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub mode: FitMode,
    pub weighting: Weighting,
    pub max_iterations: usize,
    /// Relative step below which the fit counts as converged.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Auto,
            weighting: Weighting::Uniform,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn with_mode(mode: FitMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub baseline: f64,
    pub visibility: f64,
    pub center_ps: f64,
    pub width_ps: f64,
    pub residual_rms: f64,
    /// Variances of (baseline, visibility, center, width).
    pub covariance_diag: [f64; 4],
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn evaluate(&self, delay_ps: f64) -> f64 {
        model(&self.params(), delay_ps)
    }

    /// (C(inf) - C(0)) / C(0) of the fitted curve.
    pub fn zero_delay_visibility(&self) -> f64 {
        self.visibility / (1.0 - self.visibility)
    }

    pub fn visibility_as(&self, convention: VisibilityConvention) -> f64 {
        match convention {
            VisibilityConvention::BaselineNormalized => self.visibility,
            VisibilityConvention::ZeroDelayNormalized => self.zero_delay_visibility(),
        }
    }

    fn params(&self) -> [f64; 4] {
        [
            self.baseline,
            self.visibility,
            self.center_ps,
            self.width_ps,
        ]
    }
}

/// Evaluates the model at (A, V, d0, w).
pub fn model(p: &[f64; 4], d: f64) -> f64 {
    let [a, v, d0, w] = *p;
    a * (1.0 - v * (-(d - d0).powi(2) / (2.0 * w * w)).exp())
}

fn gradient(p: &[f64; 4], d: f64) -> [f64; 4] {
    let [a, v, d0, w] = *p;
    let x = d - d0;
    let g = (-(x * x) / (2.0 * w * w)).exp();
    [
        1.0 - v * g,
        -a * g,
        -a * v * g * x / (w * w),
        -a * v * g * x * x / (w * w * w),
    ]
}

fn cost(p: &[f64; 4], xs: &[f64], ys: &[f64], weights: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(weights)
        .map(|((&x, &y), &wt)| wt * (y - model(p, x)).powi(2))
        .sum()
}

/// Normal equations J^T W J and J^T W r.
fn normal_equations(
    p: &[f64; 4],
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut h = [[0.0; 4]; 4];
    let mut g = [0.0; 4];
    for ((&x, &y), &wt) in xs.iter().zip(ys).zip(weights) {
        let j = gradient(p, x);
        let r = y - model(p, x);
        for a in 0..N_PARAMS {
            g[a] += wt * j[a] * r;
            for b in 0..N_PARAMS {
                h[a][b] += wt * j[a] * j[b];
            }
        }
    }
    (h, g)
}

/// Solves a symmetric positive definite 4x4 system after Jacobi scaling.
/// Returns `None` when the scaled matrix is numerically singular.
fn solve_spd(h: &[[f64; 4]; 4], rhs: &[f64; 4]) -> Option<[f64; 4]> {
    let inv = invert_spd(h)?;
    let mut x = [0.0; 4];
    for a in 0..N_PARAMS {
        x[a] = (0..N_PARAMS).map(|b| inv[a][b] * rhs[b]).sum();
    }
    Some(x)
}

fn invert_spd(h: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let n = N_PARAMS;
    let scale: Vec<f64> = (0..n).map(|k| h[k][k].sqrt()).collect();
    if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return None;
    }
    let mut s = [[0.0; 4]; 4];
    for a in 0..n {
        for b in 0..n {
            s[a][b] = h[a][b] / (scale[a] * scale[b]);
        }
    }
    // Cholesky of the unit-diagonal matrix
    let mut l = [[0.0; 4]; 4];
    for j in 0..n {
        let d = s[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 1e-13 {
            return None;
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..n {
            l[i][j] = (s[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for col in 0..n {
        let mut y = [0.0; 4];
        for i in 0..n {
            let e = if i == col { 1.0 } else { 0.0 };
            y[i] = (e - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = [0.0; 4];
        for i in (0..n).rev() {
            x[i] = (y[i] - ((i + 1)..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        for row in 0..n {
            inv[row][col] = x[row] / (scale[row] * scale[col]);
        }
    }
    Some(inv)
}

/// Default initialization: edge baseline, extremum sample, quarter-span width.
fn initial_guess(xs: &[f64], ys: &[f64], mode: FitMode) -> Result<[f64; 4]> {
    let mut by_distance: Vec<usize> = (0..xs.len()).collect();
    by_distance.sort_by(|&a, &b| xs[b].abs().total_cmp(&xs[a].abs()));
    let mut baseline = 0.5 * (ys[by_distance[0]] + ys[by_distance[1]]);
    if baseline <= 0.0 {
        baseline = ys.iter().sum::<f64>() / ys.len() as f64;
    }
    if baseline <= 0.0 {
        return Err(Error::DegenerateFit("scan has no positive counts".into()));
    }
    let pick = |better: &dyn Fn(f64, f64) -> bool| {
        (0..ys.len()).fold(0, |best, k| if better(ys[k], ys[best]) { k } else { best })
    };
    let ext = match mode {
        FitMode::Dip => pick(&|a, b| a < b),
        FitMode::Peak => pick(&|a, b| a > b),
        FitMode::Auto => pick(&|a, b| (a - baseline).abs() > (b - baseline).abs()),
    };
    let visibility = 1.0 - ys[ext] / baseline;
    let span = xs[xs.len() - 1] - xs[0];
    Ok([baseline, visibility, xs[ext], 0.25 * span])
}

/// Width from the half-depth crossings around the extremum.
fn half_depth_width(xs: &[f64], ys: &[f64], p: &[f64; 4]) -> Option<f64> {
    let ext = xs.iter().position(|&x| x == p[2])?;
    let depth = ys[ext] - p[0];
    if depth == 0.0 {
        return None;
    }
    let inside = |k: usize| (ys[k] - p[0]) / depth >= 0.5;
    let crossing = |k: usize, j: usize| {
        let (fk, fj) = ((ys[k] - p[0]) / depth, (ys[j] - p[0]) / depth);
        xs[k] + (xs[j] - xs[k]) * (fk - 0.5) / (fk - fj)
    };
    let mut lo = ext;
    while lo > 0 && inside(lo - 1) {
        lo -= 1;
    }
    let mut hi = ext;
    while hi + 1 < xs.len() && inside(hi + 1) {
        hi += 1;
    }
    let left = if lo > 0 { crossing(lo, lo - 1) } else { xs[0] };
    let right = if hi + 1 < xs.len() {
        crossing(hi, hi + 1)
    } else {
        xs[xs.len() - 1]
    };
    let w = (right - left) / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    (w > 0.0).then_some(w)
}

fn relative_step(p: &[f64; 4], step: &[f64; 4]) -> f64 {
    let scales = [
        p[0].abs(),
        p[1].abs() + 1e-6,
        p[2].abs() + p[3].abs(),
        p[3].abs(),
    ];
    step.iter()
        .zip(scales)
        .map(|(s, sc)| s.abs() / sc)
        .fold(0.0, f64::max)
}

struct Problem {
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
    // admissible center and width ranges
    center: (f64, f64),
    width: (f64, f64),
}

struct Optimum {
    p: [f64; 4],
    cost: f64,
    converged: bool,
    iterations: usize,
}

impl Problem {
    fn new(scan: &DelayScan, weighting: Weighting) -> Result<Self> {
        let n = scan.len();
        if n < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "Gaussian fit needs at least {MIN_SAMPLES} samples, got {n}"
            )));
        }
        let xs = scan.delays();
        let ys = scan.values();
        let weights = match weighting {
            Weighting::Uniform => vec![1.0; n],
            Weighting::Poisson => ys.iter().map(|&y| 1.0 / y.max(1.0)).collect(),
        };
        let span = xs[n - 1] - xs[0];
        let spacing = xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            center: (xs[0], xs[n - 1]),
            width: (0.5 * spacing, 0.5 * span),
            xs,
            ys,
            weights,
        })
    }

    fn admissible(&self, p: &[f64; 4]) -> bool {
        p.iter().all(|v| v.is_finite())
            && p[0] > 0.0
            && (self.center.0..=self.center.1).contains(&p[2])
            && (self.width.0..=self.width.1).contains(&p[3])
    }

    fn cost(&self, p: &[f64; 4]) -> f64 {
        cost(p, &self.xs, &self.ys, &self.weights)
    }

    /// Levenberg-Marquardt from `start`; steps leaving the admissible box are
    /// treated like steps that increase the cost.
    fn descend(&self, start: [f64; 4], options: &FitOptions) -> Optimum {
        let mut p = start;
        let mut current = self.cost(&p);
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        let mut iterations = 0;

        while iterations < options.max_iterations {
            iterations += 1;
            let (h, g) = normal_equations(&p, &self.xs, &self.ys, &self.weights);
            let floor = 1e-12 * (0..N_PARAMS).map(|k| h[k][k]).fold(0.0, f64::max);
            let mut accepted = false;
            while lambda < 1e16 {
                let mut damped = h;
                for k in 0..N_PARAMS {
                    damped[k][k] += lambda * h[k][k].max(floor);
                }
                let Some(step) = solve_spd(&damped, &g) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = [
                    p[0] + step[0],
                    p[1] + step[1],
                    p[2] + step[2],
                    p[3] + step[3],
                ];
                let valid = self.admissible(&trial);
                let trial_cost = if valid {
                    self.cost(&trial)
                } else {
                    f64::INFINITY
                };
                if trial_cost <= current {
                    last_step = relative_step(&p, &step);
                    p = trial;
                    current = trial_cost;
                    lambda = (lambda * 0.1).max(1e-12);
                    accepted = true;
                    break;
                }
                // no descent possible from an already negligible step
                if valid && relative_step(&p, &step) < options.tolerance {
                    last_step = 0.0;
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted || last_step < options.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            converged = last_step <= 1e-8;
        }
        Optimum {
            p,
            cost: current,
            converged,
            iterations,
        }
    }

    /// Best of several starts differing only in the initial width.
    fn solve(&self, options: &FitOptions) -> Result<Optimum> {
        let first = initial_guess(&self.xs, &self.ys, options.mode)?;
        let mut widths = vec![first[3]];
        if let Some(w) = half_depth_width(&self.xs, &self.ys, &first) {
            widths.extend([w, 2.0 * w, 0.5 * w]);
        }
        let mut best: Option<Optimum> = None;
        for w in widths {
            let mut start = first;
            start[3] = w.clamp(self.width.0, self.width.1);
            let run = self.descend(start, options);
            let better = match &best {
                None => true,
                Some(b) => {
                    run.cost < b.cost * (1.0 - 1e-12)
                        || (run.converged && !b.converged && run.cost <= b.cost)
                }
            };
            if better {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one start"))
    }
}

pub fn fit_gaussian(scan: &DelayScan, mode: FitMode) -> Result<FitResult> {
    fit_gaussian_with(scan, &FitOptions::with_mode(mode))
}

pub fn fit_gaussian_with(scan: &DelayScan, options: &FitOptions) -> Result<FitResult> {
    let problem = Problem::new(scan, options.weighting)?;
    let Optimum {
        p,
        cost: current,
        converged,
        iterations,
    } = problem.solve(options)?;
    let (xs, ys, n) = (&problem.xs, &problem.ys, problem.xs.len());

    let (h, _) = normal_equations(&p, xs, ys, &problem.weights);
    let inv = invert_spd(&h)
        .ok_or_else(|| Error::DegenerateFit("singular normal equations at the solution".into()))?;
    let dof = (n - N_PARAMS) as f64;
    let reduced = current / dof;
    let covariance_diag = [
        inv[0][0] * reduced,
        inv[1][1] * reduced,
        inv[2][2] * reduced,
        inv[3][3] * reduced,
    ];
    let residual_rms = (xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - model(&p, x)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();

    Ok(FitResult {
        baseline: p[0],
        visibility: p[1],
        center_ps: p[2],
        width_ps: p[3],
        residual_rms,
        covariance_diag,
        converged,
        iterations,
    })
}

/// Mean and standard deviation of the fitted visibility over Poisson
/// resamplings of the scan, whose values must be integer counts.
pub fn visibility_uncertainty(
    scan: &DelayScan,
    options: &FitOptions,
    convention: VisibilityConvention,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if resamples < 2 {
        return Err(Error::Parameter(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    if scan.values().iter().any(|v| (v - v.round()).abs() > 1e-9) {
        return Err(Error::Parameter(
            "bootstrap needs integer counts in the scan".into(),
        ));
    }
    let values = scan.values();
    let one = |r: usize| -> Option<f64> {
        let mut rng = substream(seed, r as u64);
        let drawn: Vec<f64> = values.iter().map(|&v| poisson(v, &mut rng)).collect();
        let resampled = scan.with_values(&drawn).ok()?;
        // covariance and the convergence flag are not needed here: a resample
        // with no resolvable dip still yields its best visibility
        let fit = Problem::new(&resampled, options.weighting)
            .ok()?
            .solve(options)
            .ok()?;
        let v = match convention {
            VisibilityConvention::BaselineNormalized => fit.p[1],
            VisibilityConvention::ZeroDelayNormalized => fit.p[1] / (1.0 - fit.p[1]),
        };
        v.is_finite().then_some(v)
    };
    #[cfg(feature = "parallel")]
    let draws: Vec<Option<f64>> = {
        use rayon::prelude::*;
        (0..resamples).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<Option<f64>> = (0..resamples).map(one).collect();

    let ok: Vec<f64> = draws.into_iter().flatten().collect();
    let failed = resamples - ok.len();
    if failed * 10 > resamples || ok.len() < 2 {
        return Err(Error::Unstable {
            failed,
            total: resamples,
        });
    }
    Ok(mean_and_std(&ok))
}

/// Mean and sample standard deviation.
pub(crate) fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
