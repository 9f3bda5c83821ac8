//! Microbenchmark harness: wall-time medians, log-log scaling-exponent fits
//! over an embedding-dimension sweep, and linear fits over a view-count
//! sweep.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::linalg::Matrix;
use crate::objectives::{evaluate, ObjectiveKind, ObjectiveSpec, ViewSet};
use crate::{Error, Result};

const BENCH_SEED: u64 = 0xB4_5E;

/// Repetition wall-times for one (objective, N, D, V) shape.
#[derive(Debug, Clone, Serialize)]
pub struct BenchSample {
    pub objective: String,
    pub n: usize,
    pub d: usize,
    pub v: usize,
    pub times: Vec<f64>,
    pub median: f64,
    pub mad: f64,
}

impl BenchSample {
    fn from_times(objective: String, n: usize, d: usize, v: usize, times: Vec<f64>) -> Result<Self> {
        if times.len() < 5 {
            return Err(Error::Param(format!("need at least 5 repetitions, got {}", times.len())));
        }
        if times.iter().any(|&t| t <= 0.0) {
            return Err(Error::Param("non-positive wall-time recorded".into()));
        }
        let med = median(&times);
        let deviations: Vec<f64> = times.iter().map(|&t| (t - med).abs()).collect();
        let mad = median(&deviations);
        Ok(Self { objective, n, d, v, times, median: med, mad })
    }
}

/// Median of a nonempty slice.
pub fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// Pin the current thread to one logical CPU; returns whether pinning took
/// effect. Timing proceeds either way, with the outcome recorded.
pub fn pin_to_cpu() -> bool {
    #[cfg(target_os = "linux")]
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(0, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
    #[cfg(not(target_os = "linux"))]
    {
        false
    }
}

fn seeded_views(n: usize, d: usize, v: usize) -> ViewSet {
    let mut rng = ChaCha12Rng::seed_from_u64(BENCH_SEED);
    ViewSet::new((0..v).map(|_| Matrix::random_standard(n, d, &mut rng)).collect())
        .expect("valid bench shape")
}

fn time_reps(reps: usize, warmup: usize, mut f: impl FnMut() -> f64) -> Result<Vec<f64>> {
    if reps < 5 {
        return Err(Error::Param(format!("reps must be >= 5, got {reps}")));
    }
    if warmup < 1 {
        return Err(Error::Param(format!("warmup must be >= 1, got {warmup}")));
    }
    for _ in 0..warmup {
        black_box(f());
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        black_box(f());
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(times)
}

/// Median/MAD wall-time of a full objective evaluation (value only, no
/// gradient) on fixed seeded input.
pub fn time_loss(
    spec: &ObjectiveSpec,
    n: usize,
    d: usize,
    v: usize,
    reps: usize,
    warmup: usize,
) -> Result<BenchSample> {
    let vs = seeded_views(n, d, v);
    let untimed = evaluate(&vs, spec)?.total;
    let times = time_reps(reps, warmup, || evaluate(&vs, spec).expect("bench input valid").total)?;
    // timing must not perturb the numbers
    let after = evaluate(&vs, spec)?.total;
    if untimed.to_bits() != after.to_bits() {
        return Err(Error::Inconsistent("loss value changed across timed repetitions".into()));
    }
    BenchSample::from_times(spec.name().to_string(), n, d, v, times)
}

/// Median/MAD wall-time of just the variance (covariance-statistics) term of
/// a single view. Supported for the Frobenius-norm and eigendecomposition
/// paths whose complexity separation is under test.
pub fn time_variance_term(
    kind: ObjectiveKind,
    n: usize,
    d: usize,
    reps: usize,
    warmup: usize,
) -> Result<BenchSample> {
    let mut rng = ChaCha12Rng::seed_from_u64(BENCH_SEED);
    let z = Matrix::random_standard(n, d, &mut rng);
    let name = match kind {
        ObjectiveKind::FroSsl => "frossl",
        ObjectiveKind::Ivne => "ivne",
        other => {
            return Err(Error::Param(format!(
                "variance-term timing supports frossl and ivne, not {other:?}"
            )))
        }
    };
    let times = match kind {
        ObjectiveKind::FroSsl => time_reps(reps, warmup, || {
            crate::objectives::frossl_variance_term(black_box(&z)).expect("nonzero input")
        })?,
        _ => time_reps(reps, warmup, || {
            let cov = black_box(&z).covariance();
            crate::objectives::vne_term(&cov).expect("symmetric input")
        })?,
    };
    BenchSample::from_times(name.to_string(), n, d, 1, times)
}

/// Ordinary least-squares line fit; returns (slope, intercept, r_squared).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Param("line fit needs at least 2 matched points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values identical in line fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r2))
}

/// Least-squares slope of log(median time) against log(D) over a D-grid with
/// N held fixed.
pub fn scaling_exponent(samples: &[BenchSample]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::Param(format!(
            "scaling fit needs at least 4 grid points, got {}",
            samples.len()
        )));
    }
    let n = samples[0].n;
    let max_d = samples.iter().map(|s| s.d).max().unwrap();
    if n < max_d {
        return Err(Error::Param(format!("N={n} must be >= max D={max_d} for the D-sweep")));
    }
    for w in samples.windows(2) {
        if w[1].d <= w[0].d {
            return Err(Error::Param("D grid must be strictly increasing".into()));
        }
        if w[1].n != n {
            return Err(Error::Param("N must be held fixed across the D grid".into()));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|s| (s.d as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.median.ln()).collect();
    Ok(fit_line(&xs, &ys)?.0)
}

/// Per-V medians and a plain (not log-log) linear fit of time against the
/// view count.
#[derive(Debug, Clone, Serialize)]
pub struct ViewsScalingReport {
    pub objective: String,
    pub n: usize,
    pub d: usize,
    pub v_grid: Vec<usize>,
    pub medians: Vec<f64>,
    pub mads: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub pinned: bool,
}

pub fn views_scaling(
    spec: &ObjectiveSpec,
    n: usize,
    d: usize,
    v_grid: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<ViewsScalingReport> {
    if v_grid.len() < 2 || v_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("view grid must be increasing with at least 2 points".into()));
    }
    let pinned = pin_to_cpu();
    let mut medians = Vec::with_capacity(v_grid.len());
    let mut mads = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let sample = time_loss(spec, n, d, v, reps, warmup)?;
        medians.push(sample.median);
        mads.push(sample.mad);
    }
    let xs: Vec<f64> = v_grid.iter().map(|&v| v as f64).collect();
    let (slope, intercept, r2) = fit_line(&xs, &medians)?;
    Ok(ViewsScalingReport {
        objective: spec.name().to_string(),
        n,
        d,
        v_grid: v_grid.to_vec(),
        medians,
        mads,
        slope,
        intercept,
        r2,
        pinned,
    })
}

/// D-sweep report for one objective's variance term.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub objective: String,
    pub n: usize,
    pub grid: Vec<usize>,
    pub medians: Vec<f64>,
    pub mads: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
    pub pinned: bool,
}

/// Run the variance-term D-sweep and fit the log-log exponent.
pub fn d_sweep_report(
    kind: ObjectiveKind,
    n: usize,
    d_grid: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<BenchReport> {
    let pinned = pin_to_cpu();
    let mut samples = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        samples.push(time_variance_term(kind, n, d, reps, warmup)?);
    }
    let slope = scaling_exponent(&samples)?;
    let xs: Vec<f64> = samples.iter().map(|s| (s.d as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.median.ln()).collect();
    let (_, _, r2) = fit_line(&xs, &ys)?;
    Ok(BenchReport {
        objective: samples[0].objective.clone(),
        n,
        grid: d_grid.to_vec(),
        medians: samples.iter().map(|s| s.median).collect(),
        mads: samples.iter().map(|s| s.mad).collect(),
        slope,
        r2,
        pinned,
    })
}
