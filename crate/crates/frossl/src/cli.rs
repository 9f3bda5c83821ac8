//! Command-line surface binding every module: `train`, `verify`,
//! `gradcheck`, `bench`, `data-gen`, `data-inspect`, and `plot`.
//!
//! Configuration is a flat INI-style key-value file with `[section]`
//! headers; every key can be overridden with `--set section.key=value`.
//! The fully resolved configuration is echoed into a run manifest written
//! before training starts, and re-running from that manifest reproduces
//! all artifacts byte-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{d_sweep_report, scaling_exponent, time_loss, views_scaling, BenchSample};
use crate::datasets::{atomic_write, load_idx, save_idx, synth_gaussian_mixture, DatasetHandle};
use crate::gradients::grad_check_random;
use crate::linalg::{Matrix, NormalizeMode};
use crate::objectives::{
    alpha_entropy, c_criterion, evaluate, invariance_mse_mean, invariance_mse_pairwise,
    nc_criterion, ObjectiveKind, ObjectiveSpec, ViewSet, OBJECTIVE_NAMES,
};
use crate::trainer::{
    save_checkpoint, train_run, AugSpec, EncoderKind, EncoderSpec, TrainConfig, TrainOutcome,
};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "frossl", version = TOOL_VERSION, about = "Numerical laboratory for Frobenius-norm and dimension-contrastive self-supervised objectives")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training experiment from a config file, emitting a manifest,
    /// trajectory CSV, and encoder checkpoint.
    Train {
        /// INI-style config file (required unless --from-manifest is given)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a resolved key, e.g. --set train.seed=3
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Directory receiving manifest.json, trajectory.csv, checkpoint.bin
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        /// Re-run from a previously written manifest (bit-identical outputs)
        #[arg(long)]
        from_manifest: Option<PathBuf>,
    },
    /// Run a named property-check suite and print a PASS/FAIL table.
    Verify {
        /// One of: identities, rotations, propositions, all
        suite: String,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Objective name; omit to check all registered objectives
        #[arg(long)]
        objective: Option<String>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        views: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time loss evaluations over a D-grid or V-grid and fit scaling laws.
    Bench {
        #[arg(long, default_value = "frossl")]
        objective: String,
        /// Batch size held fixed during sweeps
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Embedding-dimension grid for the D-sweep
        #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 128, 256, 512])]
        d_grid: Vec<usize>,
        /// View-count grid; when given, runs the V-sweep instead
        #[arg(long, value_delimiter = ',')]
        v_grid: Option<Vec<usize>>,
        /// Time only the per-view variance term (frossl or ivne)
        #[arg(long)]
        variance_term: bool,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic Gaussian-mixture dataset as an IDX file pair.
    DataGen {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 5.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Summarize an IDX file pair: counts, dimensions, class histogram.
    DataInspect {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Render eigenvalue trajectories from a trajectory CSV as a standalone SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Log-scale the y axis
        #[arg(long)]
        log_y: bool,
    },
}

/// Entry point for the thin binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. }
        | Error::NonFinite(_)
        | Error::Degenerate(_)
        | Error::NotPositiveDefinite { .. }
        | Error::IllPosedWhitening { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Train { config, sets, out_dir, from_manifest } => {
            cmd_train(config.as_deref(), &sets, &out_dir, from_manifest.as_deref())
        }
        Command::Verify { suite } => cmd_verify(&suite),
        Command::Gradcheck { objective, trials, batch, dim, views, seed } => {
            cmd_gradcheck(objective.as_deref(), trials, batch, dim, views, seed)
        }
        Command::Bench { objective, n, d_grid, v_grid, variance_term, reps, warmup, out } => {
            cmd_bench(&objective, n, &d_grid, v_grid.as_deref(), variance_term, reps, warmup, out.as_deref())
        }
        Command::DataGen { classes, dim, per_class, spread, seed, images, labels } => {
            cmd_data_gen(classes, dim, per_class, spread, seed, &images, &labels)
        }
        Command::DataInspect { images, labels } => cmd_data_inspect(&images, &labels),
        Command::Plot { input, output, log_y } => cmd_plot(&input, &output, log_y),
    }
}

// ---------------------------------------------------------------------------
// Config resolution
// ---------------------------------------------------------------------------

/// Flat `section.key -> value` map; sorted for stable manifests.
pub type ConfigMap = BTreeMap<String, String>;

/// Parse the INI-style config text: `[section]` headers, `key = value`
/// lines, `#`/`;` comments.
pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if section.is_empty() {
                return Err(Error::Config(format!("line {}: empty section name", i + 1)));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        if section.is_empty() {
            return Err(Error::Config(format!("line {}: key outside any [section]", i + 1)));
        }
        map.insert(format!("{section}.{}", key.trim()), value.trim().to_string());
    }
    Ok(map)
}

/// Defaults for every optional key; `objective.name` is deliberately absent
/// and must come from the config file or an override.
pub fn default_config() -> ConfigMap {
    let pairs = [
        ("encoder.kind", "linear"),
        ("encoder.hidden", ""),
        ("encoder.output_dim", "20"),
        ("train.views", "2"),
        ("train.batch_size", "256"),
        ("train.learning_rate", "0.01"),
        ("train.steps", "2000"),
        ("train.seed", "0"),
        ("train.top_k", "20"),
        ("train.record_every", "10"),
        ("train.probe", "true"),
        ("augment.noise_std", "1.0"),
        ("augment.dropout_prob", "0.0"),
        ("augment.shift_max", "0"),
        ("data.kind", "mixture"),
        ("data.classes", "10"),
        ("data.dim", "64"),
        ("data.per_class", "100"),
        ("data.spread", "5.0"),
        ("data.scale", "1.0"),
    ];
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Layer defaults, file values, `--set` overrides, then the FROSSL_SEED
/// environment variable, in that order.
pub fn resolve_config(file: Option<&ConfigMap>, sets: &[String]) -> Result<ConfigMap> {
    let mut map = default_config();
    if let Some(f) = file {
        for (k, v) in f {
            map.insert(k.clone(), v.clone());
        }
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got '{s}'")))?;
        if !k.contains('.') {
            return Err(Error::Config(format!("--set key must be section.key, got '{k}'")));
        }
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Ok(seed) = std::env::var("FROSSL_SEED") {
        let parsed: u64 = seed
            .parse()
            .map_err(|_| Error::Config(format!("FROSSL_SEED must be an integer, got '{seed}'")))?;
        map.insert("train.seed".into(), parsed.to_string());
    }
    Ok(map)
}

fn get<'a>(map: &'a ConfigMap, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Config(format!("missing required config key '{key}'")))
}

fn get_parsed<T: std::str::FromStr>(map: &ConfigMap, key: &str) -> Result<T> {
    let raw = get(map, key)?;
    raw.parse()
        .map_err(|_| Error::Config(format!("config key '{key}' has invalid value '{raw}'")))
}

/// Build the training configuration and dataset from a resolved map.
pub fn build_experiment(map: &ConfigMap) -> Result<(TrainConfig, DatasetHandle)> {
    let name = get(map, "objective.name")?;
    let views: usize = get_parsed(map, "train.views")?;
    let mut spec = ObjectiveSpec::by_name(name)
        .ok_or_else(|| Error::Config(format!(
            "objective.name '{name}' not in registry {OBJECTIVE_NAMES:?}"
        )))?;
    spec = ObjectiveSpec::for_views(spec.kind, views);
    if let Some(g) = map.get("objective.gamma") {
        let gamma: f64 = g
            .parse()
            .map_err(|_| Error::Config(format!("objective.gamma has invalid value '{g}'")))?;
        spec = spec.with_gamma(gamma);
    }

    let kind = match get(map, "encoder.kind")? {
        "linear" => EncoderKind::Linear,
        "mlp" => EncoderKind::Mlp,
        other => return Err(Error::Config(format!("encoder.kind must be linear or mlp, got '{other}'"))),
    };
    let hidden_raw = get(map, "encoder.hidden")?;
    let hidden: Vec<usize> = if hidden_raw.is_empty() {
        Vec::new()
    } else {
        hidden_raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("encoder.hidden has invalid entry '{s}'")))
            })
            .collect::<Result<_>>()?
    };

    let config = TrainConfig {
        objective: spec,
        encoder: EncoderSpec {
            kind,
            hidden,
            output_dim: get_parsed(map, "encoder.output_dim")?,
        },
        views,
        batch_size: get_parsed(map, "train.batch_size")?,
        learning_rate: get_parsed(map, "train.learning_rate")?,
        steps: get_parsed(map, "train.steps")?,
        seed: get_parsed(map, "train.seed")?,
        top_k: get_parsed(map, "train.top_k")?,
        augmentation: AugSpec {
            noise_std: get_parsed(map, "augment.noise_std")?,
            dropout_prob: get_parsed(map, "augment.dropout_prob")?,
            shift_max: get_parsed(map, "augment.shift_max")?,
        },
        probe_enabled: get_parsed(map, "train.probe")?,
        record_every: get_parsed(map, "train.record_every")?,
    };
    config.validate()?;

    let data = match get(map, "data.kind")? {
        "mixture" => {
            let mut ds = synth_gaussian_mixture(
                get_parsed(map, "data.classes")?,
                get_parsed(map, "data.dim")?,
                get_parsed(map, "data.per_class")?,
                get_parsed(map, "data.spread")?,
                config.seed,
            )?;
            let scale: f64 = get_parsed(map, "data.scale")?;
            if scale != 1.0 {
                let scaled: Vec<f64> =
                    ds.features.as_slice().iter().map(|v| v * scale).collect();
                ds.features = Matrix::new(ds.features.rows(), ds.features.cols(), scaled)?;
            }
            ds
        }
        "idx" => load_idx(
            Path::new(get(map, "data.images")?),
            Path::new(get(map, "data.labels")?),
        )?,
        other => return Err(Error::Config(format!("data.kind must be mixture or idx, got '{other}'"))),
    };
    Ok((config, data))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Resolved run description written before training starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: ConfigMap,
    pub artifacts: ArtifactPaths,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub manifest: String,
    pub trajectory: String,
    pub checkpoint: String,
}

impl ArtifactPaths {
    fn standard() -> Self {
        Self {
            manifest: "manifest.json".into(),
            trajectory: "trajectory.csv".into(),
            checkpoint: "checkpoint.bin".into(),
        }
    }
}

/// Resolve config, write the manifest, train, and persist artifacts.
/// Exposed for tests and examples; `cmd_train` is the thin wrapper.
pub fn run_training(map: &ConfigMap, out_dir: &Path) -> Result<TrainOutcome> {
    let (config, data) = build_experiment(map)?;
    std::fs::create_dir_all(out_dir)?;
    let artifacts = ArtifactPaths::standard();
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        seed: config.seed,
        config: map.clone(),
        artifacts: artifacts.clone(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(&out_dir.join(&artifacts.manifest), manifest_json.as_bytes())?;

    let outcome = train_run(&config, &data)?;
    atomic_write(
        &out_dir.join(&artifacts.trajectory),
        outcome.trajectory.to_csv().as_bytes(),
    )?;
    save_checkpoint(&outcome.encoder, &out_dir.join(&artifacts.checkpoint))?;
    Ok(outcome)
}

fn cmd_train(
    config_path: Option<&Path>,
    sets: &[String],
    out_dir: &Path,
    from_manifest: Option<&Path>,
) -> Result<i32> {
    let map = if let Some(mpath) = from_manifest {
        let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(mpath)?)
            .map_err(|e| Error::Format(format!("bad manifest {}: {e}", mpath.display())))?;
        // manifest config is already fully resolved; overrides still apply
        resolve_config(Some(&manifest.config), sets)?
    } else {
        let path = config_path
            .ok_or_else(|| Error::Config("either --config or --from-manifest is required".into()))?;
        let file = parse_config(&std::fs::read_to_string(path)?)?;
        resolve_config(Some(&file), sets)?
    };
    let outcome = run_training(&map, out_dir)?;
    let last = outcome.trajectory.points.last().expect("at least the initial record");
    println!(
        "trained {} steps: loss {:.6e}, lambda_1 {:.6e}, artifacts in {}",
        last.step,
        last.loss,
        last.eigenvalues[0],
        out_dir.display()
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// One property-check outcome.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from_err(name: &str, err: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: err <= tol,
            detail: format!("max err {err:.3e} (tol {tol:.0e})"),
        }
    }
}

fn random_viewset(rng: &mut ChaCha12Rng, v: usize, n: usize, d: usize) -> ViewSet {
    ViewSet::new((0..v).map(|_| Matrix::random_standard(n, d, rng)).collect())
        .expect("valid shapes")
}

/// Random orthogonal matrix from the eigenvectors of a random symmetric
/// matrix.
fn random_orthogonal(rng: &mut ChaCha12Rng, d: usize) -> Matrix {
    let a = Matrix::random_standard(d, d, rng);
    let sym = a.add(&a.transpose()).expect("shape").scale(0.5);
    sym.sym_eig().expect("finite input").eigenvectors
}

/// Norm dualities, the multiview invariance identity, and the collision
/// entropy equivalence.
pub fn identity_checks() -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut checks = Vec::new();

    // |‖ZᵀZ‖_F − ‖ZZᵀ‖_F| on 100 random matrices, relative
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = 4 + (rng.next_u32() as usize) % 29;
        let d = 2 + (rng.next_u32() as usize) % 15;
        let z = Matrix::random_standard(n, d, &mut rng);
        let a = z.xtx().frobenius_norm();
        let b = z.xxt().frobenius_norm();
        worst = worst.max((a - b).abs() / a.max(1e-300));
    }
    checks.push(Check::from_err("frobenius duality ||ZtZ|| = ||ZZt||", worst, 1e-9));

    // pairwise invariance sum equals the mean-centred form
    let mut worst = 0.0_f64;
    for v in [2usize, 3, 4, 8] {
        let vs = random_viewset(&mut rng, v, 16, 6);
        let p = invariance_mse_pairwise(&vs);
        let m = invariance_mse_mean(&vs);
        worst = worst.max((p - m).abs() / p.abs().max(1e-300));
    }
    checks.push(Check::from_err("pairwise invariance = mean form (V=2,3,4,8)", worst, 1e-9));

    // collision entropy of a PSD matrix equals -log of squared Frobenius norm
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let d = 3 + (rng.next_u32() as usize) % 10;
        let a = Matrix::random_standard(d + 2, d, &mut rng);
        let sigma = a.covariance();
        let h2 = alpha_entropy(&sigma, 2.0).expect("psd input");
        let direct = -(sigma.frobenius_norm().powi(2)).ln();
        worst = worst.max((h2 - direct).abs() / direct.abs().max(1e-300));
    }
    checks.push(Check::from_err("collision entropy = -log ||Sigma||_F^2", worst, 1e-9));
    checks
}

/// Column-side and row-side criterion decompositions plus the two-sided
/// evaluation agreement under row-unit normalization.
pub fn proposition_checks() -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(202);
    let mut checks = Vec::new();

    // columns scaled to unit norm: ||ZtZ||_F^2 = off-diagonal part + D
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (n, d) = (24, 8);
        let z = Matrix::random_standard(n, d, &mut rng)
            .center_columns()
            .normalize(NormalizeMode::DimVariance)
            .expect("nondegenerate")
            .scale(1.0 / (n as f64).sqrt());
        let lhs = z.xtx().frobenius_norm().powi(2);
        let rhs = nc_criterion(&z) + d as f64;
        worst = worst.max((lhs - rhs).abs() / lhs.max(1e-300));
    }
    checks.push(Check::from_err("unit-diagonal ||ZtZ||^2 = offdiag + D", worst, 1e-9));

    // rows scaled to unit norm: ||ZZt||_F^2 = off-diagonal part + N
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let (n, d) = (12, 20);
        let z = Matrix::random_standard(n, d, &mut rng)
            .normalize(NormalizeMode::RowUnit)
            .expect("nondegenerate");
        let lhs = z.xxt().frobenius_norm().powi(2);
        let rhs = c_criterion(&z) + n as f64;
        worst = worst.max((lhs - rhs).abs() / lhs.max(1e-300));
    }
    checks.push(Check::from_err("unit-diagonal ||ZZt||^2 = offdiag + N", worst, 1e-9));

    // the variance term reads identically from either side of the duality
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let z = Matrix::random_standard(16, 10, &mut rng)
            .normalize(NormalizeMode::RowUnit)
            .expect("nondegenerate");
        let via_cols = z.xtx().frobenius_norm().powi(2).ln();
        let via_rows = z.xxt().frobenius_norm().powi(2).ln();
        worst = worst.max((via_cols - via_rows).abs() / via_cols.abs().max(1e-300));
    }
    checks.push(Check::from_err("two-sided variance-term agreement", worst, 1e-9));
    checks
}

/// Rotation (right-multiplication by orthogonal Q) invariance of the
/// spectrum-based variance terms, with VICReg and the cross-correlation
/// objective as deliberate counterexamples.
pub fn rotation_checks() -> Vec<Check> {
    let mut rng = ChaCha12Rng::seed_from_u64(303);
    let mut checks = Vec::new();
    let invariant = [
        ObjectiveKind::FroSsl,
        ObjectiveKind::CorInfoMax,
        ObjectiveKind::Ivne,
        ObjectiveKind::Mmcr,
        ObjectiveKind::Wmse,
    ];
    for kind in invariant {
        let spec = ObjectiveSpec::new(kind);
        let mut worst = 0.0_f64;
        for _ in 0..5 {
            let (n, d) = (32, 8);
            let vs = random_viewset(&mut rng, 2, n, d);
            let q = random_orthogonal(&mut rng, d);
            let rotated = ViewSet::new(
                vs.views().iter().map(|z| z.matmul(&q).expect("shape")).collect(),
            )
            .expect("shapes");
            let a = evaluate(&vs, &spec).expect("valid input").variance_part;
            let b = evaluate(&rotated, &spec).expect("valid input").variance_part;
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
        checks.push(Check::from_err(
            &format!("{} variance term rotation-invariant", spec.name()),
            worst,
            1e-8,
        ));
    }
    for kind in [ObjectiveKind::VicReg, ObjectiveKind::BarlowTwins] {
        let spec = ObjectiveSpec::new(kind);
        // fixed counterexample
        let mut cexrng = ChaCha12Rng::seed_from_u64(40_404);
        let (n, d) = (32, 8);
        let vs = random_viewset(&mut cexrng, 2, n, d);
        let q = random_orthogonal(&mut cexrng, d);
        let rotated =
            ViewSet::new(vs.views().iter().map(|z| z.matmul(&q).expect("shape")).collect())
                .expect("shapes");
        let a = evaluate(&vs, &spec).expect("valid input").variance_part;
        let b = evaluate(&rotated, &spec).expect("valid input").variance_part;
        let diff = (a - b).abs();
        checks.push(Check {
            name: format!("{} variance term rotation-sensitive", spec.name()),
            passed: diff > 1e-3,
            detail: format!("moved by {diff:.3e} (must exceed 1e-3)"),
        });
    }
    checks
}

/// All suites addressable by name from the `verify` subcommand.
pub fn verify_suite(name: &str) -> Option<Vec<Check>> {
    match name {
        "identities" => Some(identity_checks()),
        "propositions" => Some(proposition_checks()),
        "rotations" => Some(rotation_checks()),
        "all" => {
            let mut all = identity_checks();
            all.extend(proposition_checks());
            all.extend(rotation_checks());
            Some(all)
        }
        _ => None,
    }
}

fn cmd_verify(suite: &str) -> Result<i32> {
    let Some(checks) = verify_suite(suite) else {
        eprintln!("unknown suite '{suite}'; valid suites: identities, rotations, propositions, all");
        return Ok(EXIT_USAGE);
    };
    let mut all_pass = true;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:<48}  {}", c.name, c.detail);
        all_pass &= c.passed;
    }
    Ok(if all_pass { EXIT_OK } else { 1 })
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

fn cmd_gradcheck(
    objective: Option<&str>,
    trials: usize,
    batch: usize,
    dim: usize,
    views: usize,
    seed: u64,
) -> Result<i32> {
    let names: Vec<&str> = match objective {
        Some(n) => {
            if ObjectiveSpec::by_name(n).is_none() {
                return Err(Error::Config(format!(
                    "objective '{n}' not in registry {OBJECTIVE_NAMES:?}"
                )));
            }
            vec![n]
        }
        None => OBJECTIVE_NAMES.to_vec(),
    };
    let mut all_pass = true;
    for name in names {
        let spec = ObjectiveSpec::by_name(name).expect("validated above");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        let mut passed = true;
        let mut tol = 0.0;
        for _ in 0..trials {
            let report = grad_check_random(&spec, views, batch, dim, &mut rng)?;
            worst = worst.max(report.max_rel_err);
            passed &= report.passed;
            tol = report.tolerance;
        }
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag}  {name:<14}  max rel err {worst:.3e} over {trials} trials (tol {tol:.0e})");
        all_pass &= passed;
    }
    Ok(if all_pass { EXIT_OK } else { 1 })
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    objective: &str,
    n: usize,
    d_grid: &[usize],
    v_grid: Option<&[usize]>,
    variance_term: bool,
    reps: usize,
    warmup: usize,
    out: Option<&Path>,
) -> Result<i32> {
    let spec = ObjectiveSpec::by_name(objective)
        .ok_or_else(|| Error::Config(format!(
            "objective '{objective}' not in registry {OBJECTIVE_NAMES:?}"
        )))?;
    let json = if let Some(vg) = v_grid {
        let d = d_grid.first().copied().unwrap_or(64);
        let report = views_scaling(&spec, n, d, vg, reps, warmup)?;
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?
    } else if variance_term {
        let report = d_sweep_report(spec.kind, n, d_grid, reps, warmup)?;
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?
    } else {
        let pinned = crate::bench::pin_to_cpu();
        let mut samples: Vec<BenchSample> = Vec::new();
        for &d in d_grid {
            samples.push(time_loss(&spec, n, d, 2, reps, warmup)?);
        }
        let slope = scaling_exponent(&samples)?;
        let report = serde_json::json!({
            "objective": spec.name(),
            "n": n,
            "grid": d_grid,
            "medians": samples.iter().map(|s| s.median).collect::<Vec<_>>(),
            "mads": samples.iter().map(|s| s.mad).collect::<Vec<_>>(),
            "slope": slope,
            "pinned": pinned,
        });
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?
    };
    match out {
        Some(path) => atomic_write(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// data tools
// ---------------------------------------------------------------------------

fn cmd_data_gen(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    seed: u64,
    images: &Path,
    labels: &Path,
) -> Result<i32> {
    if classes > 256 {
        return Err(Error::Config("IDX labels are bytes; at most 256 classes".into()));
    }
    let ds = synth_gaussian_mixture(classes, dim, per_class, spread, seed)?;
    // map features onto the [0,1] byte range the IDX container stores
    let slice = ds.features.as_slice();
    let (lo, hi) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let scaled: Vec<f64> = slice.iter().map(|&v| (v - lo) / span).collect();
    let mut out = ds;
    out.features = Matrix::new(out.features.rows(), out.features.cols(), scaled)?;
    save_idx(&out, images, labels)?;
    println!(
        "wrote {} samples x {} features to {} / {}",
        out.len(),
        out.dim(),
        images.display(),
        labels.display()
    );
    Ok(EXIT_OK)
}

fn cmd_data_inspect(images: &Path, labels: &Path) -> Result<i32> {
    let ds = load_idx(images, labels)?;
    let slice = ds.features.as_slice();
    let (lo, hi) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("samples: {}", ds.len());
    println!("features per sample: {}", ds.dim());
    println!("classes: {}", ds.class_count);
    println!("feature range: [{lo:.4}, {hi:.4}]");
    let mut hist = vec![0usize; ds.class_count];
    for &l in &ds.labels {
        hist[l] += 1;
    }
    for (c, count) in hist.iter().enumerate() {
        println!("class {c}: {count}");
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

/// Render the top-k eigenvalue trajectories from a trajectory CSV as a
/// standalone text-only SVG with one polyline per eigenvalue.
pub fn render_trajectory_svg(csv_text: &str, log_y: bool) -> Result<String> {
    let traj = crate::trainer::TrajectoryRecord::from_csv(csv_text)?;
    let k = traj.top_k;
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 20.0, 40.0);

    let transform = |v: f64| -> Result<f64> {
        if log_y {
            if v <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "log-scale plot requires positive eigenvalues, got {v}"
                )));
            }
            Ok(v.log10())
        } else {
            Ok(v)
        }
    };

    let steps: Vec<f64> = traj.points.iter().map(|p| p.step as f64).collect();
    let (x_lo, x_hi) = (steps[0], *steps.last().unwrap());
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for p in &traj.points {
        for &l in &p.eigenvalues {
            let t = transform(l)?;
            y_lo = y_lo.min(t);
            y_hi = y_hi.max(t);
        }
    }
    let x_span = (x_hi - x_lo).max(f64::MIN_POSITIVE);
    let y_span = (y_hi - y_lo).max(f64::MIN_POSITIVE);
    let px = |s: f64| ml + (s - x_lo) / x_span * (w - ml - mr);
    let py = |t: f64| h - mb - (t - y_lo) / y_span * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb,
        h - mb
    ));
    for i in 0..k {
        let hue = (i * 360 / k.max(1)) % 360;
        let pts: Vec<String> = traj
            .points
            .iter()
            .map(|p| {
                let t = transform(p.eigenvalues[i])?;
                Ok(format!("{:.2},{:.2}", px(p.step as f64), py(t)))
            })
            .collect::<Result<_>>()?;
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"hsl({hue},70%,45%)\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }
    let y_label = if log_y { "log10 eigenvalue" } else { "eigenvalue" };
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">step</text>\n<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        (w - mr + ml) / 2.0 - 15.0,
        h - 10.0,
        (h - mb + mt) / 2.0,
        (h - mb + mt) / 2.0,
    ));
    svg.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\" font-size=\"10\">{x_lo:.0}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"10\">{x_hi:.0}</text>\n<text x=\"8\" y=\"{}\" font-size=\"10\">{y_hi:.3}</text>\n<text x=\"8\" y=\"{}\" font-size=\"10\">{y_lo:.3}</text>\n",
        h - mb + 14.0,
        w - mr - 30.0,
        h - mb + 14.0,
        mt + 8.0,
        h - mb,
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn cmd_plot(input: &Path, output: &Path, log_y: bool) -> Result<i32> {
    let text = std::fs::read_to_string(input)?;
    let svg = render_trajectory_svg(&text, log_y)?;
    atomic_write(output, svg.as_bytes())?;
    println!("wrote {}", output.display());
    Ok(EXIT_OK)
}
