//! The dimension-contrastive loss zoo.
//!
//! Every objective is expressed through a shared invariance/variance
//! decomposition: `total = variance_part + gamma * invariance_part`
//! (Barlow Twins keeps its own two-term weighting with `lambda_bt`).
//! All functions are pure; a [`ViewSet`] is the unit every loss consumes.

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, NormalizeMode};
use crate::{Error, Result};

/// V per-view embedding batches plus their cached arithmetic mean.
#[derive(Debug, Clone)]
pub struct ViewSet {
    views: Vec<Matrix>,
    mean: Matrix,
}

impl ViewSet {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::Dim(format!("a view set needs at least 2 views, got {}", views.len())));
        }
        let shape = views[0].shape();
        for (i, v) in views.iter().enumerate() {
            if v.shape() != shape {
                return Err(Error::Dim(format!(
                    "view {i} has shape {:?}, expected {:?}",
                    v.shape(),
                    shape
                )));
            }
        }
        let mut mean = views[0].clone();
        for v in &views[1..] {
            mean = mean.add(v)?;
        }
        let mean = mean.scale(1.0 / views.len() as f64);
        Ok(Self { views, mean })
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn mean(&self) -> &Matrix {
        &self.mean
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn batch_size(&self) -> usize {
        self.views[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.views[0].cols()
    }
}

/// Which objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    FroSsl,
    FroSslNoLog,
    VicReg,
    BarlowTwins,
    CorInfoMax,
    Ivne,
    Wmse,
    Mmcr,
}

/// Normalization applied to each view before the FroSSL variance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrosslNorm {
    /// Center, then scale the whole matrix to Frobenius norm sqrt(D);
    /// variance term is `+log ||Z^T Z||_F^2`. The default.
    TwoView,
    /// Row-unit normalize, trace-normalize the covariance, variance term is
    /// `-2 log ||cov||_F`. Compatibility variant; under trace normalization
    /// this pulls eigenvalues the opposite way from the default.
    MultiView,
}

/// Per-kind hyperparameters; defaults mirror the reference training setups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    /// VICReg hinge epsilon.
    pub vicreg_eps: f64,
    /// VICReg variance (hinge) weight.
    pub vicreg_var_weight: f64,
    /// VICReg covariance (off-diagonal) weight.
    pub vicreg_cov_weight: f64,
    /// Barlow Twins off-diagonal weight.
    pub barlow_lambda: f64,
    /// CorInfoMax log-det regularizer epsilon.
    pub corinfomax_eps: f64,
    /// W-MSE whitening eigenvalue floor.
    pub wmse_eps: f64,
    /// FroSSL normalization variant.
    pub frossl_norm: FrosslNorm,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self {
            vicreg_eps: 1e-4,
            vicreg_var_weight: 25.0,
            vicreg_cov_weight: 1.0,
            barlow_lambda: 0.05,
            corinfomax_eps: 1e-6,
            wmse_eps: 1e-6,
            frossl_norm: FrosslNorm::TwoView,
        }
    }
}

/// An objective kind plus its invariance weight and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Invariance/variance tradeoff; multiplies the invariance part.
    pub gamma: f64,
    pub params: ObjectiveParams,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        let gamma = match kind {
            ObjectiveKind::FroSsl | ObjectiveKind::FroSslNoLog => 1.4,
            ObjectiveKind::VicReg => 25.0,
            ObjectiveKind::CorInfoMax => 0.01,
            _ => 1.0,
        };
        Self { kind, gamma, params: ObjectiveParams::default() }
    }

    /// Defaults adjusted for the view count (FroSSL uses gamma 1.4 at V=2 and
    /// 2.0 for more views).
    pub fn for_views(kind: ObjectiveKind, views: usize) -> Self {
        let mut spec = Self::new(kind);
        if matches!(kind, ObjectiveKind::FroSsl | ObjectiveKind::FroSslNoLog) && views > 2 {
            spec.gamma = 2.0;
        }
        spec
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Registry lookup by the objective's CLI name.
    pub fn by_name(name: &str) -> Option<Self> {
        let kind = match name {
            "frossl" => ObjectiveKind::FroSsl,
            "frossl-nolog" => ObjectiveKind::FroSslNoLog,
            "vicreg" => ObjectiveKind::VicReg,
            "barlow" => ObjectiveKind::BarlowTwins,
            "corinfomax" => ObjectiveKind::CorInfoMax,
            "ivne" => ObjectiveKind::Ivne,
            "wmse" => ObjectiveKind::Wmse,
            "mmcr" => ObjectiveKind::Mmcr,
            _ => return None,
        };
        Some(Self::new(kind))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ObjectiveKind::FroSsl => "frossl",
            ObjectiveKind::FroSslNoLog => "frossl-nolog",
            ObjectiveKind::VicReg => "vicreg",
            ObjectiveKind::BarlowTwins => "barlow",
            ObjectiveKind::CorInfoMax => "corinfomax",
            ObjectiveKind::Ivne => "ivne",
            ObjectiveKind::Wmse => "wmse",
            ObjectiveKind::Mmcr => "mmcr",
        }
    }
}

/// All registry names, in registry order.
pub const OBJECTIVE_NAMES: [&str; 8] =
    ["frossl", "frossl-nolog", "vicreg", "barlow", "corinfomax", "ivne", "wmse", "mmcr"];

/// Scalar loss with its invariance/variance decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveResult {
    pub total: f64,
    pub invariance_part: f64,
    pub variance_part: f64,
    pub per_view_variance: Vec<f64>,
}

/// `sum_{v<r} (1/N) ||Z_v - Z_r||_F^2` by explicit pair loop.
pub fn invariance_mse_pairwise(vs: &ViewSet) -> f64 {
    let n = vs.batch_size() as f64;
    let views = vs.views();
    let mut total = 0.0;
    for v in 0..views.len() {
        for r in (v + 1)..views.len() {
            let diff: f64 = views[v]
                .as_slice()
                .iter()
                .zip(views[r].as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += diff / n;
        }
    }
    total
}

/// `V * sum_v (1/N) ||Z_v - mean||_F^2`; equals the pairwise sum.
pub fn invariance_mse_mean(vs: &ViewSet) -> f64 {
    let n = vs.batch_size() as f64;
    let v_count = vs.num_views() as f64;
    let mean = vs.mean();
    let total: f64 = vs
        .views()
        .iter()
        .map(|z| {
            z.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n
        })
        .sum();
    v_count * total
}

/// `log ||Z^T Z||_F^2`, computed through whichever Gram product is smaller.
/// The caller is responsible for normalizing `Z` first.
pub fn frossl_variance_term(z: &Matrix) -> Result<f64> {
    if z.frobenius_norm() == 0.0 {
        return Err(Error::Degenerate("embedding collapsed to zero".into()));
    }
    let prod = if z.cols() <= z.rows() { z.xtx() } else { z.xxt() };
    let sq = prod.frobenius_norm().powi(2);
    Ok(sq.ln())
}

pub(crate) fn frossl_normalize(z: &Matrix, norm: FrosslNorm) -> Result<Matrix> {
    match norm {
        FrosslNorm::TwoView => z.center_columns().normalize(NormalizeMode::FrobeniusSqrtD),
        FrosslNorm::MultiView => z.normalize(NormalizeMode::RowUnit),
    }
}

/// FroSSL: per-view log squared Frobenius norm of the normalized covariance
/// plus gamma-weighted mean-target MSE on the normalized views.
pub fn frossl_loss(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    if !matches!(spec.kind, ObjectiveKind::FroSsl | ObjectiveKind::FroSslNoLog) {
        return Err(Error::Param(format!("frossl_loss called with kind {:?}", spec.kind)));
    }
    let n = vs.batch_size() as f64;
    let normalized: Vec<Matrix> = vs
        .views()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            frossl_normalize(z, spec.params.frossl_norm)
                .map_err(|_| Error::Degenerate(format!("view {i} collapsed")))
        })
        .collect::<Result<_>>()?;
    let norm_vs = ViewSet::new(normalized)?;

    let mut per_view = Vec::with_capacity(vs.num_views());
    for (i, y) in norm_vs.views().iter().enumerate() {
        let term = match spec.params.frossl_norm {
            FrosslNorm::TwoView => {
                let v = frossl_variance_term(y)
                    .map_err(|_| Error::Degenerate(format!("view {i} collapsed")))?;
                match spec.kind {
                    ObjectiveKind::FroSslNoLog => v.exp(),
                    _ => v,
                }
            }
            FrosslNorm::MultiView => {
                let prod = if y.rows() > y.cols() { y.xtx() } else { y.xxt() };
                let cov = prod
                    .normalize(NormalizeMode::TraceCov)
                    .map_err(|_| Error::Degenerate(format!("view {i} collapsed")))?;
                let fro = cov.frobenius_norm();
                match spec.kind {
                    ObjectiveKind::FroSslNoLog => fro.powi(2),
                    _ => -2.0 * fro.ln(),
                }
            }
        };
        per_view.push(term);
    }
    let variance_part: f64 = per_view.iter().sum();

    let mean = norm_vs.mean();
    let invariance_part: f64 = norm_vs
        .views()
        .iter()
        .map(|y| {
            y.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n
        })
        .sum();

    Ok(ObjectiveResult {
        total: variance_part + spec.gamma * invariance_part,
        invariance_part,
        variance_part,
        per_view_variance: per_view,
    })
}

/// VICReg: hinge on the covariance diagonal plus off-diagonal penalty, with
/// MSE invariance on the raw views.
pub fn vicreg_loss(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    let eps = spec.params.vicreg_eps;
    let mut per_view = Vec::with_capacity(vs.num_views());
    for z in vs.views() {
        let cov = z.center_columns().covariance();
        let d = cov.rows();
        let mut hinge = 0.0;
        let mut offdiag = 0.0;
        for i in 0..d {
            hinge += (1.0 - (cov.get(i, i) + eps).sqrt()).max(0.0);
            for j in 0..d {
                if i != j {
                    offdiag += cov.get(i, j) * cov.get(i, j);
                }
            }
        }
        per_view.push(spec.params.vicreg_var_weight * hinge + spec.params.vicreg_cov_weight * offdiag);
    }
    let variance_part: f64 = per_view.iter().sum();
    let invariance_part = invariance_mse_mean(vs);
    Ok(ObjectiveResult {
        total: variance_part + spec.gamma * invariance_part,
        invariance_part,
        variance_part,
        per_view_variance: per_view,
    })
}

pub(crate) fn barlow_parts(z1: &Matrix, z2: &Matrix, _lambda_bt: f64) -> Result<(f64, f64)> {
    if z1.shape() != z2.shape() {
        return Err(Error::Dim("views must share a shape".into()));
    }
    let n = z1.rows() as f64;
    let y1 = z1.center_columns().normalize(NormalizeMode::DimVariance)?;
    let y2 = z2.center_columns().normalize(NormalizeMode::DimVariance)?;
    let c = y1.transpose().matmul(&y2)?.scale(1.0 / n);
    let d = c.rows();
    let mut ondiag = 0.0;
    let mut offdiag = 0.0;
    for i in 0..d {
        let dd = c.get(i, i) - 1.0;
        ondiag += dd * dd;
        for j in 0..d {
            if i != j {
                offdiag += c.get(i, j) * c.get(i, j);
            }
        }
    }
    Ok((ondiag, offdiag))
}

/// Barlow Twins: cross-correlation of two standardized views against identity.
pub fn barlow_twins_loss(z1: &Matrix, z2: &Matrix, lambda_bt: f64) -> Result<f64> {
    let (ondiag, offdiag) = barlow_parts(z1, z2, lambda_bt)?;
    Ok(ondiag + lambda_bt * offdiag)
}

/// CorInfoMax: negated log-det entropy of each view covariance plus MSE
/// invariance. The constant trace term of the log-det divergence is dropped.
pub fn corinfomax_loss(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    let eps = spec.params.corinfomax_eps;
    let mut per_view = Vec::with_capacity(vs.num_views());
    for z in vs.views() {
        let cov = z.center_columns().covariance();
        per_view.push(-cov.logdet_psd(eps)?);
    }
    let variance_part: f64 = per_view.iter().sum();
    let invariance_part = invariance_mse_mean(vs);
    Ok(ObjectiveResult {
        total: variance_part + spec.gamma * invariance_part,
        invariance_part,
        variance_part,
        per_view_variance: per_view,
    })
}

/// Von Neumann entropy term `tr(Sigma ln Sigma)` of a PSD matrix, with
/// `0 ln 0 := 0` applied at the eigenvalue level.
pub fn vne_term(cov: &Matrix) -> Result<f64> {
    let eigenvalues = cov.sym_eigvals()?;
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let floor = 1e-12 * lmax;
    Ok(eigenvalues
        .iter()
        .map(|&l| if l <= floor { 0.0 } else { l * l.ln() })
        .sum())
}

/// Cosine-distance invariance `sum_v (1/N) sum_i (1 - cos(z_i, mean_i))`.
pub(crate) fn cosine_invariance(vs: &ViewSet) -> f64 {
    let n = vs.batch_size();
    let mean = vs.mean();
    let mut total = 0.0;
    for z in vs.views() {
        for i in 0..n {
            let a = z.row(i);
            let b = mean.row(i);
            let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos = if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
            };
            total += 1.0 - cos;
        }
    }
    total / n as f64
}

/// I-VNE (minimized form): `sum_v tr(Sigma_v ln Sigma_v)` plus gamma-weighted
/// cosine-distance invariance toward the view mean.
pub fn ivne_loss(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    let mut per_view = Vec::with_capacity(vs.num_views());
    for z in vs.views() {
        let cov = z.center_columns().covariance();
        per_view.push(vne_term(&cov)?);
    }
    let variance_part: f64 = per_view.iter().sum();
    let invariance_part = cosine_invariance(vs);
    Ok(ObjectiveResult {
        total: variance_part + spec.gamma * invariance_part,
        invariance_part,
        variance_part,
        per_view_variance: per_view,
    })
}

/// W-MSE: MSE invariance on whitened views; the variance part is identically
/// zero because each whitened covariance is the identity.
pub fn wmse_loss(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    let (n, d) = (vs.batch_size(), vs.dim());
    if n <= d {
        return Err(Error::IllPosedWhitening { n, d });
    }
    let whitened: Vec<Matrix> = vs
        .views()
        .iter()
        .map(|z| z.whiten(spec.params.wmse_eps))
        .collect::<Result<_>>()?;
    let wvs = ViewSet::new(whitened)?;
    let invariance_part = invariance_mse_mean(&wvs);
    Ok(ObjectiveResult {
        total: spec.gamma * invariance_part,
        invariance_part,
        variance_part: 0.0,
        per_view_variance: vec![0.0; vs.num_views()],
    })
}

/// MMCR: negated nuclear norm of the mean of row-unit-normalized views.
pub fn mmcr_loss(vs: &ViewSet) -> Result<f64> {
    let normalized: Vec<Matrix> = vs
        .views()
        .iter()
        .map(|z| z.normalize(NormalizeMode::RowUnit))
        .collect::<Result<_>>()?;
    let mean = ViewSet::new(normalized)?.mean().clone();
    Ok(-mean.ky_fan_norm(1.0)?)
}

/// Matrix-based alpha-order entropy `(1/(1-alpha)) log sum_i lambda_i^alpha`.
pub fn alpha_entropy(sigma: &Matrix, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 || alpha == 1.0 {
        return Err(Error::Param(format!(
            "alpha entropy requires alpha > 0 and alpha != 1, got {alpha}"
        )));
    }
    let eig = sigma.sym_eig()?;
    let sum: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).powf(alpha)).sum();
    Ok(sum.ln() / (1.0 - alpha))
}

/// Non-contrastive criterion `||Z^T Z - diag(Z^T Z)||_F^2`.
pub fn nc_criterion(z: &Matrix) -> f64 {
    offdiag_sq(&z.xtx())
}

/// Contrastive criterion `||Z Z^T - diag(Z Z^T)||_F^2`.
pub fn c_criterion(z: &Matrix) -> f64 {
    offdiag_sq(&z.xxt())
}

fn offdiag_sq(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += m.get(i, j) * m.get(i, j);
            }
        }
    }
    total
}

/// Evaluate any registered objective on a view set.
pub fn evaluate(vs: &ViewSet, spec: &ObjectiveSpec) -> Result<ObjectiveResult> {
    match spec.kind {
        ObjectiveKind::FroSsl | ObjectiveKind::FroSslNoLog => frossl_loss(vs, spec),
        ObjectiveKind::VicReg => vicreg_loss(vs, spec),
        ObjectiveKind::BarlowTwins => {
            if vs.num_views() != 2 {
                return Err(Error::Dim(format!(
                    "barlow twins requires exactly 2 views, got {}",
                    vs.num_views()
                )));
            }
            let lambda = spec.params.barlow_lambda;
            let (ondiag, offdiag) = barlow_parts(&vs.views()[0], &vs.views()[1], lambda)?;
            Ok(ObjectiveResult {
                total: ondiag + lambda * offdiag,
                invariance_part: ondiag,
                variance_part: lambda * offdiag,
                per_view_variance: vec![lambda * offdiag / 2.0; 2],
            })
        }
        ObjectiveKind::CorInfoMax => corinfomax_loss(vs, spec),
        ObjectiveKind::Ivne => ivne_loss(vs, spec),
        ObjectiveKind::Wmse => wmse_loss(vs, spec),
        ObjectiveKind::Mmcr => {
            let total = mmcr_loss(vs)?;
            Ok(ObjectiveResult {
                total,
                invariance_part: 0.0,
                variance_part: total,
                per_view_variance: vec![total / vs.num_views() as f64; vs.num_views()],
            })
        }
    }
}
