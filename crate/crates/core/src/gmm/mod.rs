//! Joint-density GMM baseline.
//!
//! Source and target vectors are stacked as `z = [x; y]` and modelled by a
//! full-covariance mixture trained with EM. Conversion is the conditional
//! expectation of `y` given `x`, weighting each component's linear
//! regression by its posterior under the source marginal.

mod io;
mod linalg;

pub use io::{read_gmm, write_gmm, GMM_MAGIC, GMM_VERSION};

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use linalg::{cholesky, cholesky_solve, column_variance, log_det_from_cholesky, log_sum_exp, mahalanobis_sq};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Retries that multiply the diagonal ridge by ten before giving up.
const FLOOR_ESCALATIONS: i32 = 6;
const MIN_WEIGHT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the relative log-likelihood improvement drops below this.
    pub tolerance: f64,
    /// Variance floor as a fraction of each dimension's data variance.
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            variance_floor: 1e-6,
            seed: 0,
        }
    }
}

/// Per-component quantities needed for conversion, derived from the joint
/// parameters.
#[derive(Debug, Clone)]
struct ComponentCache {
    chol_xx: Array2<f64>,
    log_norm_x: f64,
    /// `Sigma_yx * Sigma_xx^{-1}`, d_y × d_x.
    regression: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct JointGmmModel {
    dim: usize,
    weights: Vec<f64>,
    means: Array2<f64>,
    covariances: Vec<Array2<f64>>,
    cache: Vec<ComponentCache>,
}

impl PartialEq for JointGmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.weights == other.weights && self.means == other.means && self.covariances == other.covariances
    }
}

impl JointGmmModel {
    /// Builds a model from joint parameters. `dim` is the source (and target)
    /// dimensionality; means are `K × 2dim`, covariances `2dim × 2dim`.
    pub fn new(dim: usize, weights: Vec<f64>, means: Array2<f64>, covariances: Vec<Array2<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || dim == 0 {
            return Err(validation("GMM needs at least one component and one dimension"));
        }
        if means.dim() != (k, 2 * dim) || covariances.len() != k || covariances.iter().any(|c| c.dim() != (2 * dim, 2 * dim)) {
            return Err(validation("GMM parameter shapes disagree"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(validation("GMM weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(validation(format!("GMM weights sum to {total}, expected 1")));
        }
        let mut cache = Vec::with_capacity(k);
        for (i, cov) in covariances.iter().enumerate() {
            let xx = cov.slice(s![..dim, ..dim]);
            let xy = cov.slice(s![..dim, dim..]);
            let chol_xx = cholesky(xx).ok_or_else(|| Error::Numeric(format!("component {i}: source covariance is singular")))?;
            let log_norm_x = -0.5 * (dim as f64 * LN_2PI + log_det_from_cholesky(chol_xx.view()));
            // Sigma_xx^{-1} Sigma_xy, transposed, is Sigma_yx Sigma_xx^{-1}
            let regression = cholesky_solve(chol_xx.view(), xy).reversed_axes();
            cache.push(ComponentCache {
                chol_xx,
                log_norm_x,
                regression,
            });
        }
        Ok(Self {
            dim,
            weights,
            means,
            covariances,
            cache,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn covariances(&self) -> &[Array2<f64>] {
        &self.covariances
    }

    pub fn source_mean(&self, k: usize) -> ArrayView1<'_, f64> {
        self.means.slice(s![k, ..self.dim])
    }

    pub fn target_mean(&self, k: usize) -> ArrayView1<'_, f64> {
        self.means.slice(s![k, self.dim..])
    }

    pub fn regression(&self, k: usize) -> ArrayView2<'_, f64> {
        self.cache[k].regression.view()
    }

    fn check_dim(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(validation(format!("source vector has {} dims, model expects {}", x.len(), self.dim)));
        }
        Ok(())
    }

    /// Posterior probability of each component given a source vector.
    pub fn posteriors(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut scratch = Vec::with_capacity(self.dim);
        let logs: Vec<f64> = (0..self.components())
            .map(|k| {
                let c = &self.cache[k];
                self.weights[k].ln() + c.log_norm_x - 0.5 * mahalanobis_sq(c.chol_xx.view(), x, self.source_mean(k), &mut scratch)
            })
            .collect();
        let total = log_sum_exp(&logs);
        if !total.is_finite() {
            return Err(Error::Numeric("posterior normaliser is not finite".into()));
        }
        Ok(logs.iter().map(|l| (l - total).exp()).collect())
    }

    /// MMSE estimate of the target vector.
    pub fn convert(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let post = self.posteriors(x)?;
        let mut y = Array1::zeros(self.dim);
        for (k, p) in post.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let centered = &x - &self.source_mean(k);
            let local = &self.target_mean(k) + &self.cache[k].regression.dot(&centered);
            y.scaled_add(*p, &local);
        }
        Ok(y)
    }

    pub fn convert_rows(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((xs.nrows(), self.dim));
        for (i, x) in xs.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.convert(x)?);
        }
        Ok(out)
    }
}

/// Model plus the log-likelihood after each E-step.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub model: JointGmmModel,
    pub log_likelihoods: Vec<f64>,
}

struct Component {
    weight: f64,
    mean: Array1<f64>,
    cov: Array2<f64>,
    chol: Array2<f64>,
    log_norm: f64,
}

/// Floors the diagonal, then adds an escalating ridge until the matrix
/// factorizes.
fn regularize(mut cov: Array2<f64>, floor: &Array1<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    for (i, f) in floor.iter().enumerate() {
        if cov[[i, i]] < *f {
            cov[[i, i]] = *f;
        }
    }
    if let Some(l) = cholesky(cov.view()) {
        return Ok((cov, l));
    }
    for attempt in 1..=FLOOR_ESCALATIONS {
        let mut ridged = cov.clone();
        let scale = 10f64.powi(attempt);
        for (i, f) in floor.iter().enumerate() {
            ridged[[i, i]] += f * scale;
        }
        if let Some(l) = cholesky(ridged.view()) {
            return Ok((ridged, l));
        }
    }
    Err(Error::Training("covariance not positive definite after exhausting variance floors".into()))
}

fn make_component(weight: f64, mean: Array1<f64>, cov: Array2<f64>, floor: &Array1<f64>) -> Result<Component> {
    let (cov, chol) = regularize(cov, floor)?;
    let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + log_det_from_cholesky(chol.view()));
    Ok(Component {
        weight,
        mean,
        cov,
        chol,
        log_norm,
    })
}

/// Weighted covariance about `mean`, made exactly symmetric.
fn weighted_covariance(z: ArrayView2<'_, f64>, weights: ArrayView1<'_, f64>, mean: ArrayView1<'_, f64>, total: f64) -> Array2<f64> {
    let mut centered = &z - &mean;
    for (mut row, w) in centered.rows_mut().into_iter().zip(weights.iter()) {
        row *= w.sqrt();
    }
    let mut cov = centered.t().dot(&centered) / total;
    let d = cov.nrows();
    for i in 0..d {
        for j in 0..i {
            cov[[i, j]] = cov[[j, i]];
        }
    }
    cov
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by one hard assignment pass.
fn initialize(z: ArrayView2<'_, f64>, k: usize, floor: &Array1<f64>, data_var: &Array1<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<Component>> {
    let n = z.nrows();
    let mut centers: Vec<usize> = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(pick)));
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        let (best, _) = centers
            .iter()
            .enumerate()
            .map(|(c, &idx)| (c, sq_dist(z.row(i), z.row(idx))))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        members[best].push(i);
    }
    let mut comps = Vec::with_capacity(k);
    for (c, idx) in members.iter().enumerate() {
        let weight = (idx.len().max(1)) as f64;
        let (mean, cov) = if idx.len() >= 2 {
            let sub = z.select(Axis(0), idx);
            let mean = sub.mean_axis(Axis(0)).expect("non-empty cluster");
            let ones = Array1::ones(sub.nrows());
            let cov = weighted_covariance(sub.view(), ones.view(), mean.view(), sub.nrows() as f64);
            (mean, cov)
        } else {
            (z.row(centers[c]).to_owned(), Array2::from_diag(data_var))
        };
        comps.push(make_component(weight, mean, cov, floor)?);
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    comps.iter_mut().for_each(|c| c.weight /= total);
    Ok(comps)
}

/// Log-likelihood of every row and the responsibilities, `N × K`.
fn e_step(z: ArrayView2<'_, f64>, comps: &[Component]) -> (f64, Array2<f64>) {
    let (n, k) = (z.nrows(), comps.len());
    let mut resp = Array2::zeros((n, k));
    let mut logs = vec![0.0; k];
    let mut scratch = Vec::with_capacity(z.ncols());
    let mut total = 0.0;
    for i in 0..n {
        let row = z.row(i);
        for (j, c) in comps.iter().enumerate() {
            logs[j] = c.weight.ln() + c.log_norm - 0.5 * mahalanobis_sq(c.chol.view(), row, c.mean.view(), &mut scratch);
        }
        let lse = log_sum_exp(&logs);
        total += lse;
        for j in 0..k {
            resp[[i, j]] = (logs[j] - lse).exp();
        }
    }
    (total, resp)
}

/// Fits a `k`-component joint GMM to row-paired source and target frames.
pub fn em_train(source: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>, k: usize, config: &EmConfig) -> Result<EmOutcome> {
    if k == 0 {
        return Err(validation("component count must be positive"));
    }
    if source.nrows() != target.nrows() {
        return Err(validation(format!(
            "paired data row counts differ: {} vs {}",
            source.nrows(),
            target.nrows()
        )));
    }
    if source.ncols() != target.ncols() || source.ncols() == 0 {
        return Err(validation("source and target must share a positive dimensionality"));
    }
    if source.nrows() < k {
        return Err(validation(format!("{} rows cannot support {k} components", source.nrows())));
    }
    if source.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(validation("training data contains non-finite values"));
    }
    let dim = source.ncols();
    let z = concatenate(Axis(1), &[source, target]).expect("row counts checked");
    let n = z.nrows() as f64;
    let data_var = column_variance(z.view());
    let floor = &data_var * config.variance_floor;
    if k > 1 && z.rows().into_iter().all(|r| r == z.row(0)) {
        return Err(Error::Training("all training rows are identical; cannot fit several components".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut comps = initialize(z.view(), k, &floor, &data_var, &mut rng)?;
    let mut history = Vec::new();
    for iter in 0..=config.max_iterations {
        let (ll, resp) = e_step(z.view(), &comps);
        if !ll.is_finite() {
            return Err(Error::Training(format!("log-likelihood became non-finite at iteration {iter}")));
        }
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (ll - prev) / prev.abs().max(1e-300) < config.tolerance);
        history.push(ll);
        if converged || iter == config.max_iterations {
            break;
        }
        let mut next = Vec::with_capacity(k);
        for (j, old) in comps.iter().enumerate() {
            let gamma = resp.column(j);
            let nk: f64 = gamma.sum();
            if nk < 1e-10 {
                // starved component keeps its parameters with a negligible weight
                next.push(Component {
                    weight: MIN_WEIGHT.max(nk / n),
                    mean: old.mean.clone(),
                    cov: old.cov.clone(),
                    chol: old.chol.clone(),
                    log_norm: old.log_norm,
                });
                continue;
            }
            let mean = gamma.dot(&z) / nk;
            let cov = weighted_covariance(z.view(), gamma, mean.view(), nk);
            next.push(make_component(nk / n, mean, cov, &floor)?);
        }
        let total: f64 = next.iter().map(|c| c.weight).sum();
        next.iter_mut().for_each(|c| c.weight /= total);
        comps = next;
    }

    let weights = comps.iter().map(|c| c.weight).collect();
    let means = ndarray::stack(Axis(0), &comps.iter().map(|c| c.mean.view()).collect::<Vec<_>>()).expect("equal lengths");
    let covariances = comps.into_iter().map(|c| c.cov).collect();
    let model = JointGmmModel::new(dim, weights, means, covariances)?;
    Ok(EmOutcome {
        model,
        log_likelihoods: history,
    })
}

/// Average per-row joint log-likelihood of paired data under a model.
pub fn mean_log_likelihood(model: &JointGmmModel, source: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    let z = concatenate(Axis(1), &[source, target]).map_err(|e| validation(e.to_string()))?;
    let comps = model
        .weights
        .iter()
        .zip(model.means.rows())
        .zip(&model.covariances)
        .map(|((w, m), c)| {
            let chol = cholesky(c.view()).ok_or_else(|| Error::Numeric("joint covariance not positive definite".into()))?;
            let log_norm = -0.5 * (m.len() as f64 * LN_2PI + log_det_from_cholesky(chol.view()));
            Ok(Component {
                weight: *w,
                mean: m.to_owned(),
                cov: c.clone(),
                chol,
                log_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(e_step(z.view(), &comps).0 / z.nrows() as f64)
}

#[cfg(test)]
mod tests;
