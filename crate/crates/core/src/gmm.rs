//! Diagonal-covariance Gaussian mixtures: EM fitting, exact component masses
//! inside a box, and sampling from the mixture conditioned on a box.

use ndarray::{Array2, ArrayView2};
use rand::distr::{Open01, StandardUniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::BoxConstraint;
use crate::error::{Error, Result};
use crate::normal::interval_mass;
use crate::par;
use crate::rng::Stream;
use crate::space::check_dim;
use crate::truncnorm::sample_standard;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this total mass a box is treated as having no probability.
pub const ZERO_MASS: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGmm {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    stds: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the mean per-point log-likelihood improves by less than this.
    pub tolerance: f64,
    /// σ floor as a fraction of each dimension's data range.
    pub std_floor_scale: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 500,
            tolerance: 1e-8,
            std_floor_scale: 1e-6,
            restarts: 3,
            seed: 0,
        }
    }
}

/// Result of fitting one component count.
#[derive(Clone, Debug)]
pub struct EmFit {
    pub gmm: DiagonalGmm,
    pub log_likelihood: f64,
    pub bic: f64,
    /// Log-likelihood after each E-step, one sequence per restart.
    pub traces: Vec<Vec<f64>>,
}

/// Component weights renormalised inside a box.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalWeights {
    /// φ̃, sums to one.
    pub weights: Vec<f64>,
    /// φ̃′_j = φ_j ∏_i (Φ(t_i) − Φ(s_i)) in standardized units.
    pub unnormalized: Vec<f64>,
    pub z: f64,
    pub log_z: f64,
    /// Per-component, per-dimension interval masses.
    pub masses: Vec<Vec<f64>>,
}

impl DiagonalGmm {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, stds: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || stds.len() != k {
            return Err(Error::domain("mixture needs matching non-empty weights, means and stds"));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::domain("mixture dimension must be positive"));
        }
        for j in 0..k {
            check_dim(d, means[j].len())?;
            check_dim(d, stds[j].len())?;
            if !(weights[j] >= 0.0) || !weights[j].is_finite() {
                return Err(Error::domain(format!("weight {j} is invalid")));
            }
            if means[j].iter().any(|m| !m.is_finite()) {
                return Err(Error::domain(format!("component {j} has a non-finite mean")));
            }
            if stds[j].iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return Err(Error::domain(format!("component {j} has a non-positive std")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiagonalGmm {
            weights,
            means,
            stds,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn stds(&self) -> &[Vec<f64>] {
        &self.stds
    }

    /// Number of free parameters.
    pub fn parameter_count(&self) -> usize {
        self.components() - 1 + 2 * self.components() * self.dim()
    }

    fn component_log_density(&self, j: usize, x: &[f64]) -> f64 {
        let mut acc = self.weights[j].ln();
        for ((&xi, &mu), &sd) in x.iter().zip(&self.means[j]).zip(&self.stds[j]) {
            let z = (xi - mu) / sd;
            acc -= 0.5 * (LN_2PI + z * z) + sd.ln();
        }
        acc
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let logs: Vec<f64> = (0..self.components())
            .map(|j| self.component_log_density(j, x))
            .collect();
        Ok(log_sum_exp(&logs))
    }

    pub fn log_likelihood(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        check_dim(self.dim(), x.ncols())?;
        Ok(e_step(self, x).0)
    }

    /// Component masses inside `b` and the renormalised weights.
    pub fn conditional_weights(&self, b: &BoxConstraint) -> Result<ConditionalWeights> {
        check_dim(self.dim(), b.dim())?;
        let intervals = b.intervals().ok_or(Error::ZeroMass)?;
        let k = self.components();
        let mut masses = Vec::with_capacity(k);
        let mut unnormalized = Vec::with_capacity(k);
        let mut log_unnorm = Vec::with_capacity(k);
        for j in 0..k {
            let m: Vec<f64> = intervals
                .iter()
                .zip(self.means[j].iter().zip(&self.stds[j]))
                .map(|(iv, (&mu, &sd))| {
                    if iv.is_full() {
                        1.0
                    } else {
                        interval_mass((iv.lower - mu) / sd, (iv.upper - mu) / sd)
                    }
                })
                .collect();
            let product = m.iter().fold(self.weights[j], |acc, &x| acc * x);
            let log_p = m.iter().fold(self.weights[j].ln(), |acc, &x| acc + x.ln());
            masses.push(m);
            unnormalized.push(product);
            log_unnorm.push(log_p);
        }
        let z: f64 = unnormalized.iter().sum();
        let log_z = log_sum_exp(&log_unnorm);
        if !(log_z > ZERO_MASS.ln()) {
            return Err(Error::ZeroMass);
        }
        let weights = log_unnorm.iter().map(|&l| (l - log_z).exp()).collect();
        Ok(ConditionalWeights {
            weights,
            unnormalized,
            z,
            log_z,
            masses,
        })
    }

    /// Draws `n` points from the mixture conditioned on `b`.
    ///
    /// Rows are produced in fixed chunks with one sub-stream each, so the
    /// output is bit-identical for a given `stream` regardless of threading.
    pub fn sample_conditional(&self, b: &BoxConstraint, n: usize, stream: Stream) -> Result<Array2<f64>> {
        Ok(self.sample_conditional_with_components(b, n, stream)?.0)
    }

    /// Like [`Self::sample_conditional`], also returning the component each row
    /// was drawn from.
    pub fn sample_conditional_with_components(
        &self,
        b: &BoxConstraint,
        n: usize,
        stream: Stream,
    ) -> Result<(Array2<f64>, Vec<usize>)> {
        let cw = self.conditional_weights(b)?;
        let intervals = b.intervals().expect("non-empty box has intervals");
        let d = self.dim();
        let mut cumulative = Vec::with_capacity(cw.weights.len());
        let mut acc = 0.0;
        for &w in &cw.weights {
            acc += w;
            cumulative.push(acc);
        }
        let last_live = cw
            .weights
            .iter()
            .rposition(|&w| w > 0.0)
            .expect("positive total mass");
        // standardized bounds per component and dimension
        let bounds: Vec<Vec<(f64, f64)>> = (0..self.components())
            .map(|j| {
                intervals
                    .iter()
                    .zip(self.means[j].iter().zip(&self.stds[j]))
                    .map(|(iv, (&mu, &sd))| ((iv.lower - mu) / sd, (iv.upper - mu) / sd))
                    .collect()
            })
            .collect();
        let chunks = par::map_range(par::chunk_count(n), |c| {
            let (start, end) = par::chunk_bounds(c, n);
            let mut rng = stream.child(c as u64).rng();
            let mut out = Vec::with_capacity((end - start) * d);
            let mut picked = Vec::with_capacity(end - start);
            for _ in start..end {
                let u: f64 = rng.sample(StandardUniform);
                let j = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(last_live)
                    .min(last_live);
                let j = if cw.weights[j] > 0.0 {
                    j
                } else {
                    // walk forward to the next live component
                    (j..=last_live).find(|&q| cw.weights[q] > 0.0).unwrap_or(last_live)
                };
                picked.push(j);
                for (i, iv) in intervals.iter().enumerate() {
                    let (a, bb) = bounds[j][i];
                    let mu = self.means[j][i];
                    let sd = self.stds[j][i];
                    let z = if iv.is_full() {
                        standard_normal(&mut rng)
                    } else {
                        sample_standard(a, bb, &mut rng)
                    };
                    let mut x = (mu + sd * z).clamp(iv.lower, iv.upper);
                    if iv.lower_open && x <= iv.lower {
                        x = iv.lower.next_up().min(iv.upper);
                    }
                    out.push(x);
                }
            }
            (out, picked)
        });
        let mut data = Vec::with_capacity(n * d);
        let mut components = Vec::with_capacity(n);
        for (rows, picked) in chunks {
            data.extend(rows);
            components.extend(picked);
        }
        let points = Array2::from_shape_vec((n, d), data).expect("chunk sizes add up");
        Ok((points, components))
    }

    pub fn to_document(&self, feature_names: Vec<String>, fit_config: Option<EmConfig>, bic: Option<f64>) -> GmmDocument {
        GmmDocument {
            k: self.components(),
            d: self.dim(),
            weights: self.weights.clone(),
            means: self.means.clone(),
            stds: self.stds.clone(),
            feature_names,
            fit_config,
            bic,
        }
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    crate::normal::inv_cdf(u)
}

/// Serialized model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmDocument {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub fit_config: Option<EmConfig>,
    pub bic: Option<f64>,
}

impl GmmDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("gmm serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GmmDocument = serde_json::from_str(s)?;
        if doc.k != doc.weights.len() || doc.d != doc.feature_names.len() {
            return Err(Error::domain("GMM file header does not match its contents"));
        }
        Ok(doc)
    }

    pub fn gmm(&self) -> Result<DiagonalGmm> {
        let g = DiagonalGmm::new(self.weights.clone(), self.means.clone(), self.stds.clone())?;
        check_dim(self.d, g.dim())?;
        Ok(g)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn validate_data(x: ArrayView2<'_, f64>, k: usize) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::domain("data has no columns"));
    }
    if k == 0 {
        return Err(Error::domain("component count must be at least 1"));
    }
    if x.nrows() < k {
        return Err(Error::domain(format!(
            "need at least as many rows ({}) as components ({k})",
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("data contains non-finite values"));
    }
    Ok(())
}

/// Per-dimension σ floors: a fraction of the data range.
fn std_floors(x: ArrayView2<'_, f64>, scale: f64) -> Vec<f64> {
    x.columns()
        .into_iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            let base = if range > 0.0 { range } else { lo.abs().max(1.0) };
            (scale * base).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Log-likelihood and responsibilities (row-major n×K).
fn e_step(g: &DiagonalGmm, x: ArrayView2<'_, f64>) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let k = g.components();
    let parts = par::map_range(par::chunk_count(n), |c| {
        let (start, end) = par::chunk_bounds(c, n);
        let mut ll = 0.0;
        let mut resp = Vec::with_capacity((end - start) * k);
        let mut logs = vec![0.0; k];
        let mut row = vec![0.0; x.ncols()];
        for r in start..end {
            row.iter_mut().zip(x.row(r)).for_each(|(d, s)| *d = *s);
            for (j, l) in logs.iter_mut().enumerate() {
                *l = g.component_log_density(j, &row);
            }
            let lse = log_sum_exp(&logs);
            ll += lse;
            resp.extend(logs.iter().map(|&l| (l - lse).exp()));
        }
        (ll, resp)
    });
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(n * k);
    for (l, r) in parts {
        ll += l;
        resp.extend(r);
    }
    (ll, resp)
}

/// Weighted means and σ given responsibilities; components with no
/// responsibility keep their previous parameters.
fn m_step(prev: &DiagonalGmm, x: ArrayView2<'_, f64>, resp: &[f64], floors: &[f64]) -> DiagonalGmm {
    let n = x.nrows();
    let d = x.ncols();
    let k = prev.components();
    let sums = par::map_range(par::chunk_count(n), |c| {
        let (start, end) = par::chunk_bounds(c, n);
        let mut nk = vec![0.0; k];
        let mut sx = vec![0.0; k * d];
        for r in start..end {
            let row = x.row(r);
            for j in 0..k {
                let w = resp[r * k + j];
                nk[j] += w;
                for (i, &v) in row.iter().enumerate() {
                    sx[j * d + i] += w * v;
                }
            }
        }
        (nk, sx)
    });
    let mut nk = vec![0.0; k];
    let mut sx = vec![0.0; k * d];
    for (a, b) in sums {
        nk.iter_mut().zip(a).for_each(|(t, v)| *t += v);
        sx.iter_mut().zip(b).for_each(|(t, v)| *t += v);
    }
    let mut means = prev.means.clone();
    for j in 0..k {
        if nk[j] > 0.0 {
            for i in 0..d {
                means[j][i] = sx[j * d + i] / nk[j];
            }
        }
    }
    let sq = par::map_range(par::chunk_count(n), |c| {
        let (start, end) = par::chunk_bounds(c, n);
        let mut sxx = vec![0.0; k * d];
        for r in start..end {
            let row = x.row(r);
            for j in 0..k {
                let w = resp[r * k + j];
                for (i, &v) in row.iter().enumerate() {
                    let dv = v - means[j][i];
                    sxx[j * d + i] += w * dv * dv;
                }
            }
        }
        sxx
    });
    let mut sxx = vec![0.0; k * d];
    for part in sq {
        sxx.iter_mut().zip(part).for_each(|(t, v)| *t += v);
    }
    let mut stds = prev.stds.clone();
    for j in 0..k {
        if nk[j] > 0.0 {
            for i in 0..d {
                stds[j][i] = (sxx[j * d + i] / nk[j]).sqrt().max(floors[i]);
            }
        }
    }
    let total: f64 = nk.iter().sum();
    let weights = nk.iter().map(|&v| v / total).collect();
    DiagonalGmm {
        weights,
        means,
        stds,
    }
}

/// k-means++ seeding (on range-scaled coordinates), then per-cluster moments.
fn initialize(x: ArrayView2<'_, f64>, k: usize, floors: &[f64], stream: Stream) -> DiagonalGmm {
    let n = x.nrows();
    let d = x.ncols();
    let mut rng = stream.rng();
    let scale: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            if var > 0.0 {
                1.0 / var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let dist2 = |a: usize, b: usize| -> f64 {
        (0..d)
            .map(|i| {
                let t = (x[[a, i]] - x[[b, i]]) * scale[i];
                t * t
            })
            .sum()
    };
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|r| dist2(r, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.sample::<f64, _>(StandardUniform) * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (r, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = r;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (r, v) in nearest.iter_mut().enumerate() {
            *v = v.min(dist2(r, next));
        }
    }
    let mut assignment = vec![0usize; n];
    for (r, a) in assignment.iter_mut().enumerate() {
        let mut best = f64::INFINITY;
        for (j, &c) in centers.iter().enumerate() {
            let dd = dist2(r, c);
            if dd < best {
                best = dd;
                *a = j;
            }
        }
    }
    let global_std: Vec<f64> = x
        .columns()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let mean = c.iter().sum::<f64>() / n as f64;
            (c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64)
                .sqrt()
                .max(floors[i])
        })
        .collect();
    let mut means = Vec::with_capacity(k);
    let mut stds = Vec::with_capacity(k);
    for (j, &c) in centers.iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&r| assignment[r] == j).collect();
        if members.len() < 2 {
            means.push(x.row(c).to_vec());
            stds.push(global_std.clone());
            continue;
        }
        let m = members.len() as f64;
        let mu: Vec<f64> = (0..d).map(|i| members.iter().map(|&r| x[[r, i]]).sum::<f64>() / m).collect();
        let sd: Vec<f64> = (0..d)
            .map(|i| {
                (members.iter().map(|&r| (x[[r, i]] - mu[i]).powi(2)).sum::<f64>() / m)
                    .sqrt()
                    .max(floors[i])
            })
            .collect();
        means.push(mu);
        stds.push(sd);
    }
    DiagonalGmm {
        weights: vec![1.0 / k as f64; k],
        means,
        stds,
    }
}

/// Fits a `k`-component mixture by EM, keeping the best of `cfg.restarts` runs.
pub fn fit_em(x: ArrayView2<'_, f64>, k: usize, cfg: &EmConfig) -> Result<EmFit> {
    validate_data(x, k)?;
    let n = x.nrows();
    let floors = std_floors(x, cfg.std_floor_scale);
    let base = Stream::new(cfg.seed).child(k as u64);
    let restarts = cfg.restarts.max(1);
    let mut best: Option<(DiagonalGmm, f64)> = None;
    let mut traces = Vec::with_capacity(restarts);
    for restart in 0..restarts {
        let mut g = initialize(x, k, &floors, base.child(restart as u64));
        let mut trace = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        let mut final_ll = prev;
        for _ in 0..cfg.max_iters.max(1) {
            let (ll, resp) = e_step(&g, x);
            trace.push(ll);
            final_ll = ll;
            if (ll - prev) / (n as f64) < cfg.tolerance {
                break;
            }
            prev = ll;
            g = m_step(&g, x, &resp, &floors);
        }
        // the loop may exit after an M-step without re-evaluating
        if trace.len() == cfg.max_iters.max(1) {
            let (ll, _) = e_step(&g, x);
            if ll.is_finite() {
                trace.push(ll);
                final_ll = ll;
            }
        }
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, b)| final_ll > *b) {
            best = Some((g, final_ll));
        }
    }
    let (gmm, log_likelihood) = best.expect("at least one restart");
    let bic = -2.0 * log_likelihood + gmm.parameter_count() as f64 * (n as f64).ln();
    Ok(EmFit {
        gmm,
        log_likelihood,
        bic,
        traces,
    })
}

/// Component-count selection result.
#[derive(Clone, Debug)]
pub struct BicSelection {
    pub best: EmFit,
    /// `(K, BIC)` for every candidate tried.
    pub scores: Vec<(usize, f64)>,
}

/// Fits K = 1..=kmax and keeps the lowest BIC (smaller K wins ties).
pub fn fit_bic(x: ArrayView2<'_, f64>, kmax: usize, cfg: &EmConfig) -> Result<BicSelection> {
    validate_data(x, 1)?;
    let kmax = kmax.max(1).min(x.nrows());
    let mut best: Option<EmFit> = None;
    let mut scores = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let fit = fit_em(x, k, cfg)?;
        scores.push((k, fit.bic));
        if best.as_ref().is_none_or(|b| fit.bic < b.bic) {
            best = Some(fit);
        }
    }
    Ok(BicSelection {
        best: best.expect("kmax >= 1"),
        scores,
    })
}
