//! Synthetic stochastic objectives.
//!
//! Every problem exposes an exact objective `F(w)`, its exact gradient, and a
//! stochastic gradient `∇F(w) + ε` with `ε ~ N(0, σ²/d · I)`, so the total
//! noise variance is exactly `σ²`.

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamPurpose};
use crate::vector::ParamVector;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Problem block of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `F(w) = ½ Σ a_i (w_i − w*_i)²` with `a` log-spaced in `[spectrum_min, spectrum_max]`.
    NoisyQuadratic {
        dimension: usize,
        noise: f64,
        spectrum_min: f64,
        spectrum_max: f64,
        /// Expected Euclidean norm of the drawn optimum `w*`; the start point is 0.
        #[serde(default = "default_optimum_scale")]
        optimum_scale: f64,
    },
    /// L2-regularised logistic regression on a seeded synthetic dataset.
    LogisticRegression {
        dimension: usize,
        noise: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_l2")]
        l2: f64,
    },
    /// `F(u, v) = ½‖u vᵀ − M‖²_F` with rank-1 `M = a bᵀ`; `w = (u, v)`.
    Rank1MatrixFactorization {
        dimension: usize,
        noise: f64,
        /// Length of `u`; defaults to `dimension / 2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<usize>,
    },
}

fn default_optimum_scale() -> f64 {
    1.0
}

fn default_samples() -> usize {
    512
}

fn default_l2() -> f64 {
    1e-2
}

impl ProblemConfig {
    pub fn dimension(&self) -> usize {
        match *self {
            ProblemConfig::NoisyQuadratic { dimension, .. }
            | ProblemConfig::LogisticRegression { dimension, .. }
            | ProblemConfig::Rank1MatrixFactorization { dimension, .. } => dimension,
        }
    }

    pub fn noise(&self) -> f64 {
        match *self {
            ProblemConfig::NoisyQuadratic { noise, .. }
            | ProblemConfig::LogisticRegression { noise, .. }
            | ProblemConfig::Rank1MatrixFactorization { noise, .. } => noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 {
            return Err(Error::config("problem.dimension", "must be at least 1"));
        }
        let noise = self.noise();
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::config("problem.noise", "must be finite and >= 0"));
        }
        match *self {
            ProblemConfig::NoisyQuadratic {
                spectrum_min,
                spectrum_max,
                optimum_scale,
                ..
            } => {
                if !(spectrum_min.is_finite() && spectrum_min > 0.0) {
                    return Err(Error::config("problem.spectrum_min", "must be finite and > 0"));
                }
                if !(spectrum_max.is_finite() && spectrum_max >= spectrum_min) {
                    return Err(Error::config(
                        "problem.spectrum_max",
                        "must be finite and >= spectrum_min",
                    ));
                }
                if !(optimum_scale.is_finite() && optimum_scale >= 0.0) {
                    return Err(Error::config("problem.optimum_scale", "must be finite and >= 0"));
                }
            }
            ProblemConfig::LogisticRegression { samples, l2, .. } => {
                if samples == 0 {
                    return Err(Error::config("problem.samples", "must be at least 1"));
                }
                if !(l2.is_finite() && l2 > 0.0) {
                    return Err(Error::config("problem.l2", "must be finite and > 0"));
                }
            }
            ProblemConfig::Rank1MatrixFactorization { rows, .. } => {
                let m = rows.unwrap_or(d / 2);
                if d < 2 || m == 0 || m >= d {
                    return Err(Error::config(
                        "problem.rows",
                        "need 1 <= rows < dimension (dimension >= 2)",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    NoisyQuadratic,
    LogisticRegression,
    Rank1MatrixFactorization,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    NoisyQuadratic {
        spectrum: Vec<f64>,
    },
    LogisticRegression {
        samples: usize,
        l2: f64,
        /// Row-major `samples × dimension`.
        features: Vec<f64>,
        labels: Vec<f64>,
    },
    Rank1MatrixFactorization {
        rows: usize,
        cols: usize,
        left: ParamVector,
        right: ParamVector,
        /// Row-major `rows × cols`.
        target: Vec<f64>,
    },
}

/// A fully materialised problem instance. Immutable after construction.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dimension: usize,
    pub noise: f64,
    /// Lipschitz constant of `∇F` (for rank-1 factorisation: on the ball
    /// `‖w‖ ≤ smoothness_radius`).
    pub smoothness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness_radius: Option<f64>,
    pub f_star: f64,
    pub optimum: ParamVector,
    pub initial_point: ParamVector,
    pub payload: Payload,
}

impl ProblemSpec {
    pub fn build(config: &ProblemConfig, seed: u64) -> Result<ProblemSpec> {
        config.validate()?;
        let mut rng = RngStream::new(seed, 0, StreamPurpose::Problem);
        let d = config.dimension();
        let noise = config.noise();
        Ok(match *config {
            ProblemConfig::NoisyQuadratic {
                spectrum_min,
                spectrum_max,
                optimum_scale,
                ..
            } => {
                let spectrum = log_spaced(spectrum_min, spectrum_max, d);
                let std = optimum_scale / (d as f64).sqrt();
                let optimum =
                    ParamVector::from_vec((0..d).map(|_| std * rng.standard_normal()).collect());
                ProblemSpec {
                    kind: ProblemKind::NoisyQuadratic,
                    dimension: d,
                    noise,
                    smoothness: spectrum_max,
                    smoothness_radius: None,
                    f_star: 0.0,
                    optimum,
                    initial_point: ParamVector::zeros(d),
                    payload: Payload::NoisyQuadratic { spectrum },
                }
            }
            ProblemConfig::LogisticRegression { samples, l2, .. } => {
                build_logistic(d, noise, samples, l2, &mut rng)
            }
            ProblemConfig::Rank1MatrixFactorization { rows, .. } => {
                build_rank1(d, noise, rows.unwrap_or(d / 2), &mut rng)
            }
        })
    }

    /// Hand-specified quadratic `½ Σ λ_i (w_i − w*_i)²` with additive gradient noise.
    pub fn diagonal_quadratic(
        spectrum: Vec<f64>,
        optimum: ParamVector,
        initial_point: ParamVector,
        noise: f64,
    ) -> Result<ProblemSpec> {
        let d = spectrum.len();
        if d == 0 {
            return Err(Error::config("problem.dimension", "must be at least 1"));
        }
        for v in [&optimum, &initial_point] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.len(),
                });
            }
        }
        if spectrum.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::config("problem.spectrum", "eigenvalues must be finite and > 0"));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::config("problem.noise", "must be finite and >= 0"));
        }
        let smoothness = spectrum.iter().fold(0.0_f64, |m, &l| m.max(l));
        Ok(ProblemSpec {
            kind: ProblemKind::NoisyQuadratic,
            dimension: d,
            noise,
            smoothness,
            smoothness_radius: None,
            f_star: 0.0,
            optimum,
            initial_point,
            payload: Payload::NoisyQuadratic { spectrum },
        })
    }

    fn check_dim(&self, w: &ParamVector) -> Result<()> {
        if w.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: w.len(),
            });
        }
        Ok(())
    }

    /// Exact full objective `F(w)`. Consumes no randomness.
    pub fn full_objective(&self, w: &ParamVector) -> Result<f64> {
        self.check_dim(w)?;
        Ok(match &self.payload {
            Payload::NoisyQuadratic { spectrum } => {
                let mut acc = 0.0;
                for i in 0..self.dimension {
                    let r = w[i] - self.optimum[i];
                    acc += spectrum[i] * r * r;
                }
                0.5 * acc
            }
            Payload::LogisticRegression {
                samples,
                l2,
                features,
                labels,
            } => {
                let d = self.dimension;
                let mut acc = 0.0;
                for j in 0..*samples {
                    let z = row_dot(&features[j * d..(j + 1) * d], w.as_slice());
                    acc += softplus(-labels[j] * z);
                }
                acc / *samples as f64 + 0.5 * l2 * w.norm_sq()
            }
            Payload::Rank1MatrixFactorization {
                rows, cols, target, ..
            } => {
                let (u, v) = w.as_slice().split_at(*rows);
                let mut acc = 0.0;
                for i in 0..*rows {
                    for j in 0..*cols {
                        let e = u[i] * v[j] - target[i * cols + j];
                        acc += e * e;
                    }
                }
                0.5 * acc
            }
        })
    }

    /// Exact gradient `∇F(w)`.
    pub fn full_gradient(&self, w: &ParamVector) -> Result<ParamVector> {
        self.check_dim(w)?;
        let d = self.dimension;
        Ok(match &self.payload {
            Payload::NoisyQuadratic { spectrum } => ParamVector::from_vec(
                (0..d)
                    .map(|i| spectrum[i] * (w[i] - self.optimum[i]))
                    .collect(),
            ),
            Payload::LogisticRegression {
                samples,
                l2,
                features,
                labels,
            } => {
                let mut g = vec![0.0; d];
                for j in 0..*samples {
                    let x = &features[j * d..(j + 1) * d];
                    let y = labels[j];
                    let coef = -y * sigmoid(-y * row_dot(x, w.as_slice()));
                    for i in 0..d {
                        g[i] += coef * x[i];
                    }
                }
                let n = *samples as f64;
                for i in 0..d {
                    g[i] = g[i] / n + l2 * w[i];
                }
                ParamVector::from_vec(g)
            }
            Payload::Rank1MatrixFactorization {
                rows, cols, target, ..
            } => {
                let (u, v) = w.as_slice().split_at(*rows);
                let mut g = vec![0.0; d];
                for i in 0..*rows {
                    for j in 0..*cols {
                        let e = u[i] * v[j] - target[i * cols + j];
                        g[i] += e * v[j];
                        g[rows + j] += e * u[i];
                    }
                }
                ParamVector::from_vec(g)
            }
        })
    }

    /// Stochastic gradient `∇F(w) + ε`. Always advances `rng` by `d` normal draws.
    pub fn sample_gradient(&self, w: &ParamVector, rng: &mut RngStream) -> Result<ParamVector> {
        let mut g = self.full_gradient(w)?;
        let scale = self.noise / (self.dimension as f64).sqrt();
        for value in g.as_mut_slice() {
            let z = rng.standard_normal();
            if self.noise > 0.0 {
                *value += scale * z;
            }
        }
        Ok(g)
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * ratio.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

fn row_dot(x: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(w) {
        acc += a * b;
    }
    acc
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn build_logistic(d: usize, noise: f64, samples: usize, l2: f64, rng: &mut RngStream) -> ProblemSpec {
    let truth: Vec<f64> = (0..d)
        .map(|_| 2.0 * rng.standard_normal() / (d as f64).sqrt())
        .collect();
    let mut features = Vec::with_capacity(samples * d);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let p = sigmoid(4.0 * row_dot(&x, &truth));
        labels.push(if rng.uniform() < p { 1.0 } else { -1.0 });
        features.extend_from_slice(&x);
    }

    let design = DMatrix::from_row_slice(samples, d, &features);
    let gram = design.transpose() * &design / samples as f64;
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, v| m.max(*v));

    let mut spec = ProblemSpec {
        kind: ProblemKind::LogisticRegression,
        dimension: d,
        noise,
        smoothness: 0.25 * top + l2,
        smoothness_radius: None,
        f_star: 0.0,
        optimum: ParamVector::zeros(d),
        initial_point: ParamVector::zeros(d),
        payload: Payload::LogisticRegression {
            samples,
            l2,
            features,
            labels,
        },
    };
    let optimum = newton_minimise(&spec);
    spec.f_star = spec.full_objective(&optimum).expect("dimension fixed");
    spec.optimum = optimum;
    spec
}

/// Damped Newton iteration for the (strongly convex) logistic objective.
fn newton_minimise(spec: &ProblemSpec) -> ParamVector {
    let Payload::LogisticRegression {
        samples,
        l2,
        features,
        labels,
    } = &spec.payload
    else {
        unreachable!("newton_minimise is only called for logistic regression");
    };
    let d = spec.dimension;
    let mut w = ParamVector::zeros(d);
    let mut f = spec.full_objective(&w).unwrap();
    for _ in 0..100 {
        let g = spec.full_gradient(&w).unwrap();
        if g.norm() <= 1e-15 {
            break;
        }
        let mut hess = DMatrix::<f64>::identity(d, d) * *l2;
        for j in 0..*samples {
            let x = &features[j * d..(j + 1) * d];
            let s = sigmoid(labels[j] * row_dot(x, w.as_slice()));
            let c = s * (1.0 - s) / *samples as f64;
            for a in 0..d {
                for b in 0..d {
                    hess[(a, b)] += c * x[a] * x[b];
                }
            }
        }
        let rhs = DVector::from_column_slice(g.as_slice());
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => break,
        };
        let step = ParamVector::from_vec(step.iter().copied().collect());
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut cand = w.clone();
            cand.add_scaled(-t, &step);
            let fc = spec.full_objective(&cand).unwrap();
            // Near the optimum F stops resolving progress; fall back to the gradient norm.
            let accept = fc < f
                || (fc <= f + 4.0 * f64::EPSILON * f.abs()
                    && spec.full_gradient(&cand).unwrap().norm() < g.norm());
            if accept {
                w = cand;
                improved = true;
                f = fc;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

fn build_rank1(d: usize, noise: f64, rows: usize, rng: &mut RngStream) -> ProblemSpec {
    let cols = d - rows;
    let left = ParamVector::from_vec((0..rows).map(|_| rng.standard_normal()).collect());
    let right = ParamVector::from_vec((0..cols).map(|_| rng.standard_normal()).collect());
    let mut target = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            target.push(left[i] * right[j]);
        }
    }
    let initial_point =
        ParamVector::from_vec((0..d).map(|_| 0.5 * rng.standard_normal()).collect());
    let mut optimum = left.as_slice().to_vec();
    optimum.extend_from_slice(right.as_slice());
    let optimum = ParamVector::from_vec(optimum);

    // On ‖(u, v)‖ ≤ R the Hessian norm is bounded by
    // max(‖u‖², ‖v‖²) + ‖u vᵀ − M‖ + ‖u‖‖v‖ ≤ 2R² + ‖M‖_F.
    let radius = 2.0 * optimum.norm().max(initial_point.norm());
    let target_norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    ProblemSpec {
        kind: ProblemKind::Rank1MatrixFactorization,
        dimension: d,
        noise,
        smoothness: 2.0 * radius * radius + target_norm,
        smoothness_radius: Some(radius),
        f_star: 0.0,
        optimum,
        initial_point,
        payload: Payload::Rank1MatrixFactorization {
            rows,
            cols,
            left,
            right,
            target,
        },
    }
}
