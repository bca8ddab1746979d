//! Service-time and interarrival laws.
//!
//! Every [`ServiceDistribution`] exposes three consistent views of the same
//! parameterization: sampling, the tail `F^c(w) = P{S > w}`, and the
//! integrated tail `Phi^c(w) = int_w^inf F^c`. When the law has mean one,
//! `Phi^c` is the tail of the stationary residual service time.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, Pareto};
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::quad::{integrate_piecewise, QuadratureError};

/// Absolute tolerance of the quadrature fallback for `Phi^c`.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid parameter `{param}` for {kind}: {reason}")]
    InvalidParameter {
        kind: DistKind,
        param: &'static str,
        reason: String,
    },
    #[error("missing parameter `{param}` for {kind}")]
    MissingParameter { kind: DistKind, param: &'static str },
    #[error("unknown parameter `{param}` for {kind}")]
    UnknownParameter { kind: DistKind, param: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Exponential,
    Deterministic,
    Pareto,
    Uniform,
    Hyperexponential,
    Lognormal,
}

impl DistKind {
    pub const ALL: [DistKind; 6] = [
        DistKind::Exponential,
        DistKind::Deterministic,
        DistKind::Pareto,
        DistKind::Uniform,
        DistKind::Hyperexponential,
        DistKind::Lognormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistKind::Exponential => "exponential",
            DistKind::Deterministic => "deterministic",
            DistKind::Pareto => "pareto",
            DistKind::Uniform => "uniform",
            DistKind::Hyperexponential => "hyperexponential",
            DistKind::Lognormal => "lognormal",
        }
    }

    /// Parameter names accepted in configuration files for this kind.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            DistKind::Exponential => &["rate"],
            DistKind::Deterministic => &["value"],
            DistKind::Pareto => &["alpha", "scale"],
            DistKind::Uniform => &["low", "high"],
            DistKind::Hyperexponential => &["probs", "rates"],
            DistKind::Lognormal => &["mu", "sigma"],
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown distribution kind `{s}`"))
    }
}

/// A raw parameter value as it appears in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

pub type RawParams = BTreeMap<String, ParamValue>;

/// Validated parameters of a service law, in the law's own units.
#[derive(Debug, Clone, PartialEq)]
pub enum DistParams {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Pareto { alpha: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
    Hyperexponential { probs: Vec<f64>, rates: Vec<f64> },
    Lognormal { mu: f64, sigma: f64 },
}

impl DistParams {
    pub fn kind(&self) -> DistKind {
        match self {
            DistParams::Exponential { .. } => DistKind::Exponential,
            DistParams::Deterministic { .. } => DistKind::Deterministic,
            DistParams::Pareto { .. } => DistKind::Pareto,
            DistParams::Uniform { .. } => DistKind::Uniform,
            DistParams::Hyperexponential { .. } => DistKind::Hyperexponential,
            DistParams::Lognormal { .. } => DistKind::Lognormal,
        }
    }

    /// Default parameters for a kind, used when a command line names only the kind.
    pub fn default_for(kind: DistKind) -> DistParams {
        match kind {
            DistKind::Exponential => DistParams::Exponential { rate: 1.0 },
            DistKind::Deterministic => DistParams::Deterministic { value: 1.0 },
            DistKind::Pareto => DistParams::Pareto { alpha: 1.5, scale: 1.0 },
            DistKind::Uniform => DistParams::Uniform { low: 0.0, high: 2.0 },
            DistKind::Hyperexponential => DistParams::Hyperexponential {
                probs: vec![0.5, 0.5],
                rates: vec![0.5, 2.0],
            },
            DistKind::Lognormal => DistParams::Lognormal { mu: 0.0, sigma: 1.0 },
        }
    }

    /// Builds parameters from a raw key/value table. Missing keys fall back to
    /// [`DistParams::default_for`]; unknown keys are rejected.
    pub fn from_raw(kind: DistKind, raw: &RawParams) -> Result<DistParams, DistError> {
        for key in raw.keys() {
            if !kind.param_names().contains(&key.as_str()) {
                return Err(DistError::UnknownParameter { kind, param: key.clone() });
            }
        }
        let num = |param: &'static str, default: f64| -> Result<f64, DistError> {
            match raw.get(param) {
                None => Ok(default),
                Some(ParamValue::Number(v)) => Ok(*v),
                Some(ParamValue::List(_)) => Err(DistError::InvalidParameter {
                    kind,
                    param,
                    reason: "expected a number".into(),
                }),
            }
        };
        let list = |param: &'static str, default: &[f64]| -> Result<Vec<f64>, DistError> {
            match raw.get(param) {
                None => Ok(default.to_vec()),
                Some(ParamValue::List(v)) => Ok(v.clone()),
                Some(ParamValue::Number(v)) => Ok(vec![*v]),
            }
        };
        let params = match DistParams::default_for(kind) {
            DistParams::Exponential { rate } => DistParams::Exponential { rate: num("rate", rate)? },
            DistParams::Deterministic { value } => DistParams::Deterministic { value: num("value", value)? },
            DistParams::Pareto { alpha, scale } => DistParams::Pareto {
                alpha: num("alpha", alpha)?,
                scale: num("scale", scale)?,
            },
            DistParams::Uniform { low, high } => DistParams::Uniform {
                low: num("low", low)?,
                high: num("high", high)?,
            },
            DistParams::Hyperexponential { probs, rates } => DistParams::Hyperexponential {
                probs: list("probs", &probs)?,
                rates: list("rates", &rates)?,
            },
            DistParams::Lognormal { mu, sigma } => DistParams::Lognormal {
                mu: num("mu", mu)?,
                sigma: num("sigma", sigma)?,
            },
        };
        Ok(params)
    }

    fn validate(&self) -> Result<(), DistError> {
        let kind = self.kind();
        let bad = |param: &'static str, reason: &str| {
            Err(DistError::InvalidParameter { kind, param, reason: reason.to_string() })
        };
        let positive = |param: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                bad(param, "must be finite and > 0")
            }
        };
        match self {
            DistParams::Exponential { rate } => positive("rate", *rate),
            DistParams::Deterministic { value } => positive("value", *value),
            DistParams::Pareto { alpha, scale } => {
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return bad("alpha", "must be > 1 (finite mean required)");
                }
                positive("scale", *scale)
            }
            DistParams::Uniform { low, high } => {
                if !(low.is_finite() && *low >= 0.0) {
                    return bad("low", "must be finite and >= 0");
                }
                if !(high.is_finite() && high > low) {
                    return bad("high", "must be finite and > low");
                }
                Ok(())
            }
            DistParams::Hyperexponential { probs, rates } => {
                if probs.is_empty() || probs.len() != rates.len() {
                    return bad("probs", "probs and rates must be nonempty and of equal length");
                }
                if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                    return bad("probs", "each probability must be > 0");
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("probs", "probabilities must sum to 1");
                }
                for r in rates {
                    positive("rates", *r)?;
                }
                Ok(())
            }
            DistParams::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    return bad("mu", "must be finite");
                }
                positive("sigma", *sigma)
            }
        }
    }

    fn mean(&self) -> f64 {
        match self {
            DistParams::Exponential { rate } => 1.0 / rate,
            DistParams::Deterministic { value } => *value,
            DistParams::Pareto { alpha, scale } => alpha * scale / (alpha - 1.0),
            DistParams::Uniform { low, high } => 0.5 * (low + high),
            DistParams::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p / r).sum()
            }
            DistParams::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// The same law for `c * S`.
    fn scaled(&self, c: f64) -> DistParams {
        match self {
            DistParams::Exponential { rate } => DistParams::Exponential { rate: rate / c },
            DistParams::Deterministic { value } => DistParams::Deterministic { value: value * c },
            DistParams::Pareto { alpha, scale } => DistParams::Pareto { alpha: *alpha, scale: scale * c },
            DistParams::Uniform { low, high } => DistParams::Uniform { low: low * c, high: high * c },
            DistParams::Hyperexponential { probs, rates } => DistParams::Hyperexponential {
                probs: probs.clone(),
                rates: rates.iter().map(|r| r / c).collect(),
            },
            DistParams::Lognormal { mu, sigma } => DistParams::Lognormal { mu: mu + c.ln(), sigma: *sigma },
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Exp(Exp<f64>),
    Const(f64),
    Pareto(Pareto<f64>),
    Uniform { low: f64, width: f64 },
    Hyper { cumulative: Vec<f64>, branches: Vec<Exp<f64>> },
    LogNormal(LogNormal<f64>),
}

impl Sampler {
    fn build(params: &DistParams) -> Sampler {
        // Parameters are validated before this point, so constructors cannot fail.
        match params {
            DistParams::Exponential { rate } => Sampler::Exp(Exp::new(*rate).expect("validated rate")),
            DistParams::Deterministic { value } => Sampler::Const(*value),
            DistParams::Pareto { alpha, scale } => {
                Sampler::Pareto(Pareto::new(*scale, *alpha).expect("validated pareto"))
            }
            DistParams::Uniform { low, high } => Sampler::Uniform { low: *low, width: high - low },
            DistParams::Hyperexponential { probs, rates } => {
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                let branches = rates.iter().map(|r| Exp::new(*r).expect("validated rate")).collect();
                Sampler::Hyper { cumulative, branches }
            }
            DistParams::Lognormal { mu, sigma } => {
                Sampler::LogNormal(LogNormal::new(*mu, *sigma).expect("validated lognormal"))
            }
        }
    }
}

/// An immutable service-time law.
#[derive(Debug, Clone)]
pub struct ServiceDistribution {
    params: DistParams,
    mean: f64,
    sampler: Sampler,
}

impl PartialEq for ServiceDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ServiceDistribution {
    /// Validates `params` and, when `normalize` is set, rescales the law to mean 1.
    pub fn new(params: DistParams, normalize: bool) -> Result<Self, DistError> {
        params.validate()?;
        let raw_mean = params.mean();
        if !(raw_mean.is_finite() && raw_mean > 0.0) {
            return Err(DistError::InvalidParameter {
                kind: params.kind(),
                param: "mean",
                reason: format!("mean {raw_mean} is not finite and positive"),
            });
        }
        let params = if normalize && raw_mean != 1.0 {
            params.scaled(1.0 / raw_mean)
        } else {
            params
        };
        let mean = if normalize { 1.0 } else { raw_mean };
        let sampler = Sampler::build(&params);
        Ok(ServiceDistribution { params, mean, sampler })
    }

    pub fn from_raw(kind: DistKind, raw: &RawParams, normalize: bool) -> Result<Self, DistError> {
        Self::new(DistParams::from_raw(kind, raw)?, normalize)
    }

    pub fn exponential() -> Self {
        Self::new(DistParams::Exponential { rate: 1.0 }, false).expect("unit exponential")
    }

    /// Mean-1 Pareto law with shape `alpha`.
    pub fn pareto(alpha: f64) -> Result<Self, DistError> {
        Self::new(DistParams::Pareto { alpha, scale: 1.0 }, true)
    }

    /// The law of `c * S`.
    pub fn scaled(&self, c: f64) -> Self {
        let params = self.params.scaled(c);
        let sampler = Sampler::build(&params);
        ServiceDistribution { params, mean: self.mean * c, sampler }
    }

    pub fn kind(&self) -> DistKind {
        self.params.kind()
    }

    pub fn params(&self) -> &DistParams {
        &self.params
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// True for laws whose second moment is infinite.
    pub fn has_infinite_variance(&self) -> bool {
        matches!(self.params, DistParams::Pareto { alpha, .. } if alpha <= 2.0)
    }

    /// Short human-readable label, e.g. `pareto(alpha=1.5)`.
    pub fn label(&self) -> String {
        match &self.params {
            DistParams::Pareto { alpha, .. } => format!("pareto(alpha={alpha})"),
            DistParams::Lognormal { sigma, .. } => format!("lognormal(sigma={sigma})"),
            DistParams::Hyperexponential { probs, .. } => format!("hyperexponential(k={})", probs.len()),
            _ => self.kind().name().to_string(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Const(v) => *v,
            Sampler::Pareto(d) => d.sample(rng),
            Sampler::Uniform { low, width } => low + width * rng.random::<f64>(),
            Sampler::Hyper { cumulative, branches } => {
                let u: f64 = rng.random();
                let idx = cumulative.iter().position(|&c| u < c).unwrap_or(branches.len() - 1);
                branches[idx].sample(rng)
            }
            Sampler::LogNormal(d) => d.sample(rng),
        }
    }

    /// `F^c(w) = P{S > w}`; equals 1 at `w = 0` for every supported kind.
    pub fn tail(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 1.0;
        }
        match &self.params {
            DistParams::Exponential { rate } => (-rate * w).exp(),
            DistParams::Deterministic { value } => {
                if w < *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistParams::Pareto { alpha, scale } => {
                if w < *scale {
                    1.0
                } else {
                    (scale / w).powf(*alpha)
                }
            }
            DistParams::Uniform { low, high } => {
                if w < *low {
                    1.0
                } else if w < *high {
                    (high - w) / (high - low)
                } else {
                    0.0
                }
            }
            DistParams::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p * (-r * w).exp()).sum()
            }
            DistParams::Lognormal { mu, sigma } => {
                if w == 0.0 {
                    1.0
                } else {
                    0.5 * erfc((w.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
        }
    }

    /// `Phi^c(w) = int_w^inf F^c`. Closed form where one exists, quadrature
    /// otherwise.
    pub fn residual_tail(&self, w: f64) -> Result<f64, DistError> {
        let w = w.max(0.0);
        let v = match &self.params {
            DistParams::Exponential { rate } => (-rate * w).exp() / rate,
            DistParams::Deterministic { value } => (value - w).max(0.0),
            DistParams::Pareto { alpha, scale } => {
                let tail_part = |x: f64| scale.powf(*alpha) * x.powf(1.0 - alpha) / (alpha - 1.0);
                if w < *scale {
                    (scale - w) + tail_part(*scale)
                } else {
                    tail_part(w)
                }
            }
            DistParams::Uniform { low, high } => {
                if w < *low {
                    (low - w) + 0.5 * (high - low)
                } else if w < *high {
                    (high - w).powi(2) / (2.0 * (high - low))
                } else {
                    0.0
                }
            }
            DistParams::Hyperexponential { probs, rates } => {
                probs.iter().zip(rates).map(|(p, r)| p * (-r * w).exp() / r).sum()
            }
            DistParams::Lognormal { .. } => return self.residual_tail_quadrature(w),
        };
        Ok(v)
    }

    /// `Phi^c(w)` by adaptive Simpson on `[w, w_max]`, with an analytic
    /// remainder beyond `w_max` for Pareto laws.
    pub fn residual_tail_quadrature(&self, w: f64) -> Result<f64, DistError> {
        let w = w.max(0.0);
        let (upper, remainder) = self.quadrature_cutoff(w);
        let body = integrate_piecewise(|x| self.tail(x), w, upper, &self.breakpoints(), RESIDUAL_TOL * 0.5)?;
        Ok(body + remainder)
    }

    /// `int_a^b F^c` by quadrature.
    pub fn integrate_tail(&self, a: f64, b: f64) -> Result<f64, DistError> {
        let a = a.max(0.0);
        if b <= a {
            return Ok(0.0);
        }
        let (cut, remainder) = self.quadrature_cutoff(a);
        if b > cut {
            // Beyond the cutoff the integrand is below the tolerance floor.
            let body = integrate_piecewise(|x| self.tail(x), a, cut, &self.breakpoints(), RESIDUAL_TOL * 0.5)?;
            let rest = match self.params {
                DistParams::Pareto { .. } => remainder - self.pareto_remainder(b),
                _ => 0.0,
            };
            return Ok(body + rest);
        }
        Ok(integrate_piecewise(|x| self.tail(x), a, b, &self.breakpoints(), RESIDUAL_TOL * 0.5)?)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.params {
            DistParams::Deterministic { value } => vec![*value],
            DistParams::Pareto { scale, .. } => vec![*scale],
            DistParams::Uniform { low, high } => vec![*low, *high],
            _ => Vec::new(),
        }
    }

    fn pareto_remainder(&self, x: f64) -> f64 {
        match self.params {
            DistParams::Pareto { alpha, scale } => {
                let x = x.max(scale);
                scale.powf(alpha) * x.powf(1.0 - alpha) / (alpha - 1.0)
            }
            _ => 0.0,
        }
    }

    /// Upper integration limit and the analytic mass beyond it.
    fn quadrature_cutoff(&self, w: f64) -> (f64, f64) {
        match &self.params {
            DistParams::Deterministic { value } => (value.max(w), 0.0),
            DistParams::Uniform { high, .. } => (high.max(w), 0.0),
            DistParams::Pareto { scale, .. } => {
                let cut = 1e3 * scale.max(w);
                (cut, self.pareto_remainder(cut))
            }
            _ => {
                let mut cut = self.mean.max(w).max(1e-12);
                while self.tail(cut) > 1e-13 {
                    cut *= 2.0;
                }
                (cut, 0.0)
            }
        }
    }
}

/// Arrival stream of the n-server system at per-server rate `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalProcess {
    /// Poisson with total rate `lambda * n`.
    Poisson { lambda: f64 },
    /// Renewal with interarrival `A / n`, where `base` is the law of `A`
    /// (mean `1 / lambda`).
    Renewal { lambda: f64, base: ServiceDistribution },
}

impl ArrivalProcess {
    pub fn poisson(lambda: f64) -> Result<Self, DistError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(DistError::InvalidParameter {
                kind: DistKind::Exponential,
                param: "lambda",
                reason: "must be finite and >= 0".into(),
            });
        }
        Ok(ArrivalProcess::Poisson { lambda })
    }

    /// Renewal arrivals whose law of `A` is `shape` rescaled to mean `1 / lambda`.
    pub fn renewal(lambda: f64, shape: &ServiceDistribution) -> Result<Self, DistError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(DistError::InvalidParameter {
                kind: shape.kind(),
                param: "lambda",
                reason: "renewal arrivals need lambda > 0".into(),
            });
        }
        let base = shape.scaled(1.0 / (lambda * shape.mean()));
        Ok(ArrivalProcess::Renewal { lambda, base })
    }

    pub fn lambda(&self) -> f64 {
        match self {
            ArrivalProcess::Poisson { lambda } | ArrivalProcess::Renewal { lambda, .. } => *lambda,
        }
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self, ArrivalProcess::Poisson { .. })
    }

    /// Next interarrival time in a system with `n` servers; `None` when the
    /// stream is empty (`lambda = 0`).
    pub fn next_interarrival<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<f64> {
        match self {
            ArrivalProcess::Poisson { lambda } => {
                if *lambda == 0.0 {
                    return None;
                }
                let rate = lambda * n as f64;
                let u: f64 = rng.random();
                Some(-(1.0 - u).ln() / rate)
            }
            ArrivalProcess::Renewal { base, .. } => Some(base.sample(rng) / n as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_normalized() -> Vec<ServiceDistribution> {
        vec![
            ServiceDistribution::new(DistParams::Exponential { rate: 2.0 }, true).unwrap(),
            ServiceDistribution::new(DistParams::Deterministic { value: 3.0 }, true).unwrap(),
            ServiceDistribution::new(DistParams::Pareto { alpha: 1.5, scale: 1.0 }, true).unwrap(),
            ServiceDistribution::new(DistParams::Pareto { alpha: 2.5, scale: 1.0 }, true).unwrap(),
            ServiceDistribution::new(DistParams::Uniform { low: 0.5, high: 4.0 }, true).unwrap(),
            ServiceDistribution::new(
                DistParams::Hyperexponential { probs: vec![0.3, 0.7], rates: vec![0.2, 5.0] },
                true,
            )
            .unwrap(),
            ServiceDistribution::new(DistParams::Lognormal { mu: 0.3, sigma: 1.2 }, true).unwrap(),
        ]
    }

    #[test]
    fn exponential_rate_one_is_untouched() {
        let d = ServiceDistribution::new(DistParams::Exponential { rate: 1.0 }, true).unwrap();
        assert_eq!(d.params(), &DistParams::Exponential { rate: 1.0 });
        assert_eq!(d.mean(), 1.0);
        assert_eq!(d.tail(0.0), 1.0);
    }

    #[test]
    fn deterministic_normalizes_to_one() {
        let d = ServiceDistribution::new(DistParams::Deterministic { value: 3.0 }, true).unwrap();
        assert_eq!(d.params(), &DistParams::Deterministic { value: 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| d.sample(&mut rng) == 1.0));
        assert_eq!(d.tail(2.0), 0.0);
        assert_eq!(d.residual_tail(0.5).unwrap(), 0.5);
    }

    #[test]
    fn pareto_scale_after_normalization() {
        // alpha * x_m / (alpha - 1) = 1  =>  x_m = (alpha - 1) / alpha = 1/3
        let d = ServiceDistribution::pareto(1.5).unwrap();
        match d.params() {
            DistParams::Pareto { scale, .. } => assert!((scale - 1.0 / 3.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!((d.tail(1.0) - 0.192_450_089_729_875_25).abs() < 1e-12);
    }

    #[test]
    fn pareto_survival_matches_empirical_frequency() {
        let d = ServiceDistribution::pareto(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let above = (0..n).filter(|_| d.sample(&mut rng) > 1.0).count() as f64 / n as f64;
        // binomial sd ~ 3.9e-4
        assert!((above - 0.19245).abs() < 2e-3, "{above}");
    }

    #[test]
    fn pareto_median_of_means_near_one() {
        let d = ServiceDistribution::pareto(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let groups = 25;
        let per = 40_000;
        let mut means: Vec<f64> = (0..groups)
            .map(|_| (0..per).map(|_| d.sample(&mut rng)).sum::<f64>() / per as f64)
            .collect();
        means.sort_by(f64::total_cmp);
        let med = means[groups / 2];
        assert!((0.97..=1.03).contains(&med), "median of means {med}");
    }

    #[test]
    fn exponential_sample_mean() {
        let d = ServiceDistribution::exponential();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let m = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.005, "{m}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ServiceDistribution::new(DistParams::Pareto { alpha: 1.0, scale: 1.0 }, true).is_err());
        assert!(ServiceDistribution::new(DistParams::Pareto { alpha: 0.5, scale: 1.0 }, true).is_err());
        assert!(ServiceDistribution::new(DistParams::Exponential { rate: -1.0 }, true).is_err());
        assert!(ServiceDistribution::new(DistParams::Uniform { low: 2.0, high: 1.0 }, true).is_err());
        assert!(ServiceDistribution::new(
            DistParams::Hyperexponential { probs: vec![0.5, 0.4], rates: vec![1.0, 2.0] },
            true
        )
        .is_err());
    }

    #[test]
    fn raw_params_reject_unknown_keys() {
        let mut raw = RawParams::new();
        raw.insert("shape".into(), ParamValue::Number(2.0));
        assert!(matches!(
            DistParams::from_raw(DistKind::Pareto, &raw),
            Err(DistError::UnknownParameter { .. })
        ));
        raw.clear();
        raw.insert("alpha".into(), ParamValue::Number(2.0));
        assert_eq!(
            DistParams::from_raw(DistKind::Pareto, &raw).unwrap(),
            DistParams::Pareto { alpha: 2.0, scale: 1.0 }
        );
    }

    #[test]
    fn residual_tail_at_zero_is_one() {
        for d in all_normalized() {
            let v = d.residual_tail(0.0).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "{}: {v}", d.label());
            let q = d.residual_tail_quadrature(0.0).unwrap();
            assert!((q - 1.0).abs() < 1e-7, "{} quadrature: {q}", d.label());
        }
    }

    #[test]
    fn exponential_residual_tail_at_one() {
        let d = ServiceDistribution::exponential();
        let q = d.residual_tail_quadrature(1.0).unwrap();
        assert!((q - 0.367_879_441_171_442_3).abs() < 1e-8);
        assert!((d.residual_tail(1.0).unwrap() - q).abs() < 1e-8);
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for d in all_normalized() {
            if d.kind() == DistKind::Lognormal {
                continue;
            }
            for i in 0..100 {
                let w = 0.07 * i as f64;
                let closed = d.residual_tail(w).unwrap();
                let quad = d.residual_tail_quadrature(w).unwrap();
                assert!((closed - quad).abs() < 1e-6, "{} w={w}: {closed} vs {quad}", d.label());
            }
        }
    }

    #[test]
    fn derivative_of_residual_tail_is_tail() {
        let h = 1e-5;
        for d in all_normalized() {
            for i in 1..60 {
                let w = 0.1 * i as f64 + 0.013;
                // skip points adjacent to jumps of F^c
                if d.breakpoints().iter().any(|b| (b - w).abs() < 2.0 * h) {
                    continue;
                }
                let deriv = -(d.residual_tail(w + h).unwrap() - d.residual_tail(w - h).unwrap()) / (2.0 * h);
                let tol = if d.kind() == DistKind::Lognormal { 1e-3 } else { 1e-4 };
                assert!((deriv - d.tail(w)).abs() < tol, "{} w={w}: {deriv} vs {}", d.label(), d.tail(w));
            }
        }
    }

    #[test]
    fn renewal_base_has_requested_mean() {
        let shape = ServiceDistribution::new(DistParams::Uniform { low: 0.0, high: 2.0 }, true).unwrap();
        let a = ArrivalProcess::renewal(0.4, &shape).unwrap();
        match &a {
            ArrivalProcess::Renewal { base, .. } => {
                assert!((base.mean() - 2.5).abs() < 1e-12);
                assert_eq!(base.params(), &DistParams::Uniform { low: 0.0, high: 5.0 });
            }
            _ => unreachable!(),
        }
        assert!(ArrivalProcess::renewal(0.0, &shape).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(ArrivalProcess::poisson(0.0).unwrap().next_interarrival(10, &mut rng), None);
    }

    proptest! {
        #[test]
        fn tails_are_monotone(w1 in 0.0f64..20.0, dw in 0.0f64..20.0, idx in 0usize..7) {
            let d = &all_normalized()[idx];
            let w2 = w1 + dw;
            prop_assert!(d.tail(w2) <= d.tail(w1));
            prop_assert!((0.0..=1.0).contains(&d.tail(w1)));
            let (r1, r2) = (d.residual_tail(w1).unwrap(), d.residual_tail(w2).unwrap());
            prop_assert!(r2 <= r1 + 1e-9);
            prop_assert!(r1 <= 1.0 + 1e-8 && r2 >= 0.0);
        }
    }
}
